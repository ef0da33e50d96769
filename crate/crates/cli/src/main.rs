//! `semshift` command-line front end.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::ScoreOt(a) => commands::score_ot(&a),
        Command::ScoreBaseline(a) => commands::score_baseline(&a),
        Command::Gold(a) => commands::gold(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::LayerSweep(a) => commands::layer_sweep(&a),
        Command::NormReport(a) => commands::norm_report(&a),
        Command::Convert(a) => commands::convert(&a),
    }
}
