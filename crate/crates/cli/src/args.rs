use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semshift::ot::SolverConfig;
use semshift::repr::LayerStrategy;

#[derive(Debug, Parser)]
#[command(name = "semshift", version, about = "Score and evaluate lexical semantic change between two periods")]
pub struct Cli {
    /// Worker threads for per-word scoring (default: available processors).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal-transport change score per word from contextual embeddings.
    ScoreOt(ScoreOtArgs),
    /// Change scores from one of the comparison systems.
    ScoreBaseline(ScoreBaselineArgs),
    /// Aggregate sentence-pair annotations into per-word gold scores.
    Gold(GoldArgs),
    /// Spearman correlation of a score file with gold scores.
    Evaluate(EvaluateArgs),
    /// Correlation with gold for a series of layer strategies.
    LayerSweep(LayerSweepArgs),
    /// Per-layer statistics of occurrence-vector norms.
    NormReport(NormReportArgs),
    /// Rewrite an occurrence-embedding file in the text or binary encoding.
    Convert(ConvertArgs),
}

/// Clap value parser that requires the path to exist.
fn existing_path(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.exists() {
        Ok(p)
    } else {
        Err(format!("{s} does not exist"))
    }
}

fn parse_avgpool(s: &str) -> Result<LayerStrategy, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo = lo.trim().parse().map_err(|_| format!("bad lower layer {lo:?}"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad upper layer {hi:?}"))?;
    LayerStrategy::avg_pool(lo, hi).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct EmbeddingInput {
    /// Occurrence-embedding file (JSON lines or binary, detected automatically).
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub embeddings: PathBuf,

    /// Period to score from (default: the lexicographically first of exactly two periods).
    #[arg(long, value_name = "PERIOD")]
    pub source: Option<String>,

    /// Period to score to (default: the lexicographically second of exactly two periods).
    #[arg(long, value_name = "PERIOD")]
    pub target: Option<String>,

    /// File with one target word per line (default: every word in the input).
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub targets: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LayerArgs {
    /// Use a single hidden layer, 0 being the embedding layer (default: second to last).
    #[arg(long, value_name = "N", conflicts_with = "avgpool")]
    pub layer: Option<usize>,

    /// Average the layers LO..=HI.
    #[arg(long, value_name = "LO:HI", value_parser = parse_avgpool)]
    pub avgpool: Option<LayerStrategy>,
}

impl LayerArgs {
    pub fn strategy(&self) -> Option<LayerStrategy> {
        self.layer.map(LayerStrategy::Single).or(self.avgpool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Transport solver.
    #[arg(long, value_enum, default_value = "exact")]
    pub solver: SolverKind,

    /// Entropic regularization for the Sinkhorn solver.
    #[arg(long, value_name = "F", default_value_t = 0.01)]
    pub reg: f64,

    /// Iteration cap for the Sinkhorn solver.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    pub max_iter: usize,

    /// Marginal tolerance for the Sinkhorn solver.
    #[arg(long, value_name = "F", default_value_t = 1e-9)]
    pub tol: f64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        match self.solver {
            SolverKind::Exact => SolverConfig::Exact,
            SolverKind::Sinkhorn => SolverConfig::Sinkhorn {
                reg: self.reg,
                max_iter: self.max_iter,
                tol: self.tol,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreOtArgs {
    #[command(flatten)]
    pub input: EmbeddingInput,

    #[command(flatten)]
    pub layer: LayerArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Output score TSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    /// Jensen-Shannon divergence between k-means cluster histograms.
    ClusterJsd,
    /// Wasserstein distance between k-means cluster histograms.
    ClusterWd,
    /// Cosine distance after orthogonal Procrustes alignment of static embeddings.
    SgnsOpCd,
    /// One minus the shared fraction of nearest neighbours in static embeddings.
    NnOverlap,
}

#[derive(Debug, Args)]
pub struct ScoreBaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,

    /// Occurrence-embedding file, for the cluster methods.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub embeddings: Option<PathBuf>,

    /// Source period, for the cluster methods.
    #[arg(long, value_name = "PERIOD")]
    pub source: Option<String>,

    /// Target period, for the cluster methods.
    #[arg(long, value_name = "PERIOD")]
    pub target: Option<String>,

    /// Static embeddings of the source period (word2vec text format).
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub static_a: Option<PathBuf>,

    /// Static embeddings of the target period (word2vec text format).
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub static_b: Option<PathBuf>,

    /// File with one target word per line.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub targets: Option<PathBuf>,

    #[command(flatten)]
    pub layer: LayerArgs,

    /// Number of clusters.
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub k: usize,

    /// Random seed; required by the cluster methods.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// k-means restarts; the lowest-inertia run is kept.
    #[arg(long, value_name = "N", default_value_t = 10)]
    pub restarts: usize,

    /// Scale occurrence vectors to unit length before clustering.
    #[arg(long)]
    pub normalize: bool,

    /// Neighbourhood size for nn-overlap.
    #[arg(long, value_name = "N", default_value_t = 100)]
    pub neighbors: usize,

    /// Output score TSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GoldArgs {
    /// Annotation TSV: word, year_old, sentence_old, year_new, sentence_new, then score columns.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub annotations: PathBuf,

    /// Output gold TSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output agreement JSON (default: standard output when --out is given, otherwise omitted).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score TSV, larger meaning more change.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub scores: PathBuf,

    /// Gold TSV as written by the `gold` subcommand.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub gold: PathBuf,

    /// Score TSV of a baseline, for the error-reduction rate.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub baseline_scores: Option<PathBuf>,

    /// System name for the report (default: the score file's stem).
    #[arg(long)]
    pub system: Option<String>,

    /// Output JSON report (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayerSweepArgs {
    #[command(flatten)]
    pub input: EmbeddingInput,

    /// Gold TSV as written by the `gold` subcommand.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub gold: PathBuf,

    /// Comma-separated strategies such as `layer4,avgpool9-12` (default: layers 0-12 and four upper averages).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub strategies: Option<Vec<LayerStrategy>>,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Output TSV of strategy, spearman, n_words (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output JSON report.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormReportArgs {
    /// Occurrence-embedding file.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub embeddings: PathBuf,

    /// Restrict to one period.
    #[arg(long, value_name = "PERIOD")]
    pub period: Option<String>,

    /// Output TSV (default: standard output).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Occurrence-embedding file in either encoding.
    #[arg(long, value_name = "PATH", value_parser = existing_path)]
    pub embeddings: PathBuf,

    /// Write the binary encoding instead of JSON lines.
    #[arg(long)]
    pub binary_format: bool,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}
