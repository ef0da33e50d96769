use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use semshift::baselines::{
    cluster_change_score, read_word2vec_text, AlignedTables, ChangeMeasure, ClusterConfig, NeighborIndex,
    StaticEmbeddingTable,
};
use semshift::eval::{
    self, default_sweep_strategies, error_reduction, spearman, Direction, EvalReport, RankedList, ReportTable,
};
use semshift::gold::{self, AgreementReport, AlphaMetric, GoldTable, KappaWeights, PairwiseKappa};
use semshift::repr::{
    layer_norm_stats, read_occurrence_file, write_occurrence_file, FileFormat, LayerStrategy, OccurrenceStore,
};

use crate::args::{
    BaselineMethod, ConvertArgs, EmbeddingInput, EvaluateArgs, GoldArgs, LayerArgs, LayerSweepArgs, NormReportArgs,
    ScoreBaselineArgs, ScoreOtArgs,
};

/// Writes `content` to `path`, or to standard output without one.
fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn load_store(path: &Path) -> Result<OccurrenceStore> {
    let occs = read_occurrence_file(path).with_context(|| format!("reading {}", path.display()))?;
    if occs.is_empty() {
        bail!("no occurrences in {}", path.display());
    }
    Ok(OccurrenceStore::new(occs)?)
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut words: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    words.sort();
    words.dedup();
    if words.is_empty() {
        bail!("no words in {}", path.display());
    }
    Ok(words)
}

/// Source and target periods: explicit flags, or the two periods of the
/// store in lexicographic order.
fn resolve_periods(store: &OccurrenceStore, source: Option<&str>, target: Option<&str>) -> Result<(String, String)> {
    let periods = store.periods();
    let pick = |given: Option<&str>, idx: usize| -> Result<String> {
        match given {
            Some(p) if periods.iter().any(|q| q == p) => Ok(p.to_string()),
            Some(p) => bail!("period {p:?} not found; the input has {periods:?}"),
            None if periods.len() == 2 => Ok(periods[idx].clone()),
            None => bail!(
                "the input has {} period(s) {periods:?}; pass --source and --target",
                periods.len()
            ),
        }
    };
    let (s, t) = (pick(source, 0)?, pick(target, 1)?);
    if s == t {
        bail!("source and target period are both {s:?}");
    }
    Ok((s, t))
}

/// Target words, checking that each occurs in both periods.
fn resolve_words(store: &OccurrenceStore, targets: Option<&PathBuf>, source: &str, target: &str) -> Result<Vec<String>> {
    let words = match targets {
        Some(p) => read_word_list(p)?,
        None => store.words().map(str::to_string).collect(),
    };
    for w in &words {
        for period in [source, target] {
            if store.occurrences(w, period).is_empty() {
                bail!("word {w:?} has no occurrences in period {period:?}");
            }
        }
    }
    Ok(words)
}

fn resolve_strategy(store: &OccurrenceStore, layer: &LayerArgs) -> Result<LayerStrategy> {
    let depth = store.min_depth().ok_or_else(|| anyhow!("no occurrences"))?;
    let strategy = layer.strategy().unwrap_or_else(|| LayerStrategy::default_for_depth(depth));
    strategy.validate(depth)?;
    log::info!("using layer strategy {strategy}");
    Ok(strategy)
}

fn scores_tsv(entries: Vec<(String, f64)>, direction: Direction) -> Result<String> {
    let list = RankedList::new(entries, direction)?;
    let mut buf = Vec::new();
    eval::write_scores_to(&list, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

pub fn score_ot(args: &ScoreOtArgs) -> Result<()> {
    let EmbeddingInput {
        embeddings,
        source,
        target,
        targets,
    } = &args.input;
    let store = load_store(embeddings)?;
    let (source, target) = resolve_periods(&store, source.as_deref(), target.as_deref())?;
    let words = resolve_words(&store, targets.as_ref(), &source, &target)?;
    let strategy = resolve_strategy(&store, &args.layer)?;
    let scores = eval::ot_scores(&store, &words, &source, &target, strategy, &args.solver.config())?;
    emit(args.out.as_deref(), &scores_tsv(scores, Direction::HigherIsMoreChange)?)
}

fn load_static(path: Option<&PathBuf>, flag: &str) -> Result<StaticEmbeddingTable> {
    let path = path.ok_or_else(|| anyhow!("this method needs {flag}"))?;
    read_word2vec_text(path).with_context(|| format!("reading {}", path.display()))
}

pub fn score_baseline(args: &ScoreBaselineArgs) -> Result<()> {
    let scores = match args.method {
        BaselineMethod::ClusterJsd | BaselineMethod::ClusterWd => cluster_scores(args)?,
        BaselineMethod::SgnsOpCd | BaselineMethod::NnOverlap => static_scores(args)?,
    };
    emit(args.out.as_deref(), &scores_tsv(scores, Direction::HigherIsMoreChange)?)
}

fn cluster_scores(args: &ScoreBaselineArgs) -> Result<Vec<(String, f64)>> {
    let seed = args.seed.ok_or_else(|| anyhow!("cluster methods need --seed"))?;
    let path = args
        .embeddings
        .as_ref()
        .ok_or_else(|| anyhow!("cluster methods need --embeddings"))?;
    let store = load_store(path)?;
    let (source, target) = resolve_periods(&store, args.source.as_deref(), args.target.as_deref())?;
    let words = resolve_words(&store, args.targets.as_ref(), &source, &target)?;
    let strategy = resolve_strategy(&store, &args.layer)?;
    let mut config = ClusterConfig::new(args.k, seed);
    config.kmeans.restarts = args.restarts;
    config.normalize_vectors = args.normalize;
    let measure = if args.method == BaselineMethod::ClusterJsd {
        ChangeMeasure::Jsd
    } else {
        ChangeMeasure::Wd
    };
    words
        .par_iter()
        .map(|w| {
            let src = store.usage_set(w, &source, strategy)?;
            let dst = store.usage_set(w, &target, strategy)?;
            let score = cluster_change_score(&src, &dst, &config, measure).with_context(|| format!("word {w:?}"))?;
            Ok((w.clone(), score))
        })
        .collect()
}

fn static_scores(args: &ScoreBaselineArgs) -> Result<Vec<(String, f64)>> {
    let a = load_static(args.static_a.as_ref(), "--static-a")?;
    let b = load_static(args.static_b.as_ref(), "--static-b")?;
    let words = match &args.targets {
        Some(p) => read_word_list(p)?,
        None => a.shared_vocabulary(&b),
    };
    if words.is_empty() {
        bail!("the two static tables share no words");
    }
    match args.method {
        BaselineMethod::SgnsOpCd => {
            let anchors = a.shared_vocabulary(&b);
            let aligned = AlignedTables::fit(&a, &b, &anchors)?;
            if aligned.alignment().rank_deficient() {
                log::warn!("anchor cross-covariance is rank deficient; the alignment is not unique");
            }
            words
                .par_iter()
                .map(|w| Ok((w.clone(), aligned.score(w).with_context(|| format!("word {w:?}"))?)))
                .collect()
        }
        BaselineMethod::NnOverlap => {
            let ia = NeighborIndex::new(&a)?;
            let ib = NeighborIndex::new(&b)?;
            words
                .par_iter()
                .map(|w| {
                    let s = ia
                        .overlap_score(&ib, w, args.neighbors)
                        .with_context(|| format!("word {w:?}"))?;
                    Ok((w.clone(), s))
                })
                .collect()
        }
        _ => unreachable!("cluster methods are handled elsewhere"),
    }
}

#[derive(Serialize)]
struct GoldReport {
    words: usize,
    #[serde(flatten)]
    agreement: AgreementReport,
    alpha: BTreeMap<String, Option<f64>>,
    kappa: BTreeMap<String, Option<Vec<PairwiseKappa>>>,
}

pub fn gold(args: &GoldArgs) -> Result<()> {
    let records = gold::read_annotations(&args.annotations)
        .with_context(|| format!("reading {}", args.annotations.display()))?;
    let table = GoldTable::from_records(&records);
    let alpha = AlphaMetric::ALL
        .iter()
        .map(|&m| {
            let v = gold::krippendorff_alpha(&records, m)
                .map_err(|e| log::warn!("alpha ({m}): {e}"))
                .ok();
            (m.to_string(), v)
        })
        .collect();
    let kappa = KappaWeights::ALL
        .iter()
        .map(|&w| {
            let v = gold::pairwise_kappas(&records, w)
                .map_err(|e| log::warn!("kappa ({w}): {e}"))
                .ok();
            (w.to_string(), v)
        })
        .collect();
    let report = GoldReport {
        words: table.len(),
        agreement: gold::agreement_report(&records),
        alpha,
        kappa,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";

    let mut tsv = Vec::new();
    gold::write_gold_to(&table, &mut tsv)?;
    emit(args.out.as_deref(), std::str::from_utf8(&tsv)?)?;
    match (&args.report, &args.out) {
        (Some(p), _) => emit(Some(p), &json),
        (None, Some(_)) => emit(None, &json),
        (None, None) => Ok(()),
    }
}

#[derive(Serialize)]
struct EvaluateOutput {
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_reduction: Option<f64>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let gold_table = gold::read_gold_table(&args.gold).with_context(|| format!("reading {}", args.gold.display()))?;
    let gold_list = RankedList::from_gold(&gold_table);
    let scores = eval::read_scores(&args.scores, Direction::HigherIsMoreChange)
        .with_context(|| format!("reading {}", args.scores.display()))?;
    let result = spearman(&scores, &gold_list)?;
    let system = args.system.clone().unwrap_or_else(|| {
        args.scores
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "system".into())
    });
    let report = EvalReport::new(system, None, &result);

    let (baseline_spearman, reduction) = match &args.baseline_scores {
        Some(path) => {
            let base = eval::read_scores(path, Direction::HigherIsMoreChange)
                .with_context(|| format!("reading {}", path.display()))?;
            let base_rho = spearman(&base, &gold_list)?.rho;
            (Some(base_rho), Some(error_reduction(result.rho, base_rho)?))
        }
        None => (None, None),
    };
    let out = EvaluateOutput {
        report,
        baseline_spearman,
        error_reduction: reduction,
    };
    let json = serde_json::to_string_pretty(&out)? + "\n";
    emit(args.out.as_deref(), &json)?;
    if args.out.is_some() {
        print!("{}", ReportTable(std::slice::from_ref(&out.report)));
        if let (Some(b), Some(r)) = (baseline_spearman, reduction) {
            println!("baseline spearman {b:.4}, error reduction {:.1}%", r * 100.0);
        }
    }
    Ok(())
}

pub fn layer_sweep(args: &LayerSweepArgs) -> Result<()> {
    let store = load_store(&args.input.embeddings)?;
    let (source, target) = resolve_periods(&store, args.input.source.as_deref(), args.input.target.as_deref())?;
    let mut gold_table =
        gold::read_gold_table(&args.gold).with_context(|| format!("reading {}", args.gold.display()))?;
    if let Some(p) = &args.input.targets {
        let keep: std::collections::HashSet<String> = read_word_list(p)?.into_iter().collect();
        gold_table.retain(|w| keep.contains(w));
    }
    let strategies = args.strategies.clone().unwrap_or_else(default_sweep_strategies);
    let rows = eval::layer_sweep(&store, &gold_table, &strategies, &args.solver.config(), &source, &target)?;

    let reports: Vec<EvalReport> = rows
        .iter()
        .map(|r| EvalReport {
            system: "ot".into(),
            strategy: Some(r.strategy.to_string()),
            spearman: r.spearman,
            n_words: r.n_words,
            direction_normalized: true,
        })
        .collect();
    let mut tsv = String::from("strategy\tspearman\tn_words\n");
    for r in &rows {
        tsv.push_str(&format!("{}\t{}\t{}\n", r.strategy, r.spearman, r.n_words));
    }
    emit(args.out.as_deref(), &tsv)?;
    if let Some(p) = &args.report {
        emit(Some(p), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    }
    if args.out.is_some() {
        print!("{}", ReportTable(&reports));
    }
    Ok(())
}

pub fn norm_report(args: &NormReportArgs) -> Result<()> {
    let store = load_store(&args.embeddings)?;
    let stats = match &args.period {
        Some(p) => {
            if !store.periods().contains(p) {
                bail!("period {p:?} not found");
            }
            layer_norm_stats(store.iter().filter(|o| &o.period == p))?
        }
        None => layer_norm_stats(store.iter())?,
    };
    let mut tsv = String::from("layer\tcount\tmean\tmedian\tstd\n");
    for s in &stats {
        tsv.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", s.layer, s.count, s.mean, s.median, s.std));
    }
    emit(args.out.as_deref(), &tsv)
}

pub fn convert(args: &ConvertArgs) -> Result<()> {
    let occs = read_occurrence_file(&args.embeddings)
        .with_context(|| format!("reading {}", args.embeddings.display()))?;
    if occs.is_empty() {
        bail!("no occurrences in {}", args.embeddings.display());
    }
    let format = if args.binary_format {
        FileFormat::Binary
    } else {
        FileFormat::JsonLines
    };
    write_occurrence_file(&occs, &args.out, format).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
