//! Transport scores for many words, and correlation with gold per layer
//! strategy.

use rayon::prelude::*;
use serde::Serialize;

use super::{spearman, Direction, EvalError, RankedList, Result, MIN_OVERLAP};
use crate::gold::GoldTable;
use crate::ot::{ot_change_score, SolverConfig};
use crate::repr::{LayerStrategy, OccurrenceStore};

/// Every single layer of a 12-layer model plus four upper-layer averages.
pub fn default_sweep_strategies() -> Vec<LayerStrategy> {
    let mut out: Vec<LayerStrategy> = (0..=12).map(LayerStrategy::Single).collect();
    for (lo, hi) in [(8, 12), (9, 12), (8, 11), (9, 11)] {
        out.push(LayerStrategy::AvgPool { lo, hi });
    }
    out
}

/// Transport change score of each word between `source` and `target`, in
/// the order of `words`. Words are scored in parallel.
pub fn ot_scores(
    store: &OccurrenceStore,
    words: &[String],
    source: &str,
    target: &str,
    strategy: LayerStrategy,
    solver: &SolverConfig,
) -> Result<Vec<(String, f64)>> {
    words
        .par_iter()
        .map(|word| {
            for period in [source, target] {
                if store.occurrences(word, period).is_empty() {
                    return Err(EvalError::MissingPeriod {
                        word: word.clone(),
                        period: period.to_string(),
                    });
                }
            }
            let src = store.usage_set(word, source, strategy)?;
            let dst = store.usage_set(word, target, strategy)?;
            let score =
                ot_change_score(&src, &dst, solver).map_err(|source| EvalError::Scoring {
                    word: word.clone(),
                    source,
                })?;
            Ok((word.clone(), score))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: LayerStrategy,
    pub spearman: f64,
    pub n_words: usize,
}

/// Scores every gold word found in `store` under each strategy and
/// correlates the scores with gold. Rows follow the order of `strategies`.
pub fn layer_sweep(
    store: &OccurrenceStore,
    gold: &GoldTable,
    strategies: &[LayerStrategy],
    solver: &SolverConfig,
    source: &str,
    target: &str,
) -> Result<Vec<SweepRow>> {
    let in_store: std::collections::HashSet<&str> = store.words().collect();
    let words: Vec<String> = gold
        .words()
        .filter(|w| in_store.contains(w))
        .map(str::to_string)
        .collect();
    if words.len() < MIN_OVERLAP {
        return Err(EvalError::InsufficientOverlap {
            shared: words.len(),
            needed: MIN_OVERLAP,
        });
    }
    let gold_list = RankedList::from_gold(gold);
    strategies
        .par_iter()
        .map(|&strategy| {
            let scores = ot_scores(store, &words, source, target, strategy, solver)?;
            let list = RankedList::new(scores, Direction::HigherIsMoreChange)?;
            let r = spearman(&list, &gold_list)?;
            Ok(SweepRow {
                strategy,
                spearman: r.rho,
                n_words: r.n_words,
            })
        })
        .collect()
}
