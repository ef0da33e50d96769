//! Rank-based evaluation of change scores against gold rankings.
//!
//! Every list carries an explicit [`Direction`]. Gold COMPARE scores run
//! opposite to change scores (a high COMPARE means a stable word), so lists
//! are brought to a common orientation before ranks are compared.

mod io;
mod sweep;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::gold::GoldTable;
use crate::ot::OtError;
use crate::repr::ReprError;

pub use io::{parse_scores, read_scores, write_scores, write_scores_to};
pub use sweep::{default_sweep_strategies, layer_sweep, ot_scores, SweepRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("only {shared} words shared between the rankings; need at least {needed}")]
    InsufficientOverlap { shared: usize, needed: usize },

    #[error("error reduction is undefined when the baseline correlation is 1")]
    DivisionDomain,

    #[error("duplicate word {0:?} in ranking")]
    DuplicateWord(String),

    #[error("score for {word:?} is not finite: {score}")]
    NonFinite { word: String, score: f64 },

    #[error("ranks of one list are constant, correlation is undefined")]
    ConstantRanks,

    #[error("need at least two rankings to merge, got {0}")]
    TooFewLists(usize),

    #[error("word {word:?} has no occurrences in period {period:?}")]
    MissingPeriod { word: String, period: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("word {word:?}: {source}")]
    Scoring {
        word: String,
        #[source]
        source: OtError,
    },

    #[error(transparent)]
    Repr(#[from] ReprError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Minimum number of shared words for a rank correlation.
pub const MIN_OVERLAP: usize = 3;

/// How a list's scores relate to semantic change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger score, more change (transport cost, JSD, ...).
    HigherIsMoreChange,
    /// Larger score, less change (COMPARE, average rank).
    HigherIsLessChange,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::HigherIsMoreChange => 1.0,
            Direction::HigherIsLessChange => -1.0,
        }
    }
}

/// Scored words with a direction flag. Words are unique and scores finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    entries: Vec<(String, f64)>,
    direction: Direction,
}

impl RankedList {
    pub fn new(entries: Vec<(String, f64)>, direction: Direction) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (w, s) in &entries {
            if !s.is_finite() {
                return Err(EvalError::NonFinite {
                    word: w.clone(),
                    score: *s,
                });
            }
            if !seen.insert(w.as_str()) {
                return Err(EvalError::DuplicateWord(w.clone()));
            }
        }
        Ok(RankedList { entries, direction })
    }

    /// COMPARE scores, higher meaning less change.
    pub fn from_gold(gold: &GoldTable) -> Self {
        RankedList {
            entries: gold
                .iter()
                .map(|(w, e)| (w.to_string(), e.compare))
                .collect(),
            direction: Direction::HigherIsLessChange,
        }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered most changed first, ties by word.
    pub fn sorted_by_change(&self) -> Vec<(String, f64)> {
        let sign = self.direction.sign();
        let mut out = self.entries.clone();
        out.sort_by(|a, b| {
            (sign * b.1)
                .total_cmp(&(sign * a.1))
                .then_with(|| a.0.cmp(&b.0))
        });
        out
    }

    fn change_scores(&self) -> BTreeMap<&str, f64> {
        let sign = self.direction.sign();
        self.entries
            .iter()
            .map(|(w, s)| (w.as_str(), sign * s))
            .collect()
    }
}

/// Fractional ranks, 1 for the smallest value; tied values share the mean
/// of the positions they occupy.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ConstantRanks);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub n_words: usize,
    /// One of the two lists was reversed to match the other's direction.
    pub direction_normalized: bool,
}

/// Spearman's rho over the shared words: Pearson correlation of fractional
/// ranks after orienting both lists so that larger means more change.
pub fn spearman(a: &RankedList, b: &RankedList) -> Result<SpearmanResult> {
    let sa = a.change_scores();
    let sb = b.change_scores();
    let shared: Vec<&str> = sa.keys().copied().filter(|w| sb.contains_key(w)).collect();
    if shared.len() < MIN_OVERLAP {
        return Err(EvalError::InsufficientOverlap {
            shared: shared.len(),
            needed: MIN_OVERLAP,
        });
    }
    let xa: Vec<f64> = shared.iter().map(|w| sa[w]).collect();
    let xb: Vec<f64> = shared.iter().map(|w| sb[w]).collect();
    Ok(SpearmanResult {
        rho: pearson(&fractional_ranks(&xa), &fractional_ranks(&xb))?,
        n_words: shared.len(),
        direction_normalized: a.direction != b.direction,
    })
}

/// Share of the remaining gap to perfect correlation closed by `rho_new`:
/// `(rho_new - rho_base) / (1 - rho_base)`.
pub fn error_reduction(rho_new: f64, rho_base: f64) -> Result<f64> {
    if rho_base >= 1.0 {
        return Err(EvalError::DivisionDomain);
    }
    Ok((rho_new - rho_base) / (1.0 - rho_base))
}

/// Average fractional rank of each shared word across `lists`, rank 1
/// being the most changed word of a list. The result is ordered by
/// ascending average rank, ties by word, and is a
/// [`Direction::HigherIsLessChange`] list.
pub fn merge_average_rank(lists: &[RankedList]) -> Result<RankedList> {
    if lists.len() < 2 {
        return Err(EvalError::TooFewLists(lists.len()));
    }
    let maps: Vec<BTreeMap<&str, f64>> = lists.iter().map(RankedList::change_scores).collect();
    let shared: Vec<&str> = maps[0]
        .keys()
        .copied()
        .filter(|w| maps[1..].iter().all(|m| m.contains_key(w)))
        .collect();
    if shared.is_empty() {
        return Err(EvalError::InsufficientOverlap {
            shared: 0,
            needed: 1,
        });
    }
    let mut sums = vec![0.0; shared.len()];
    for m in &maps {
        let negated: Vec<f64> = shared.iter().map(|w| -m[w]).collect();
        for (s, r) in sums.iter_mut().zip(fractional_ranks(&negated)) {
            *s += r;
        }
    }
    let k = lists.len() as f64;
    let mut entries: Vec<(String, f64)> = shared
        .iter()
        .zip(sums)
        .map(|(w, s)| (w.to_string(), s / k))
        .collect();
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    RankedList::new(entries, Direction::HigherIsLessChange)
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub system: String,
    pub strategy: Option<String>,
    pub spearman: f64,
    pub n_words: usize,
    pub direction_normalized: bool,
}

impl EvalReport {
    pub fn new(
        system: impl Into<String>,
        strategy: Option<String>,
        result: &SpearmanResult,
    ) -> Self {
        EvalReport {
            system: system.into(),
            strategy,
            spearman: result.rho,
            n_words: result.n_words,
            direction_normalized: result.direction_normalized,
        }
    }
}

/// Fixed-width table of reports for terminal output.
pub struct ReportTable<'a>(pub &'a [EvalReport]);

impl fmt::Display for ReportTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sys_w = self
            .0
            .iter()
            .map(|r| r.system.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let strat_w = self
            .0
            .iter()
            .map(|r| r.strategy.as_deref().map_or(1, str::len))
            .max()
            .unwrap_or(0)
            .max(8);
        writeln!(
            f,
            "{:<sys_w$}  {:<strat_w$}  {:>8}  {:>7}",
            "system", "strategy", "spearman", "n_words"
        )?;
        for r in self.0 {
            writeln!(
                f,
                "{:<sys_w$}  {:<strat_w$}  {:>8.4}  {:>7}",
                r.system,
                r.strategy.as_deref().unwrap_or("-"),
                r.spearman,
                r.n_words
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn list(pairs: &[(&str, f64)], direction: Direction) -> RankedList {
        RankedList::new(
            pairs.iter().map(|(w, s)| (w.to_string(), *s)).collect(),
            direction,
        )
        .unwrap()
    }

    fn up(pairs: &[(&str, f64)]) -> RankedList {
        list(pairs, Direction::HigherIsMoreChange)
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            fractional_ranks(&[1.0, 2.0, 2.0, 4.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(fractional_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(fractional_ranks(&[5.0, -1.0, 0.0]), vec![3.0, 1.0, 2.0]);
        assert!(fractional_ranks(&[]).is_empty());
    }

    #[test]
    fn spearman_identity_and_reversal() {
        let a = up(&[("a", 0.1), ("b", 0.5), ("c", 0.3), ("d", 0.9)]);
        assert_eq!(spearman(&a, &a).unwrap().rho, 1.0);
        let rev = up(&[("a", 0.9), ("b", 0.3), ("c", 0.5), ("d", 0.1)]);
        assert_eq!(spearman(&a, &rev).unwrap().rho, -1.0);
    }

    #[test]
    fn spearman_with_ties_hand_computed() {
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): centred (-1.5, 0, 0, 1.5)
        // and (-1.5, -0.5, 0.5, 1.5); sxy = 4.5, sxx = 4.5, syy = 5,
        // rho = 4.5 / sqrt(22.5) = sqrt(0.9)
        let a = up(&[("w", 1.0), ("x", 2.0), ("y", 2.0), ("z", 4.0)]);
        let b = up(&[("w", 1.0), ("x", 2.0), ("y", 3.0), ("z", 4.0)]);
        assert_abs_diff_eq!(
            spearman(&a, &b).unwrap().rho,
            0.9f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn spearman_direction_normalization() {
        let change = up(&[("a", 0.9), ("b", 0.5), ("c", 0.1)]);
        let compare = list(
            &[("a", 1.2), ("b", 2.5), ("c", 3.9)],
            Direction::HigherIsLessChange,
        );
        let r = spearman(&change, &compare).unwrap();
        assert_eq!(r.rho, 1.0);
        assert!(r.direction_normalized);
        assert!(!spearman(&change, &change).unwrap().direction_normalized);
    }

    #[test]
    fn spearman_intersects_words() {
        let a = up(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("only_a", 9.0)]);
        let b = up(&[("c", 30.0), ("b", 20.0), ("a", 10.0), ("only_b", 0.0)]);
        let r = spearman(&a, &b).unwrap();
        assert_eq!((r.rho, r.n_words), (1.0, 3));
    }

    #[test]
    fn spearman_errors() {
        let a = up(&[("a", 1.0), ("b", 2.0)]);
        assert!(matches!(
            spearman(&a, &a),
            Err(EvalError::InsufficientOverlap {
                shared: 2,
                needed: 3
            })
        ));
        let flat = up(&[("a", 1.0), ("b", 1.0), ("c", 1.0)]);
        let slope = up(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        assert!(matches!(
            spearman(&flat, &slope),
            Err(EvalError::ConstantRanks)
        ));
    }

    #[test]
    fn list_validation() {
        assert!(matches!(
            RankedList::new(
                vec![("a".into(), 1.0), ("a".into(), 2.0)],
                Direction::HigherIsMoreChange
            ),
            Err(EvalError::DuplicateWord(_))
        ));
        assert!(matches!(
            RankedList::new(vec![("a".into(), f64::NAN)], Direction::HigherIsMoreChange),
            Err(EvalError::NonFinite { .. })
        ));
    }

    #[test]
    fn error_reduction_examples() {
        assert_abs_diff_eq!(
            error_reduction(0.635, 0.527).unwrap(),
            0.228,
            epsilon = 5e-4
        );
        assert_eq!(error_reduction(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(error_reduction(1.0, 0.3).unwrap(), 1.0);
        assert!(matches!(
            error_reduction(0.5, 1.0),
            Err(EvalError::DivisionDomain)
        ));
    }

    #[test]
    fn merge_average_of_published_ranks() {
        // three lists over the same vocabulary placing "t" at 8, 14849, 880
        let n = 15_000usize;
        let others: Vec<String> = (0..n - 1).map(|i| format!("w{i:05}")).collect();
        let mk = |pos: usize| {
            let mut words = others.clone();
            words.insert(pos - 1, "t".to_string());
            let entries = words
                .into_iter()
                .enumerate()
                .map(|(i, w)| (w, -(i as f64)))
                .collect();
            RankedList::new(entries, Direction::HigherIsMoreChange).unwrap()
        };
        let merged = merge_average_rank(&[mk(8), mk(14849), mk(880)]).unwrap();
        let t = merged.entries().iter().find(|(w, _)| w == "t").unwrap().1;
        assert_abs_diff_eq!(t, 5245.67, epsilon = 5e-3);
        assert_eq!(t, (8.0 + 14849.0 + 880.0) / 3.0);
    }

    #[test]
    fn merge_identical_and_opposite() {
        let a = up(&[("d", 0.9), ("b", 0.7), ("c", 0.4), ("a", 0.1)]);
        let merged = merge_average_rank(&[a.clone(), a.clone()]).unwrap();
        let order: Vec<&str> = merged.entries().iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(order, vec!["d", "b", "c", "a"]);

        let rev = up(&[("d", 0.1), ("b", 0.4), ("c", 0.7), ("a", 0.9)]);
        let merged = merge_average_rank(&[a, rev]).unwrap();
        assert!(merged.entries().iter().all(|(_, s)| *s == 2.5));
        let order: Vec<&str> = merged.entries().iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn merge_needs_two_lists() {
        let a = up(&[("a", 1.0)]);
        assert!(matches!(
            merge_average_rank(&[a]),
            Err(EvalError::TooFewLists(1))
        ));
    }

    #[test]
    fn sorted_by_change_respects_direction() {
        let l = list(
            &[("a", 2.0), ("b", 1.0), ("c", 2.0)],
            Direction::HigherIsLessChange,
        );
        let words: Vec<String> = l.sorted_by_change().into_iter().map(|(w, _)| w).collect();
        assert_eq!(words, vec!["b", "a", "c"]);
    }

    #[test]
    fn report_table_layout() {
        let rows = [EvalReport {
            system: "ot".into(),
            strategy: Some("layer11".into()),
            spearman: 0.635,
            n_words: 104,
            direction_normalized: true,
        }];
        let text = ReportTable(&rows).to_string();
        assert!(text.lines().nth(1).unwrap().contains("layer11"));
        assert!(text.contains("0.6350"));
        let json = serde_json::to_value(&rows[0]).unwrap();
        for key in [
            "system",
            "strategy",
            "spearman",
            "n_words",
            "direction_normalized",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 3..30)
    }

    fn named(xs: &[f64]) -> RankedList {
        let entries = xs
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("w{i}"), s))
            .collect();
        RankedList::new(entries, Direction::HigherIsMoreChange).unwrap()
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(xs in scores(), ys in scores()) {
            let n = xs.len().min(ys.len());
            let (xs, ys) = (&xs[..n], &ys[..n]);
            let a = named(xs);
            let b = named(ys);
            let transformed = named(&xs.iter().map(|x| (x / 10.0).exp() * 3.0 - 1.0).collect::<Vec<_>>());
            match (spearman(&a, &b), spearman(&transformed, &b)) {
                (Ok(r1), Ok(r2)) => prop_assert!((r1.rho - r2.rho).abs() <= 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn merge_invariant_to_rescaling(xs in scores(), ys in scores()) {
            let n = xs.len().min(ys.len());
            let (xs, ys) = (&xs[..n], &ys[..n]);
            let base = merge_average_rank(&[named(xs), named(ys)]).unwrap();
            let scaled = merge_average_rank(&[named(&xs.iter().map(|x| 7.0 * x + 3.0).collect::<Vec<_>>()), named(ys)]).unwrap();
            prop_assert_eq!(base, scaled);
        }
    }
}
