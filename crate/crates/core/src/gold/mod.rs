//! Relatedness annotations on sentence pairs and the per-word gold scores
//! derived from them.
//!
//! Annotators rate each old/new sentence pair on a 1 (unrelated) to 4
//! (identical) scale, or 0 when the pair cannot be judged. A 0 removes only
//! that annotator's decision. A word's COMPARE score is the mean of all its
//! remaining decisions, so higher means a more stable meaning.

mod agreement;
mod io;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use agreement::{
    agreement_report, krippendorff_alpha, pairwise_kappas, weighted_kappa, AgreementReport,
    AlphaMetric, KappaWeights, PairwiseKappa,
};
pub use io::{
    parse_annotations, parse_gold_table, read_annotations, read_gold_table, write_gold_table,
    write_gold_to,
};

/// Highest label on the relatedness scale.
pub const MAX_LABEL: u8 = 4;

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("label {label} outside 0..=4")]
    InvalidLabel { label: u8 },

    #[error("record for {word:?} has no annotator scores")]
    NoAnnotators { word: String },

    #[error("no usable (non-zero) judgments for {word:?}")]
    NoUsableJudgments { word: String },

    #[error("records belong to different words: {first:?} and {other:?}")]
    MixedWords { first: String, other: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("annotator columns differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GoldError>;

/// One annotated sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub word: String,
    pub year_old: i32,
    pub sent_old: String,
    pub year_new: i32,
    pub sent_new: String,
    /// One label per annotator, in annotator order.
    pub scores: Vec<u8>,
}

impl AnnotationRecord {
    pub fn new(
        word: impl Into<String>,
        year_old: i32,
        sent_old: impl Into<String>,
        year_new: i32,
        sent_new: impl Into<String>,
        scores: Vec<u8>,
    ) -> Result<Self> {
        let word = word.into();
        if scores.is_empty() {
            return Err(GoldError::NoAnnotators { word });
        }
        if let Some(&label) = scores.iter().find(|&&s| s > MAX_LABEL) {
            return Err(GoldError::InvalidLabel { label });
        }
        Ok(AnnotationRecord {
            word,
            year_old,
            sent_old: sent_old.into(),
            year_new,
            sent_new: sent_new.into(),
            scores,
        })
    }

    /// Labels other than 0.
    pub fn usable(&self) -> impl Iterator<Item = u8> + '_ {
        self.scores.iter().copied().filter(|&s| s != 0)
    }
}

/// Mean of every non-zero label across `records`, which must all be for the
/// same word.
pub fn compare_score<'a, I>(records: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut word: Option<&str> = None;
    let mut sum = 0u64;
    let mut count = 0u64;
    for r in records {
        match word {
            None => word = Some(&r.word),
            Some(w) if w != r.word => {
                return Err(GoldError::MixedWords {
                    first: w.to_string(),
                    other: r.word.clone(),
                })
            }
            Some(_) => {}
        }
        for s in r.usable() {
            sum += u64::from(s);
            count += 1;
        }
    }
    if count == 0 {
        return Err(GoldError::NoUsableJudgments {
            word: word.unwrap_or_default().to_string(),
        });
    }
    Ok(sum as f64 / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldEntry {
    pub compare: f64,
    pub n_judgments: usize,
}

/// Per-word COMPARE scores, keyed and iterated in word order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GoldTable {
    entries: BTreeMap<String, GoldEntry>,
}

impl GoldTable {
    /// Groups records by word and scores each group. Words without a single
    /// usable judgment are left out with a warning.
    pub fn from_records(records: &[AnnotationRecord]) -> Self {
        let mut by_word: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
        for r in records {
            by_word.entry(&r.word).or_default().push(r);
        }
        let mut entries = BTreeMap::new();
        for (word, group) in by_word {
            let n_judgments = group.iter().map(|r| r.usable().count()).sum();
            match compare_score(group.iter().copied()) {
                Ok(compare) => {
                    entries.insert(
                        word.to_string(),
                        GoldEntry {
                            compare,
                            n_judgments,
                        },
                    );
                }
                Err(e) => log::warn!("excluding {word:?} from gold table: {e}"),
            }
        }
        GoldTable { entries }
    }

    /// Builds a table from already aggregated scores.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, GoldEntry)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (word, entry) in entries {
            if !(1.0..=f64::from(MAX_LABEL)).contains(&entry.compare) || entry.n_judgments == 0 {
                return Err(GoldError::InsufficientData(format!(
                    "gold entry for {word:?} has score {} over {} judgments",
                    entry.compare, entry.n_judgments
                )));
            }
            if map.insert(word.clone(), entry).is_some() {
                return Err(GoldError::InsufficientData(format!(
                    "duplicate gold word {word:?}"
                )));
            }
        }
        Ok(GoldTable { entries: map })
    }

    pub fn get(&self, word: &str) -> Option<&GoldEntry> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GoldEntry)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Keeps only the words accepted by `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|w, _| keep(w));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(super) fn rec(word: &str, scores: &[u8]) -> AnnotationRecord {
        AnnotationRecord::new(word, 1997, "old", 2018, "new", scores.to_vec()).unwrap()
    }

    #[test]
    fn record_validation() {
        assert!(matches!(
            AnnotationRecord::new("w", 1, "a", 2, "b", vec![1, 5]),
            Err(GoldError::InvalidLabel { label: 5 })
        ));
        assert!(matches!(
            AnnotationRecord::new("w", 1, "a", 2, "b", vec![]),
            Err(GoldError::NoAnnotators { .. })
        ));
    }

    #[test]
    fn zero_drops_single_decision() {
        let rs = [rec("w", &[4, 4, 0]), rec("w", &[2, 2, 2])];
        assert_eq!(compare_score(&rs).unwrap(), 2.8);
    }

    #[test]
    fn all_fours() {
        let rs = [rec("w", &[4, 4, 4]), rec("w", &[4, 4])];
        assert_eq!(compare_score(&rs).unwrap(), 4.0);
    }

    #[test]
    fn compare_errors() {
        assert!(matches!(
            compare_score(&[rec("zenit", &[0, 0, 0])]),
            Err(GoldError::NoUsableJudgments { ref word }) if word == "zenit"
        ));
        assert!(matches!(
            compare_score(&[rec("a", &[1]), rec("b", &[2])]),
            Err(GoldError::MixedWords { .. })
        ));
    }

    #[test]
    fn table_excludes_unusable_words() {
        let rs = vec![
            rec("zenit", &[0, 0, 0]),
            rec("burka", &[1, 1, 2]),
            rec("burka", &[1, 0, 1]),
            rec("glinast", &[4, 4, 4]),
        ];
        let t = GoldTable::from_records(&rs);
        assert_eq!(t.len(), 2);
        assert!(t.get("zenit").is_none());
        let burka = t.get("burka").unwrap();
        assert_eq!(burka.compare, 6.0 / 5.0);
        assert_eq!(burka.n_judgments, 5);
        assert_eq!(t.words().collect::<Vec<_>>(), vec!["burka", "glinast"]);
    }

    fn records_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..=4, 3), 1..12)
            .prop_filter("needs a usable label", |rows| {
                rows.iter().flatten().any(|&s| s != 0)
            })
    }

    proptest! {
        #[test]
        fn compare_is_permutation_invariant(rows in records_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<_> = rows.iter().map(|r| rec("w", r)).collect();
            let mut shuffled: Vec<_> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.shuffle(&mut rng);
                    rec("w", &r)
                })
                .collect();
            shuffled.shuffle(&mut rng);
            let a = compare_score(&base).unwrap();
            prop_assert_eq!(a, compare_score(&shuffled).unwrap());
            prop_assert!((1.0..=4.0).contains(&a));
        }

        #[test]
        fn dropping_a_word_leaves_others_alone(a in records_strategy(), b in records_strategy()) {
            let mut all: Vec<_> = a.iter().map(|r| rec("a", r)).collect();
            all.extend(b.iter().map(|r| rec("b", r)));
            let full = GoldTable::from_records(&all);
            let only_b: Vec<_> = all.iter().filter(|r| r.word == "b").cloned().collect();
            let alone = GoldTable::from_records(&only_b);
            prop_assert_eq!(full.get("b"), alone.get("b"));
        }
    }
}
