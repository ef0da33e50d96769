//! Per-occurrence word vectors built from per-layer hidden states.
//!
//! Subword pooling has already happened by the time an
//! [`OccurrenceEmbedding`] exists: each layer holds one vector for the whole
//! target word. This module picks or averages layers, groups occurrences
//! into [`UsageSet`]s and summarizes layer norms.

mod io;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{l2_norm, mean_vector, GeometryError, Vector};

pub use io::{read_occurrence_file, write_occurrence_file, FileFormat};

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("layer {layer} out of range for a stack of depth {depth}")]
    LayerOutOfRange { layer: usize, depth: usize },

    #[error("invalid layer strategy: {0}")]
    InvalidStrategy(String),

    #[error("empty input")]
    EmptyInput,

    #[error("occurrence {occ_id} belongs to ({word}, {period}), expected ({expected_word}, {expected_period})")]
    MixedWordOrPeriod {
        occ_id: String,
        word: String,
        period: String,
        expected_word: String,
        expected_period: String,
    },

    #[error("duplicate occurrence id {occ_id} for ({word}, {period})")]
    DuplicateOccurrence {
        word: String,
        period: String,
        occ_id: String,
    },

    #[error("inconsistent depth: expected {expected} layers, found {found}")]
    InconsistentDepth { expected: usize, found: usize },

    #[error("layer stack needs at least two layers (embedding layer plus one hidden layer)")]
    ShallowStack,

    #[error("parse error at byte offset {offset}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse {
        offset: u64,
        line: Option<usize>,
        message: String,
    },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReprError>;

/// Hidden states for one occurrence, index 0 being the embedding layer and
/// index `depth()` the final hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Vector>,
}

impl LayerStack {
    pub fn new(layers: Vec<Vector>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(ReprError::ShallowStack);
        }
        let dim = layers[0].dim();
        if let Some(bad) = layers.iter().find(|l| l.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            }
            .into());
        }
        Ok(LayerStack { layers })
    }

    /// Model depth `k`; the stack holds `k + 1` vectors.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn layers(&self) -> &[Vector] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Result<&Vector> {
        self.layers.get(index).ok_or(ReprError::LayerOutOfRange {
            layer: index,
            depth: self.depth(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceEmbedding {
    pub word: String,
    pub period: String,
    pub occ_id: String,
    pub stack: LayerStack,
}

/// Which hidden layers make up an occurrence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerStrategy {
    Single(usize),
    /// Mean over the inclusive range `lo..=hi`.
    AvgPool {
        lo: usize,
        hi: usize,
    },
}

impl LayerStrategy {
    /// The second-to-last layer of a depth-`k` model.
    pub fn default_for_depth(depth: usize) -> Self {
        LayerStrategy::Single(depth.saturating_sub(1))
    }

    pub fn avg_pool(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(ReprError::InvalidStrategy(format!(
                "average pool range {lo}:{hi} is reversed"
            )));
        }
        Ok(LayerStrategy::AvgPool { lo, hi })
    }

    /// Highest layer index this strategy reads.
    pub fn max_layer(&self) -> usize {
        match *self {
            LayerStrategy::Single(i) => i,
            LayerStrategy::AvgPool { hi, .. } => hi,
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if let LayerStrategy::AvgPool { lo, hi } = *self {
            if lo > hi {
                return Err(ReprError::InvalidStrategy(format!(
                    "average pool range {lo}:{hi} is reversed"
                )));
            }
        }
        if self.max_layer() > depth {
            return Err(ReprError::LayerOutOfRange {
                layer: self.max_layer(),
                depth,
            });
        }
        Ok(())
    }
}

impl fmt::Display for LayerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerStrategy::Single(i) => write!(f, "layer{i}"),
            LayerStrategy::AvgPool { lo, hi } => write!(f, "avgpool{lo}-{hi}"),
        }
    }
}

impl FromStr for LayerStrategy {
    type Err = ReprError;

    /// Parses the [`Display`](fmt::Display) form: `layer11`, `avgpool9-12`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ReprError::InvalidStrategy(s.to_string());
        if let Some(rest) = s.strip_prefix("layer") {
            return rest.parse().map(LayerStrategy::Single).map_err(|_| bad());
        }
        if let Some(rest) = s.strip_prefix("avgpool") {
            let (lo, hi) = rest.split_once('-').ok_or_else(bad)?;
            let lo = lo.parse().map_err(|_| bad())?;
            let hi = hi.parse().map_err(|_| bad())?;
            return LayerStrategy::avg_pool(lo, hi);
        }
        Err(bad())
    }
}

impl Serialize for LayerStrategy {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Pooled vectors of one word in one period, ordered by `occ_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageSet {
    pub word: String,
    pub period: String,
    pub occ_ids: Vec<String>,
    pub vectors: Vec<Vector>,
}

impl UsageSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vector::dim)
    }
}

pub fn pool_layers(occ: &OccurrenceEmbedding, strat: LayerStrategy) -> Result<Vector> {
    strat.validate(occ.stack.depth())?;
    match strat {
        LayerStrategy::Single(i) => Ok(occ.stack.layers[i].clone()),
        LayerStrategy::AvgPool { lo, hi } => Ok(mean_vector(&occ.stack.layers[lo..=hi])?),
    }
}

/// Pools every occurrence of `(word, period)` into a [`UsageSet`].
pub fn build_usage_set<'a, I>(
    occs: I,
    word: &str,
    period: &str,
    strat: LayerStrategy,
) -> Result<UsageSet>
where
    I: IntoIterator<Item = &'a OccurrenceEmbedding>,
{
    let mut selected: Vec<&OccurrenceEmbedding> = Vec::new();
    for occ in occs {
        if occ.word != word || occ.period != period {
            return Err(ReprError::MixedWordOrPeriod {
                occ_id: occ.occ_id.clone(),
                word: occ.word.clone(),
                period: occ.period.clone(),
                expected_word: word.to_string(),
                expected_period: period.to_string(),
            });
        }
        selected.push(occ);
    }
    if selected.is_empty() {
        return Err(ReprError::EmptyInput);
    }
    selected.sort_by(|a, b| a.occ_id.cmp(&b.occ_id));
    if let Some(w) = selected.windows(2).find(|w| w[0].occ_id == w[1].occ_id) {
        return Err(ReprError::DuplicateOccurrence {
            word: word.to_string(),
            period: period.to_string(),
            occ_id: w[0].occ_id.clone(),
        });
    }

    let mut occ_ids = Vec::with_capacity(selected.len());
    let mut vectors = Vec::with_capacity(selected.len());
    for occ in selected {
        vectors.push(pool_layers(occ, strat)?);
        occ_ids.push(occ.occ_id.clone());
    }
    let dim = vectors[0].dim();
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(GeometryError::DimensionMismatch {
            left: dim,
            right: bad.dim(),
        }
        .into());
    }
    Ok(UsageSet {
        word: word.to_string(),
        period: period.to_string(),
        occ_ids,
        vectors,
    })
}

/// L2-norm summary for one layer index across a set of occurrences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerNormSummary {
    pub layer: usize,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn layer_norm_stats<'a, I>(occs: I) -> Result<Vec<LayerNormSummary>>
where
    I: IntoIterator<Item = &'a OccurrenceEmbedding>,
{
    let mut per_layer: Vec<Vec<f64>> = Vec::new();
    for occ in occs {
        let layers = occ.stack.layers();
        if per_layer.is_empty() {
            per_layer = vec![Vec::new(); layers.len()];
        } else if per_layer.len() != layers.len() {
            return Err(ReprError::InconsistentDepth {
                expected: per_layer.len(),
                found: layers.len(),
            });
        }
        for (bucket, v) in per_layer.iter_mut().zip(layers) {
            bucket.push(l2_norm(v));
        }
    }
    if per_layer.is_empty() {
        return Err(ReprError::EmptyInput);
    }

    Ok(per_layer
        .into_iter()
        .enumerate()
        .map(|(layer, mut norms)| {
            // sorting first makes the sums independent of input order
            norms.sort_by(f64::total_cmp);
            let n = norms.len() as f64;
            let mean = norms.iter().sum::<f64>() / n;
            let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let mid = norms.len() / 2;
            let median = if norms.len() % 2 == 1 {
                norms[mid]
            } else {
                (norms[mid - 1] + norms[mid]) / 2.0
            };
            LayerNormSummary {
                layer,
                count: norms.len(),
                mean,
                median,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// Occurrences indexed by word, then period.
#[derive(Debug, Clone, Default)]
pub struct OccurrenceStore {
    groups: BTreeMap<String, BTreeMap<String, Vec<OccurrenceEmbedding>>>,
}

impl OccurrenceStore {
    pub fn new(occs: Vec<OccurrenceEmbedding>) -> Result<Self> {
        let mut groups: BTreeMap<String, BTreeMap<String, Vec<OccurrenceEmbedding>>> =
            BTreeMap::new();
        let mut seen = HashSet::new();
        for occ in occs {
            if !seen.insert((occ.word.clone(), occ.period.clone(), occ.occ_id.clone())) {
                return Err(ReprError::DuplicateOccurrence {
                    word: occ.word,
                    period: occ.period,
                    occ_id: occ.occ_id,
                });
            }
            groups
                .entry(occ.word.clone())
                .or_default()
                .entry(occ.period.clone())
                .or_default()
                .push(occ);
        }
        Ok(OccurrenceStore { groups })
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    /// All period labels in lexicographic order.
    pub fn periods(&self) -> Vec<String> {
        let mut periods: Vec<String> = self
            .groups
            .values()
            .flat_map(|by_period| by_period.keys().cloned())
            .collect();
        periods.sort();
        periods.dedup();
        periods
    }

    pub fn periods_of(&self, word: &str) -> Vec<&str> {
        self.groups
            .get(word)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn occurrences(&self, word: &str, period: &str) -> &[OccurrenceEmbedding] {
        self.groups
            .get(word)
            .and_then(|m| m.get(period))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &OccurrenceEmbedding> {
        self.groups.values().flat_map(|m| m.values().flatten())
    }

    /// Smallest depth over all stored occurrences.
    pub fn min_depth(&self) -> Option<usize> {
        self.iter().map(|o| o.stack.depth()).min()
    }

    pub fn usage_set(&self, word: &str, period: &str, strat: LayerStrategy) -> Result<UsageSet> {
        build_usage_set(self.occurrences(word, period), word, period, strat)
    }
}
