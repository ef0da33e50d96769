//! Cluster-distribution change scores.
//!
//! Both periods' occurrence vectors are clustered jointly, each period
//! becomes a histogram over the shared clusters, and the change is the
//! Jensen-Shannon divergence between the histograms or the Wasserstein
//! distance with cosine distance between centroids as ground cost.

use super::kmeans::{kmeans, ClusterModel, KMeansConfig};
use super::{BaselineError, Result};
use crate::ot::{pairwise_cosine, solve_exact, OtProblem};
use crate::repr::UsageSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeMeasure {
    Jsd,
    Wd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub kmeans: KMeansConfig,
    /// Scale every vector to unit length before clustering.
    pub normalize_vectors: bool,
}

impl ClusterConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        ClusterConfig {
            kmeans: KMeansConfig::new(k, seed),
            normalize_vectors: false,
        }
    }
}

/// Probability mass over clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDistribution(Vec<f64>);

impl ClusterDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(BaselineError::InvalidDistribution("empty".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(BaselineError::InvalidDistribution(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(BaselineError::InvalidDistribution(format!(
                "sums to {total}"
            )));
        }
        Ok(ClusterDistribution(probs))
    }

    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(BaselineError::InvalidDistribution("no observations".into()));
        }
        ClusterDistribution::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Jensen-Shannon divergence in bits, so it lies in `[0, 1]`.
pub fn jsd(p: &ClusterDistribution, q: &ClusterDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(BaselineError::LengthMismatch(p.len(), q.len()));
    }
    let m: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| (a + b) / 2.0).collect();
    let kl = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&m)
            .filter(|(xi, _)| **xi > 0.0)
            .map(|(xi, mi)| xi * (xi / mi).log2())
            .sum()
    };
    Ok((0.5 * (kl(&p.0) + kl(&q.0))).clamp(0.0, 1.0))
}

/// Joint clustering and the per-period histograms it induces.
#[derive(Debug, Clone)]
pub struct ClusterSplit {
    pub model: ClusterModel,
    pub source: ClusterDistribution,
    pub target: ClusterDistribution,
}

pub fn cluster_distributions(
    src: &UsageSet,
    dst: &UsageSet,
    config: &ClusterConfig,
) -> Result<ClusterSplit> {
    let mut points = Vec::with_capacity(src.len() + dst.len());
    for v in src.vectors.iter().chain(&dst.vectors) {
        points.push(if config.normalize_vectors {
            v.normalized()?
        } else {
            v.clone()
        });
    }
    if points.len() < config.kmeans.k {
        return Err(BaselineError::TooFewPoints {
            needed: config.kmeans.k,
            got: points.len(),
        });
    }
    let model = kmeans(&points, &config.kmeans)?;
    let k = model.k;
    let mut src_counts = vec![0usize; k];
    let mut dst_counts = vec![0usize; k];
    for (i, &a) in model.assignments.iter().enumerate() {
        if i < src.len() {
            src_counts[a] += 1;
        } else {
            dst_counts[a] += 1;
        }
    }
    Ok(ClusterSplit {
        source: ClusterDistribution::from_counts(&src_counts)?,
        target: ClusterDistribution::from_counts(&dst_counts)?,
        model,
    })
}

impl ClusterSplit {
    pub fn score(&self, measure: ChangeMeasure) -> Result<f64> {
        match measure {
            ChangeMeasure::Jsd => jsd(&self.source, &self.target),
            ChangeMeasure::Wd => {
                let cost = pairwise_cosine(&self.model.centroids, &self.model.centroids)?;
                let problem = OtProblem::new(cost, self.source.0.clone(), self.target.0.clone())?;
                Ok(solve_exact(&problem)?.objective().max(0.0))
            }
        }
    }
}

pub fn cluster_change_score(
    src: &UsageSet,
    dst: &UsageSet,
    config: &ClusterConfig,
    measure: ChangeMeasure,
) -> Result<f64> {
    cluster_distributions(src, dst, config)?.score(measure)
}
