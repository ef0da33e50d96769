//! Balanced optimal transport between two usage sets.
//!
//! The change score of a word is the optimal objective of the transport
//! problem whose cost matrix holds pairwise cosine distances between the
//! old-period and new-period occurrence vectors, with uniform mass on every
//! occurrence.

mod simplex;
mod sinkhorn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cosine_distance, GeometryError, Vector};
use crate::repr::UsageSet;

pub use simplex::solve_exact;
pub use sinkhorn::{solve_sinkhorn, SinkhornPlan};

/// Absolute tolerance for marginal sums.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("cost matrix has {rows}x{cols} shape but {len} entries")]
    Shape {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("cost matrix must be non-empty")]
    EmptyCost,

    #[error("invalid cost {value} at ({row}, {col})")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("{side} weights have length {len}, expected {expected}")]
    WeightLength {
        side: &'static str,
        len: usize,
        expected: usize,
    },

    #[error("{side} weights are invalid: {reason}")]
    InvalidWeights { side: &'static str, reason: String },

    #[error("dimension mismatch between usage sets: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("usage set for ({word}, {period}) is empty")]
    EmptyUsageSet { word: String, period: String },

    #[error("zero vector for occurrence {occ_id} of ({word}, {period})")]
    ZeroVector {
        word: String,
        period: String,
        occ_id: String,
    },

    #[error("regularization must be positive and finite, got {0}")]
    InvalidRegularization(f64),

    #[error("transport problem is infeasible")]
    Infeasible,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, OtError>;

/// Dense row-major matrix of nonnegative finite transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(OtError::EmptyCost);
        }
        if costs.len() != rows * cols {
            return Err(OtError::Shape {
                rows,
                cols,
                len: costs.len(),
            });
        }
        if let Some(idx) = costs.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(OtError::InvalidCost {
                row: idx / cols,
                col: idx % cols,
                value: costs[idx],
            });
        }
        Ok(CostMatrix { rows, cols, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(OtError::Shape {
                rows: rows.len(),
                cols,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut costs = Vec::with_capacity(self.costs.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                costs.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            costs,
        }
    }
}

/// A balanced transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OtProblem {
    cost: CostMatrix,
    source_weights: Vec<f64>,
    dest_weights: Vec<f64>,
}

impl OtProblem {
    pub fn new(cost: CostMatrix, source_weights: Vec<f64>, dest_weights: Vec<f64>) -> Result<Self> {
        check_weights("source", &source_weights, cost.rows())?;
        check_weights("destination", &dest_weights, cost.cols())?;
        Ok(OtProblem {
            cost,
            source_weights,
            dest_weights,
        })
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn source_weights(&self) -> &[f64] {
        &self.source_weights
    }

    pub fn dest_weights(&self) -> &[f64] {
        &self.dest_weights
    }
}

fn check_weights(side: &'static str, w: &[f64], expected: usize) -> Result<()> {
    if w.len() != expected {
        return Err(OtError::WeightLength {
            side,
            len: w.len(),
            expected,
        });
    }
    if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(OtError::InvalidWeights {
            side,
            reason: format!("entry {bad} is negative or non-finite"),
        });
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > MARGINAL_TOL {
        return Err(OtError::InvalidWeights {
            side,
            reason: format!("sum is {total}, expected 1"),
        });
    }
    Ok(())
}

/// A coupling between source and destination mass, with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    flows: Vec<f64>,
    objective: f64,
}

impl TransportPlan {
    pub(crate) fn new(rows: usize, cols: usize, flows: Vec<f64>, cost: &CostMatrix) -> Self {
        let objective = flows.iter().zip(cost.as_slice()).map(|(a, c)| a * c).sum();
        TransportPlan {
            rows,
            cols,
            flows,
            objective,
        }
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn flow(&self, row: usize, col: usize) -> f64 {
        self.flows[row * self.cols + col]
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flows
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.flows.chunks(self.cols) {
            for (s, f) in sums.iter_mut().zip(row) {
                *s += f;
            }
        }
        sums
    }

    /// Largest absolute deviation of any row or column sum from its marginal.
    pub fn marginal_violation(&self, problem: &OtProblem) -> f64 {
        let rows = self
            .row_sums()
            .iter()
            .zip(problem.source_weights())
            .map(|(s, w)| (s - w).abs())
            .fold(0.0, f64::max);
        let cols = self
            .col_sums()
            .iter()
            .zip(problem.dest_weights())
            .map(|(s, w)| (s - w).abs())
            .fold(0.0, f64::max);
        rows.max(cols)
    }
}

/// Pairwise cosine distances, `src` occurrences as rows.
pub fn build_cost_matrix(src: &UsageSet, dst: &UsageSet) -> Result<CostMatrix> {
    for set in [src, dst] {
        if set.is_empty() {
            return Err(OtError::EmptyUsageSet {
                word: set.word.clone(),
                period: set.period.clone(),
            });
        }
        if let Some(i) = set.vectors.iter().position(|v| v.norm() == 0.0) {
            return Err(OtError::ZeroVector {
                word: set.word.clone(),
                period: set.period.clone(),
                occ_id: set.occ_ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
            });
        }
    }
    pairwise_cosine(&src.vectors, &dst.vectors)
}

pub(crate) fn pairwise_cosine(src: &[Vector], dst: &[Vector]) -> Result<CostMatrix> {
    let mut costs = Vec::with_capacity(src.len() * dst.len());
    for s in src {
        for d in dst {
            costs.push(cosine_distance(s, d).map_err(|e| match e {
                GeometryError::DimensionMismatch { left, right } => {
                    OtError::DimensionMismatch { left, right }
                }
                other => OtError::NumericalFailure(other.to_string()),
            })?);
        }
    }
    CostMatrix::new(src.len(), dst.len(), costs)
}

/// Uniform `1/m` source and `1/n` destination weights.
pub fn uniform_problem(cost: CostMatrix) -> OtProblem {
    let m = cost.rows();
    let n = cost.cols();
    OtProblem {
        source_weights: vec![1.0 / m as f64; m],
        dest_weights: vec![1.0 / n as f64; n],
        cost,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum SolverConfig {
    #[default]
    Exact,
    Sinkhorn { reg: f64, max_iter: usize, tol: f64 },
}

pub fn solve(problem: &OtProblem, config: &SolverConfig) -> Result<TransportPlan> {
    match *config {
        SolverConfig::Exact => solve_exact(problem),
        SolverConfig::Sinkhorn { reg, max_iter, tol } => {
            let out = solve_sinkhorn(problem, reg, max_iter, tol)?;
            if !out.converged {
                log::warn!(
                    "sinkhorn stopped after {} iterations with marginal error {:.3e}",
                    out.iterations,
                    out.marginal_error
                );
            }
            Ok(out.plan)
        }
    }
}

/// The semantic-change score: optimal uniform-marginal transport cost
/// between two usage sets under cosine distance. Lies in `[0, 2]`.
pub fn ot_change_score(src: &UsageSet, dst: &UsageSet, config: &SolverConfig) -> Result<f64> {
    let problem = uniform_problem(build_cost_matrix(src, dst)?);
    Ok(solve(&problem, config)?.objective().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    pub(crate) fn usage(period: &str, vectors: Vec<Vector>) -> UsageSet {
        UsageSet {
            word: "w".into(),
            period: period.into(),
            occ_ids: (0..vectors.len()).map(|i| format!("{i:03}")).collect(),
            vectors,
        }
    }

    #[test]
    fn cost_matrix_examples() {
        let a = usage("a", vec![v(&[1., 2.])]);
        assert_eq!(build_cost_matrix(&a, &a).unwrap().as_slice(), &[0.0]);

        let src = usage("a", vec![v(&[1., 0.])]);
        let dst = usage("b", vec![v(&[0., 1.]), v(&[1., 0.])]);
        let c = build_cost_matrix(&src, &dst).unwrap();
        assert_eq!((c.rows(), c.cols()), (1, 2));
        assert_eq!(c.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn cost_matrix_30x30_in_range() {
        let mk = |seed: f64| {
            usage(
                "p",
                (0..30)
                    .map(|i| {
                        let t = i as f64 * 0.7 + seed;
                        v(&[t.sin(), t.cos(), (2.0 * t).sin() - 0.1, 0.3])
                    })
                    .collect(),
            )
        };
        let c = build_cost_matrix(&mk(0.0), &mk(1.3)).unwrap();
        assert_eq!((c.rows(), c.cols()), (30, 30));
        assert!(c.as_slice().iter().all(|x| (0.0..=2.0).contains(x)));
    }

    #[test]
    fn cost_matrix_errors() {
        let src = usage("a", vec![v(&[1., 0.]), v(&[0., 0.])]);
        let dst = usage("b", vec![v(&[1., 0.])]);
        assert_eq!(
            build_cost_matrix(&src, &dst),
            Err(OtError::ZeroVector {
                word: "w".into(),
                period: "a".into(),
                occ_id: "001".into()
            })
        );
        let dst3 = usage("b", vec![v(&[1., 0., 0.])]);
        assert!(matches!(
            build_cost_matrix(&dst, &dst3),
            Err(OtError::DimensionMismatch { left: 2, right: 3 })
        ));
        assert!(matches!(
            build_cost_matrix(&usage("a", vec![]), &dst),
            Err(OtError::EmptyUsageSet { .. })
        ));
    }

    #[test]
    fn uniform_weights() {
        let p = uniform_problem(CostMatrix::new(2, 4, vec![0.0; 8]).unwrap());
        assert_eq!(p.source_weights(), &[0.5, 0.5]);
        assert_eq!(p.dest_weights(), &[0.25; 4]);
        let p = uniform_problem(CostMatrix::new(1, 1, vec![0.0]).unwrap());
        assert_eq!(p.source_weights(), &[1.0]);
        assert_eq!(p.dest_weights(), &[1.0]);
        let p = uniform_problem(CostMatrix::new(30, 30, vec![1.0; 900]).unwrap());
        assert!(p.source_weights().iter().all(|&w| w == 1.0 / 30.0));
        assert!(p.dest_weights().iter().all(|&w| w == 1.0 / 30.0));
    }

    #[test]
    fn problem_validation() {
        let c = CostMatrix::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(OtProblem::new(c.clone(), vec![1.0], vec![0.5, 0.4]).is_err());
        assert!(OtProblem::new(c.clone(), vec![1.0], vec![0.5]).is_err());
        assert!(OtProblem::new(c.clone(), vec![1.0], vec![1.5, -0.5]).is_err());
        assert!(OtProblem::new(c, vec![1.0], vec![0.25, 0.75]).is_ok());
        assert!(CostMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn score_examples() {
        let a = usage("a", vec![v(&[1., 2.]), v(&[-3., 1.]), v(&[0.5, 0.5])]);
        assert_abs_diff_eq!(
            ot_change_score(&a, &a, &SolverConfig::Exact).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let src = usage("a", vec![v(&[1., 0.]); 4]);
        let dst = usage("b", vec![v(&[0., 1.]); 7]);
        assert_abs_diff_eq!(
            ot_change_score(&src, &dst, &SolverConfig::Exact).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }
}
