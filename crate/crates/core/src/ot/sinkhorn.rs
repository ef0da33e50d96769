//! Entropically regularized transport via Sinkhorn-Knopp scaling, run on
//! dual potentials in the log domain so small `reg` does not underflow.

use super::{OtError, OtProblem, Result, TransportPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornPlan {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// L1 deviation of the row sums from the source weights. Column sums
    /// are exact after every iteration.
    pub marginal_error: f64,
    pub converged: bool,
}

/// Alternates exact row and column projections until the row marginal
/// error drops to `tol` or `max_iter` sweeps have run. Not converging is
/// reported through [`SinkhornPlan::converged`], not as an error.
pub fn solve_sinkhorn(
    problem: &OtProblem,
    reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornPlan> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(OtError::InvalidRegularization(reg));
    }
    let cost = problem.cost();
    let (m, n) = (cost.rows(), cost.cols());
    let log_a: Vec<f64> = problem.source_weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = problem.dest_weights().iter().map(|w| w.ln()).collect();
    let c = cost.as_slice();

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut col_buf = vec![0.0; m];
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;

    while iterations < max_iter.max(1) {
        iterations += 1;
        for i in 0..m {
            let row = &c[i * n..(i + 1) * n];
            f[i] = reg * (log_a[i] - logsumexp((0..n).map(|j| (g[j] - row[j]) / reg)));
        }
        for j in 0..n {
            for i in 0..m {
                col_buf[i] = (f[i] - c[i * n + j]) / reg;
            }
            g[j] = reg * (log_b[j] - logsumexp(col_buf.iter().copied()));
        }

        marginal_error = (0..m)
            .map(|i| {
                let row = &c[i * n..(i + 1) * n];
                let s: f64 = (0..n).map(|j| ((f[i] + g[j] - row[j]) / reg).exp()).sum();
                (s - problem.source_weights()[i]).abs()
            })
            .sum();
        if !marginal_error.is_finite() {
            return Err(OtError::NumericalFailure(format!(
                "sinkhorn produced a non-finite marginal error at iteration {iterations}"
            )));
        }
        if marginal_error <= tol {
            break;
        }
    }

    let mut flows = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let x = ((f[i] + g[j] - c[i * n + j]) / reg).exp();
            flows.push(if x.is_nan() { 0.0 } else { x });
        }
    }
    Ok(SinkhornPlan {
        plan: TransportPlan::new(m, n, flows, cost),
        iterations,
        marginal_error,
        converged: marginal_error <= tol,
    })
}

/// `log Σ exp(xᵢ)`; `-∞` for an empty or all-`-∞` family.
fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}
