//! Lloyd's k-means with k-means++ seeding and deterministic restarts.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BaselineError, Result};
use crate::geometry::{mean_vector, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    /// Ten restarts and at most 300 Lloyd iterations each.
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vector>,
    pub assignments: Vec<usize>,
    /// Sum of squared Euclidean distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Best-inertia model over `config.restarts` seeded runs. Restart `r` uses
/// seed `config.seed + r`; runs execute in parallel but the result depends
/// only on the seed.
pub fn kmeans(vectors: &[Vector], config: &KMeansConfig) -> Result<ClusterModel> {
    if config.k == 0 || config.restarts == 0 || config.max_iter == 0 {
        return Err(BaselineError::InvalidConfig(
            "k, restarts and max_iter must be positive".into(),
        ));
    }
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.dim() != first.dim()) {
            return Err(crate::geometry::GeometryError::DimensionMismatch {
                left: first.dim(),
                right: bad.dim(),
            }
            .into());
        }
    }
    let distinct = vectors
        .iter()
        .map(|v| v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len();
    if distinct < config.k {
        return Err(BaselineError::TooFewPoints {
            needed: config.k,
            got: distinct,
        });
    }

    let runs: Vec<ClusterModel> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            lloyd(vectors, config.k, config.max_iter, &mut rng)
        })
        .collect::<Result<_>>()?;

    // first restart wins ties
    let best = runs
        .into_iter()
        .reduce(|best, m| if m.inertia < best.inertia { m } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn lloyd(
    points: &[Vector],
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ClusterModel> {
    let mut centroids = plus_plus_init(points, k, rng)?;
    let (mut assignments, inertia) = assign(points, &centroids)?;
    let mut trace = vec![inertia];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        centroids = update_centroids(points, &assignments, &centroids)?;
        repair_empty(points, &mut centroids, &mut assignments)?;
        let (next, inertia) = assign(points, &centroids)?;
        trace.push(inertia);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    if !converged {
        repair_empty(points, &mut centroids, &mut assignments)?;
        centroids = update_centroids(points, &assignments, &centroids)?;
    }
    let inertia = total_inertia(points, &centroids, &assignments)?;
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        inertia,
        iterations,
        converged,
        inertia_trace: trace,
    })
}

fn plus_plus_init(points: &[Vector], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vector>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| p.squared_euclidean(&centroids[0]))
        .collect::<std::result::Result<_, _>>()?;
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            // cannot happen with at least k distinct points
            d2.iter().position(|&w| w > 0.0).unwrap_or(0)
        };
        let c = points[pick].clone();
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(p.squared_euclidean(&c)?);
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Nearest centroid per point, lowest index on ties.
fn assign(points: &[Vector], centroids: &[Vector]) -> Result<(Vec<usize>, f64)> {
    let mut labels = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for p in points {
        let mut best = (0, f64::INFINITY);
        for (c, centroid) in centroids.iter().enumerate() {
            let d = p.squared_euclidean(centroid)?;
            if d < best.1 {
                best = (c, d);
            }
        }
        labels.push(best.0);
        inertia += best.1;
    }
    Ok((labels, inertia))
}

fn update_centroids(
    points: &[Vector],
    assignments: &[usize],
    previous: &[Vector],
) -> Result<Vec<Vector>> {
    let mut members: Vec<Vec<&Vector>> = vec![Vec::new(); previous.len()];
    for (p, &a) in points.iter().zip(assignments) {
        members[a].push(p);
    }
    members
        .iter()
        .zip(previous)
        .map(|(m, prev)| {
            if m.is_empty() {
                Ok(prev.clone())
            } else {
                Ok(mean_vector(m.iter().copied())?)
            }
        })
        .collect()
}

/// Moves each empty cluster's centroid onto the point farthest from its own
/// centroid, taking that point from a cluster that keeps at least one member.
fn repair_empty(
    points: &[Vector],
    centroids: &mut [Vector],
    assignments: &mut [usize],
) -> Result<()> {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return Ok(());
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = p.squared_euclidean(&centroids[a])?;
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let far = far.ok_or(BaselineError::TooFewPoints {
            needed: k,
            got: points.len(),
        })?;
        centroids[empty] = points[far].clone();
        assignments[far] = empty;
    }
}

fn total_inertia(points: &[Vector], centroids: &[Vector], assignments: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (p, &a) in points.iter().zip(assignments) {
        total += p.squared_euclidean(&centroids[a])?;
    }
    Ok(total)
}
