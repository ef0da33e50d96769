//! Dense vector primitives: cosine similarity and distance, norms, means.
//!
//! Everything here accumulates in `f64`, regardless of how the inputs were
//! stored on disk.

use std::fmt;
use std::ops::Index;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("empty input")]
    EmptyInput,

    #[error("vector must have at least one component")]
    EmptyVector,

    #[error("non-finite component {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// A finite, non-empty embedding vector.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GeometryError::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GeometryError::NonFinite { index, value });
        }
        Ok(Vector(values))
    }

    /// Widens stored single-precision values.
    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(dot_unchecked(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self)
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Vector> {
        Vector::new(self.0.iter().map(|v| v * factor).collect())
    }

    /// Returns the unit vector in the same direction.
    pub fn normalized(&self) -> Result<Vector> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        Vector::new(self.0.iter().map(|v| v / norm).collect())
    }

    pub fn squared_euclidean(&self, other: &Vector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Vector").field(&self.0).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = GeometryError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}

fn check_dims(p: &Vector, q: &Vector) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    Ok(())
}

#[inline]
fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `p·q / (‖p‖‖q‖)`, clamped to `[-1, 1]`.
///
/// A zero vector is an error, never a silent `0.0`: it means the upstream
/// embedding extraction produced garbage.
pub fn cosine_similarity(p: &Vector, q: &Vector) -> Result<f64> {
    check_dims(p, q)?;
    let pp = dot_unchecked(&p.0, &p.0);
    let qq = dot_unchecked(&q.0, &q.0);
    // sqrt(pp * pp) == pp exactly, so identical vectors give exactly 1
    let denom = (pp * qq).sqrt();
    let sim = if denom.is_normal() {
        dot_unchecked(&p.0, &q.0) / denom
    } else {
        // under/overflow in the squared norms; rescale first
        let np = l2_norm(p);
        let nq = l2_norm(q);
        if np == 0.0 || nq == 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        p.0.iter().zip(&q.0).map(|(a, b)| (a / np) * (b / nq)).sum()
    };
    Ok(sim.clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity(p, q)`, in `[0, 2]`.
pub fn cosine_distance(p: &Vector, q: &Vector) -> Result<f64> {
    cosine_similarity(p, q).map(|s| 1.0 - s)
}

pub fn l2_norm(p: &Vector) -> f64 {
    // scaled accumulation so huge components don't overflow the sum of squares
    let scale = p.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = p.0.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * sum.sqrt()
}

/// Component-wise arithmetic mean.
///
/// Computed as `v₀ + Σ(vᵢ − v₀)/n`, so the mean of identical vectors is
/// returned bit-for-bit.
pub fn mean_vector<'a, I>(vs: I) -> Result<Vector>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut iter = vs.into_iter();
    let first = iter.next().ok_or(GeometryError::EmptyInput)?;
    let mut offsets = vec![0.0; first.dim()];
    let mut count = 1usize;
    for v in iter {
        check_dims(first, v)?;
        for ((acc, x), x0) in offsets.iter_mut().zip(&v.0).zip(&first.0) {
            *acc += x - x0;
        }
        count += 1;
    }
    let n = count as f64;
    Vector::new(
        first
            .0
            .iter()
            .zip(offsets)
            .map(|(x0, off)| x0 + off / n)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_similarity_examples() {
        assert_abs_diff_eq!(
            cosine_similarity(&v(&[1., 2., 3.]), &v(&[1., 2., 3.])).unwrap(),
            1.0
        );
        assert_eq!(
            cosine_similarity(&v(&[1., 0.]), &v(&[0., 1.])).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            cosine_similarity(&v(&[1., 1.]), &v(&[-1., -1.])).unwrap(),
            -1.0
        );
    }

    #[test]
    fn cosine_distance_examples() {
        assert_abs_diff_eq!(cosine_distance(&v(&[3., 4.]), &v(&[3., 4.])).unwrap(), 0.0);
        assert_eq!(cosine_distance(&v(&[1., 0.]), &v(&[0., 1.])).unwrap(), 1.0);
        assert_eq!(cosine_distance(&v(&[2., 0.]), &v(&[-5., 0.])).unwrap(), 2.0);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&v(&[1., 0.]), &v(&[1., 0., 0.])),
            Err(GeometryError::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(
            cosine_distance(&v(&[0., 0.]), &v(&[1., 0.])),
            Err(GeometryError::ZeroVector)
        );
    }

    #[test]
    fn norms() {
        assert_eq!(l2_norm(&v(&[3., 4.])), 5.0);
        assert_eq!(l2_norm(&Vector::zeros(7).unwrap()), 0.0);
        assert_eq!(l2_norm(&v(&[1., 1., 1., 1.])), 2.0);
        assert_abs_diff_eq!(l2_norm(&v(&[3e200, 4e200])), 5e200, epsilon = 1e188);
    }

    #[test]
    fn means() {
        assert_eq!(
            mean_vector(&[v(&[0., 0.]), v(&[2., 2.])]).unwrap(),
            v(&[1., 1.])
        );
        assert_eq!(mean_vector(&[v(&[5., 5.])]).unwrap(), v(&[5., 5.]));
        assert_eq!(
            mean_vector(&[v(&[1., 0.]), v(&[0., 1.]), v(&[-1., 0.]), v(&[0., -1.])]).unwrap(),
            v(&[0., 0.])
        );
        assert_eq!(mean_vector(&[]), Err(GeometryError::EmptyInput));
        assert!(matches!(
            mean_vector(&[v(&[1.]), v(&[1., 2.])]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert_eq!(Vector::new(vec![]), Err(GeometryError::EmptyVector));
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(GeometryError::NonFinite { index: 1, .. })
        ));
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn bounds_hold_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let dim = rng.random_range(1..=32);
            let scale = 10f64.powi(rng.random_range(-6..=6));
            let mut draw = || loop {
                let xs: Vec<f64> = (0..dim)
                    .map(|_| scale * rng.random_range(-1.0..1.0))
                    .collect();
                if xs.iter().any(|&x| x != 0.0) {
                    return Vector::new(xs).unwrap();
                }
            };
            let (p, q) = (draw(), draw());
            let s = cosine_similarity(&p, &q).unwrap();
            let d = cosine_distance(&p, &q).unwrap();
            assert!((-1.0..=1.0).contains(&s), "similarity {s}");
            assert!((0.0..=2.0).contains(&d), "distance {d}");
        }
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vector> {
        prop::collection::vec(-100.0f64..100.0, dim)
            .prop_filter("nonzero", |xs| xs.iter().any(|x| x.abs() > 1e-6))
            .prop_map(|xs| Vector::new(xs).unwrap())
    }

    fn pair() -> impl Strategy<Value = (Vector, Vector)> {
        (1usize..16).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d)))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric((p, q) in pair()) {
            prop_assert_eq!(cosine_distance(&p, &q).unwrap(), cosine_distance(&q, &p).unwrap());
        }

        #[test]
        fn distance_is_scale_invariant(p in (1usize..16).prop_flat_map(nonzero_vec), alpha in 1e-3f64..1e3) {
            let d = cosine_distance(&p, &p.scaled(alpha).unwrap()).unwrap();
            prop_assert!(d.abs() <= 1e-12, "d = {}", d);
        }

        #[test]
        fn similarity_is_bounded((p, q) in pair()) {
            let s = cosine_similarity(&p, &q).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn mean_of_copies_is_exact(p in (1usize..16).prop_flat_map(nonzero_vec), n in 1usize..40) {
            let copies = vec![p.clone(); n];
            prop_assert_eq!(mean_vector(&copies).unwrap(), p);
        }
    }
}
