//! Orthogonal Procrustes alignment of two static embedding spaces, and the
//! cosine-distance change score on the aligned spaces.

use nalgebra::DMatrix;

use super::static_table::StaticEmbeddingTable;
use super::{BaselineError, Result};
use crate::geometry::{cosine_distance, Vector};

#[derive(Debug, Clone)]
pub struct ProcrustesAlignment {
    /// Orthogonal `d×d` map applied on the right: `X·Q ≈ Y`.
    pub rotation: DMatrix<f64>,
    pub rank: usize,
}

impl ProcrustesAlignment {
    /// `XᵀY` did not have full rank; the rotation still minimizes the
    /// residual but is not unique.
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.rotation.nrows()
    }
}

/// `argmin ‖XQ − Y‖_F` over orthogonal `Q`, from the SVD `XᵀY = UΣVᵀ` as
/// `Q = UVᵀ`. No centering or scaling.
pub fn procrustes_align(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<ProcrustesAlignment> {
    if x.shape() != y.shape() {
        return Err(BaselineError::ShapeMismatch {
            left: x.shape(),
            right: y.shape(),
        });
    }
    if x.ncols() == 0 {
        return Err(BaselineError::InvalidConfig(
            "embedding dimension is zero".into(),
        ));
    }
    let cross = x.transpose() * y;
    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().ok_or(BaselineError::SvdFailed)?;
    let v_t = svd.v_t.as_ref().ok_or(BaselineError::SvdFailed)?;
    let rotation = u * v_t;

    let largest = svd.singular_values.max();
    let tol = largest * (x.ncols() as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < x.ncols() {
        log::debug!(
            "procrustes cross-covariance has rank {rank} < {}",
            x.ncols()
        );
    }
    Ok(ProcrustesAlignment { rotation, rank })
}

/// Period-A table mapped into period-B space through anchor words.
#[derive(Debug, Clone)]
pub struct AlignedTables<'a> {
    source: &'a StaticEmbeddingTable,
    target: &'a StaticEmbeddingTable,
    alignment: ProcrustesAlignment,
}

impl<'a> AlignedTables<'a> {
    pub fn fit(
        source: &'a StaticEmbeddingTable,
        target: &'a StaticEmbeddingTable,
        anchors: &[String],
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(BaselineError::NoAnchors);
        }
        if source.dim() != target.dim() {
            return Err(BaselineError::ShapeMismatch {
                left: (anchors.len(), source.dim()),
                right: (anchors.len(), target.dim()),
            });
        }
        let x = anchor_matrix(source, anchors, "source")?;
        let y = anchor_matrix(target, anchors, "target")?;
        let alignment = procrustes_align(&x, &y)?;
        Ok(AlignedTables {
            source,
            target,
            alignment,
        })
    }

    pub fn alignment(&self) -> &ProcrustesAlignment {
        &self.alignment
    }

    /// The source-period vector of `word` after alignment.
    pub fn aligned(&self, word: &str) -> Result<Vector> {
        let v = self
            .source
            .get(word)
            .ok_or_else(|| missing(word, "source"))?;
        let row = DMatrix::from_row_slice(1, v.dim(), v.as_slice());
        let mapped = row * &self.alignment.rotation;
        Ok(Vector::new(mapped.iter().copied().collect())?)
    }

    /// Cosine distance between the aligned source vector and the target
    /// vector of `word`.
    pub fn score(&self, word: &str) -> Result<f64> {
        let target = self
            .target
            .get(word)
            .ok_or_else(|| missing(word, "target"))?;
        Ok(cosine_distance(&self.aligned(word)?, target)?)
    }
}

fn missing(word: &str, period: &str) -> BaselineError {
    BaselineError::MissingWord {
        word: word.to_string(),
        period: period.to_string(),
    }
}

fn anchor_matrix(
    table: &StaticEmbeddingTable,
    anchors: &[String],
    period: &str,
) -> Result<DMatrix<f64>> {
    let dim = table.dim();
    let mut data = Vec::with_capacity(anchors.len() * dim);
    for w in anchors {
        let v = table.get(w).ok_or_else(|| missing(w, period))?;
        data.extend_from_slice(v.as_slice());
    }
    Ok(DMatrix::from_row_slice(anchors.len(), dim, &data))
}

/// One-shot form of [`AlignedTables::score`]. Refits the alignment on every
/// call; use [`AlignedTables`] directly when scoring many words.
pub fn sgns_op_cd_score(
    word: &str,
    table_a: &StaticEmbeddingTable,
    table_b: &StaticEmbeddingTable,
    anchors: &[String],
) -> Result<f64> {
    if !table_a.contains(word) {
        return Err(missing(word, "source"));
    }
    if !table_b.contains(word) {
        return Err(missing(word, "target"));
    }
    AlignedTables::fit(table_a, table_b, anchors)?.score(word)
}
