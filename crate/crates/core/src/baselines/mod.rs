//! Comparison systems: cluster distributions over contextual embeddings,
//! Procrustes-aligned static embeddings, and nearest-neighbour overlap.

mod cluster;
mod kmeans;
mod neighbors;
mod procrustes;
mod static_table;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::ot::OtError;

pub use cluster::{
    cluster_change_score, cluster_distributions, jsd, ChangeMeasure, ClusterConfig,
    ClusterDistribution, ClusterSplit,
};
pub use kmeans::{kmeans, ClusterModel, KMeansConfig};
pub use neighbors::{nearest_neighbors, nn_overlap_score, NeighborIndex};
pub use procrustes::{procrustes_align, sgns_op_cd_score, AlignedTables, ProcrustesAlignment};
pub use static_table::{read_word2vec_text, write_word2vec_text, StaticEmbeddingTable};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least {needed} distinct points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("distribution lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("matrix shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("word {word:?} missing from {period} table")]
    MissingWord { word: String, period: String },

    #[error("vocabulary of {available} other words is too small for {requested} neighbours")]
    VocabularyTooSmall { requested: usize, available: usize },

    #[error("no anchor words shared by both tables")]
    NoAnchors,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("word2vec parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("singular value decomposition failed")]
    SvdFailed,

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Ot(#[from] OtError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BaselineError>;
