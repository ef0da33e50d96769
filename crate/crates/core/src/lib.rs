//! Semantic change detection with optimal transport.
//!
//! A word's change between two periods is scored as the optimal transport
//! cost between its contextual-embedding occurrences in each period, under a
//! cosine-distance ground cost and uniform mass per occurrence. Alongside the
//! scorer the crate carries the comparison systems (cluster distributions,
//! aligned static embeddings, nearest-neighbour overlap), aggregation of
//! relatedness annotations into gold scores, and rank-correlation evaluation.

pub mod baselines;
pub mod eval;
pub mod geometry;
pub mod gold;
pub mod ot;
pub mod repr;
