//! Nearest-neighbour overlap between two periods' static embeddings.

use std::collections::HashSet;

use super::static_table::StaticEmbeddingTable;
use super::{BaselineError, Result};
use crate::geometry::Vector;

/// Unit-normalized copy of a table for repeated neighbour queries.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    table: &'a StaticEmbeddingTable,
    units: Vec<Vector>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(table: &'a StaticEmbeddingTable) -> Result<Self> {
        let units = table
            .iter()
            .map(|(_, v)| v.normalized())
            .collect::<std::result::Result<_, _>>()?;
        Ok(NeighborIndex { table, units })
    }

    /// The `n` most cosine-similar other words, most similar first; equal
    /// similarities are ordered by word.
    pub fn neighbors(&self, word: &str, n: usize, period: &str) -> Result<Vec<&'a str>> {
        let idx = self
            .table
            .position(word)
            .ok_or_else(|| BaselineError::MissingWord {
                word: word.to_string(),
                period: period.to_string(),
            })?;
        let available = self.table.len() - 1;
        if available <= n {
            return Err(BaselineError::VocabularyTooSmall {
                requested: n,
                available,
            });
        }
        let query = &self.units[idx];
        let words = self.table.words();
        let mut scored: Vec<(f64, &'a str)> = self
            .units
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(i, u)| {
                let sim: f64 = query
                    .as_slice()
                    .iter()
                    .zip(u.as_slice())
                    .map(|(a, b)| a * b)
                    .sum();
                (sim, words[i].as_str())
            })
            .collect();
        let by_rank =
            |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
        if n < scored.len() {
            scored.select_nth_unstable_by(n, by_rank);
            scored.truncate(n);
        }
        scored.sort_by(by_rank);
        Ok(scored.into_iter().map(|(_, w)| w).collect())
    }
}

pub fn nearest_neighbors<'a>(
    table: &'a StaticEmbeddingTable,
    word: &str,
    n: usize,
) -> Result<Vec<&'a str>> {
    NeighborIndex::new(table)?.neighbors(word, n, "given")
}

/// `1 − |N_A(word) ∩ N_B(word)| / n`, where `N_X` is the top-`n` neighbour
/// list within table `X`. Higher means more change.
pub fn nn_overlap_score(
    word: &str,
    table_a: &StaticEmbeddingTable,
    table_b: &StaticEmbeddingTable,
    n: usize,
) -> Result<f64> {
    overlap_with(
        &NeighborIndex::new(table_a)?,
        &NeighborIndex::new(table_b)?,
        word,
        n,
    )
}

pub(crate) fn overlap_with(
    a: &NeighborIndex<'_>,
    b: &NeighborIndex<'_>,
    word: &str,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(BaselineError::InvalidConfig(
            "neighbour count must be positive".into(),
        ));
    }
    let na: HashSet<&str> = a.neighbors(word, n, "source")?.into_iter().collect();
    let nb = b.neighbors(word, n, "target")?;
    let shared = nb.iter().filter(|w| na.contains(*w)).count();
    Ok(1.0 - shared as f64 / n as f64)
}

impl NeighborIndex<'_> {
    /// [`nn_overlap_score`] against another prepared index.
    pub fn overlap_score(&self, other: &NeighborIndex<'_>, word: &str, n: usize) -> Result<f64> {
        overlap_with(self, other, word, n)
    }
}
