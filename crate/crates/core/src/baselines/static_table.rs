//! Static (per-period) word embeddings and the word2vec text format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{BaselineError, Result};
use crate::geometry::{GeometryError, Vector};

/// Word vectors of one period, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddingTable {
    words: Vec<String>,
    vectors: Vec<Vector>,
    index: HashMap<String, usize>,
}

impl StaticEmbeddingTable {
    /// Rejects duplicate words, mixed dimensions and zero vectors.
    pub fn new(entries: Vec<(String, Vector)>) -> Result<Self> {
        let mut words = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (word, v) in entries {
            if let Some(first) = vectors.first() {
                let first: &Vector = first;
                if first.dim() != v.dim() {
                    return Err(GeometryError::DimensionMismatch {
                        left: first.dim(),
                        right: v.dim(),
                    }
                    .into());
                }
            }
            if v.norm() == 0.0 {
                return Err(BaselineError::InvalidConfig(format!(
                    "zero vector for word {word:?}"
                )));
            }
            if index.insert(word.clone(), words.len()).is_some() {
                return Err(BaselineError::InvalidConfig(format!(
                    "duplicate word {word:?}"
                )));
            }
            words.push(word);
            vectors.push(v);
        }
        Ok(StaticEmbeddingTable {
            words,
            vectors,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vector::dim)
    }

    pub fn get(&self, word: &str) -> Option<&Vector> {
        self.index.get(word).map(|&i| &self.vectors[i])
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.words.iter().map(String::as_str).zip(&self.vectors)
    }

    /// Words present in both tables, sorted.
    pub fn shared_vocabulary(&self, other: &StaticEmbeddingTable) -> Vec<String> {
        let mut shared: Vec<String> = self
            .words
            .iter()
            .filter(|w| other.contains(w))
            .cloned()
            .collect();
        shared.sort();
        shared
    }
}

/// Reads `vocab_count dim` followed by one `token v₁ … v_dim` line per word.
pub fn read_word2vec_text(path: impl AsRef<Path>) -> Result<StaticEmbeddingTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, message: String| BaselineError::Parse { line, message };

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?;
    let header = header?;
    let mut fields = header.split_whitespace();
    let (Some(count), Some(dim), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(parse_err(
            1,
            format!("expected `vocab_count dim`, got {header:?}"),
        ));
    };
    let count: usize = count
        .parse()
        .map_err(|_| parse_err(1, format!("bad vocabulary count {count:?}")))?;
    let dim: usize = dim
        .parse()
        .map_err(|_| parse_err(1, format!("bad dimension {dim:?}")))?;
    if dim == 0 {
        return Err(parse_err(1, "dimension must be positive".into()));
    }

    let mut entries = Vec::with_capacity(count);
    let mut seen = HashMap::with_capacity(count);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line").to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("bad value {f:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(parse_err(
                lineno,
                format!("expected {dim} values, got {}", values.len()),
            ));
        }
        if let Some(prev) = seen.insert(word.clone(), lineno) {
            return Err(parse_err(
                lineno,
                format!("duplicate token {word:?} (first on line {prev})"),
            ));
        }
        let v = Vector::new(values).map_err(|e| parse_err(lineno, e.to_string()))?;
        if v.norm() == 0.0 {
            return Err(parse_err(lineno, format!("zero vector for {word:?}")));
        }
        entries.push((word, v));
    }
    if entries.len() != count {
        return Err(parse_err(
            count + 1,
            format!("header declares {count} words, file has {}", entries.len()),
        ));
    }
    StaticEmbeddingTable::new(entries)
}

pub fn write_word2vec_text(table: &StaticEmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for (word, v) in table.iter() {
        write!(out, "{word}")?;
        for x in v.as_slice() {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_text_format() {
        let (_dir, path) = write("3 2\nčaj 1.0 0.5\nportal -1 2e-1 \nburka 0.25 0.25\n");
        let table = read_word2vec_text(&path).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.dim(), 2);
        assert_eq!(table.get("portal").unwrap().as_slice(), &[-1.0, 0.2]);
        assert_eq!(table.words()[0], "čaj");
    }

    #[test]
    fn round_trip() {
        let (dir, path) = write("2 3\na 0.1 0.2 0.3\nb -1e-7 5 6\n");
        let table = read_word2vec_text(&path).unwrap();
        let out = dir.path().join("out.txt");
        write_word2vec_text(&table, &out).unwrap();
        assert_eq!(read_word2vec_text(&out).unwrap(), table);
    }

    #[test]
    fn rejects_malformed_files() {
        for (content, line) in [
            ("2 2\na 1 0\na 0 1\n", 3),
            ("2 2\na 1 0\nb 0\n", 3),
            ("2 2\na 1 0\nb 0 x\n", 3),
            ("3 2\na 1 0\nb 0 1\n", 4),
            ("2\na 1 0\n", 1),
            ("1 2\na 0 0\n", 2),
        ] {
            let (_dir, path) = write(content);
            match read_word2vec_text(&path) {
                Err(BaselineError::Parse { line: l, .. }) => assert_eq!(l, line, "{content:?}"),
                other => panic!("{content:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn shared_vocabulary_is_sorted() {
        let v = |x: f64| Vector::new(vec![x, 1.0]).unwrap();
        let a = StaticEmbeddingTable::new(vec![
            ("z".into(), v(1.)),
            ("b".into(), v(2.)),
            ("q".into(), v(3.)),
        ])
        .unwrap();
        let b = StaticEmbeddingTable::new(vec![("q".into(), v(1.)), ("z".into(), v(2.))]).unwrap();
        assert_eq!(a.shared_vocabulary(&b), vec!["q", "z"]);
    }
}
