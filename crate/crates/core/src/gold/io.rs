//! Tab-separated annotation input and gold-score tables.
//!
//! Rows are numbered from 1 with the header as row 1, matching what an
//! editor shows as the line number.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AnnotationRecord, GoldEntry, GoldError, GoldTable, Result};

const FIXED_COLUMNS: [&str; 5] = [
    "word",
    "year_old",
    "sentence_old",
    "year_new",
    "sentence_new",
];
const GOLD_HEADER: [&str; 3] = ["word", "compare_score", "n_judgments"];

fn parse_err(row: usize, message: impl Into<String>) -> GoldError {
    GoldError::Parse {
        row,
        message: message.into(),
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    parse_annotations(File::open(path)?)
}

/// Parses `word, year_old, sentence_old, year_new, sentence_new` followed by
/// one or more annotator score columns. An empty score cell is read as 0.
pub fn parse_annotations(reader: impl Read) -> Result<Vec<AnnotationRecord>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header row"))??;
    let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if header.len() <= FIXED_COLUMNS.len() {
        return Err(parse_err(
            1,
            format!(
                "header has {} columns; expected {} fixed columns and at least one score column",
                header.len(),
                FIXED_COLUMNS.len()
            ),
        ));
    }
    for (got, want) in header.iter().zip(FIXED_COLUMNS) {
        if !got.trim().eq_ignore_ascii_case(want) {
            log::warn!(
                "annotation header column {got:?} where {want:?} was expected; using position"
            );
        }
    }
    let n_cols = header.len();

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != n_cols {
            return Err(parse_err(
                row,
                format!("expected {n_cols} columns, found {}", fields.len()),
            ));
        }
        let word = fields[0].trim();
        if word.is_empty() {
            return Err(parse_err(row, "empty word"));
        }
        let year = |idx: usize| -> Result<i32> {
            fields[idx].trim().parse().map_err(|_| {
                parse_err(row, format!("bad {} {:?}", FIXED_COLUMNS[idx], fields[idx]))
            })
        };
        let (year_old, year_new) = (year(1)?, year(3)?);
        let scores = fields[FIXED_COLUMNS.len()..]
            .iter()
            .enumerate()
            .map(|(a, f)| {
                let f = f.trim();
                if f.is_empty() {
                    return Ok(0);
                }
                match f.parse::<u8>() {
                    Ok(s) if s <= super::MAX_LABEL => Ok(s),
                    _ => Err(parse_err(
                        row,
                        format!(
                            "annotator {} label {f:?} is not one of 0, 1, 2, 3, 4",
                            a + 1
                        ),
                    )),
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        let record = AnnotationRecord::new(word, year_old, fields[2], year_new, fields[4], scores)
            .map_err(|e| parse_err(row, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_gold_table(table: &GoldTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_gold_to(table, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_gold_to(table: &GoldTable, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{}", GOLD_HEADER.join("\t"))?;
    for (word, e) in table.iter() {
        writeln!(out, "{word}\t{}\t{}", e.compare, e.n_judgments)?;
    }
    Ok(())
}

pub fn read_gold_table(path: impl AsRef<Path>) -> Result<GoldTable> {
    parse_gold_table(File::open(path)?)
}

pub fn parse_gold_table(reader: impl Read) -> Result<GoldTable> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header row"))??;
    let cols: Vec<&str> = header
        .trim_end_matches('\r')
        .split('\t')
        .map(str::trim)
        .collect();
    if cols != GOLD_HEADER {
        return Err(parse_err(
            1,
            format!(
                "expected header {:?}, found {cols:?}",
                GOLD_HEADER.join("\t")
            ),
        ));
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [word, compare, n] = fields[..] else {
            return Err(parse_err(
                row,
                format!("expected 3 columns, found {}", fields.len()),
            ));
        };
        let compare: f64 = compare
            .trim()
            .parse()
            .map_err(|_| parse_err(row, format!("bad compare_score {compare:?}")))?;
        let n_judgments: usize = n
            .trim()
            .parse()
            .map_err(|_| parse_err(row, format!("bad n_judgments {n:?}")))?;
        let word = word.trim();
        if !(1.0..=f64::from(super::MAX_LABEL)).contains(&compare) || n_judgments == 0 {
            return Err(parse_err(
                row,
                format!("score {compare} over {n_judgments} judgments is not a valid gold entry"),
            ));
        }
        if !seen.insert(word.to_string()) {
            return Err(parse_err(row, format!("duplicate word {word:?}")));
        }
        entries.push((
            word.to_string(),
            GoldEntry {
                compare,
                n_judgments,
            },
        ));
    }
    GoldTable::from_entries(entries)
}
