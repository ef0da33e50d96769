//! Two-column score files: a `word<TAB>score` header, then one word per row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Direction, EvalError, RankedList, Result};

const HEADER: &str = "word\tscore";

fn parse_err(row: usize, message: impl Into<String>) -> EvalError {
    EvalError::Parse {
        row,
        message: message.into(),
    }
}

pub fn read_scores(path: impl AsRef<Path>, direction: Direction) -> Result<RankedList> {
    parse_scores(File::open(path)?, direction)
}

/// Rows are numbered from 1 with the header as row 1.
pub fn parse_scores(reader: impl Read, direction: Direction) -> Result<RankedList> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header row"))??;
    if header.trim_end_matches('\r') != HEADER {
        return Err(parse_err(
            1,
            format!("expected header {HEADER:?}, found {header:?}"),
        ));
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((word, score)) = line.split_once('\t') else {
            return Err(parse_err(row, "expected two tab-separated columns"));
        };
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| parse_err(row, format!("bad score {score:?}")))?;
        if !score.is_finite() {
            return Err(parse_err(row, format!("score {score} is not finite")));
        }
        entries.push((word.trim().to_string(), score));
    }
    RankedList::new(entries, direction)
}

pub fn write_scores(list: &RankedList, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_scores_to(list, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the most changed word first, ties broken by word.
pub fn write_scores_to(list: &RankedList, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    for (word, score) in list.sorted_by_change() {
        writeln!(out, "{word}\t{score}")?;
    }
    Ok(())
}
