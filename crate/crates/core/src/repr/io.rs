//! Occurrence-embedding files.
//!
//! Two encodings, one record per (occurrence, layer):
//!
//! * JSON Lines: `{"word", "period", "occ_id", "layer", "dim", "values"}`.
//! * Packed binary: magic `OCE1`, a `u32`-length-prefixed JSON header
//!   `{"dim", "layers", "records"}`, then per record the `u32`-length-prefixed
//!   UTF-8 `word`, `period` and `occ_id`, the layer as `u16`, and `dim`
//!   `f32` values. All integers and floats are little-endian.
//!
//! Values are stored as `f32`. Readers round to `f32` so that text written by
//! other tools at higher precision loads identically to what we would write.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerStack, OccurrenceEmbedding, ReprError, Result};
use crate::geometry::Vector;

const MAGIC: &[u8; 4] = b"OCE1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FileFormat {
    #[default]
    JsonLines,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct TextRecord<'a> {
    word: std::borrow::Cow<'a, str>,
    period: std::borrow::Cow<'a, str>,
    occ_id: std::borrow::Cow<'a, str>,
    layer: usize,
    dim: usize,
    values: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    dim: usize,
    layers: usize,
    records: usize,
}

/// Reads either encoding, detected from the leading magic bytes.
pub fn read_occurrence_file(path: impl AsRef<Path>) -> Result<Vec<OccurrenceEmbedding>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes)
    } else {
        read_text(&bytes)
    }
}

pub fn write_occurrence_file(
    occs: &[OccurrenceEmbedding],
    path: impl AsRef<Path>,
    format: FileFormat,
) -> Result<()> {
    let (dim, layers) = check_uniform(occs)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    match format {
        FileFormat::JsonLines => {
            for occ in occs {
                for (layer, v) in occ.stack.layers().iter().enumerate() {
                    let rec = TextRecord {
                        word: occ.word.as_str().into(),
                        period: occ.period.as_str().into(),
                        occ_id: occ.occ_id.as_str().into(),
                        layer,
                        dim,
                        values: v.as_slice().iter().map(|&x| x as f32).collect(),
                    };
                    serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
                    out.write_all(b"\n")?;
                }
            }
        }
        FileFormat::Binary => {
            let header = serde_json::to_vec(&BinaryHeader {
                dim,
                layers,
                records: occs.len() * layers,
            })
            .map_err(std::io::Error::from)?;
            out.write_all(MAGIC)?;
            write_len(&mut out, header.len())?;
            out.write_all(&header)?;
            for occ in occs {
                for (layer, v) in occ.stack.layers().iter().enumerate() {
                    for s in [&occ.word, &occ.period, &occ.occ_id] {
                        write_len(&mut out, s.len())?;
                        out.write_all(s.as_bytes())?;
                    }
                    let layer = u16::try_from(layer).map_err(|_| {
                        ReprError::InvariantViolation(format!("layer index {layer} exceeds u16"))
                    })?;
                    out.write_all(&layer.to_le_bytes())?;
                    for &x in v.as_slice() {
                        out.write_all(&(x as f32).to_le_bytes())?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn write_len(out: &mut impl Write, len: usize) -> Result<()> {
    let len = u32::try_from(len)
        .map_err(|_| ReprError::InvariantViolation(format!("field of {len} bytes is too long")))?;
    out.write_all(&len.to_le_bytes())?;
    Ok(())
}

fn check_uniform(occs: &[OccurrenceEmbedding]) -> Result<(usize, usize)> {
    let Some(first) = occs.first() else {
        return Ok((0, 0));
    };
    let dim = first.stack.dim();
    let layers = first.stack.layers().len();
    for occ in occs {
        if occ.stack.dim() != dim {
            return Err(ReprError::InvariantViolation(format!(
                "occurrence {} has dim {}, expected {dim}",
                occ.occ_id,
                occ.stack.dim()
            )));
        }
        if occ.stack.layers().len() != layers {
            return Err(ReprError::InconsistentDepth {
                expected: layers,
                found: occ.stack.layers().len(),
            });
        }
    }
    Ok((dim, layers))
}

/// Collects per-layer records into complete occurrences, preserving the
/// order in which occurrences first appear.
#[derive(Default)]
struct Assembler {
    index: HashMap<(String, String, String), usize>,
    pending: Vec<((String, String, String), Vec<Option<Vector>>)>,
    dim: Option<usize>,
}

impl Assembler {
    fn push(
        &mut self,
        word: &str,
        period: &str,
        occ_id: &str,
        layer: usize,
        values: &[f32],
        location: &str,
    ) -> Result<()> {
        let violation = |msg: String| ReprError::InvariantViolation(format!("{location}: {msg}"));
        if word.is_empty() || period.is_empty() || occ_id.is_empty() {
            return Err(violation(
                "word, period and occ_id must be non-empty".into(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(violation(format!("non-finite value at component {pos}")));
        }
        match self.dim {
            None => self.dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(violation(format!(
                    "dim {} differs from file dim {d}",
                    values.len()
                )));
            }
            _ => {}
        }
        let vector = Vector::from_f32(values).map_err(|e| violation(e.to_string()))?;
        let key = (word.to_string(), period.to_string(), occ_id.to_string());
        let slot = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                self.index.insert(key.clone(), self.pending.len());
                self.pending.push((key, Vec::new()));
                self.pending.len() - 1
            }
        };
        let layers = &mut self.pending[slot].1;
        if layers.len() <= layer {
            layers.resize(layer + 1, None);
        }
        if layers[layer].is_some() {
            return Err(violation(format!(
                "duplicate layer {layer} for occurrence {occ_id}"
            )));
        }
        layers[layer] = Some(vector);
        Ok(())
    }

    fn finish(self) -> Result<Vec<OccurrenceEmbedding>> {
        let mut depth = None;
        let mut out = Vec::with_capacity(self.pending.len());
        for ((word, period, occ_id), layers) in self.pending {
            if let Some(missing) = layers.iter().position(Option::is_none) {
                return Err(ReprError::InvariantViolation(format!(
                    "occurrence ({word}, {period}, {occ_id}) is missing layer {missing}"
                )));
            }
            match depth {
                None => depth = Some(layers.len()),
                Some(d) if d != layers.len() => {
                    return Err(ReprError::InvariantViolation(format!(
                        "occurrence ({word}, {period}, {occ_id}) has {} layers, expected {d}",
                        layers.len()
                    )));
                }
                _ => {}
            }
            let stack = LayerStack::new(layers.into_iter().flatten().collect()).map_err(|e| {
                ReprError::InvariantViolation(format!(
                    "occurrence ({word}, {period}, {occ_id}): {e}"
                ))
            })?;
            out.push(OccurrenceEmbedding {
                word,
                period,
                occ_id,
                stack,
            });
        }
        Ok(out)
    }
}

fn read_text(bytes: &[u8]) -> Result<Vec<OccurrenceEmbedding>> {
    let mut asm = Assembler::default();
    let mut offset = 0usize;
    for (lineno, raw) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
        let line_start = offset;
        offset += raw.len();
        let line = trim_line(raw);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let rec: TextRecord = serde_json::from_slice(line).map_err(|e| ReprError::Parse {
            offset: (line_start + e.column().saturating_sub(1)) as u64,
            line: Some(lineno + 1),
            message: e.to_string(),
        })?;
        let location = format!("line {}", lineno + 1);
        if rec.dim != rec.values.len() {
            return Err(ReprError::InvariantViolation(format!(
                "{location}: declared dim {} but {} values",
                rec.dim,
                rec.values.len()
            )));
        }
        asm.push(
            &rec.word,
            &rec.period,
            &rec.occ_id,
            rec.layer,
            &rec.values,
            &location,
        )?;
    }
    asm.finish()
}

fn trim_line(raw: &[u8]) -> &[u8] {
    let raw = raw.strip_suffix(b"\n").unwrap_or(raw);
    raw.strip_suffix(b"\r").unwrap_or(raw)
}

/// Little-endian cursor that reports the byte offset of any short read.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ReprError::Parse {
                offset: self.pos as u64,
                line: None,
                message: format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<&'a str> {
        let len = self.u32(what)? as usize;
        let start = self.pos;
        let raw = self.take(len, what)?;
        std::str::from_utf8(raw).map_err(|e| ReprError::Parse {
            offset: (start + e.valid_up_to()) as u64,
            line: None,
            message: format!("{what} is not valid UTF-8"),
        })
    }
}

fn read_binary(bytes: &[u8]) -> Result<Vec<OccurrenceEmbedding>> {
    let mut cur = Cursor {
        bytes,
        pos: MAGIC.len(),
    };
    let header_len = cur.u32("header length")? as usize;
    let header_start = cur.pos;
    let header: BinaryHeader =
        serde_json::from_slice(cur.take(header_len, "header")?).map_err(|e| ReprError::Parse {
            offset: header_start as u64,
            line: None,
            message: format!("bad header: {e}"),
        })?;
    if header.layers > 0 && !header.records.is_multiple_of(header.layers) {
        return Err(ReprError::InvariantViolation(format!(
            "header declares {} records, not a multiple of {} layers",
            header.records, header.layers
        )));
    }

    let mut asm = Assembler::default();
    let mut values = vec![0f32; header.dim];
    for r in 0..header.records {
        let record_start = cur.pos;
        let word = cur.string("word")?;
        let period = cur.string("period")?;
        let occ_id = cur.string("occ_id")?;
        let layer = cur.u16("layer")? as usize;
        let raw = cur.take(4 * header.dim, "values")?;
        for (slot, chunk) in values.iter_mut().zip(raw.chunks_exact(4)) {
            *slot = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        let location = format!("record {r} at byte {record_start}");
        asm.push(word, period, occ_id, layer, &values, &location)?;
    }
    if cur.pos != bytes.len() {
        return Err(ReprError::Parse {
            offset: cur.pos as u64,
            line: None,
            message: format!("{} trailing bytes after last record", bytes.len() - cur.pos),
        });
    }
    let occs = asm.finish()?;
    if let Some(first) = occs.first() {
        if first.stack.layers().len() != header.layers {
            return Err(ReprError::InvariantViolation(format!(
                "header declares {} layers, records carry {}",
                header.layers,
                first.stack.layers().len()
            )));
        }
    }
    Ok(occs)
}
