//! Inter-annotator agreement: Krippendorff's alpha, Cohen's weighted kappa
//! and raw agreement counts. Label 0 is missing data throughout.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{AnnotationRecord, GoldError, Result, MAX_LABEL};

const K: usize = MAX_LABEL as usize;

/// Difference function between two labels for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    Nominal,
    Ordinal,
    Interval,
}

impl AlphaMetric {
    pub const ALL: [AlphaMetric; 3] = [
        AlphaMetric::Nominal,
        AlphaMetric::Ordinal,
        AlphaMetric::Interval,
    ];
}

impl fmt::Display for AlphaMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaMetric::Nominal => "nominal",
            AlphaMetric::Ordinal => "ordinal",
            AlphaMetric::Interval => "interval",
        })
    }
}

impl FromStr for AlphaMetric {
    type Err = GoldError;

    fn from_str(s: &str) -> Result<Self> {
        AlphaMetric::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| GoldError::InsufficientData(format!("unknown alpha metric {s:?}")))
    }
}

/// Disagreement weights for weighted kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaWeights {
    Linear,
    Quadratic,
}

impl KappaWeights {
    pub const ALL: [KappaWeights; 2] = [KappaWeights::Linear, KappaWeights::Quadratic];

    fn weight(self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j) as f64 / (K - 1) as f64;
        match self {
            KappaWeights::Linear => d,
            KappaWeights::Quadratic => d * d,
        }
    }
}

impl fmt::Display for KappaWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaWeights::Linear => "linear",
            KappaWeights::Quadratic => "quadratic",
        })
    }
}

/// Krippendorff's alpha over labels 1..=4 from the coincidence matrix.
///
/// Items with fewer than two non-zero labels carry no pairable values and
/// are skipped. Fails when no item is pairable or when every pairable
/// value is the same label.
pub fn krippendorff_alpha(records: &[AnnotationRecord], metric: AlphaMetric) -> Result<f64> {
    let mut coincidence = [[0.0f64; K]; K];
    for r in records {
        let mut counts = [0usize; K];
        for s in r.usable() {
            counts[usize::from(s) - 1] += 1;
        }
        let m: usize = counts.iter().sum();
        if m < 2 {
            continue;
        }
        let scale = 1.0 / (m - 1) as f64;
        for c in 0..K {
            for k in 0..K {
                let pairs = if c == k {
                    counts[c] * counts[c].saturating_sub(1)
                } else {
                    counts[c] * counts[k]
                };
                coincidence[c][k] += pairs as f64 * scale;
            }
        }
    }

    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n == 0.0 {
        return Err(GoldError::InsufficientData(
            "no item has two or more non-zero labels".into(),
        ));
    }

    let delta = |c: usize, k: usize| -> f64 {
        if c == k {
            return 0.0;
        }
        match metric {
            AlphaMetric::Nominal => 1.0,
            AlphaMetric::Interval => {
                let d = c as f64 - k as f64;
                d * d
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = (c.min(k), c.max(k));
                let between: f64 = marginals[lo..=hi].iter().sum();
                let d = between - (marginals[c] + marginals[k]) / 2.0;
                d * d
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..K {
        for k in 0..K {
            let d = delta(c, k);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected == 0.0 {
        return Err(GoldError::InsufficientData(
            "all pairable labels are identical, expected disagreement is zero".into(),
        ));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Cohen's weighted kappa between two annotator columns over the same items,
/// using only items where both labels are non-zero.
pub fn weighted_kappa(a: &[u8], b: &[u8], weights: KappaWeights) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GoldError::LengthMismatch(a.len(), b.len()));
    }
    let mut table = [[0usize; K]; K];
    let mut n = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x > MAX_LABEL || y > MAX_LABEL {
            return Err(GoldError::InvalidLabel { label: x.max(y) });
        }
        if x == 0 || y == 0 {
            continue;
        }
        table[usize::from(x) - 1][usize::from(y) - 1] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(GoldError::InsufficientData(
            "no item labelled by both annotators".into(),
        ));
    }
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..K).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let nf = n as f64;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..K {
        for j in 0..K {
            let w = weights.weight(i, j);
            observed += w * table[i][j] as f64 / nf;
            expected += w * (rows[i] as f64 / nf) * (cols[j] as f64 / nf);
        }
    }
    if expected == 0.0 {
        return Err(GoldError::InsufficientData(
            "both annotators used one and the same label, chance disagreement is zero".into(),
        ));
    }
    Ok(1.0 - observed / expected)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseKappa {
    /// Zero-based annotator indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub kappa: f64,
}

fn annotator_count(records: &[AnnotationRecord]) -> usize {
    records.iter().map(|r| r.scores.len()).max().unwrap_or(0)
}

fn column(records: &[AnnotationRecord], idx: usize) -> Vec<u8> {
    records
        .iter()
        .map(|r| r.scores.get(idx).copied().unwrap_or(0))
        .collect()
}

/// Weighted kappa for every annotator pair. Records with fewer annotators
/// than the widest record count as 0 in the missing positions.
pub fn pairwise_kappas(
    records: &[AnnotationRecord],
    weights: KappaWeights,
) -> Result<Vec<PairwiseKappa>> {
    let n = annotator_count(records);
    if n < 2 {
        return Err(GoldError::InsufficientData(format!(
            "{n} annotator(s); need two"
        )));
    }
    let columns: Vec<Vec<u8>> = (0..n).map(|i| column(records, i)).collect();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            out.push(PairwiseKappa {
                a,
                b,
                kappa: weighted_kappa(&columns[a], &columns[b], weights)?,
            });
        }
    }
    Ok(out)
}

/// Raw agreement over sentence pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub items: usize,
    /// Items on which every annotator gave the same label, 0 included.
    pub unanimous: usize,
    pub agreement_rate: f64,
    /// Counts of annotator pairs that disagreed, keyed `"lo-hi"` by the two
    /// labels. Pairs involving a 0 are not counted.
    pub disagreements: BTreeMap<String, usize>,
    /// `disagreements` as fractions of their total.
    pub disagreement_shares: BTreeMap<String, f64>,
}

pub fn agreement_report(records: &[AnnotationRecord]) -> AgreementReport {
    let mut unanimous = 0;
    let mut counts: BTreeMap<(u8, u8), usize> = BTreeMap::new();
    for r in records {
        if r.scores.windows(2).all(|w| w[0] == w[1]) {
            unanimous += 1;
            continue;
        }
        for (i, &x) in r.scores.iter().enumerate() {
            for &y in &r.scores[i + 1..] {
                if x != y && x != 0 && y != 0 {
                    *counts.entry((x.min(y), x.max(y))).or_default() += 1;
                }
            }
        }
    }
    let total: usize = counts.values().sum();
    let key = |(lo, hi): (u8, u8)| format!("{lo}-{hi}");
    AgreementReport {
        items: records.len(),
        unanimous,
        agreement_rate: if records.is_empty() {
            1.0
        } else {
            unanimous as f64 / records.len() as f64
        },
        disagreement_shares: counts
            .iter()
            .map(|(&p, &c)| (key(p), c as f64 / total as f64))
            .collect(),
        disagreements: counts.into_iter().map(|(p, c)| (key(p), c)).collect(),
    }
}
