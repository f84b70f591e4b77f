//! Similarity gap between gendered and neutral pronoun sets toward a probe.
//!
//! For a layer range `[m:n]` every word is represented by the mean of its
//! layer vectors `m..=n`, and
//!
//! ```text
//! d = mean_{w in gendered} cos(p, w) - mean_{w in neutral} cos(p, w)
//! ```
//!
//! Positive `d` means the gendered forms sit closer to the probe. Sums run
//! in a fixed order (words sorted, layers ascending) so results are
//! bit-reproducible and independent of how the word lists were ordered.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{DumpError, EmbeddingDump, WordEmbeddingEntry};

#[derive(Debug, Error, PartialEq)]
pub enum GapError {
    #[error("layer range {m}:{n} is invalid for a dump with {num_layers} layers")]
    RangeOutOfBounds { m: usize, n: usize, num_layers: usize },
    #[error("cosine of a zero vector (word `{0}`)")]
    ZeroVector(String),
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("invalid word sets: {0}")]
    InvalidSets(String),
}

/// Inclusive layer range `[m:n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LayerRange {
    pub m: usize,
    pub n: usize,
}

impl LayerRange {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    /// `0:L-1`.
    pub fn full(num_layers: usize) -> Self {
        Self::new(0, num_layers.saturating_sub(1))
    }

    pub fn check(&self, num_layers: usize) -> Result<(), GapError> {
        if self.m <= self.n && self.n < num_layers {
            Ok(())
        } else {
            Err(GapError::RangeOutOfBounds {
                m: self.m,
                n: self.n,
                num_layers,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.n - self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every `(m, n)` with `m <= n < num_layers`, sorted.
    pub fn all(num_layers: usize) -> impl Iterator<Item = LayerRange> {
        (0..num_layers).flat_map(move |m| (m..num_layers).map(move |n| LayerRange::new(m, n)))
    }
}

impl std::str::FromStr for LayerRange {
    type Err = String;

    /// Parses `m:n`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, n) = s
            .split_once(':')
            .ok_or_else(|| format!("expected m:n, got `{s}`"))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid layer index `{x}`"))
        };
        let range = LayerRange::new(parse(m)?, parse(n)?);
        if range.m > range.n {
            return Err(format!("range start {} exceeds end {}", range.m, range.n));
        }
        Ok(range)
    }
}

impl std::fmt::Display for LayerRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.m, self.n)
    }
}

/// Probe word plus the two pronoun sets being compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSets {
    pub probe: String,
    pub gendered: Vec<String>,
    pub neutral: Vec<String>,
}

pub const DEFAULT_PROBE: &str = "person";
pub const DEFAULT_GENDERED: [&str; 8] = ["she", "her", "hers", "herself", "he", "him", "his", "himself"];
pub const DEFAULT_NEUTRAL: [&str; 5] = ["xe", "xem", "xyr", "xyrs", "xemself"];

impl Default for WordSets {
    fn default() -> Self {
        Self::new(DEFAULT_PROBE, &DEFAULT_GENDERED, &DEFAULT_NEUTRAL)
    }
}

impl WordSets {
    pub fn new<S: AsRef<str>>(probe: &str, gendered: &[S], neutral: &[S]) -> Self {
        Self {
            probe: probe.to_string(),
            gendered: gendered.iter().map(|s| s.as_ref().to_string()).collect(),
            neutral: neutral.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Same probe, roles of the two sets exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            probe: self.probe.clone(),
            gendered: self.neutral.clone(),
            neutral: self.gendered.clone(),
        }
    }

    /// Probe, gendered and neutral words in that order.
    pub fn all_words(&self) -> Vec<&str> {
        std::iter::once(self.probe.as_str())
            .chain(self.gendered.iter().map(String::as_str))
            .chain(self.neutral.iter().map(String::as_str))
            .collect()
    }

    pub fn validate(&self, dump: &EmbeddingDump) -> Result<(), GapError> {
        let invalid = |msg: String| Err(GapError::InvalidSets(msg));
        if self.gendered.is_empty() || self.neutral.is_empty() {
            return invalid("both word sets must be nonempty".into());
        }
        let g: BTreeSet<&str> = self.gendered.iter().map(String::as_str).collect();
        let n: BTreeSet<&str> = self.neutral.iter().map(String::as_str).collect();
        if g.len() != self.gendered.len() || n.len() != self.neutral.len() {
            return invalid("a word is listed twice within one set".into());
        }
        if let Some(w) = g.intersection(&n).next() {
            return invalid(format!("`{w}` is in both sets"));
        }
        if g.contains(self.probe.as_str()) || n.contains(self.probe.as_str()) {
            return invalid(format!("probe `{}` is also in a pronoun set", self.probe));
        }
        for w in self.all_words() {
            dump.entry(w)?;
        }
        Ok(())
    }
}

/// Component-wise mean of `layer_vectors[m..=n]`.
pub fn range_vector(entry: &WordEmbeddingEntry, range: LayerRange) -> Result<Vec<f64>, GapError> {
    range.check(entry.layer_vectors.len())?;
    let layers = &entry.layer_vectors[range.m..=range.n];
    let mut sum = vec![0.0; layers[0].len()];
    for v in layers {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let count = layers.len() as f64;
    Ok(sum.into_iter().map(|s| s / count).collect())
}

/// Mean of `range_vector` over all `L(L+1)/2` consecutive ranges of the entry.
pub fn full_average_vector(entry: &WordEmbeddingEntry) -> Result<Vec<f64>, GapError> {
    let num_layers = entry.layer_vectors.len();
    let dim = entry.layer_vectors.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for range in LayerRange::all(num_layers) {
        for (s, x) in sum.iter_mut().zip(range_vector(entry, range)?) {
            *s += x;
        }
        count += 1;
    }
    if count == 0 {
        return Err(GapError::RangeOutOfBounds {
            m: 0,
            n: 0,
            num_layers,
        });
    }
    Ok(sum.into_iter().map(|s| s / count as f64).collect())
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, GapError> {
    if u.len() != v.len() {
        return Err(GapError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(GapError::ZeroVector(String::new()));
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

fn sorted(words: &[String]) -> Vec<&str> {
    let mut w: Vec<&str> = words.iter().map(String::as_str).collect();
    w.sort_unstable();
    w
}

fn gap_with(
    dump: &EmbeddingDump,
    sets: &WordSets,
    vector_of: impl Fn(&WordEmbeddingEntry) -> Result<Vec<f64>, GapError>,
) -> Result<f64, GapError> {
    sets.validate(dump)?;
    let probe = vector_of(dump.entry(&sets.probe)?)?;
    let mean_cos = |words: &[String]| -> Result<f64, GapError> {
        let words = sorted(words);
        let mut total = 0.0;
        for w in &words {
            let v = vector_of(dump.entry(w)?)?;
            total += cosine(&probe, &v).map_err(|e| match e {
                GapError::ZeroVector(_) => {
                    let culprit = if probe.iter().all(|x| *x == 0.0) { &sets.probe } else { *w };
                    GapError::ZeroVector(culprit.to_string())
                }
                other => other,
            })?;
        }
        Ok(total / words.len() as f64)
    };
    Ok(mean_cos(&sets.gendered)? - mean_cos(&sets.neutral)?)
}

/// `d` for a single layer range.
pub fn gap(dump: &EmbeddingDump, sets: &WordSets, range: LayerRange) -> Result<f64, GapError> {
    range.check(dump.num_layers)?;
    gap_with(dump, sets, |e| range_vector(e, range))
}

/// `d` computed on [`full_average_vector`] representations.
pub fn gap_full_average(dump: &EmbeddingDump, sets: &WordSets) -> Result<f64, GapError> {
    gap_with(dump, sets, full_average_vector)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCell {
    pub m: usize,
    pub n: usize,
    pub d: f64,
}

/// `d` for every consecutive layer range, sorted by `(m, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapGrid {
    pub num_layers: usize,
    pub cells: Vec<GapCell>,
}

impl GapGrid {
    pub fn expected_cells(num_layers: usize) -> usize {
        num_layers * (num_layers + 1) / 2
    }

    pub fn get(&self, m: usize, n: usize) -> Option<f64> {
        self.cells.iter().find(|c| c.m == m && c.n == n).map(|c| c.d)
    }

    pub fn max_abs(&self) -> f64 {
        self.cells.iter().fold(0.0, |acc, c| acc.max(c.d.abs()))
    }

    pub fn negated(&self) -> Self {
        Self {
            num_layers: self.num_layers,
            cells: self
                .cells
                .iter()
                .map(|c| GapCell { d: -c.d, ..*c })
                .collect(),
        }
    }

    /// CSV with header `m,n,d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,d\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{}", c.m, c.n, c.d);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    /// Parses the CSV form back, checking shape and ordering.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "m,n,d" => {}
            other => return Err(format!("expected header `m,n,d`, found {other:?}")),
        }
        let mut cells = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = i + 2;
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(format!("row {row}: expected 3 columns"));
            }
            let m = cols[0].parse().map_err(|_| format!("row {row}: bad m"))?;
            let n = cols[1].parse().map_err(|_| format!("row {row}: bad n"))?;
            let d: f64 = cols[2].parse().map_err(|_| format!("row {row}: bad d"))?;
            if m > n || !d.is_finite() {
                return Err(format!("row {row}: invalid cell {m},{n},{d}"));
            }
            cells.push(GapCell { m, n, d });
        }
        let num_layers = cells.iter().map(|c| c.n + 1).max().unwrap_or(0);
        let grid = GapGrid { num_layers, cells };
        let expected: Vec<(usize, usize)> = LayerRange::all(num_layers).map(|r| (r.m, r.n)).collect();
        let found: Vec<(usize, usize)> = grid.cells.iter().map(|c| (c.m, c.n)).collect();
        if expected != found {
            return Err(format!(
                "grid is not a complete sorted triangle for {num_layers} layers"
            ));
        }
        Ok(grid)
    }
}

pub fn gap_grid(dump: &EmbeddingDump, sets: &WordSets) -> Result<GapGrid, GapError> {
    sets.validate(dump)?;
    let cells = LayerRange::all(dump.num_layers)
        .map(|r| {
            Ok(GapCell {
                m: r.m,
                n: r.n,
                d: gap(dump, sets, r)?,
            })
        })
        .collect::<Result<Vec<_>, GapError>>()?;
    Ok(GapGrid {
        num_layers: dump.num_layers,
        cells,
    })
}
