// SPDX-License-Identifier: MIT OR Apache-2.0

//! Embedding-pair corpora and their on-disk formats.

mod csv_format;
mod lage;
mod lago;

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};

pub use lago::{load_operator, save_operator};

/// Stabilizer in `x / (‖x‖₂ + ε)`.
pub const NORMALIZE_EPS: f64 = 1e-9;

/// Tolerance on `|‖x‖₂ − 1|` for a set to count as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Raw similarity scores at or above this value are positives.
pub const DEFAULT_BINARIZE_THRESHOLD: f32 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
    Unlabeled,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
            Label::Unlabeled => 255,
        }
    }

    pub fn from_byte(b: u8) -> Option<Label> {
        match b {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            255 => Some(Label::Unlabeled),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub label: Label,
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    /// Raw annotator score on the 0–5 scale, stored at file precision.
    pub raw_score: Option<f32>,
}

impl PairRecord {
    pub fn new(label: Label, x: Vec<f64>, x_prime: Vec<f64>) -> Self {
        Self {
            label,
            x,
            x_prime,
            raw_score: None,
        }
    }

    pub fn with_score(mut self, score: f32) -> Self {
        self.raw_score = Some(score);
        self
    }
}

/// File encodings understood by [`load_pairs`] and [`save_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFormat {
    Binary,
    Csv,
}

impl PairFormat {
    /// `.csv` selects CSV; anything else is the binary format.
    pub fn from_path(path: &Path) -> PairFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => PairFormat::Csv,
            _ => PairFormat::Binary,
        }
    }
}

/// An ordered corpus of `(x, x′, label)` pairs sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPairSet {
    name: String,
    dim: usize,
    records: Vec<PairRecord>,
    normalized: bool,
}

impl EmbeddingPairSet {
    /// Validates dimensions and finiteness. The normalized flag is set when
    /// every vector already has unit norm within [`UNIT_NORM_TOL`].
    pub fn new(name: impl Into<String>, dim: usize, records: Vec<PairRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != dim || r.x_prime.len() != dim {
                return Err(Error::shape(
                    "EmbeddingPairSet::new",
                    format!(
                        "record {i} has dimensions ({}, {}), expected {dim}",
                        r.x.len(),
                        r.x_prime.len()
                    ),
                ));
            }
            if r.x.iter().chain(&r.x_prime).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("record {i}"),
                });
            }
            if let Some(s) = r.raw_score {
                if !s.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("score of record {i}"),
                    });
                }
            }
        }
        let normalized = !records.is_empty()
            && records.iter().all(|r| {
                (norm2(&r.x) - 1.0).abs() <= UNIT_NORM_TOL
                    && (norm2(&r.x_prime) - 1.0).abs() <= UNIT_NORM_TOL
            });
        Ok(Self {
            name: name.into(),
            dim,
            records,
            normalized,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &PairRecord {
        &self.records[i]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn has_labels(&self) -> bool {
        self.records.iter().any(|r| r.label != Label::Unlabeled)
    }

    pub fn has_scores(&self) -> bool {
        self.records.iter().any(|r| r.raw_score.is_some())
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        self.indices_where(|r| r.label.is_positive())
    }

    pub fn indices_where(&self, pred: impl Fn(&PairRecord) -> bool) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| pred(r))
            .map(|(i, _)| i)
            .collect()
    }

    /// Source and target matrices (`N×n`) for the given record indices, in order.
    pub fn matrices(&self, indices: &[usize]) -> (Matrix, Matrix) {
        let n = self.dim;
        let mut xs = Vec::with_capacity(indices.len() * n);
        let mut ys = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            xs.extend_from_slice(&self.records[i].x);
            ys.extend_from_slice(&self.records[i].x_prime);
        }
        (
            Matrix::from_row_major(indices.len(), n, xs).expect("validated on construction"),
            Matrix::from_row_major(indices.len(), n, ys).expect("validated on construction"),
        )
    }

    /// A new set holding the given records, in the given order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> EmbeddingPairSet {
        EmbeddingPairSet {
            name: name.into(),
            dim: self.dim,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            normalized: self.normalized && !indices.is_empty(),
        }
    }

    /// Relabels every scored record: positive iff `raw_score ≥ threshold`.
    /// Unscored records keep their label.
    pub fn binarize(&self, threshold: f32) -> EmbeddingPairSet {
        let mut out = self.clone();
        for r in &mut out.records {
            if let Some(s) = r.raw_score {
                r.label = if s >= threshold {
                    Label::Positive
                } else {
                    Label::Negative
                };
            }
        }
        out
    }
}

/// Result of [`l2_normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub set: EmbeddingPairSet,
    /// Records in which `x` or `x′` was the zero vector.
    pub degenerate: Vec<usize>,
}

/// Replaces each vector by `v / (‖v‖₂ + ε)`.
///
/// A set that is already normalized is returned unchanged, which makes the
/// operation idempotent. Zero vectors stay zero and their records are
/// reported as degenerate.
pub fn l2_normalize(set: &EmbeddingPairSet) -> Normalized {
    if set.normalized {
        return Normalized {
            set: set.clone(),
            degenerate: Vec::new(),
        };
    }
    let mut out = set.clone();
    let mut degenerate = Vec::new();
    for (i, r) in out.records.iter_mut().enumerate() {
        let zx = normalize_in_place(&mut r.x);
        let zy = normalize_in_place(&mut r.x_prime);
        if zx || zy {
            degenerate.push(i);
        }
    }
    out.normalized = !out.records.is_empty();
    Normalized {
        set: out,
        degenerate,
    }
}

/// Returns true if `v` was the zero vector.
pub fn normalize_in_place(v: &mut [f64]) -> bool {
    let norm = norm2(v);
    let denom = norm + NORMALIZE_EPS;
    for e in v.iter_mut() {
        *e /= denom;
    }
    norm == 0.0
}

pub fn load_pairs(path: &Path, format: PairFormat) -> Result<EmbeddingPairSet> {
    match format {
        PairFormat::Binary => lage::read(path),
        PairFormat::Csv => csv_format::read(path),
    }
}

pub fn save_pairs(set: &EmbeddingPairSet, path: &Path, format: PairFormat) -> Result<()> {
    match format {
        PairFormat::Binary => lage::write(set, path),
        PairFormat::Csv => csv_format::write(set, path),
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cosine, distance};
    use crate::synth::unit_vector;

    fn set_of(vs: Vec<(Vec<f64>, Vec<f64>)>) -> EmbeddingPairSet {
        let n = vs[0].0.len();
        let recs = vs
            .into_iter()
            .map(|(x, y)| PairRecord::new(Label::Positive, x, y))
            .collect();
        EmbeddingPairSet::new("t", n, recs).unwrap()
    }

    #[test]
    fn three_four_five() {
        let s = set_of(vec![(vec![3.0, 4.0], vec![0.0, 2.0])]);
        let out = l2_normalize(&s);
        let x = &out.set.record(0).x;
        assert!((x[0] - 0.6).abs() < 1e-9 && (x[1] - 0.8).abs() < 1e-9);
        assert!(out.set.is_normalized());
        assert!(out.degenerate.is_empty());
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let s = set_of(vec![
            (vec![0.0, 0.0], vec![1.0, 1.0]),
            (vec![1.0, 0.0], vec![0.0, 1.0]),
        ]);
        let out = l2_normalize(&s);
        assert_eq!(out.set.record(0).x, vec![0.0, 0.0]);
        assert_eq!(out.degenerate, vec![0]);
    }

    #[test]
    fn high_dimensional_norms() {
        let recs = (0..20)
            .map(|i| {
                let x: Vec<f64> = unit_vector(768, i).iter().map(|v| v * 3.7).collect();
                let y: Vec<f64> = unit_vector(768, 1000 + i).iter().map(|v| v * 0.2).collect();
                PairRecord::new(Label::Positive, x, y)
            })
            .collect();
        let s = EmbeddingPairSet::new("hd", 768, recs).unwrap();
        let out = l2_normalize(&s);
        for r in out.set.records() {
            for v in [&r.x, &r.x_prime] {
                let n = norm2(v);
                assert!((1.0 - 1e-6..=1.0).contains(&n), "{n}");
            }
        }
        // Idempotence.
        let twice = l2_normalize(&out.set);
        assert_eq!(twice.set, out.set);
    }

    #[test]
    fn distance_cosine_identity_for_unit_vectors() {
        for i in 0..10 {
            let a = unit_vector(32, i);
            let b = unit_vector(32, 50 + i);
            let lhs = distance(&a, &b).powi(2);
            let rhs = 2.0 * (1.0 - cosine(&a, &b).unwrap());
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn binarize_at_three() {
        let recs = vec![
            PairRecord::new(Label::Unlabeled, vec![1.0], vec![1.0]).with_score(3.0),
            PairRecord::new(Label::Unlabeled, vec![1.0], vec![1.0]).with_score(2.8),
            PairRecord::new(Label::Unlabeled, vec![1.0], vec![1.0]).with_score(4.6),
            PairRecord::new(Label::Unlabeled, vec![1.0], vec![1.0]),
        ];
        let s = EmbeddingPairSet::new("b", 1, recs)
            .unwrap()
            .binarize(DEFAULT_BINARIZE_THRESHOLD);
        let labels: Vec<Label> = s.records().iter().map(|r| r.label).collect();
        assert_eq!(
            labels,
            vec![
                Label::Positive,
                Label::Negative,
                Label::Positive,
                Label::Unlabeled
            ]
        );
    }

    #[test]
    fn construction_rejects_bad_records() {
        let bad_dim = vec![PairRecord::new(Label::Positive, vec![1.0, 2.0], vec![1.0])];
        assert!(EmbeddingPairSet::new("x", 2, bad_dim).is_err());
        let nan = vec![PairRecord::new(Label::Positive, vec![f64::NAN], vec![1.0])];
        assert!(EmbeddingPairSet::new("x", 1, nan).is_err());
    }
}
