// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cosine_score, prepare_for};
use crate::data::{io_err, EmbeddingPairSet, Label};
use crate::error::Result;
use crate::fit::AffineOperator;
use crate::xai::{pairwise_angle, residual_error};

/// One point of the (angle, residual, cosine) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorRow {
    /// Absent when either vector is zero.
    pub theta_pair_deg: Option<f64>,
    pub residual_error: f64,
    pub cosine: f64,
    pub label: Label,
}

pub fn corridor_export(pairs: &EmbeddingPairSet, op: &AffineOperator) -> Result<Vec<CorridorRow>> {
    let pairs = prepare_for(op, pairs);
    pairs
        .records()
        .par_iter()
        .map(|r| {
            Ok(CorridorRow {
                theta_pair_deg: pairwise_angle(&r.x, &r.x_prime).ok(),
                residual_error: residual_error(op, &r.x, &r.x_prime)?,
                cosine: cosine_score(&r.x, &r.x_prime),
                label: r.label,
            })
        })
        .collect()
}

/// CSV with a leading `# threshold=<T>` line (omitted when `threshold` is
/// `None`). Labels are written as 1, 0 or blank.
pub fn write_corridor_csv(path: &Path, rows: &[CorridorRow], threshold: Option<f64>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    let mut body = String::new();
    if let Some(t) = threshold {
        body.push_str(&format!("# threshold={t}\n"));
    }
    body.push_str("theta_pair_deg,residual_error,cosine,label\n");
    for row in rows {
        let label = match row.label {
            Label::Positive => "1",
            Label::Negative => "0",
            Label::Unlabeled => "",
        };
        let theta = row
            .theta_pair_deg
            .map(|v| v.to_string())
            .unwrap_or_default();
        body.push_str(&format!(
            "{theta},{},{},{label}\n",
            row.residual_error, row.cosine
        ));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::fit::{fit_operator, FitConfig};
    use crate::synth::{paraphrase_corpus, planted_affine, CorpusSpec};

    #[test]
    fn empty_set_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let set = EmbeddingPairSet::new("e", 3, vec![]).unwrap();
        let rows = corridor_export(&set, &AffineOperator::identity(3)).unwrap();
        write_corridor_csv(&path, &rows, Some(1.5)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# threshold=1.5\ntheta_pair_deg,residual_error,cosine,label\n"
        );
    }

    #[test]
    fn on_trajectory_pairs_have_no_residual() {
        let p = planted_affine(6, 60, 2);
        let cfg = FitConfig {
            lambda_ortho: 1.0,
            lambda_equiv: 0.0,
            tau: 1e-8,
            normalize_input: false,
            ..FitConfig::default()
        };
        let op = fit_operator(&p.set, &cfg).unwrap();
        let rows = corridor_export(&p.set, &op).unwrap();
        assert!(rows.iter().all(|r| r.residual_error < 1e-9));
    }

    #[test]
    fn rows_match_recomputation() {
        let set = paraphrase_corpus(&CorpusSpec {
            positives: 40,
            negatives: 40,
            ..CorpusSpec::default()
        });
        let op = fit_operator(&set, &FitConfig::default()).unwrap();
        let rows = corridor_export(&set, &op).unwrap();
        assert_eq!(rows.len(), set.len());
        let (a, t) = (op.a(), op.t());
        for (row, rec) in rows.iter().zip(set.records()) {
            let n = set.dim();
            let mut res = 0.0;
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let mut p = t[i];
                for j in 0..n {
                    p += a.get(i, j) * rec.x[j];
                }
                res += (rec.x_prime[i] - p).powi(2);
                dot += rec.x[i] * rec.x_prime[i];
                nx += rec.x[i] * rec.x[i];
                ny += rec.x_prime[i] * rec.x_prime[i];
            }
            let cos = dot / (nx.sqrt() * ny.sqrt());
            assert!((row.residual_error - res.sqrt()).abs() < 1e-12);
            assert!((row.cosine - cos).abs() < 1e-12);
            let theta = row.theta_pair_deg.unwrap();
            assert!((theta - cos.clamp(-1.0, 1.0).acos().to_degrees()).abs() < 1e-9);
            assert_eq!(row.label, rec.label);
        }
    }
}
