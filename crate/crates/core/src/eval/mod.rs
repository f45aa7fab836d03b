// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scoring, ROC-AUC, bootstrap intervals, threshold calibration and
//! anomaly metrics.

mod corridor;
mod grid;
mod scenario;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{l2_normalize, EmbeddingPairSet, Label};
use crate::error::{Error, Result};
use crate::fit::AffineOperator;
use crate::linalg::{cosine, norm2};
use crate::xai::residual_error;

pub use corridor::{corridor_export, write_corridor_csv, CorridorRow};
pub use grid::{grid_search, write_grid_csv, GridRow, GridSpec};
pub use scenario::{scenario_eval, ScenarioOptions, ScenarioReport};

pub const DEFAULT_N_BOOT: usize = 1000;
pub const DEFAULT_PERCENTILE: f64 = 90.0;

/// Predictions shorter than this are treated as degenerate.
pub const MIN_PREDICTION_NORM: f64 = 1e-12;

/// Redraws allowed per bootstrap replicate when a resample lacks a class.
pub const MAX_BOOTSTRAP_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridScore {
    pub value: f64,
    /// The prediction (or `x′`) had near-zero norm; `value` is 0.
    pub degenerate: bool,
}

/// Cosine between the operator's prediction `A·x + t` and `x′`.
///
/// For unit `x′` this is `(x_pred/‖x_pred‖)·x′`. The identity operator
/// reproduces [`cosine_score`] bit for bit.
pub fn hybrid_score(op: &AffineOperator, x: &[f64], x_prime: &[f64]) -> Result<HybridScore> {
    if x_prime.len() != op.dim() {
        return Err(Error::shape(
            "hybrid_score",
            format!(
                "x' has {} entries, operator is {}-dimensional",
                x_prime.len(),
                op.dim()
            ),
        ));
    }
    let pred = op.apply(x)?;
    if norm2(&pred) < MIN_PREDICTION_NORM {
        return Ok(HybridScore {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(match cosine(&pred, x_prime) {
        Some(value) => HybridScore {
            value,
            degenerate: false,
        },
        None => HybridScore {
            value: 0.0,
            degenerate: true,
        },
    })
}

/// Plain cosine similarity of the raw pair; zero vectors score 0.
pub fn cosine_score(x: &[f64], x_prime: &[f64]) -> f64 {
    cosine(x, x_prime).unwrap_or(0.0)
}

/// Scores with parallel binary labels (`true` = positive).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::shape(
                "ScoreSet::new",
                format!("{} scores vs {} labels", scores.len(), labels.len()),
            ));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                context: "score".into(),
            });
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.labels.len() - pos)
    }
}

/// Returns the set normalized when the operator was fitted on normalized
/// input, borrowing it unchanged otherwise.
pub fn prepare_for<'a>(
    op: &AffineOperator,
    set: &'a EmbeddingPairSet,
) -> std::borrow::Cow<'a, EmbeddingPairSet> {
    if op.meta.config.normalize_input && !set.is_normalized() {
        std::borrow::Cow::Owned(l2_normalize(set).set)
    } else {
        std::borrow::Cow::Borrowed(set)
    }
}

/// Hybrid scores of the labeled pairs of `set` (unlabeled records skipped),
/// plus the number of degenerate predictions.
pub fn hybrid_scores(op: &AffineOperator, set: &EmbeddingPairSet) -> Result<(ScoreSet, usize)> {
    let set = prepare_for(op, set);
    let idx = set.indices_where(|r| r.label != Label::Unlabeled);
    let scored: Vec<HybridScore> = idx
        .par_iter()
        .map(|&i| {
            let r = set.record(i);
            hybrid_score(op, &r.x, &r.x_prime)
        })
        .collect::<Result<_>>()?;
    let degenerate = scored.iter().filter(|s| s.degenerate).count();
    let labels = idx
        .iter()
        .map(|&i| set.record(i).label.is_positive())
        .collect();
    Ok((
        ScoreSet::new(scored.into_iter().map(|s| s.value).collect(), labels)?,
        degenerate,
    ))
}

/// Cosine-baseline scores of the labeled pairs of `set`, after normalization.
pub fn baseline_scores(set: &EmbeddingPairSet) -> Result<ScoreSet> {
    hybrid_scores(&AffineOperator::identity(set.dim()), set).map(|(s, _)| s)
}

/// Rank-based (Mann–Whitney) ROC-AUC; tied scores count one half.
pub fn roc_auc(s: &ScoreSet) -> Result<f64> {
    let (pos, neg) = s.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.scores[a].total_cmp(&s.scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so
    // it stays integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && s.scores[order[j]] == s.scores[order[i]] {
            j += 1;
        }
        let twice_avg = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| s.labels[k]).count() as u128;
        twice_rank_sum += twice_avg * pos_in_group;
        i = j;
    }
    let p = pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapAuc {
    pub mean: f64,
    /// Sample standard deviation of the replicate AUCs (zero for one replicate).
    pub se: f64,
    /// 2.5 and 97.5 percentiles of the replicate AUCs.
    pub ci95: (f64, f64),
    pub n_boot: usize,
    /// Resamples discarded for lacking a class.
    pub redraws: usize,
}

/// Pair-level bootstrap of the AUC. Replicate `b` draws from its own ChaCha
/// stream, so the result depends only on `(s, n_boot, seed)`.
pub fn bootstrap_auc(s: &ScoreSet, n_boot: usize, seed: u64) -> Result<BootstrapAuc> {
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be at least 1".into()));
    }
    roc_auc(s)?;
    let n = s.len();
    let reps: Vec<(f64, usize)> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut redraws = 0;
            loop {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let sample = ScoreSet {
                    scores: idx.iter().map(|&i| s.scores[i]).collect(),
                    labels: idx.iter().map(|&i| s.labels[i]).collect(),
                };
                match roc_auc(&sample) {
                    Ok(auc) => return Ok((auc, redraws)),
                    Err(_) if redraws < MAX_BOOTSTRAP_REDRAWS => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let aucs: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let redraws = reps.iter().map(|r| r.1).sum();
    let mean = aucs.iter().sum::<f64>() / n_boot as f64;
    let se = if n_boot > 1 {
        (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n_boot - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapAuc {
        mean,
        se,
        ci95: (percentile(&aucs, 2.5)?, percentile(&aucs, 97.5)?),
        n_boot,
        redraws,
    })
}

/// Inclusive linear-interpolation percentile: with the values sorted
/// ascending, 1-based rank `h = 1 + (p/100)·(N − 1)` is interpolated between
/// the neighbouring order statistics.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "percentile of an empty sample".into(),
        ));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "percentile {p} outside [0, 100]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    Ok(if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    })
}

/// Residual threshold at percentile `p` of the legitimate pairs' errors.
pub fn calibrate_threshold(errors_of_positives: &[f64], p: f64) -> Result<f64> {
    percentile(errors_of_positives, p)
}

/// Residual errors `‖x′ − (A·x + t)‖₂` for every record of `set`, after the
/// same normalization the operator was fitted with.
pub fn residual_errors(op: &AffineOperator, set: &EmbeddingPairSet) -> Result<Vec<f64>> {
    let set = prepare_for(op, set);
    set.records()
        .par_iter()
        .map(|r| residual_error(op, &r.x, &r.x_prime))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyMetrics {
    /// Flagged anomalies / anomalies; absent when there are no anomalies.
    pub recall: Option<f64>,
    /// Flagged legitimate pairs / legitimate pairs; absent when there are none.
    pub fpr: Option<f64>,
    /// Flagged anomalies / flagged; absent when nothing was flagged.
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub threshold: f64,
    pub anomalies: usize,
    pub legitimate: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Flags pairs whose residual exceeds `threshold`.
///
/// Anomalies are the records labeled [`Label::Negative`]; positives are the
/// legitimate population. Unlabeled records are ignored.
pub fn detect_anomalies(
    op: &AffineOperator,
    pairs: &EmbeddingPairSet,
    threshold: f64,
) -> Result<AnomalyMetrics> {
    let errors = residual_errors(op, pairs)?;
    let labels: Vec<Label> = pairs.records().iter().map(|r| r.label).collect();
    anomaly_metrics(&errors, &labels, threshold)
}

/// [`detect_anomalies`] on precomputed residuals.
pub fn anomaly_metrics(errors: &[f64], labels: &[Label], threshold: f64) -> Result<AnomalyMetrics> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if errors.len() != labels.len() {
        return Err(Error::shape(
            "anomaly_metrics",
            format!("{} errors vs {} labels", errors.len(), labels.len()),
        ));
    }
    let (mut tp, mut fp, mut anomalies, mut legitimate) = (0, 0, 0, 0);
    for (&e, &l) in errors.iter().zip(labels) {
        let flagged = e > threshold;
        match l {
            Label::Negative => {
                anomalies += 1;
                tp += flagged as usize;
            }
            Label::Positive => {
                legitimate += 1;
                fp += flagged as usize;
            }
            Label::Unlabeled => {}
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let recall = ratio(tp, anomalies);
    let precision = ratio(tp, tp + fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(AnomalyMetrics {
        recall,
        fpr: ratio(fp, legitimate),
        precision,
        f1,
        threshold,
        anomalies,
        legitimate,
        true_positives: tp,
        false_positives: fp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub auc: f64,
    pub auc_se: f64,
    pub auc_ci95: (f64, f64),
    pub baseline_auc: Option<f64>,
    pub relative_accuracy_pct: Option<f64>,
    pub threshold: Option<f64>,
    pub anomaly_metrics: Option<AnomalyMetrics>,
    pub n_pairs: usize,
    pub degenerate_scores: usize,
}

/// `(auc − 0.5)/(baseline − 0.5)·100`.
pub fn relative_accuracy(auc: f64, baseline_auc: f64) -> f64 {
    (auc - 0.5) / (baseline_auc - 0.5) * 100.0
}

/// AUC of `scores` with its bootstrap standard error and interval.
pub fn report_for_scores(
    scores: &ScoreSet,
    baseline_auc: Option<f64>,
    n_boot: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let auc = roc_auc(scores)?;
    let boot = bootstrap_auc(scores, n_boot, seed)?;
    Ok(EvaluationReport {
        auc,
        auc_se: boot.se,
        auc_ci95: boot.ci95,
        baseline_auc,
        relative_accuracy_pct: baseline_auc.map(|b| relative_accuracy(auc, b)),
        threshold: None,
        anomaly_metrics: None,
        n_pairs: scores.len(),
        degenerate_scores: 0,
    })
}

/// Hybrid-score evaluation of `op` on the labeled pairs of `set`, with the
/// cosine baseline computed from the same pairs when `with_baseline`.
pub fn evaluate(
    op: &AffineOperator,
    set: &EmbeddingPairSet,
    n_boot: usize,
    seed: u64,
    with_baseline: bool,
) -> Result<EvaluationReport> {
    let (scores, degenerate) = hybrid_scores(op, set)?;
    let baseline = if with_baseline {
        Some(roc_auc(&baseline_scores(set)?)?)
    } else {
        None
    };
    let mut report = report_for_scores(&scores, baseline, n_boot, seed)?;
    report.degenerate_scores = degenerate;
    Ok(report)
}
