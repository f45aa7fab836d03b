// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    baseline_scores, hybrid_score, prepare_for, report_for_scores, roc_auc, EvaluationReport,
    ScoreSet,
};
use crate::data::{EmbeddingPairSet, Label};
use crate::error::{Error, Result};
use crate::fit::{AffineOperator, ClusterModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub n_boot: usize,
    pub seed: u64,
    /// Reference AUC for relative accuracy; computed from the eval split's
    /// cosine baseline when absent.
    pub baseline_auc: Option<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            n_boot: super::DEFAULT_N_BOOT,
            seed: 0,
            baseline_auc: None,
        }
    }
}

/// Global operator versus per-cluster operators, on held-out and training pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// Global operator, eval split.
    pub a: EvaluationReport,
    /// Cluster operators, eval split.
    pub b: EvaluationReport,
    /// Global operator, training split.
    pub a1: EvaluationReport,
    /// Cluster operators, training split.
    pub b1: EvaluationReport,
    pub baseline_auc: f64,
    pub k: usize,
    pub fallback_clusters: usize,
}

/// Scores `set` with the operator of each pair's nearest centroid.
fn cluster_scores(model: &ClusterModel, set: &EmbeddingPairSet) -> Result<(ScoreSet, usize)> {
    let first = model
        .operators
        .first()
        .ok_or_else(|| Error::InvalidArgument("cluster model has no operators".into()))?;
    let set = prepare_for(first, set);
    let idx = set.indices_where(|r| r.label != Label::Unlabeled);
    let scored: Vec<super::HybridScore> = idx
        .par_iter()
        .map(|&i| {
            let r = set.record(i);
            hybrid_score(&model.operators[model.route(&r.x)], &r.x, &r.x_prime)
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

fn global_scores(op: &AffineOperator, set: &EmbeddingPairSet) -> Result<(ScoreSet, usize)> {
    super::hybrid_scores(op, set)
}

/// Evaluates the four scenarios. Unseen pairs are routed to the nearest
/// centroid of their (normalized) source embedding.
pub fn scenario_eval(
    global: &AffineOperator,
    clusters: &ClusterModel,
    train: &EmbeddingPairSet,
    eval: &EmbeddingPairSet,
    opts: &ScenarioOptions,
) -> Result<ScenarioReport> {
    let baseline_auc = match opts.baseline_auc {
        Some(b) => b,
        None => roc_auc(&baseline_scores(eval)?)?,
    };
    let report = |(scores, degenerate): (ScoreSet, usize)| -> Result<EvaluationReport> {
        let mut r = report_for_scores(&scores, Some(baseline_auc), opts.n_boot, opts.seed)?;
        r.degenerate_scores = degenerate;
        Ok(r)
    };
    Ok(ScenarioReport {
        a: report(global_scores(global, eval)?)?,
        b: report(cluster_scores(clusters, eval)?)?,
        a1: report(global_scores(global, train)?)?,
        b1: report(cluster_scores(clusters, train)?)?,
        baseline_auc,
        k: clusters.k(),
        fallback_clusters: clusters.fallback.iter().filter(|&&f| f).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_cluster_operators, fit_operator, FitConfig};
    use crate::synth::{paraphrase_corpus, CorpusSpec};

    #[test]
    fn identical_operators_give_identical_reports() {
        let train = paraphrase_corpus(&CorpusSpec {
            positives: 150,
            negatives: 150,
            split: 11,
            ..CorpusSpec::default()
        });
        let eval = paraphrase_corpus(&CorpusSpec {
            positives: 100,
            negatives: 100,
            split: 12,
            ..CorpusSpec::default()
        });
        let cfg = FitConfig::default();
        let global = fit_operator(&train, &cfg).unwrap();
        let mut model = fit_cluster_operators(&train, 3, 5, &cfg).unwrap();
        model.operators = vec![global.clone(); 3];
        let opts = ScenarioOptions {
            n_boot: 50,
            seed: 1,
            baseline_auc: None,
        };
        let rep = scenario_eval(&global, &model, &train, &eval, &opts).unwrap();
        assert_eq!(rep.a, rep.b);
        assert_eq!(rep.a1, rep.b1);
        let base = rep.baseline_auc;
        assert_eq!(base, roc_auc(&baseline_scores(&eval).unwrap()).unwrap());
        let rel = rep.a.relative_accuracy_pct.unwrap();
        assert!((rel - (rep.a.auc - 0.5) / (base - 0.5) * 100.0).abs() < 1e-12);
    }
}
