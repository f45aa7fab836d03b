// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;

use super::kmeans::kmeans;
use super::{fit_matrices, fit_operator, AffineOperator, FitConfig, FitFlag};
use crate::data::{l2_normalize, EmbeddingPairSet};
use crate::error::{Error, Result};
use crate::linalg::{cosine, Matrix};

pub const DEFAULT_K_NEIGHBORS: usize = 32;

/// Per-cluster operators over a k-means partition of the source embeddings.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    /// Cluster id of each input pair, in input order.
    pub assignments: Vec<usize>,
    /// `k×n` centroids, used to route unseen pairs.
    pub centroids: Matrix,
    pub operators: Vec<AffineOperator>,
    /// Clusters that inherited the global operator.
    pub fallback: Vec<bool>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.operators.len()
    }

    /// Nearest-centroid cluster of `x`.
    pub fn route(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..self.centroids.rows() {
            let d: f64 = self
                .centroids
                .row(c)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

/// Clusters all pairs by their source embedding, then fits one operator per
/// cluster on that cluster's positives.
///
/// Clusters with fewer than two positives (or whose fit fails) inherit the
/// global operator and are marked in `fallback`.
pub fn fit_cluster_operators(
    pairs: &EmbeddingPairSet,
    k: usize,
    seed: u64,
    cfg: &FitConfig,
) -> Result<ClusterModel> {
    cfg.validate(pairs.dim())?;
    if k == 0 || k > pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be between 1 and the number of pairs ({})",
            pairs.len()
        )));
    }
    let prepared;
    let pairs = if cfg.normalize_input && !pairs.is_normalized() {
        prepared = l2_normalize(pairs).set;
        &prepared
    } else {
        pairs
    };
    let all: Vec<usize> = (0..pairs.len()).collect();
    let (sources, _) = pairs.matrices(&all);
    let km = kmeans(&sources, k, seed)?;

    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            (0..pairs.len())
                .filter(|&i| km.assignments[i] == c && pairs.record(i).label.is_positive())
                .collect()
        })
        .collect();

    let fits: Vec<Option<AffineOperator>> = members
        .par_iter()
        .map(|idx| {
            if idx.len() < 2 {
                return None;
            }
            let (x, y) = pairs.matrices(idx);
            fit_matrices(&x, &y, cfg, false).ok()
        })
        .collect();

    let global = if fits.iter().any(Option::is_none) {
        let mut g = fit_operator(pairs, cfg)?;
        g.meta.degenerate_flags.push(FitFlag::ClusterFallback);
        Some(g)
    } else {
        None
    };
    let fallback: Vec<bool> = fits.iter().map(Option::is_none).collect();
    let operators = fits
        .into_iter()
        .map(|f| f.unwrap_or_else(|| global.clone().expect("global fitted for fallback")))
        .collect();
    Ok(ClusterModel {
        assignments: km.assignments,
        centroids: km.centroids,
        operators,
        fallback,
    })
}

/// Refits the operator on the `k_neighbors` positive pairs whose source
/// embeddings are closest in cosine distance to pair `pair_index`'s source.
///
/// The target pair is always part of its own neighbourhood. If fewer
/// positives exist than requested, all are used and the result carries
/// [`FitFlag::ShortNeighbourhood`]. A neighbourhood whose drift has rank
/// below `r` uses fewer generators ([`FitFlag::GeneratorsClamped`]).
pub fn fit_local_operator(
    pair_index: usize,
    pairs: &EmbeddingPairSet,
    k_neighbors: usize,
    cfg: &FitConfig,
) -> Result<AffineOperator> {
    if k_neighbors < 2 {
        return Err(Error::InvalidArgument(format!(
            "k_neighbors must be at least 2, got {k_neighbors}"
        )));
    }
    if pair_index >= pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "pair index {pair_index} out of range for {} pairs",
            pairs.len()
        )));
    }
    let prepared;
    let pairs = if cfg.normalize_input && !pairs.is_normalized() {
        prepared = l2_normalize(pairs).set;
        &prepared
    } else {
        pairs
    };
    let chosen = neighbourhood(pair_index, pairs, k_neighbors);
    let short = chosen.len() < k_neighbors;
    if chosen.len() < 2 {
        return Err(Error::TooFewPositives {
            required: 2,
            found: chosen.len(),
        });
    }
    let (x, y) = pairs.matrices(&chosen);
    let mut op = fit_matrices(&x, &y, cfg, true)?;
    if short {
        op.meta.degenerate_flags.push(FitFlag::ShortNeighbourhood);
    }
    Ok(op)
}

/// Target plus its nearest positives, returned in ascending index order.
pub(crate) fn neighbourhood(pair_index: usize, pairs: &EmbeddingPairSet, k: usize) -> Vec<usize> {
    let target = &pairs.record(pair_index).x;
    let mut candidates: Vec<(f64, usize)> = pairs
        .positive_indices()
        .into_iter()
        .filter(|&i| i != pair_index)
        .map(|i| {
            let d = cosine(&pairs.record(i).x, target).map_or(f64::INFINITY, |c| 1.0 - c);
            (d, i)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = candidates.into_iter().take(k - 1).map(|(_, i)| i).collect();
    chosen.push(pair_index);
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, PairRecord};
    use crate::synth::{planted_affine, two_planted_clusters};

    fn raw_cfg() -> FitConfig {
        FitConfig {
            r: 0,
            lambda_ortho: 1.0,
            lambda_equiv: 0.0,
            tau: 1e-8,
            normalize_input: false,
        }
    }

    #[test]
    fn single_cluster_equals_global_fit() {
        let p = planted_affine(6, 80, 4);
        let cfg = raw_cfg();
        let model = fit_cluster_operators(&p.set, 1, 7, &cfg).unwrap();
        let global = fit_operator(&p.set, &cfg).unwrap();
        assert_eq!(model.operators[0], global);
        assert_eq!(model.fallback, vec![false]);
    }

    #[test]
    fn two_planted_maps_are_separated() {
        let p = two_planted_clusters(8, 150, 21);
        let model = fit_cluster_operators(&p.set, 2, 3, &raw_cfg()).unwrap();
        for (c, op) in model.operators.iter().enumerate() {
            // Identify the planted map by majority membership.
            let members: Vec<usize> = (0..p.set.len())
                .filter(|&i| model.assignments[i] == c)
                .collect();
            let region = p.region[members[0]];
            assert!(members.iter().all(|&i| p.region[i] == region));
            let err = op.a().sub(&p.maps[region]).unwrap().frobenius_norm();
            assert!(err <= 1e-5, "cluster {c}: {err}");
        }
    }

    #[test]
    fn sparse_cluster_falls_back() {
        let mut recs: Vec<PairRecord> = planted_affine(3, 30, 5).set.records().to_vec();
        // A far-away singleton negative forms its own cluster.
        recs.push(PairRecord::new(
            Label::Negative,
            vec![100.0, 100.0, 100.0],
            vec![0.0, 0.0, 1.0],
        ));
        let set = EmbeddingPairSet::new("s", 3, recs).unwrap();
        let model = fit_cluster_operators(&set, 2, 1, &raw_cfg()).unwrap();
        assert_eq!(model.fallback.iter().filter(|&&f| f).count(), 1);
        let fb = model.fallback.iter().position(|&f| f).unwrap();
        assert!(model.operators[fb].meta.has_flag(FitFlag::ClusterFallback));
        assert!(fit_cluster_operators(&set, 40, 1, &raw_cfg()).is_err());
    }

    #[test]
    fn full_neighbourhood_equals_global_fit() {
        let p = planted_affine(5, 40, 8);
        let cfg = FitConfig {
            normalize_input: false,
            ..FitConfig::default()
        };
        let local = fit_local_operator(3, &p.set, p.set.len(), &cfg).unwrap();
        let global = fit_operator(&p.set, &cfg).unwrap();
        assert_eq!(local.a(), global.a());
        assert_eq!(local.t(), global.t());
    }

    #[test]
    fn local_operator_tracks_its_region() {
        let p = two_planted_clusters(8, 150, 33);
        let idx = (0..p.set.len()).find(|&i| p.region[i] == 1).unwrap();
        let op = fit_local_operator(idx, &p.set, 40, &raw_cfg()).unwrap();
        let err = op.a().sub(&p.maps[1]).unwrap().frobenius_norm();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn duplicated_pair_neighbourhood_is_prior_dominated() {
        let rec = PairRecord::new(Label::Positive, vec![0.6, 0.8, 0.0], vec![0.0, 0.8, 0.6]);
        let set = EmbeddingPairSet::new("dup", 3, vec![rec.clone(), rec.clone(), rec]).unwrap();
        let cfg = FitConfig {
            r: 2,
            ..FitConfig::default()
        };
        let op = fit_local_operator(0, &set, 8, &cfg).unwrap();
        let defect = op
            .a()
            .t_matmul(op.a())
            .unwrap()
            .sub(&Matrix::identity(3))
            .unwrap();
        assert!(defect.frobenius_norm() < 1e-8);
        for f in [
            FitFlag::ShortNeighbourhood,
            FitFlag::DegenerateProcrustes,
            FitFlag::GeneratorsClamped,
        ] {
            assert!(op.meta.has_flag(f), "missing {f:?}");
        }
        assert!(fit_local_operator(0, &set, 1, &cfg).is_err());
    }
}
