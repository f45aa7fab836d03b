// SPDX-License-Identifier: MIT OR Apache-2.0

//! Geometric descriptors of a fitted operator and of individual pairs.
//!
//! For `A = R·S` (polar factors):
//!
//! - `theta_deg = acos(clamp((Tr(R) − n + 2)/2, −1, 1))` in degrees. The
//!   normalization is exact for a single active rotation plane; several
//!   rotated planes alias onto one angle, and the clamp keeps the result in
//!   `[0°, 180°]`.
//! - `def_index = (1/n)·Σ|σ_k − 1|` over the singular values of `A`.
//! - `shift = ‖t‖₂`.
//! - `det_a = det(A)`; a negative value means `A` reverses orientation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{l2_normalize, EmbeddingPairSet};
use crate::error::{Error, Result};
use crate::eval::hybrid_score;
use crate::fit::{fit_local_operator, AffineOperator, FitConfig};
use crate::linalg::{cosine, determinant, distance, polar_decompose, Matrix};

/// The pre-clamp trace argument may leave `[−1, 1]` by this much before the
/// profile reports it.
pub const CLAMP_REPORT_TOL: f64 = 1e-6;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XaiProfile {
    pub theta_deg: f64,
    pub def_index: f64,
    pub shift: f64,
    pub det_a: f64,
    pub det_sign: i8,
    pub frobenius_a: f64,
    pub rank: usize,
    /// The trace argument fell outside `[−1, 1]` by more than
    /// [`CLAMP_REPORT_TOL`]. Only serialized when set.
    #[serde(default, skip_serializing_if = "is_false")]
    pub theta_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProfile {
    pub pair_index: usize,
    pub theta_pair_deg: f64,
    pub residual_error: f64,
    pub hybrid_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_profile: Option<XaiProfile>,
}

/// `(Tr(R) − n + 2)/2` before clamping, accumulated as `Σ(R_ii − 1)` so that
/// large `n` does not swamp the rotated block.
pub fn rotation_trace_argument(r: &Matrix) -> Result<f64> {
    if !r.is_square() {
        return Err(Error::shape(
            "rotation_trace_argument",
            format!("expected a square matrix, got {:?}", r.shape()),
        ));
    }
    let excess: f64 = r.diagonal().iter().map(|d| d - 1.0).sum();
    Ok((excess + 2.0) / 2.0)
}

/// Generalized rotation angle of an orthogonal matrix, in degrees.
pub fn theta_from_rotation(r: &Matrix) -> Result<f64> {
    rotation_trace_argument(r).map(angle_of)
}

fn angle_of(arg: f64) -> f64 {
    arg.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Mean absolute deviation of the singular values from one.
pub fn deformation_index(sigma: &[f64]) -> f64 {
    if sigma.is_empty() {
        return 0.0;
    }
    sigma.iter().map(|s| (s - 1.0).abs()).sum::<f64>() / sigma.len() as f64
}

pub fn profile_operator(op: &AffineOperator) -> Result<XaiProfile> {
    let a = op.a();
    let n = op.dim();
    let polar = polar_decompose(a)?;
    let arg = rotation_trace_argument(&polar.rotation)?;
    let det_a = determinant(a)?;
    let top = polar.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = top * n as f64 * f64::EPSILON;
    let rank = polar
        .singular_values
        .iter()
        .filter(|&&s| s > cutoff)
        .count();
    Ok(XaiProfile {
        theta_deg: angle_of(arg),
        def_index: deformation_index(&polar.singular_values),
        shift: crate::linalg::norm2(op.t()),
        det_a,
        det_sign: if det_a > 0.0 {
            1
        } else if det_a < 0.0 {
            -1
        } else {
            0
        },
        frobenius_a: a.frobenius_norm(),
        rank,
        theta_clamped: !(-1.0 - CLAMP_REPORT_TOL..=1.0 + CLAMP_REPORT_TOL).contains(&arg),
    })
}

/// `‖x′ − (A·x + t)‖₂`.
pub fn residual_error(op: &AffineOperator, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x_prime.len() != op.dim() {
        return Err(Error::shape(
            "residual_error",
            format!(
                "x' has {} entries, operator is {}-dimensional",
                x_prime.len(),
                op.dim()
            ),
        ));
    }
    let pred = op.apply(x)?;
    Ok(distance(&pred, x_prime))
}

/// Angle between `x` and `x′` in degrees.
pub fn pairwise_angle(x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::shape(
            "pairwise_angle",
            format!("{} vs {} entries", x.len(), x_prime.len()),
        ));
    }
    cosine(x, x_prime)
        .map(|c| c.clamp(-1.0, 1.0).acos().to_degrees())
        .ok_or(Error::ZeroVector { index: 0 })
}

/// Profile of pair `pair_index` of `pool`.
///
/// With `k_neighbors > 0` a local operator is refitted on the pair's
/// neighbourhood (see [`fit_local_operator`]) and profiled as well. The pool
/// is normalized first when `cfg.normalize_input` is set.
pub fn profile_pair(
    pool: &EmbeddingPairSet,
    pair_index: usize,
    global_op: &AffineOperator,
    cfg: &FitConfig,
    k_neighbors: usize,
) -> Result<PairProfile> {
    let mut all = profile_pairs(pool, &[pair_index], global_op, cfg, k_neighbors)?;
    Ok(all.remove(0))
}

/// [`profile_pair`] for many indices, computed in parallel and returned in
/// the order of `indices`.
pub fn profile_pairs(
    pool: &EmbeddingPairSet,
    indices: &[usize],
    global_op: &AffineOperator,
    cfg: &FitConfig,
    k_neighbors: usize,
) -> Result<Vec<PairProfile>> {
    if global_op.dim() != pool.dim() {
        return Err(Error::shape(
            "profile_pairs",
            format!(
                "operator is {}-dimensional, pairs are {}",
                global_op.dim(),
                pool.dim()
            ),
        ));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= pool.len()) {
        return Err(Error::InvalidArgument(format!(
            "pair index {bad} out of range for {} pairs",
            pool.len()
        )));
    }
    let prepared;
    let pool = if cfg.normalize_input && !pool.is_normalized() {
        prepared = l2_normalize(pool).set;
        &prepared
    } else {
        pool
    };
    indices
        .par_iter()
        .map(|&i| {
            let rec = pool.record(i);
            let theta_pair_deg =
                pairwise_angle(&rec.x, &rec.x_prime).map_err(|_| Error::ZeroVector { index: i })?;
            let residual = residual_error(global_op, &rec.x, &rec.x_prime)?;
            let score = hybrid_score(global_op, &rec.x, &rec.x_prime)?;
            let local_profile = if k_neighbors > 0 {
                let local = fit_local_operator(i, pool, k_neighbors, cfg)?;
                Some(profile_operator(&local)?)
            } else {
                None
            };
            Ok(PairProfile {
                pair_index: i,
                theta_pair_deg,
                residual_error: residual,
                hybrid_score: score.value,
                local_profile,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, PairRecord};
    use crate::fit::FitMeta;
    use crate::synth::{gaussian_matrix, plane_rotation, planted_affine, random_orthogonal};

    fn op_from(a: Matrix, t: Vec<f64>) -> AffineOperator {
        let meta: FitMeta = AffineOperator::identity(a.rows()).meta;
        AffineOperator::new(a, t, meta).unwrap()
    }

    #[test]
    fn identity_profile_is_exact() {
        let p = profile_operator(&AffineOperator::identity(6)).unwrap();
        assert_eq!(p.theta_deg, 0.0);
        assert_eq!(p.def_index, 0.0);
        assert_eq!(p.shift, 0.0);
        assert_eq!(p.det_a, 1.0);
        assert_eq!(p.det_sign, 1);
        assert_eq!(p.rank, 6);
        assert!(!p.theta_clamped);
    }

    #[test]
    fn embedded_rotation_with_shift() {
        let n = 768;
        let a = plane_rotation(n, 0, 1, 27.84);
        let mut t = vec![0.0; n];
        t[5] = 0.3840;
        let p = profile_operator(&op_from(a, t)).unwrap();
        assert!((p.theta_deg - 27.84).abs() < 1e-9, "{}", p.theta_deg);
        assert!(p.def_index < 1e-12);
        assert!((p.shift - 0.3840).abs() < 1e-15);
        assert_eq!(p.det_sign, 1);
    }

    #[test]
    fn theta_of_two_rotation_blocks() {
        let r = plane_rotation(6, 0, 1, 30.0)
            .matmul(&plane_rotation(6, 2, 3, 40.0))
            .unwrap();
        // Oracle: the trace evaluated directly.
        let want = ((30f64.to_radians().cos() + 40f64.to_radians().cos()) - 1.0)
            .acos()
            .to_degrees();
        assert!((theta_from_rotation(&r).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn clamp_keeps_theta_finite() {
        // Three half-turns: Tr(R) = n − 12, argument = −5.
        let mut r = Matrix::identity(8);
        for i in 0..6 {
            r.set(i, i, -1.0);
        }
        assert_eq!(rotation_trace_argument(&r).unwrap(), -5.0);
        assert_eq!(theta_from_rotation(&r).unwrap(), 180.0);
        let p = profile_operator(&op_from(r, vec![0.0; 8])).unwrap();
        assert!(p.theta_clamped);
        assert_eq!(p.theta_deg, 180.0);
    }

    #[test]
    fn deformation_values() {
        assert_eq!(deformation_index(&[1.0; 5]), 0.0);
        assert!((deformation_index(&[1.1, 0.9, 1.0, 1.0]) - 0.05).abs() < 1e-15);
        let p = profile_operator(&op_from(Matrix::identity(7).scale(2.0), vec![0.0; 7])).unwrap();
        assert_eq!(p.def_index, 1.0);
    }

    #[test]
    fn invariances() {
        let r = plane_rotation(5, 1, 3, 63.0);
        let q = random_orthogonal(5, 4);
        let conj = q.matmul(&r).unwrap().matmul_t(&q).unwrap();
        let d = theta_from_rotation(&conj).unwrap() - theta_from_rotation(&r).unwrap();
        assert!(d.abs() < 1e-9);

        let a = gaussian_matrix(5, 5, 8);
        let q2 = random_orthogonal(5, 9);
        let b = q.matmul(&a).unwrap().matmul(&q2).unwrap();
        let pa = profile_operator(&op_from(a.clone(), vec![0.0; 5])).unwrap();
        let pb = profile_operator(&op_from(b, vec![0.0; 5])).unwrap();
        assert!((pa.def_index - pb.def_index).abs() < 1e-9);

        let mut flip = Matrix::identity(5);
        flip.set(0, 0, -1.0);
        let fa = flip.matmul(&a).unwrap();
        let pf = profile_operator(&op_from(fa, vec![0.0; 5])).unwrap();
        assert_eq!(pf.det_sign, -pa.det_sign);
        assert!((pf.det_a + pa.det_a).abs() < 1e-12 * pa.det_a.abs());
    }

    #[test]
    fn residual_and_angle() {
        let op = AffineOperator::identity(3);
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert!((residual_error(&op, &x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(residual_error(&op, &x, &x).unwrap(), 0.0);
        assert_eq!(pairwise_angle(&x, &x).unwrap(), 0.0);
        assert!((pairwise_angle(&x, &y).unwrap() - 90.0).abs() < 1e-12);
        assert!(pairwise_angle(&x, &[0.0; 3]).is_err());
        assert!(residual_error(&op, &x, &[1.0]).is_err());
    }

    #[test]
    fn pair_on_its_own_trajectory() {
        let p = planted_affine(4, 30, 6);
        let cfg = FitConfig {
            r: 0,
            lambda_ortho: 1.0,
            lambda_equiv: 0.0,
            tau: 1e-8,
            normalize_input: false,
        };
        let op = crate::fit::fit_operator(&p.set, &cfg).unwrap();
        let x = vec![0.5, 0.5, 0.5, 0.5];
        let mut recs = p.set.records().to_vec();
        recs.push(PairRecord::new(
            Label::Positive,
            x.clone(),
            op.apply(&x).unwrap(),
        ));
        let pool = EmbeddingPairSet::new("pool", 4, recs).unwrap();
        let prof = profile_pair(&pool, 30, &op, &cfg, 0).unwrap();
        assert!(prof.residual_error < 1e-12);
        assert!((prof.hybrid_score - 1.0).abs() < 1e-12);
        assert!(prof.local_profile.is_none());
    }

    #[test]
    fn planted_isometry_local_profiles() {
        let p = planted_affine(6, 120, 12);
        let cfg = FitConfig {
            lambda_ortho: 1.0,
            lambda_equiv: 0.0,
            tau: 1e-8,
            normalize_input: false,
            ..FitConfig::default()
        };
        let op = crate::fit::fit_operator(&p.set, &cfg).unwrap();
        let profs = profile_pairs(&p.set, &[0, 10, 50], &op, &cfg, 24).unwrap();
        for pr in &profs {
            assert!(pr.local_profile.as_ref().unwrap().def_index <= 1e-4);
        }
        assert_eq!(
            profs.iter().map(|p| p.pair_index).collect::<Vec<_>>(),
            vec![0, 10, 50]
        );
    }

    #[test]
    fn json_field_names() {
        let p = profile_operator(&AffineOperator::identity(2)).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            vec![
                "def_index",
                "det_a",
                "det_sign",
                "frobenius_a",
                "rank",
                "shift",
                "theta_deg"
            ]
        );
    }
}
