// SPDX-License-Identifier: MIT OR Apache-2.0

use std::cmp::Ordering;

use super::{AffineOperator, FitConfig, FitFlag, FitMeta};
use crate::data::{l2_normalize, EmbeddingPairSet};
use crate::error::{Error, Result};
use crate::linalg::decomp::principal_directions;
use crate::linalg::{orthogonal_procrustes, truncated_pseudoinverse, Matrix};

/// Mean-centred copies of the source and target matrices.
#[derive(Debug, Clone)]
pub struct Centered {
    pub xc: Matrix,
    pub xc_prime: Matrix,
    pub mu_x: Vec<f64>,
    pub mu_x_prime: Vec<f64>,
}

pub fn center(x: &Matrix, x_prime: &Matrix) -> Result<Centered> {
    if x.shape() != x_prime.shape() {
        return Err(Error::shape(
            "center",
            format!("{:?} vs {:?}", x.shape(), x_prime.shape()),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("cannot centre zero rows".into()));
    }
    let (xc, mu_x) = center_one(x);
    let (xc_prime, mu_x_prime) = center_one(x_prime);
    Ok(Centered {
        xc,
        xc_prime,
        mu_x,
        mu_x_prime,
    })
}

fn center_one(m: &Matrix) -> (Matrix, Vec<f64>) {
    let (rows, cols) = m.shape();
    let mut mu = vec![0.0; cols];
    for i in 0..rows {
        for (acc, v) in mu.iter_mut().zip(m.row(i)) {
            *acc += v;
        }
    }
    for v in &mut mu {
        *v /= rows as f64;
    }
    // A constant column centres to exact zeros.
    for (j, c) in mu.iter_mut().enumerate() {
        let first = m.get(0, j);
        if (1..rows).all(|i| m.get(i, j) == first) {
            *c = first;
        }
    }
    let mut out = m.clone();
    for i in 0..rows {
        for (v, c) in out.row_mut(i).iter_mut().zip(&mu) {
            *v -= c;
        }
    }
    (out, mu)
}

#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub lhs: Matrix,
    pub rhs: Matrix,
}

/// `LHS = XcᵀXc + λ_ortho·I + λ_equiv·JᵀJ`, `RHS = Xc′ᵀXc + λ_ortho·R_prior`.
///
/// `r_prior` is the orthogonal map with `x′ ≈ R_prior·x` as returned by
/// [`orthogonal_procrustes`], so that `A → R_prior` as `λ_ortho → ∞`.
pub fn assemble_normal_equations(
    xc: &Matrix,
    xc_prime: &Matrix,
    r_prior: &Matrix,
    j: &Matrix,
    cfg: &FitConfig,
) -> Result<NormalEquations> {
    let n = xc.cols();
    if xc.shape() != xc_prime.shape() {
        return Err(Error::shape(
            "assemble_normal_equations",
            format!("Xc {:?} vs Xc' {:?}", xc.shape(), xc_prime.shape()),
        ));
    }
    if r_prior.shape() != (n, n) {
        return Err(Error::shape(
            "assemble_normal_equations",
            format!("R_prior is {:?}, expected {n}x{n}", r_prior.shape()),
        ));
    }
    if j.cols() != n {
        return Err(Error::shape(
            "assemble_normal_equations",
            format!("J is {:?}, expected r x {n}", j.shape()),
        ));
    }

    let gram = xc.t_matmul(xc)?;
    let mut lhs = Matrix::from_fn(n, n, |a, b| 0.5 * (gram.get(a, b) + gram.get(b, a)));
    if cfg.lambda_ortho != 0.0 {
        for i in 0..n {
            lhs.set(i, i, lhs.get(i, i) + cfg.lambda_ortho);
        }
    }
    if cfg.lambda_equiv != 0.0 && j.rows() > 0 {
        let jtj = j.t_matmul(j)?;
        let jtj = Matrix::from_fn(n, n, |a, b| 0.5 * (jtj.get(a, b) + jtj.get(b, a)));
        lhs.add_scaled_assign(cfg.lambda_equiv, &jtj)?;
    }

    let mut rhs = xc_prime.t_matmul(xc)?;
    if cfg.lambda_ortho != 0.0 {
        rhs.add_scaled_assign(cfg.lambda_ortho, r_prior)?;
    }
    Ok(NormalEquations { lhs, rhs })
}

/// Fits the global operator on the positive pairs of `pairs`.
pub fn fit_operator(pairs: &EmbeddingPairSet, cfg: &FitConfig) -> Result<AffineOperator> {
    cfg.validate(pairs.dim())?;
    let prepared;
    let pairs = if cfg.normalize_input && !pairs.is_normalized() {
        prepared = l2_normalize(pairs).set;
        &prepared
    } else {
        pairs
    };
    let positives = pairs.positive_indices();
    if positives.len() < 2 {
        return Err(Error::TooFewPositives {
            required: 2,
            found: positives.len(),
        });
    }
    let (x, x_prime) = pairs.matrices(&positives);
    fit_matrices(&x, &x_prime, cfg, false)
}

/// Runs the estimator on explicit `N×n` source/target matrices, which are
/// used as given (no normalization).
///
/// Rows are put into a canonical order first, so the result does not depend
/// on how the pairs were ordered. With `clamp_generators`, a drift matrix of
/// rank below `r` yields a smaller `J` and a flag instead of an error.
pub fn fit_matrices(
    x: &Matrix,
    x_prime: &Matrix,
    cfg: &FitConfig,
    clamp_generators: bool,
) -> Result<AffineOperator> {
    if x.shape() != x_prime.shape() {
        return Err(Error::shape(
            "fit_matrices",
            format!("{:?} vs {:?}", x.shape(), x_prime.shape()),
        ));
    }
    let (rows, n) = x.shape();
    cfg.validate(n)?;
    if rows < 2 {
        return Err(Error::TooFewPositives {
            required: 2,
            found: rows,
        });
    }
    let (x, x_prime) = canonical_order(x, x_prime);
    let mut flags = Vec::new();

    let c = center(&x, &x_prime)?;
    let prior = orthogonal_procrustes(&c.xc, &c.xc_prime)?;
    if prior.degenerate {
        flags.push(FitFlag::DegenerateProcrustes);
    }

    let j = if cfg.uses_generators() {
        let drift = c.xc_prime.sub(&c.xc)?;
        let (j, _) = principal_directions(&drift, cfg.r, clamp_generators)?;
        if j.rows() < cfg.r {
            flags.push(FitFlag::GeneratorsClamped);
        }
        j
    } else {
        Matrix::zeros(0, n)
    };

    let eqs = assemble_normal_equations(&c.xc, &c.xc_prime, &prior.rotation, &j, cfg)?;
    let pinv = truncated_pseudoinverse(&eqs.lhs, cfg.tau)?;
    if pinv.all_truncated {
        flags.push(FitFlag::AllTruncated);
    }
    let a = eqs.rhs.matmul(&pinv.inverse)?;
    let a_mu = a.matvec(&c.mu_x)?;
    let t: Vec<f64> = c.mu_x_prime.iter().zip(&a_mu).map(|(m, p)| m - p).collect();

    let meta = FitMeta {
        config: *cfg,
        rank: pinv.rank,
        condition_estimate: pinv.condition_estimate,
        retained_condition: pinv.retained_condition,
        n_pairs: rows,
        generators: j.rows(),
        lhs_sigma_max: pinv.spectrum.first().copied().unwrap_or(0.0),
        lhs_sigma_min: pinv.spectrum.last().copied().unwrap_or(0.0),
        degenerate_flags: flags,
    };
    AffineOperator::new(a, t, meta)
}

fn canonical_order(x: &Matrix, x_prime: &Matrix) -> (Matrix, Matrix) {
    let rows = x.rows();
    let mut order: Vec<usize> = (0..rows).collect();
    let key = |i: usize| x.row(i).iter().chain(x_prime.row(i));
    order.sort_by(|&a, &b| {
        key(a)
            .zip(key(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return (x.clone(), x_prime.clone());
    }
    let n = x.cols();
    let pick = |m: &Matrix| {
        let mut data = Vec::with_capacity(rows * n);
        for &i in &order {
            data.extend_from_slice(m.row(i));
        }
        Matrix::from_row_major(rows, n, data).expect("same shape as input")
    };
    (pick(x), pick(x_prime))
}
