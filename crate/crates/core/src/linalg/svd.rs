// SPDX-License-Identifier: MIT OR Apache-2.0

use super::Matrix;
use crate::error::{Error, Result};

/// Thin singular value decomposition `M = U · diag(sigma) · Vt`.
///
/// For an `m×n` input with `k = min(m, n)`, `u` is `m×k`, `sigma` has `k`
/// non-increasing non-negative entries and `vt` is `k×n`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *v *= s;
            }
        }
        us.matmul(&self.vt)
            .expect("SVD factors have compatible shapes")
    }
}

const MAX_SWEEPS_PER_VALUE: usize = 200;

/// Computes the thin SVD with singular values sorted non-increasing.
///
/// Equal singular values keep the order in which the Golub-Kahan iteration
/// produced them (stable sort), so the factorization is reproducible bit for
/// bit for identical input.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("SVD of an empty matrix".into()));
    }
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    let raw = nalgebra::SVD::try_new_unordered(
        m.to_nalgebra(),
        true,
        true,
        f64::EPSILON,
        MAX_SWEEPS_PER_VALUE * k.max(1),
    )
    .ok_or(Error::SvdNoConvergence { rows, cols })?;

    let (u, vt) = match (raw.u, raw.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::SvdNoConvergence { rows, cols }),
    };
    let values: Vec<f64> = raw.singular_values.iter().copied().collect();
    if values.iter().any(|s| !s.is_finite()) {
        return Err(Error::SvdNoConvergence { rows, cols });
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut out_u = Matrix::zeros(rows, k);
    let mut out_vt = Matrix::zeros(k, cols);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        // nalgebra keeps singular values non-negative, but fold any sign into U
        // so the invariant never depends on that.
        let s = values[src];
        let flip = if s < 0.0 { -1.0 } else { 1.0 };
        sigma.push(s.abs());
        for i in 0..rows {
            out_u.set(i, dst, flip * u[(i, src)]);
        }
        for j in 0..cols {
            out_vt.set(dst, j, vt[(src, j)]);
        }
    }
    Ok(SvdResult {
        u: out_u,
        sigma,
        vt: out_vt,
    })
}
