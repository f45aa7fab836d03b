// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{svd, Matrix};
use crate::error::{Error, Result};

/// Truncated Moore-Penrose inverse together with what the truncation kept.
#[derive(Debug, Clone)]
pub struct TruncatedInverse {
    pub inverse: Matrix,
    /// Full singular spectrum of the input, non-increasing.
    pub spectrum: Vec<f64>,
    /// Number of singular values at or above the threshold.
    pub rank: usize,
    /// `1/σ_min` over the retained spectrum, i.e. the spectral norm of the
    /// inverse. Bounded by `1/tau`. Zero when nothing was retained.
    pub condition_estimate: f64,
    /// `σ_max/σ_min` over the retained spectrum. Zero when nothing was retained.
    pub retained_condition: f64,
    /// Every singular value fell below the threshold; `inverse` is zero.
    pub all_truncated: bool,
}

/// `V · diag(σ_k ≥ tau ? 1/σ_k : 0) · Uᵀ`, with `tau` an absolute threshold.
pub fn truncated_pseudoinverse(m: &Matrix, tau: f64) -> Result<TruncatedInverse> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "truncation threshold must be positive, got {tau}"
        )));
    }
    let s = svd(m)?;
    let rank = s.sigma.iter().take_while(|&&v| v >= tau).count();
    let (rows, cols) = m.shape();
    if rank == 0 {
        return Ok(TruncatedInverse {
            inverse: Matrix::zeros(cols, rows),
            spectrum: s.sigma,
            rank: 0,
            condition_estimate: 0.0,
            retained_condition: 0.0,
            all_truncated: true,
        });
    }

    // diag(1/σ)·Vt restricted to the retained rows, then (·)ᵀ·Uᵀ.
    let mut scaled_vt = Matrix::zeros(rank, cols);
    let mut u_t = Matrix::zeros(rank, rows);
    for k in 0..rank {
        let inv = 1.0 / s.sigma[k];
        for j in 0..cols {
            scaled_vt.set(k, j, s.vt.get(k, j) * inv);
        }
        for i in 0..rows {
            u_t.set(k, i, s.u.get(i, k));
        }
    }
    let inverse = scaled_vt.t_matmul(&u_t)?;
    let smallest = s.sigma[rank - 1];
    Ok(TruncatedInverse {
        inverse,
        rank,
        condition_estimate: 1.0 / smallest,
        retained_condition: s.sigma[0] / smallest,
        spectrum: s.sigma,
        all_truncated: false,
    })
}

/// Polar factors `A = R·S` with `R` orthogonal and `S` symmetric PSD.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub rotation: Matrix,
    pub stretch: Matrix,
    /// Singular values of `A` (equivalently the eigenvalues of `S`).
    pub singular_values: Vec<f64>,
    /// `S` is only semi-definite: the smallest singular value is numerically zero.
    pub rank_deficient: bool,
}

/// From `A = UΣVᵀ`: `R = U·Vᵀ`, `S = V·Σ·Vᵀ`.
pub fn polar_decompose(a: &Matrix) -> Result<PolarDecomposition> {
    if !a.is_square() {
        return Err(Error::shape(
            "polar_decompose",
            format!("expected a square matrix, got {}x{}", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    let s = svd(a)?;
    let rotation = s.u.matmul(&s.vt)?;

    let mut sigma_vt = s.vt.clone();
    for k in 0..n {
        let sk = s.sigma[k];
        for v in sigma_vt.row_mut(k) {
            *v *= sk;
        }
    }
    let raw = s.vt.t_matmul(&sigma_vt)?;
    let stretch = Matrix::from_fn(n, n, |i, j| 0.5 * (raw.get(i, j) + raw.get(j, i)));

    let top = s.sigma.first().copied().unwrap_or(0.0);
    let bottom = s.sigma.last().copied().unwrap_or(0.0);
    let rank_deficient = bottom <= top * n as f64 * f64::EPSILON;
    Ok(PolarDecomposition {
        rotation,
        stretch,
        singular_values: s.sigma,
        rank_deficient,
    })
}

/// Solution of the orthogonal Procrustes problem.
#[derive(Debug, Clone)]
pub struct Procrustes {
    pub rotation: Matrix,
    /// The cross-product matrix was zero; `rotation` is the identity.
    pub degenerate: bool,
}

/// Orthogonal `R` minimizing `‖Xc·Rᵀ − Xc′‖_F`, i.e. the best orthogonal map
/// carrying each source row onto its target row (`x′ ≈ R·x`).
///
/// With `Xc′ᵀ·Xc = UΣVᵀ` the minimizer is `R = U·Vᵀ`. Reflections are
/// allowed.
pub fn orthogonal_procrustes(xc: &Matrix, xc_prime: &Matrix) -> Result<Procrustes> {
    if xc.shape() != xc_prime.shape() {
        return Err(Error::shape(
            "orthogonal_procrustes",
            format!(
                "{}x{} vs {}x{}",
                xc.rows(),
                xc.cols(),
                xc_prime.rows(),
                xc_prime.cols()
            ),
        ));
    }
    if xc.rows() == 0 {
        return Err(Error::InvalidArgument(
            "Procrustes needs at least one row".into(),
        ));
    }
    let n = xc.cols();
    let cross = xc_prime.t_matmul(xc)?;
    if cross.frobenius_norm() == 0.0 {
        return Ok(Procrustes {
            rotation: Matrix::identity(n),
            degenerate: true,
        });
    }
    let s = svd(&cross)?;
    Ok(Procrustes {
        rotation: s.u.matmul(&s.vt)?,
        degenerate: false,
    })
}

/// First `r` principal directions of the column-centred `delta`, one per row.
///
/// Rows are orthonormal, ordered by decreasing explained variance, and signed
/// so that the entry of largest magnitude is positive.
pub fn pca_components(delta: &Matrix, r: usize) -> Result<Matrix> {
    principal_directions(delta, r, false).map(|(m, _)| m)
}

/// Shared PCA path. With `clamp_to_rank`, a request above the numerical rank
/// returns only `rank` rows instead of failing. Returns the numerical rank
/// alongside the directions.
pub(crate) fn principal_directions(
    delta: &Matrix,
    r: usize,
    clamp_to_rank: bool,
) -> Result<(Matrix, usize)> {
    let (rows, n) = delta.shape();
    if r > n {
        return Err(Error::InvalidArgument(format!(
            "requested {r} components from a {rows}x{n} matrix"
        )));
    }
    if r == 0 {
        return Ok((Matrix::zeros(0, n), 0));
    }

    let mut centred = delta.clone();
    for j in 0..n {
        let mean = (0..rows).map(|i| delta.get(i, j)).sum::<f64>() / rows as f64;
        for i in 0..rows {
            centred.set(i, j, delta.get(i, j) - mean);
        }
    }
    let gram = centred.t_matmul(&centred)?;
    let gram = Matrix::from_fn(n, n, |i, j| 0.5 * (gram.get(i, j) + gram.get(j, i)));
    if gram.frobenius_norm() == 0.0 {
        return settle_rank(r, 0, clamp_to_rank).map(|_| (Matrix::zeros(0, n), 0));
    }
    let s = svd(&gram)?;
    let cutoff = s.sigma[0] * n as f64 * f64::EPSILON;
    let rank = s.sigma.iter().take_while(|&&v| v > cutoff).count();
    let take = settle_rank(r, rank, clamp_to_rank)?;

    let mut out = Matrix::zeros(take, n);
    for k in 0..take {
        let row = s.vt.row(k);
        let mut lead = 0;
        for j in 1..n {
            if row[j].abs() > row[lead].abs() {
                lead = j;
            }
        }
        let sign = if row[lead] < 0.0 { -1.0 } else { 1.0 };
        for (dst, &v) in out.row_mut(k).iter_mut().zip(row) {
            *dst = sign * v;
        }
    }
    Ok((out, rank))
}

fn settle_rank(requested: usize, rank: usize, clamp: bool) -> Result<usize> {
    if requested <= rank {
        Ok(requested)
    } else if clamp {
        Ok(rank)
    } else {
        Err(Error::RankTooLow { requested, rank })
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
///
/// Singular input yields exactly `0.0`.
pub fn determinant(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::shape(
            "determinant",
            format!("expected a square matrix, got {}x{}", m.rows(), m.cols()),
        ));
    }
    let n = m.rows();
    let mut lu = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if lu.get(i, k).abs() > lu.get(piv, k).abs() {
                piv = i;
            }
        }
        let p = lu.get(piv, k);
        if p == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(piv, j));
                lu.set(piv, j, tmp);
            }
            det = -det;
        }
        det *= p;
        for i in k + 1..n {
            let f = lu.get(i, k) / p;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let v = lu.get(i, j) - f * lu.get(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gaussian_matrix, random_orthogonal};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot2(deg: f64) -> Matrix {
        let (s, c) = deg.to_radians().sin_cos();
        Matrix::from_rows(&[[c, -s], [s, c]]).unwrap()
    }

    fn orth_defect(q: &Matrix) -> f64 {
        q.t_matmul(q)
            .unwrap()
            .sub(&Matrix::identity(q.cols()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn pinv_of_identity() {
        let p = truncated_pseudoinverse(&Matrix::identity(4), 1e-3).unwrap();
        assert!(p.inverse.max_abs_diff(&Matrix::identity(4)) < 1e-15);
        assert_eq!(p.rank, 4);
        assert!(!p.all_truncated);
    }

    #[test]
    fn pinv_forced_truncation() {
        let p = truncated_pseudoinverse(&Matrix::from_diag(&[2.0, 1e-6]), 1e-3).unwrap();
        let want = Matrix::from_diag(&[0.5, 0.0]);
        assert!(p.inverse.max_abs_diff(&want) < 1e-15);
        assert_eq!(p.rank, 1);
        assert!(p.condition_estimate <= 1.0 / 1e-3);
    }

    #[test]
    fn pinv_multiplies_back() {
        let m = gaussian_matrix(5, 5, 21)
            .add(&Matrix::identity(5).scale(4.0))
            .unwrap();
        let s = svd(&m).unwrap();
        let tau = 0.5 * s.sigma[4];
        let p = truncated_pseudoinverse(&m, tau).unwrap();
        assert_eq!(p.rank, 5);
        let prod = p.inverse.matmul(&m).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(5)) < 1e-9);
        // M⁺·M·M⁺ = M⁺.
        let back = prod.matmul(&p.inverse).unwrap();
        assert!(back.max_abs_diff(&p.inverse) < 1e-9);
        assert!(p.retained_condition <= s.sigma[0] / tau);
    }

    #[test]
    fn pinv_all_truncated_is_zero() {
        let p = truncated_pseudoinverse(&Matrix::from_diag(&[1e-5, 1e-6]), 1e-3).unwrap();
        assert!(p.all_truncated);
        assert_eq!(p.rank, 0);
        assert!(p.inverse.as_slice().iter().all(|&v| v == 0.0));
        assert!(truncated_pseudoinverse(&Matrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn polar_identity() {
        let p = polar_decompose(&Matrix::identity(3)).unwrap();
        assert!(p.rotation.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(p.stretch.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(!p.rank_deficient);
    }

    #[test]
    fn polar_scaled_rotation() {
        let a = rot2(30.0).scale(2.0);
        let p = polar_decompose(&a).unwrap();
        assert!(p.rotation.max_abs_diff(&rot2(30.0)) < 1e-12);
        assert!(p.stretch.max_abs_diff(&Matrix::identity(2).scale(2.0)) < 1e-12);
    }

    #[test]
    fn polar_random_properties() {
        let a = gaussian_matrix(8, 8, 5);
        let p = polar_decompose(&a).unwrap();
        assert!(orth_defect(&p.rotation) <= 1e-9);
        assert!(
            p.stretch
                .sub(&p.stretch.transpose())
                .unwrap()
                .frobenius_norm()
                <= 1e-9
        );
        let rs = p.rotation.matmul(&p.stretch).unwrap();
        assert!(rs.sub(&a).unwrap().frobenius_norm() <= 1e-9);
    }

    #[test]
    fn polar_rank_deficient_is_flagged() {
        let a = Matrix::from_diag(&[1.0, 0.0, 2.0]);
        let p = polar_decompose(&a).unwrap();
        assert!(p.rank_deficient);
        assert!(p.rotation.matmul(&p.stretch).unwrap().max_abs_diff(&a) < 1e-12);
        assert!(polar_decompose(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn procrustes_self_alignment() {
        let x = gaussian_matrix(20, 4, 8);
        let p = orthogonal_procrustes(&x, &x).unwrap();
        assert!(p.rotation.max_abs_diff(&Matrix::identity(4)) < 1e-12);
        assert!(!p.degenerate);
    }

    #[test]
    fn procrustes_recovers_planted_rotation() {
        let q = random_orthogonal(6, 13);
        let x = gaussian_matrix(30, 6, 14);
        let xp = x.matmul_t(&q).unwrap();
        let p = orthogonal_procrustes(&x, &xp).unwrap();
        assert!(p.rotation.max_abs_diff(&q) < 1e-8);
        assert!(orth_defect(&p.rotation) < 1e-9);
    }

    #[test]
    fn procrustes_beats_rotation_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let truth = rot2(37.3);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..40 {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let w = truth.matvec(&v).unwrap();
            xs.push(v);
            ys.push([
                w[0] + 0.05 * rng.random_range(-1.0..1.0),
                w[1] + 0.05 * rng.random_range(-1.0..1.0),
            ]);
        }
        let x = Matrix::from_rows(&xs).unwrap();
        let y = Matrix::from_rows(&ys).unwrap();
        let residual = |r: &Matrix| x.matmul_t(r).unwrap().sub(&y).unwrap().frobenius_norm();
        let got = residual(&orthogonal_procrustes(&x, &y).unwrap().rotation);
        // Brute force over a 0.01° grid of proper rotations.
        let best = (0..36_000)
            .map(|k| residual(&rot2(k as f64 * 0.01)))
            .fold(f64::INFINITY, f64::min);
        assert!(got <= best + 1e-12, "procrustes {got} vs grid {best}");
    }

    #[test]
    fn procrustes_zero_input_is_degenerate() {
        let z = Matrix::zeros(3, 3);
        let p = orthogonal_procrustes(&z, &z).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.rotation, Matrix::identity(3));
    }

    #[test]
    fn pca_axis_aligned() {
        let d = Matrix::from_rows(&[[1.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [3.5, 0.0, 0.0]]).unwrap();
        let j = pca_components(&d, 1).unwrap();
        assert!(j.max_abs_diff(&Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap()) < 1e-12);
        assert_eq!(pca_components(&d, 0).unwrap().shape(), (0, 3));
        assert!(matches!(
            pca_components(&d, 2),
            Err(Error::RankTooLow { rank: 1, .. })
        ));
        assert!(pca_components(&d, 4).is_err());
    }

    #[test]
    fn pca_matches_covariance_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, c) = 0.4f64.sin_cos();
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|_| {
                let a = 3.0 * rng.random_range(-1.0..1.0);
                let b = 0.5 * rng.random_range(-1.0..1.0);
                [c * a - s * b + 1.0, s * a + c * b - 2.0]
            })
            .collect();
        let d = Matrix::from_rows(&rows).unwrap();
        // Oracle: closed-form eigenvector of the 2x2 sample covariance.
        let n = rows.len() as f64;
        let mx = rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let my = rows.iter().map(|r| r[1]).sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for r in &rows {
            sxx += (r[0] - mx) * (r[0] - mx);
            sxy += (r[0] - mx) * (r[1] - my);
            syy += (r[1] - my) * (r[1] - my);
        }
        let l1 = 0.5 * (sxx + syy) + (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
        let (ex, ey) = (sxy, l1 - sxx);
        let norm = (ex * ex + ey * ey).sqrt();
        let (ex, ey) = (ex / norm, ey / norm);

        let j = pca_components(&d, 2).unwrap();
        let align = (j.get(0, 0) * ex + j.get(0, 1) * ey).abs();
        assert!((align - 1.0).abs() < 1e-8);
        assert!(orth_defect(&j.transpose()) < 1e-12);
        // Sign convention.
        for k in 0..2 {
            let row = j.row(k);
            let lead = if row[0].abs() >= row[1].abs() {
                row[0]
            } else {
                row[1]
            };
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn determinant_basics() {
        assert_eq!(determinant(&Matrix::identity(5)).unwrap(), 1.0);
        assert_eq!(determinant(&Matrix::from_diag(&[2.0, -1.0])).unwrap(), -2.0);
        let sing = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(determinant(&sing).unwrap(), 0.0);
        assert!(determinant(&Matrix::zeros(2, 3)).is_err());
    }

    fn cofactor_det(m: &Matrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m.get(0, 0);
        }
        (0..n)
            .map(|j| {
                let minor = Matrix::from_fn(n - 1, n - 1, |r, c| {
                    m.get(r + 1, if c < j { c } else { c + 1 })
                });
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m.get(0, j) * cofactor_det(&minor)
            })
            .sum()
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        for seed in 0..10 {
            let m = gaussian_matrix(4, 4, 40 + seed);
            let want = cofactor_det(&m);
            let got = determinant(&m).unwrap();
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1e-300),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn procrustes_optimal_against_random_candidates() {
        let x = gaussian_matrix(25, 5, 70);
        let noise = gaussian_matrix(25, 5, 71).scale(0.1);
        let q = random_orthogonal(5, 72);
        let y = x.matmul_t(&q).unwrap().add(&noise).unwrap();
        let residual = |r: &Matrix| x.matmul_t(r).unwrap().sub(&y).unwrap().frobenius_norm();
        let got = residual(&orthogonal_procrustes(&x, &y).unwrap().rotation);
        for k in 0..1000 {
            let cand = random_orthogonal(5, 10_000 + k);
            assert!(got <= residual(&cand) + 1e-12);
        }
    }
}
