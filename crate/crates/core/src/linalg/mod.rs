// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear-algebra primitives.
//!
//! Everything here is a pure function of its inputs and runs in `f64`.

pub(crate) mod decomp;
mod matrix;
mod svd;

pub use decomp::{
    determinant, orthogonal_procrustes, pca_components, polar_decompose, truncated_pseudoinverse,
    PolarDecomposition, Procrustes, TruncatedInverse,
};
pub use matrix::Matrix;
pub use svd::{svd, SvdResult};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖a − b‖₂`.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cosine of the angle between `a` and `b`; `None` if either is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm2(a) * norm2(b);
    (denom > 0.0).then(|| dot(a, b) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_helpers_match_loops() {
        let a = [1.0, -2.0, 3.5];
        let b = [0.5, 4.0, -1.0];
        let mut d = 0.0;
        for i in 0..3 {
            d += a[i] * b[i];
        }
        assert_eq!(dot(&a, &b), d);
        assert!((norm2(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert!((distance(&a, &a)).abs() == 0.0);
        assert!(cosine(&a, &[0.0; 3]).is_none());
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    }
}
