// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimation of the affine operator `x ↦ A·x + t`.
//!
//! The global estimator centres both point clouds, pulls `A` toward the
//! orthogonal Procrustes solution with weight `lambda_ortho`, penalizes motion
//! along the leading principal directions of the drift vectors `x′ − x` with
//! weight `lambda_equiv`, and solves the resulting normal equations with an
//! SVD pseudoinverse truncated at `tau`:
//!
//! ```text
//! LHS = XcᵀXc + λ_ortho·I + λ_equiv·JᵀJ
//! RHS = Xc′ᵀXc + λ_ortho·R_prior
//! A   = RHS · LHS⁺
//! t   = μ′ − A·μ
//! ```

mod estimate;
pub mod kmeans;
mod local;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use estimate::{
    assemble_normal_equations, center, fit_matrices, fit_operator, Centered, NormalEquations,
};
pub use local::{fit_cluster_operators, fit_local_operator, ClusterModel, DEFAULT_K_NEIGHBORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda_ortho: f64,
    pub lambda_equiv: f64,
    /// Number of principal drift directions in `J`.
    pub r: usize,
    /// Absolute singular-value cutoff for the `LHS` pseudoinverse.
    pub tau: f64,
    /// L2-normalize both embeddings before fitting.
    pub normalize_input: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda_ortho: 5000.0,
            lambda_equiv: 1.0,
            r: 5,
            tau: 1e-3,
            normalize_input: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_ortho) || !ok(self.lambda_equiv) {
            return Err(Error::InvalidArgument(format!(
                "regularization weights must be finite and non-negative (lambda_ortho={}, lambda_equiv={})",
                self.lambda_ortho, self.lambda_equiv
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.r > dim {
            return Err(Error::InvalidArgument(format!(
                "r = {} exceeds the embedding dimension {dim}",
                self.r
            )));
        }
        Ok(())
    }

    /// Whether the fit uses the principal-direction penalty at all.
    pub fn uses_generators(&self) -> bool {
        self.lambda_equiv > 0.0 && self.r > 0
    }
}

/// Conditions worth surfacing that did not stop the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// `Xc′ᵀXc` was zero, so the isometry prior fell back to the identity.
    DegenerateProcrustes,
    /// Every singular value of `LHS` was below `tau`; `A` is zero.
    AllTruncated,
    /// Fewer principal directions than `r` were available and `J` was shrunk.
    GeneratorsClamped,
    /// A neighbourhood or cluster had fewer pairs than requested.
    ShortNeighbourhood,
    /// The cluster had too few positives and inherited the global operator.
    ClusterFallback,
    /// Built-in identity operator, not fitted.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub config: FitConfig,
    /// Number of `LHS` singular values kept by the truncation.
    pub rank: usize,
    /// Spectral norm of `LHS⁺`, at most `1/tau`.
    pub condition_estimate: f64,
    /// `σ_max/σ_min` over the retained `LHS` spectrum.
    pub retained_condition: f64,
    pub n_pairs: usize,
    /// Rows actually used in `J`.
    pub generators: usize,
    pub lhs_sigma_max: f64,
    pub lhs_sigma_min: f64,
    pub degenerate_flags: Vec<FitFlag>,
}

impl FitMeta {
    pub fn has_flag(&self, flag: FitFlag) -> bool {
        self.degenerate_flags.contains(&flag)
    }
}

/// Fitted operator `x ↦ A·x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    a: Matrix,
    t: Vec<f64>,
    pub meta: FitMeta,
}

impl AffineOperator {
    pub fn new(a: Matrix, t: Vec<f64>, meta: FitMeta) -> Result<Self> {
        if !a.is_square() || a.rows() != t.len() {
            return Err(Error::shape(
                "AffineOperator::new",
                format!("A is {}x{}, t has {} entries", a.rows(), a.cols(), t.len()),
            ));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "translation vector".into(),
            });
        }
        Ok(Self { a, t, meta })
    }

    /// `(I, 0)`: the operator under which the hybrid score is plain cosine.
    pub fn identity(n: usize) -> Self {
        Self {
            a: Matrix::identity(n),
            t: vec![0.0; n],
            meta: FitMeta {
                config: FitConfig {
                    lambda_ortho: 0.0,
                    lambda_equiv: 0.0,
                    r: 0,
                    tau: 1.0,
                    normalize_input: true,
                },
                rank: n,
                condition_estimate: 1.0,
                retained_condition: 1.0,
                n_pairs: 0,
                generators: 0,
                lhs_sigma_max: 1.0,
                lhs_sigma_min: 1.0,
                degenerate_flags: vec![FitFlag::Identity],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// `A·x + t`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a.matvec(x)?;
        for (v, s) in y.iter_mut().zip(&self.t) {
            *v += s;
        }
        Ok(y)
    }
}
