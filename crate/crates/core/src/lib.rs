// SPDX-License-Identifier: MIT OR Apache-2.0

//! Globally regularized affine operators between sentence-embedding spaces.
//!
//! The crate fits an operator `x ↦ A·x + t` that carries source embeddings
//! onto their paraphrase embeddings, decomposes `A` into geometric
//! descriptors (rotation angle, deformation, shift, orientation), and uses the
//! per-pair residual `‖x′ − (A·x + t)‖₂` as an out-of-distribution signal.
//!
//! Module map:
//!
//! - [`linalg`]: dense matrices, SVD, truncated pseudoinverse, polar
//!   decomposition, orthogonal Procrustes, PCA, determinant.
//! - [`data`]: embedding-pair corpora, L2 normalization, the `LAGE` pair
//!   format, CSV interchange and the `LAGO` operator format.
//! - [`fit`]: the regularized normal-equation estimator plus per-cluster and
//!   k-nearest-neighbour variants.
//! - [`xai`]: operator and per-pair geometric profiles.
//! - [`eval`]: hybrid cosine scoring, ROC-AUC with bootstrap, threshold
//!   calibration, anomaly metrics, grid search, scenario comparison and the
//!   corridor export.
//! - [`synth`]: seeded synthetic corpora with planted ground truth.

#![forbid(unsafe_code)]

pub mod data;
pub mod error;
pub mod eval;
pub mod fit;
pub mod linalg;
pub mod synth;
pub mod xai;

pub use data::{EmbeddingPairSet, Label, PairRecord};
pub use error::{Error, Result};
pub use fit::{AffineOperator, FitConfig, FitMeta};
pub use linalg::Matrix;
pub use xai::{PairProfile, XaiProfile};
