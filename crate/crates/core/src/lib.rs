//! Graph-based semi-supervised learning with L1-norm Laplacian
//! regularization.
//!
//! The classical (L2) graph regularizer penalizes `fᵀ𝓛f`. Writing the
//! normalized Laplacian as `𝓛 = BᵀB` with `B = Σ^½Vᵀ` gives an L1 variant
//! `‖Bf‖₁`, which for `f = Vα` is a weighted L1 norm of the eigen-coefficients.
//! Restricting `f` to the `m` smoothest eigenvectors turns classification into
//! a small weighted sparse-coding problem solved by FISTA.
//!
//! Module map:
//! - [`linalg`]: sparse/dense matrices, CG, partial eigensolver
//! - [`graph`]: kernels, k-NN sparsification, normalized Laplacian
//! - [`spectral`]: eigenbasis, `B`, smoothness measures
//! - [`solver`]: FISTA with weighted soft-thresholding, L2 baseline
//! - [`ssl`]: multi-class fitting, label noise, evaluation
//! - [`bow`]: two-step co-refinement of paired bag-of-words matrices
//! - [`datasets`], [`io`]: synthetic data and file formats
//! - [`experiments`]: seeded multi-run drivers and summary statistics

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bow;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod solver;
pub mod spectral;
pub mod ssl;

pub use error::{Error, Result};
