//! Sparse co-refinement of paired bag-of-words matrices.
//!
//! Each modality is denoised with a graph built from the *other* modality's
//! linear kernel, in two steps:
//!
//! 1. `Y* = argmin_F ½‖F − Y‖²_F + λ‖B F‖₁`, solved column by column with the
//!    L1 classifier on a k-NN graph of the counterpart matrix;
//! 2. `F = soft(Y* − Y, γ) + Y`, which keeps every entry whose proposed change
//!    is at most `γ` exactly at its original value.
//!
//! Both modalities are refined from the original inputs, so the two passes are
//! independent.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{linear_knn_graph, normalized_laplacian, FeatureMatrix, GraphConfig, Symmetrization};
use crate::linalg::DenseMatrix;
use crate::solver::{soft, SolverOptions, SolverReport};
use crate::spectral::build_basis;
use crate::ssl::{l1_ssl_fit, LabelMatrix};

/// `n × M` document-by-word matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BowMatrix {
    data: DenseMatrix,
}

impl BowMatrix {
    /// Count matrix; entries must be finite and nonnegative.
    pub fn new(data: DenseMatrix) -> Result<Self> {
        if let Some(p) = data.data().iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            let cols = data.cols().max(1);
            return Err(Error::invalid(format!(
                "BOW entry ({}, {}) = {} must be finite and >= 0",
                p / cols,
                p % cols,
                data.data()[p]
            )));
        }
        Ok(Self { data })
    }

    /// Refined scores, which may be negative.
    pub fn from_scores(data: DenseMatrix) -> Self {
        Self { data }
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn vocabulary(&self) -> usize {
        self.data.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data.get(i, j)
    }

    fn as_features(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.n(), self.vocabulary(), self.data.data().to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub k: usize,
    pub m: usize,
    /// Clamp refined entries at zero.
    #[serde(default)]
    pub clamp_nonnegative: bool,
}

impl RefineConfig {
    /// Visual-word preset: k = 15, λ = 0.010, γ = 0.005, m = 30.
    pub fn table2_visual() -> Self {
        Self {
            lambda: 0.010,
            gamma: 0.005,
            k: 15,
            m: 30,
            clamp_nonnegative: false,
        }
    }

    /// Textual-word preset: k = 15, λ = 0.005, γ = 0.075, m = 35.
    pub fn table2_textual() -> Self {
        Self {
            lambda: 0.005,
            gamma: 0.075,
            k: 15,
            m: 35,
            clamp_nonnegative: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.k == 0 || self.m == 0 {
            return Err(Error::invalid("k and m must be at least 1"));
        }
        Ok(())
    }
}

/// `F = soft(Y* − Y, γ) + Y`, entrywise.
pub fn apply_error_sparsity(y_star: &DenseMatrix, y: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    check_len("apply_error_sparsity rows", y.rows(), y_star.rows())?;
    check_len("apply_error_sparsity cols", y.cols(), y_star.cols())?;
    if gamma == 0.0 {
        return Ok(y_star.clone());
    }
    let data = y_star
        .data()
        .iter()
        .zip(y.data())
        .map(|(&s, &o)| {
            let step = soft(s - o, gamma);
            if step == 0.0 {
                o
            } else {
                o + step
            }
        })
        .collect();
    DenseMatrix::from_vec(y.rows(), y.cols(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub refined: BowMatrix,
    /// Step-1 solve of every word column; empty when `λ = 0`.
    pub reports: Vec<SolverReport>,
}

/// Refines `y` on the graph of `other`'s linear kernel.
pub fn refine(y: &BowMatrix, other: &BowMatrix, cfg: &RefineConfig, seed: u64) -> Result<Refinement> {
    cfg.validate()?;
    check_len("refine: document counts", y.n(), other.n())?;
    let (y_star, reports) = if cfg.lambda == 0.0 {
        // λ = 0 leaves ½‖F − Y‖² alone, minimized by Y itself.
        (y.matrix().clone(), Vec::new())
    } else {
        let n = y.n();
        if cfg.m > n {
            return Err(Error::invalid(format!("m = {} exceeds document count {n}", cfg.m)));
        }
        let graph = GraphConfig {
            sigma: 1.0,
            k: cfg.k,
            symmetrization: Symmetrization::Union,
        };
        let w = linear_knn_graph(&other.as_features()?, &graph)?;
        let laplacian = normalized_laplacian(&w)?;
        let basis = build_basis(&laplacian, cfg.m, seed)?;
        let labels = LabelMatrix::from_counts(y.matrix().clone())?;
        let solution = l1_ssl_fit(&basis, &labels, &SolverOptions::with_lambda(cfg.lambda))?;
        (solution.scores, solution.reports)
    };
    let mut refined = apply_error_sparsity(&y_star, y.matrix(), cfg.gamma)?;
    if cfg.clamp_nonnegative {
        let clamped = refined.data().iter().map(|v| v.max(0.0)).collect();
        refined = DenseMatrix::from_vec(refined.rows(), refined.cols(), clamped)?;
    }
    Ok(Refinement {
        refined: BowMatrix::from_scores(refined),
        reports,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoRefinement {
    pub visual: Refinement,
    pub textual: Refinement,
}

/// Refines each modality on the other's graph; both passes read only the
/// original inputs.
pub fn co_refine(
    visual: &BowMatrix,
    textual: &BowMatrix,
    cfg_visual: &RefineConfig,
    cfg_textual: &RefineConfig,
    seed: u64,
) -> Result<CoRefinement> {
    check_len("co_refine: document counts", visual.n(), textual.n())?;
    cfg_visual.validate()?;
    cfg_textual.validate()?;
    let (v, t) = rayon::join(
        || refine(visual, textual, cfg_visual, seed),
        || refine(textual, visual, cfg_textual, seed),
    );
    Ok(CoRefinement {
        visual: v?,
        textual: t?,
    })
}
