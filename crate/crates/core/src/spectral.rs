//! Spectral basis of the normalized Laplacian and the two smoothness measures
//! built on the symmetric factor `B = Σ^½ Vᵀ` (so that `BᵀB = 𝓛`).
//!
//! `B` is only exact when every eigenvector is present; operations that need
//! it refuse a truncated basis. The classification path never forms `B`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm2, smallest_eigenpairs, DenseMatrix, EigenPairs, SparseSymMatrix};

/// Residual tolerance (relative to `‖𝓛‖`) used when building bases.
pub const EIGEN_TOL: f64 = 1e-6;

/// Eigenvalues in `[−EIGEN_CLAMP, 0)` are treated as numerical noise and set
/// to zero.
pub const EIGEN_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    vectors: DenseMatrix,
    eigenvalues: Vec<f64>,
    sqrt_eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    /// Checks the basis invariants: orthonormal columns (to 1e-8) and
    /// ascending eigenvalues in `[−1e-8, 2 + 1e-8]`.
    pub fn from_parts(vectors: DenseMatrix, eigenvalues: Vec<f64>) -> Result<Self> {
        check_len("SpectralBasis eigenvalues", vectors.cols(), eigenvalues.len())?;
        if vectors.cols() == 0 || vectors.cols() > vectors.rows() {
            return Err(Error::invalid(format!(
                "basis must have 1 <= m <= n columns, got m = {}, n = {}",
                vectors.cols(),
                vectors.rows()
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("eigenvalues must be sorted ascending"));
        }
        let mut clamped = Vec::with_capacity(eigenvalues.len());
        for &v in &eigenvalues {
            if v < -EIGEN_CLAMP {
                return Err(Error::NotPsd(v));
            }
            if v > 2.0 + EIGEN_CLAMP {
                return Err(Error::invalid(format!(
                    "eigenvalue {v} outside [0, 2]; not a normalized Laplacian"
                )));
            }
            clamped.push(v.max(0.0));
        }
        let gram = vectors.gram();
        let err = gram.max_abs_diff(&DenseMatrix::identity(vectors.cols()))?;
        if err > 1e-8 {
            return Err(Error::invalid(format!(
                "basis columns are not orthonormal (error {err:.2e})"
            )));
        }
        let sqrt_eigenvalues = clamped.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            vectors,
            eigenvalues: clamped,
            sqrt_eigenvalues,
        })
    }

    pub fn from_eigenpairs(pairs: EigenPairs) -> Result<Self> {
        Self::from_parts(pairs.vectors, pairs.values)
    }

    pub fn n(&self) -> usize {
        self.vectors.rows()
    }

    pub fn m(&self) -> usize {
        self.vectors.cols()
    }

    /// True when all `n` eigenvectors are present.
    pub fn is_full(&self) -> bool {
        self.m() == self.n()
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `Σᵢᵢ^½` per column: the per-coefficient L1 weights.
    pub fn sqrt_eigenvalues(&self) -> &[f64] {
        &self.sqrt_eigenvalues
    }

    /// `V_mᵀ f`
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.vectors.tr_matvec(f)
    }

    /// `V_m α`
    pub fn reconstruct(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.vectors.matvec(alpha)
    }

    fn require_full(&self) -> Result<()> {
        if !self.is_full() {
            return Err(Error::TruncatedBasis {
                m: self.m(),
                n: self.n(),
            });
        }
        Ok(())
    }

    /// `B f = Σ^½ Vᵀ f`
    pub fn apply_b(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.require_full()?;
        let mut out = self.coefficients(f)?;
        for (o, s) in out.iter_mut().zip(&self.sqrt_eigenvalues) {
            *o *= s;
        }
        Ok(out)
    }

    /// The dense factor `B` (full basis only).
    pub fn b_matrix(&self) -> Result<DenseMatrix> {
        self.require_full()?;
        let mut b = self.vectors.transpose();
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                b.set(i, j, b.get(i, j) * self.sqrt_eigenvalues[i]);
            }
        }
        Ok(b)
    }

    /// `Ω̃(f) = ‖B f‖₁`
    pub fn l1_smoothness(&self, f: &[f64]) -> Result<f64> {
        Ok(self.apply_b(f)?.iter().map(|v| v.abs()).sum())
    }

    /// `Σᵢ |αᵢ| Σᵢᵢ^½`, the L1 smoothness of `V_m α`. Valid on a truncated
    /// basis because `B V_m α` is zero outside the first `m` rows.
    pub fn weighted_l1(&self, alpha: &[f64]) -> Result<f64> {
        check_len("weighted_l1", self.m(), alpha.len())?;
        Ok(alpha.iter().zip(&self.sqrt_eigenvalues).map(|(a, s)| a.abs() * s).sum())
    }
}

/// Eigen-decomposes `𝓛` and keeps the `m` smallest eigenpairs.
pub fn build_basis(laplacian: &SparseSymMatrix, m: usize, seed: u64) -> Result<SpectralBasis> {
    let pairs = smallest_eigenpairs(laplacian, m, EIGEN_TOL, seed)?;
    SpectralBasis::from_eigenpairs(pairs)
}

/// `Ω(f) = fᵀ 𝓛 f`, clamped at zero against rounding.
pub fn l2_smoothness(laplacian: &SparseSymMatrix, f: &[f64]) -> Result<f64> {
    Ok(laplacian.quadratic_form(f)?.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// `fᵀ 𝓛 f`
    pub l2_smoothness: f64,
    /// `‖B f‖₁`
    pub l1_smoothness: f64,
    /// `‖f − y‖₂²`
    pub fitting_error: f64,
}

pub fn smoothness_report(
    basis: &SpectralBasis,
    laplacian: &SparseSymMatrix,
    f: &[f64],
    y: &[f64],
) -> Result<SmoothnessReport> {
    check_len("smoothness_report", f.len(), y.len())?;
    let l1 = basis.l1_smoothness(f)?;
    let l2 = l2_smoothness(laplacian, f)?;
    let diff: Vec<f64> = f.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(SmoothnessReport {
        l2_smoothness: l2,
        l1_smoothness: l1,
        fitting_error: dot(&diff, &diff),
    })
}

/// `‖B f‖₂` via the basis, for cross-checks against `fᵀ𝓛f`.
pub fn b_norm2(basis: &SpectralBasis, f: &[f64]) -> Result<f64> {
    Ok(norm2(&basis.apply_b(f)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path2() -> SparseSymMatrix {
        SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)]).unwrap()
    }

    #[test]
    fn two_node_basis() {
        let b = build_basis(&path2(), 2, 0).unwrap();
        assert!(b.is_full());
        assert!(b.eigenvalues()[0].abs() < 1e-12 && (b.eigenvalues()[1] - 2.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = b.vectors().column(0);
        let v1 = b.vectors().column(1);
        assert!((v0[0].abs() - s).abs() < 1e-12 && (v0[0] - v0[1]).abs() < 1e-12);
        assert!((v1[0].abs() - s).abs() < 1e-12 && (v1[0] + v1[1]).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_maps_to_single_spike() {
        let b = build_basis(&path2(), 2, 0).unwrap();
        let out = b.apply_b(&b.vectors().column(1)).unwrap();
        assert!(out[0].abs() < 1e-12);
        assert!((out[1].abs() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(b.apply_b(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_node_l2_smoothness() {
        assert_eq!(l2_smoothness(&path2(), &[1.0, -1.0]).unwrap(), 4.0);
        assert_eq!(l2_smoothness(&path2(), &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn truncated_basis_refuses_b() {
        let b = build_basis(&path2(), 1, 0).unwrap();
        assert!(matches!(
            b.apply_b(&[1.0, 0.0]),
            Err(Error::TruncatedBasis { m: 1, n: 2 })
        ));
        assert!(b.l1_smoothness(&[1.0, 0.0]).is_err());
        assert!(smoothness_report(&b, &path2(), &[1.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn report_edge_cases() {
        let b = build_basis(&path2(), 2, 0).unwrap();
        let r = smoothness_report(&b, &path2(), &[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(r.fitting_error, 0.0);
        let z = smoothness_report(&b, &path2(), &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((z.l1_smoothness, z.l2_smoothness, z.fitting_error), (0.0, 0.0, 0.0));
    }

    #[test]
    fn small_negative_eigenvalues_are_clamped() {
        let v = DenseMatrix::identity(2);
        let b = SpectralBasis::from_parts(v.clone(), vec![-5e-9, 1.0]).unwrap();
        assert_eq!(b.eigenvalues()[0], 0.0);
        assert_eq!(b.sqrt_eigenvalues()[0], 0.0);
        assert!(matches!(
            SpectralBasis::from_parts(v, vec![-1e-6, 1.0]),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let v = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(SpectralBasis::from_parts(v, vec![0.0, 1.0]).is_err());
    }
}
