use crate::error::{check_len, Error, Result};
use crate::linalg::dense::{dot, DenseMatrix};

/// Symmetric sparse matrix holding only the upper triangle (`row <= col`) in
/// compressed-row form. Explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds the matrix from `(row, col, value)` triplets. Each unordered
    /// pair may appear once, in either orientation; zero values are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside {n}x{n} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
            }
            if v != 0.0 {
                entries.push((i.min(j), i.max(j), v));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid(format!(
                "entry ({}, {}) given more than once",
                w[0].0, w[0].1
            )));
        }

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_triplets(n, std::iter::empty())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    /// Dense symmetric input; only the upper triangle is read.
    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        check_len("SparseSymMatrix::from_dense", a.rows(), a.cols())?;
        let n = a.rows();
        Self::from_triplets(
            n,
            (0..n)
                .flat_map(|i| (i..n).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, a.get(i, j))),
        )
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries as `(row, col, value)` with `row <= col`, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (i.min(j), i.max(j));
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(p) => self.values[self.row_ptr[r] + p],
            Err(_) => 0.0,
        }
    }

    /// `A x`, touching each stored entry exactly once.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv", self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let v = self.values[p];
                acc += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += acc;
        }
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.spmv(x)?;
        Ok(dot(x, &ax))
    }

    /// Sum of the full (symmetric) row `i`, i.e. `Σ_j a_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            s[i] += v;
            if i != j {
                s[j] += v;
            }
        }
        s
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let mut s = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            s[i] += v.abs();
            if i != j {
                s[j] += v.abs();
            }
        }
        s.into_iter().fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            d.set(i, j, v);
            d.set(j, i, v);
        }
        d
    }

    /// `alpha * I + beta * self`
    pub fn shifted(&self, alpha: f64, beta: f64) -> Result<Self> {
        let mut diag_seen = vec![false; self.n];
        let mut t: Vec<(usize, usize, f64)> = self
            .iter()
            .map(|(i, j, v)| {
                if i == j {
                    diag_seen[i] = true;
                    (i, j, alpha + beta * v)
                } else {
                    (i, j, beta * v)
                }
            })
            .collect();
        t.extend((0..self.n).filter(|&i| !diag_seen[i]).map(|i| (i, i, alpha)));
        Self::from_triplets(self.n, t)
    }

    /// Symmetric permutation `P A Pᵀ` where row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len("SparseSymMatrix::permuted", self.n, perm.len())?;
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.n || inv[old] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inv[old] = new;
        }
        Self::from_triplets(self.n, self.iter().map(|(i, j, v)| (inv[i], inv[j], v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path2() -> SparseSymMatrix {
        SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)]).unwrap()
    }

    #[test]
    fn constant_vector_in_kernel() {
        assert_eq!(path2().spmv(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn eigenvector_with_eigenvalue_two() {
        assert_eq!(path2().spmv(&[1.0, -1.0]).unwrap(), vec![2.0, -2.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(path2().spmv(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lower_triangle_input_is_canonicalized() {
        let a = SparseSymMatrix::from_triplets(3, [(2, 0, 4.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.get(2, 0), 4.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn zeros_and_duplicates() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 1, 0.0)]).unwrap();
        assert_eq!(a.nnz(), 0);
        assert!(SparseSymMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(SparseSymMatrix::from_triplets(0, []).is_err());
    }

    #[test]
    fn shifted_adds_missing_diagonal() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 1, -1.0)]).unwrap();
        let s = a.shifted(1.0, 2.0).unwrap();
        assert_eq!(s.to_dense().data(), &[1.0, -2.0, -2.0, 1.0]);
    }
}
