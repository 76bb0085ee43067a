//! Affinity graphs over feature vectors and the normalized graph Laplacian.
//!
//! Weight matrices never carry self-loops: the kernel value on the diagonal is
//! dropped, so vertex degrees count only edges to other vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::SparseSymMatrix;

/// `n × d` sample matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        check_len("FeatureMatrix::new", n * d, data.len())?;
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                p / d.max(1),
                p % d.max(1)
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            check_len("FeatureMatrix::from_rows", d, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len("FeatureMatrix::permuted", self.n, perm.len())?;
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Self::new(self.n, self.d, data)
    }

    fn check_nonnegative(&self) -> Result<()> {
        if let Some(p) = self.data.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeFeature {
                row: p / self.d,
                col: p % self.d,
                value: self.data[p],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Gaussian,
    Linear,
    Precomputed,
}

/// Symmetric nonnegative affinity matrix with zero diagonal; every stored
/// weight is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    inner: SparseSymMatrix,
    kind: WeightKind,
}

impl WeightMatrix {
    /// Wraps a user-supplied matrix after checking the weight invariants.
    pub fn precomputed(inner: SparseSymMatrix) -> Result<Self> {
        Self::checked(inner, WeightKind::Precomputed)
    }

    fn checked(inner: SparseSymMatrix, kind: WeightKind) -> Result<Self> {
        for (i, j, v) in inner.iter() {
            if i == j {
                return Err(Error::invalid(format!("weight matrix has a self-loop at vertex {i}")));
            }
            if !(v > 0.0) {
                return Err(Error::invalid(format!("weight ({i}, {j}) = {v} is not positive")));
            }
        }
        Ok(Self { inner, kind })
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.inner.nnz()
    }

    /// `D_ii = Σ_j w_ij`
    pub fn degrees(&self) -> Vec<f64> {
        self.inner.row_sums()
    }

    fn neighbor_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut lists = vec![Vec::new(); self.n()];
        for (i, j, v) in self.inner.iter() {
            lists[i].push((j, v));
            lists[j].push((i, v));
        }
        lists
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    /// Keep an edge if either endpoint selects the other.
    #[default]
    Union,
    /// Keep an edge only if both endpoints select each other.
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    /// Neighbors selected per vertex.
    pub k: usize,
    pub symmetrization: Symmetrization,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            k: 4,
            symmetrization: Symmetrization::Union,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_sigma(self.sigma)?;
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k >= n {
            return Err(Error::invalid(format!("k = {} must be smaller than n = {n}", self.k)));
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

#[inline]
fn gaussian(a: &[f64], b: &[f64], two_sigma_sq: f64) -> f64 {
    (-squared_distance(a, b) / two_sigma_sq).exp()
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn inner_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fully connected graph with `w_ij = exp(−‖x_i − x_j‖² / (2σ²))` for `i ≠ j`.
/// Pairs whose weight underflows to zero are not stored.
pub fn gaussian_weights(x: &FeatureMatrix, sigma: f64) -> Result<WeightMatrix> {
    check_sigma(sigma)?;
    if x.n() < 2 {
        return Err(Error::invalid("a graph needs at least two samples"));
    }
    let two_sigma_sq = 2.0 * sigma * sigma;
    let n = x.n();
    let triplets = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, gaussian(x.row(i), x.row(j), two_sigma_sq))));
    WeightMatrix::checked(SparseSymMatrix::from_triplets(n, triplets)?, WeightKind::Gaussian)
}

/// `w_ij = ⟨x_i, x_j⟩` for `i ≠ j`. Features must be nonnegative.
pub fn linear_kernel(x: &FeatureMatrix) -> Result<WeightMatrix> {
    x.check_nonnegative()?;
    if x.n() < 1 {
        return Err(Error::invalid("a graph needs at least one sample"));
    }
    let n = x.n();
    let triplets = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, inner_product(x.row(i), x.row(j)))));
    WeightMatrix::checked(SparseSymMatrix::from_triplets(n, triplets)?, WeightKind::Linear)
}

/// Orders candidates by weight descending, ties to the lower index, and keeps
/// the first `k`.
fn top_k(mut candidates: Vec<(usize, f64)>, k: usize) -> Vec<usize> {
    candidates.retain(|&(_, w)| w > 0.0);
    let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k, order);
        candidates.truncate(k);
    }
    candidates.sort_by(order);
    candidates.into_iter().map(|(j, _)| j).collect()
}

/// Streaming form of `top_k` for candidates offered in ascending index
/// order: a later candidate only enters on a strictly larger weight, which is
/// the lower-index tie rule. Each entry carries a caller-defined pruning key.
struct Nearest {
    k: usize,
    best: Vec<(usize, f64, f64)>,
}

impl Nearest {
    fn new(k: usize) -> Self {
        Self {
            k,
            best: Vec::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.best.len() == self.k
    }

    fn last_key(&self) -> f64 {
        self.best[self.k - 1].2
    }

    fn offer(&mut self, j: usize, w: f64, key: f64) {
        if !(w > 0.0) || (self.is_full() && !(w > self.best[self.k - 1].1)) {
            return;
        }
        let pos = self.best.partition_point(|e| e.1 >= w);
        self.best.insert(pos, (j, w, key));
        self.best.truncate(self.k);
    }

    fn into_indices(self) -> Vec<usize> {
        self.best.into_iter().map(|e| e.0).collect()
    }
}

/// Combines per-vertex neighbor selections into a symmetric edge set.
fn symmetrize(
    n: usize,
    selections: &[Vec<usize>],
    weight: impl Fn(usize, usize) -> f64,
    mode: Symmetrization,
) -> Result<SparseSymMatrix> {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    match mode {
        Symmetrization::Union => {
            for (i, sel) in selections.iter().enumerate() {
                for &j in sel {
                    edges.push((i.min(j), i.max(j)));
                }
            }
            edges.sort_unstable();
            edges.dedup();
        }
        Symmetrization::Mutual => {
            let mut sets: Vec<Vec<usize>> = selections.to_vec();
            sets.iter_mut().for_each(|s| s.sort_unstable());
            for (i, sel) in selections.iter().enumerate() {
                for &j in sel {
                    if i < j && sets[j].binary_search(&i).is_ok() {
                        edges.push((i, j));
                    }
                }
            }
            edges.sort_unstable();
        }
    }
    SparseSymMatrix::from_triplets(n, edges.into_iter().map(|(i, j)| (i, j, weight(i, j))))
}

/// Keeps, for each vertex, its `k` largest-weight edges, then symmetrizes by
/// union or mutual selection. Surviving weights are unchanged.
pub fn knn_sparsify(w: &WeightMatrix, config: &GraphConfig) -> Result<WeightMatrix> {
    let n = w.n();
    if config.k == 0 || config.k >= n {
        return Err(Error::invalid(format!(
            "k = {} must satisfy 1 <= k < n = {n}",
            config.k
        )));
    }
    let selections: Vec<Vec<usize>> = w
        .neighbor_lists()
        .into_iter()
        .map(|list| top_k(list, config.k))
        .collect();
    let inner = symmetrize(n, &selections, |i, j| w.get(i, j), config.symmetrization)?;
    WeightMatrix::checked(inner, w.kind)
}

/// k-NN Gaussian graph without materializing the dense kernel. Produces the
/// same graph as `knn_sparsify(gaussian_weights(x, σ), config)`.
pub fn gaussian_knn_graph(x: &FeatureMatrix, config: &GraphConfig) -> Result<WeightMatrix> {
    let n = x.n();
    config.validate(n)?;
    let two_sigma_sq = 2.0 * config.sigma * config.sigma;
    let selections: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut best = Nearest::new(config.k);
            for j in (0..n).filter(|&j| j != i) {
                let d2 = squared_distance(xi, x.row(j));
                // exp is monotone, so a farther point cannot beat the k-th
                if best.is_full() && d2 >= best.last_key() {
                    continue;
                }
                best.offer(j, (-d2 / two_sigma_sq).exp(), d2);
            }
            best.into_indices()
        })
        .collect();
    let inner = symmetrize(
        n,
        &selections,
        |i, j| gaussian(x.row(i), x.row(j), two_sigma_sq),
        config.symmetrization,
    )?;
    WeightMatrix::checked(inner, WeightKind::Gaussian)
}

/// k-NN linear-kernel graph; same result as
/// `knn_sparsify(linear_kernel(x), config)`. `config.sigma` is unused.
pub fn linear_knn_graph(x: &FeatureMatrix, config: &GraphConfig) -> Result<WeightMatrix> {
    x.check_nonnegative()?;
    let n = x.n();
    if config.k == 0 || config.k >= n {
        return Err(Error::invalid(format!(
            "k = {} must satisfy 1 <= k < n = {n}",
            config.k
        )));
    }
    let selections: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut best = Nearest::new(config.k);
            for j in (0..n).filter(|&j| j != i) {
                best.offer(j, inner_product(xi, x.row(j)), 0.0);
            }
            best.into_indices()
        })
        .collect();
    let inner = symmetrize(
        n,
        &selections,
        |i, j| inner_product(x.row(i), x.row(j)),
        config.symmetrization,
    )?;
    WeightMatrix::checked(inner, WeightKind::Linear)
}

/// `𝓛 = I − D^(−½) W D^(−½)`. Fails on the first zero-degree vertex.
pub fn normalized_laplacian(w: &WeightMatrix) -> Result<SparseSymMatrix> {
    let degrees = w.degrees();
    if let Some(vertex) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex { vertex });
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = w.n();
    let off = w
        .matrix()
        .iter()
        .map(|(i, j, v)| (i, j, -v * inv_sqrt[i] * inv_sqrt[j]));
    SparseSymMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).chain(off))
}
