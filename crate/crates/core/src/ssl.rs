//! Multi-class semi-supervised classification.
//!
//! A `C`-class problem splits into `C` independent two-class problems, one per
//! column of the one-hot label matrix; each point takes the class whose score
//! column is largest (ties go to the lowest class index).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{gaussian_knn_graph, normalized_laplacian, FeatureMatrix, GraphConfig};
use crate::linalg::{DenseMatrix, SparseSymMatrix};
use crate::solver::{fista_weighted_l1, l2_ssl_solve, SolverOptions, SolverReport};
use crate::spectral::{build_basis, SpectralBasis};

/// `n × C` matrix of initial labels (one-hot or zero rows), or of
/// nonnegative word counts when used for BOW refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    data: DenseMatrix,
}

impl LabelMatrix {
    /// Wraps an arbitrary nonnegative matrix (BOW counts).
    pub fn from_counts(data: DenseMatrix) -> Result<Self> {
        if let Some(p) = data.data().iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "count matrix entry ({}, {}) must be finite and >= 0",
                p / data.cols().max(1),
                p % data.cols().max(1)
            )));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn classes(&self) -> usize {
        self.data.cols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.data
    }

    /// True when every row is all-zero or one-hot.
    pub fn is_one_hot(&self) -> bool {
        (0..self.n()).all(|i| {
            let row = self.data.row(i);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            zeros == row.len() || (ones == 1 && zeros == row.len() - 1)
        })
    }
}

/// `y_ij = 1` when point `i` is labeled with class `j`, zero otherwise.
pub fn encode_labels(assignments: &[(usize, usize)], n: usize, classes: usize) -> Result<LabelMatrix> {
    let mut data = DenseMatrix::zeros(n, classes);
    let mut seen = vec![false; n];
    for &(i, c) in assignments {
        if i >= n {
            return Err(Error::invalid(format!("label index {i} out of range (n = {n})")));
        }
        if c >= classes {
            return Err(Error::invalid(format!("class {c} out of range (C = {classes})")));
        }
        if seen[i] {
            return Err(Error::DuplicateIndex(i));
        }
        seen[i] = true;
        data.set(i, c, 1.0);
    }
    Ok(LabelMatrix { data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// `n × C` score matrix `F`.
    pub scores: DenseMatrix,
    /// Row-wise argmax of `scores`, ties to the lowest class.
    pub labels: Vec<usize>,
    /// One report per class column (empty for the L2 baseline).
    pub reports: Vec<SolverReport>,
}

impl Solution {
    fn from_columns(columns: Vec<Vec<f64>>, reports: Vec<SolverReport>) -> Result<Self> {
        let scores = DenseMatrix::from_columns(&columns)?;
        let labels = argmax_rows(&scores);
        Ok(Self {
            scores,
            labels,
            reports,
        })
    }
}

pub fn argmax_rows(scores: &DenseMatrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// One L1 subproblem per class column: `f_j = V_m α_j*`.
pub fn l1_ssl_fit(basis: &SpectralBasis, y: &LabelMatrix, opts: &SolverOptions) -> Result<Solution> {
    check_len("l1_ssl_fit", basis.n(), y.n())?;
    opts.validate()?;
    let results: Vec<Result<(Vec<f64>, SolverReport)>> = (0..y.classes())
        .into_par_iter()
        .map(|j| l1_ssl_column(basis, &y.column(j), opts).map_err(|e| class_error(j, e)))
        .collect();
    let mut columns = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (f, rep) = r?;
        columns.push(f);
        reports.push(rep);
    }
    Solution::from_columns(columns, reports)
}

/// Two-class L1 fit of a single label vector.
pub fn l1_ssl_column(basis: &SpectralBasis, y: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolverReport)> {
    let (alpha, report) = fista_weighted_l1(basis, y, opts)?;
    Ok((basis.reconstruct(&alpha)?, report))
}

/// Column `j` of the scores is `(I + λ𝓛)⁻¹ Y_{·j}`.
pub fn l2_ssl_fit(laplacian: &SparseSymMatrix, y: &LabelMatrix, lambda: f64) -> Result<Solution> {
    check_len("l2_ssl_fit", laplacian.n(), y.n())?;
    let columns: Vec<Result<Vec<f64>>> = (0..y.classes())
        .into_par_iter()
        .map(|j| l2_ssl_solve(laplacian, &y.column(j), lambda).map_err(|e| class_error(j, e)))
        .collect();
    Solution::from_columns(columns.into_iter().collect::<Result<_>>()?, Vec::new())
}

fn class_error(class: usize, e: Error) -> Error {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => e,
        other => Error::Class {
            class,
            source: Box::new(other),
        },
    }
}

/// Graph, Laplacian and `m`-vector basis for a feature matrix.
pub fn prepare(
    x: &FeatureMatrix,
    graph: &GraphConfig,
    m: usize,
    seed: u64,
) -> Result<(SparseSymMatrix, SpectralBasis)> {
    if m == 0 || m > x.n() {
        return Err(Error::invalid(format!(
            "basis size m = {m} must satisfy 1 <= m <= n = {}",
            x.n()
        )));
    }
    let w = gaussian_knn_graph(x, graph)?;
    let laplacian = normalized_laplacian(&w)?;
    let basis = build_basis(&laplacian, m, seed)?;
    Ok((laplacian, basis))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScope {
    /// `⌊fraction · total⌋` labels drawn from the whole labeled pool.
    #[default]
    Global,
    /// `⌊fraction · count_c⌋` labels drawn within each class.
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub labeled_per_class: usize,
    pub noise_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub scope: NoiseScope,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::invalid(format!(
                "noise fraction must lie in [0, 1], got {}",
                self.noise_fraction
            )));
        }
        if self.labeled_per_class == 0 {
            return Err(Error::invalid("labeled_per_class must be at least 1"));
        }
        Ok(())
    }
}

fn corrupted_count(fraction: f64, count: usize) -> usize {
    // Guards products such as 0.29 * 100 = 28.999999999999996.
    ((fraction * count as f64) + 1e-9).floor() as usize
}

/// Replaces the class of a seeded random subset of `assignments` by a
/// uniformly drawn different class. Indices are never changed.
pub fn inject_label_noise(
    assignments: &[(usize, usize)],
    spec: &NoiseSpec,
    classes: usize,
) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&spec.noise_fraction) {
        return Err(Error::invalid(format!(
            "noise fraction must lie in [0, 1], got {}",
            spec.noise_fraction
        )));
    }
    if let Some(&(_, c)) = assignments.iter().find(|(_, c)| *c >= classes) {
        return Err(Error::invalid(format!("class {c} out of range (C = {classes})")));
    }
    let mut out = assignments.to_vec();
    if spec.noise_fraction == 0.0 || assignments.is_empty() {
        return Ok(out);
    }
    if classes < 2 {
        return Err(Error::invalid("label noise needs at least two classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups: Vec<Vec<usize>> = match spec.scope {
        NoiseScope::Global => vec![(0..out.len()).collect()],
        NoiseScope::PerClass => (0..classes)
            .map(|c| (0..out.len()).filter(|&p| out[p].1 == c).collect())
            .collect(),
    };
    for group in groups {
        let count = corrupted_count(spec.noise_fraction, group.len());
        for pick in sample(&mut rng, group.len(), count).into_vec() {
            let pos = group[pick];
            let original = out[pos].1;
            let r = rng.random_range(0..classes - 1);
            out[pos].1 = if r >= original { r + 1 } else { r };
        }
    }
    Ok(out)
}

/// Picks `per_class` points of every class uniformly at random. Output is
/// ordered by class, then by draw order.
pub fn choose_labeled(truth: &[usize], classes: usize, per_class: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == c).collect();
        if members.len() < per_class {
            return Err(Error::invalid(format!(
                "class {c} has {} points, cannot label {per_class}",
                members.len()
            )));
        }
        for pick in sample(&mut rng, members.len(), per_class).into_vec() {
            out.push((members[pick], c));
        }
    }
    Ok(out)
}

/// Fraction of masked points whose prediction matches the truth.
pub fn evaluate(predicted: &[usize], truth: &[usize], mask: &[bool]) -> Result<f64> {
    check_len("evaluate: truth", predicted.len(), truth.len())?;
    check_len("evaluate: mask", predicted.len(), mask.len())?;
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(Error::invalid("evaluation mask selects no points"));
    }
    let correct = (0..predicted.len())
        .filter(|&i| mask[i] && predicted[i] == truth[i])
        .count();
    Ok(correct as f64 / total as f64)
}

/// Mask selecting the points not present in `assignments`.
pub fn unlabeled_mask(n: usize, assignments: &[(usize, usize)]) -> Vec<bool> {
    let mut mask = vec![true; n];
    for &(i, _) in assignments {
        if i < n {
            mask[i] = false;
        }
    }
    mask
}
