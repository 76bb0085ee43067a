//! Independent reference implementations used as test oracles.

#![allow(dead_code, clippy::needless_range_loop)]

use l1ssl::graph::WeightMatrix;
use l1ssl::linalg::{DenseMatrix, SparseSymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix. Returns
/// eigenvalues ascending and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DenseMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i]);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Dense product of a matrix given by rows with a vector.
pub fn dense_matvec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.row(i).iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Dense normalized Laplacian `I − D^-½ W D^-½` computed entry by entry.
pub fn dense_laplacian(w: &DenseMatrix) -> DenseMatrix {
    let n = w.rows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            l.set(i, j, id - w.get(i, j) / (d[i] * d[j]).sqrt());
        }
    }
    l
}

/// Random connected weighted graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(n: usize, extra: usize, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = std::collections::BTreeMap::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.insert((j, i), rng.random_range(0.1..2.0));
    }
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.insert((i.min(j), i.max(j)), rng.random_range(0.1..2.0));
        }
    }
    let triplets: Vec<_> = edges.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    WeightMatrix::precomputed(SparseSymMatrix::from_triplets(n, triplets).unwrap()).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Minimizes a function of two variables on a uniform grid over `[lo, hi]²`.
pub fn grid_min_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64, f64) {
    let steps = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps {
        let a = lo + i as f64 * step;
        for j in 0..=steps {
            let b = lo + j as f64 * step;
            let v = f(a, b);
            if v < best.0 {
                best = (v, a, b);
            }
        }
    }
    best
}

/// Minimizer of a scalar function on a uniform grid.
pub fn grid_argmin_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let steps = ((hi - lo) / step).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * step)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}
