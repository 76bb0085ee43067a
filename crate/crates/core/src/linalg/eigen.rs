//! Partial eigensolver for the algebraically smallest eigenpairs of a sparse
//! symmetric positive semidefinite matrix.
//!
//! Small problems (`n <= DENSE_LIMIT`) are solved by a full dense symmetric
//! eigendecomposition. Larger ones use thick-restart Lanczos with full
//! reorthogonalization. Converged Ritz pairs are locked and a new run starts
//! from a fresh random vector orthogonal to everything locked, which recovers
//! repeated eigenvalues (e.g. one zero eigenvalue per connected component)
//! that a single Krylov sequence cannot see. A final deflated run checks that
//! no eigenvalue below the current `m`-th has been missed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{axpy, dot, norm2, DenseMatrix};
use crate::linalg::sparse::SparseSymMatrix;

/// Above this size the dense path is replaced by Lanczos.
pub const DENSE_LIMIT: usize = 512;

/// Minimum number of extra Ritz vectors carried beyond the wanted ones.
const MIN_EXTRA: usize = 40;

/// Matrix-vector products allowed per run, per vector of restart space.
const STEPS_PER_DIM: usize = 100;

/// Eigenpairs in ascending eigenvalue order; column `i` of `vectors` pairs
/// with `values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `‖A vᵢ − λᵢ vᵢ‖₂` over the stored pairs.
    pub fn max_residual(&self, a: &SparseSymMatrix) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, &lambda) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            let av = a.spmv(&v)?;
            let r = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - lambda * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// The `m` algebraically smallest eigenpairs of `a`, each with residual at
/// most `tol · ‖A‖` (Gershgorin estimate). `seed` fixes the Lanczos start
/// vectors.
pub fn smallest_eigenpairs(a: &SparseSymMatrix, m: usize, tol: f64, seed: u64) -> Result<EigenPairs> {
    check_request(a, m, tol)?;
    if a.n() <= DENSE_LIMIT {
        dense_smallest(a, m)
    } else {
        lanczos_smallest(a, m, tol, seed)
    }
}

fn check_request(a: &SparseSymMatrix, m: usize, tol: f64) -> Result<()> {
    if m == 0 || m > a.n() {
        return Err(Error::invalid(format!(
            "requested {m} eigenpairs of a {n}x{n} matrix (need 1 <= m <= n)",
            n = a.n()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "eigensolver tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Full dense decomposition, keeping the `m` smallest pairs.
pub fn dense_smallest(a: &SparseSymMatrix, m: usize) -> Result<EigenPairs> {
    check_request(a, m, 1.0)?;
    let n = a.n();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in a.iter() {
        dense[(i, j)] = v;
        dense[(j, i)] = v;
    }
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));

    let mut vectors = DenseMatrix::zeros(n, m);
    let mut values = Vec::with_capacity(m);
    for (col, &k) in order.iter().take(m).enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            vectors.set(i, col, v[i]);
        }
    }
    Ok(EigenPairs { values, vectors })
}

/// Lanczos path, usable at any size (the dispatcher only picks it for large
/// `n`).
pub fn lanczos_smallest(a: &SparseSymMatrix, m: usize, tol: f64, seed: u64) -> Result<EigenPairs> {
    check_request(a, m, tol)?;
    let n = a.n();
    let norm = a.norm_bound().max(f64::MIN_POSITIVE);
    let threshold = tol * norm;
    let budget = STEPS_PER_DIM * (2 * m).max(m + MIN_EXTRA);
    let max_runs = 2 * m + 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut worst_residual = 0.0f64;

    for _ in 0..max_runs {
        let free = n - locked_vecs.len();
        if free == 0 {
            break;
        }
        let verifying = locked_vecs.len() >= m;
        let want = if verifying { 1 } else { m - locked_vecs.len() };
        let dim = (want + want.max(MIN_EXTRA)).min(free);
        let run = lanczos_run(a, &locked_vecs, want, dim, budget, threshold, norm, &mut rng);

        let Some(run) = run else {
            // Start vector vanished after deflation: the locked set spans
            // the whole space numerically.
            break;
        };
        worst_residual = run.best_unconverged.max(0.0);

        if verifying {
            let mth = kth_smallest(&locked_vals, m);
            match run.pairs.first() {
                Some((val, _)) if *val < mth - threshold => {}
                Some(_) => return Ok(assemble(locked_vals, locked_vecs, m)),
                None => {
                    return Err(Error::NonConvergence {
                        what: "Lanczos verification run",
                        iterations: budget,
                        residual: run.best_unconverged,
                    })
                }
            }
        }
        if run.pairs.is_empty() {
            return Err(Error::NonConvergence {
                what: "Lanczos eigensolver",
                iterations: budget,
                residual: run.best_unconverged,
            });
        }
        for (val, vec) in run.pairs {
            locked_vals.push(val);
            locked_vecs.push(vec);
        }
    }

    if locked_vecs.len() >= m {
        return Ok(assemble(locked_vals, locked_vecs, m));
    }
    Err(Error::NonConvergence {
        what: "Lanczos eigensolver",
        iterations: budget * max_runs,
        residual: worst_residual,
    })
}

fn kth_smallest(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[k - 1]
}

fn assemble(values: Vec<f64>, vectors: Vec<Vec<f64>>, m: usize) -> EigenPairs {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]).then(x.cmp(&y)));
    let n = vectors[0].len();
    let mut out = DenseMatrix::zeros(n, m);
    let mut vals = Vec::with_capacity(m);
    for (col, &k) in order.iter().take(m).enumerate() {
        vals.push(values[k]);
        out.set_column(col, &vectors[k]).expect("consistent lengths");
    }
    EigenPairs {
        values: vals,
        vectors: out,
    }
}

struct RunResult {
    /// Converged pairs among the `want` smallest Ritz values, ascending.
    pairs: Vec<(f64, Vec<f64>)>,
    best_unconverged: f64,
}

/// Projects out `basis`, two passes of modified Gram-Schmidt.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Projects out `basis` and returns the coefficients. A second pass runs only
/// when the first removed most of the norm (the usual DGKS test).
fn project_out(w: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for pass in 0..2 {
        let before = norm2(w);
        for (q, c) in basis.iter().zip(coef.iter_mut()) {
            let d = dot(q, w);
            axpy(-d, q, w);
            *c += d;
        }
        if pass == 0 && norm2(w) > std::f64::consts::FRAC_1_SQRT_2 * before {
            break;
        }
    }
    coef
}

/// Thick-restart Lanczos. The basis grows to `dim` vectors; if the wanted
/// Ritz pairs have not converged by then, the smallest Ritz vectors are kept
/// and the Krylov sequence continues from the current residual. The
/// projected matrix is formed column by column, which also covers the arrow
/// entries introduced by a restart.
#[allow(clippy::too_many_arguments)]
fn lanczos_run(
    a: &SparseSymMatrix,
    locked: &[Vec<f64>],
    want: usize,
    dim: usize,
    max_steps: usize,
    threshold: f64,
    norm: f64,
    rng: &mut ChaCha8Rng,
) -> Option<RunResult> {
    let n = a.n();
    let mut q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    orthogonalize(&mut q, locked);
    let qn = norm2(&q);
    if qn < 1e-10 * (n as f64).sqrt() {
        return None;
    }
    q.iter_mut().for_each(|x| *x /= qn);

    let dim = dim.max(want + 1);
    let keep = want + (dim - want) / 2;
    let check_every = 10usize;
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut w = vec![0.0; n];
    let mut since_check = 0usize;

    let mut steps = 0usize;
    let (s, order, beta) = loop {
        let j = basis.len() - 1;
        a.spmv_into(&basis[j], &mut w);
        steps += 1;
        since_check += 1;
        let coef = project_out(&mut w, &basis);
        // Locked directions go last: rounding-level components left in the
        // basis would otherwise be amplified by the recurrence, since the
        // locked eigenvalues lie below the deflated spectrum.
        orthogonalize(&mut w, locked);
        for (i, &c) in coef.iter().enumerate() {
            h[(i, j)] = c;
            h[(j, i)] = c;
        }
        let beta = norm2(&w);
        let k = basis.len();

        let invariant = beta <= 1e-12 * norm;
        let exhausted = invariant || steps >= max_steps || k + locked.len() >= n;
        let full = k == dim;
        if exhausted || full || since_check >= check_every {
            since_check = 0;
            let (s, order, theta) = projected_eigen(&h, k);
            let beta_eff = if invariant { 0.0 } else { beta };
            let done = k >= want
                && order
                    .iter()
                    .take(want)
                    .all(|&idx| (beta_eff * s[(k - 1, idx)]).abs() <= threshold);
            if done || exhausted {
                break (s, order, beta_eff);
            }
            if full {
                let q = DMatrix::from_fn(n, k, |r, c| basis[c][r]);
                let picked = DMatrix::from_fn(k, keep, |r, c| s[(r, order[c])]);
                let y = q * picked;
                let kept: Vec<Vec<f64>> = y.column_iter().map(|c| c.iter().copied().collect()).collect();
                let theta: Vec<f64> = order.iter().take(keep).map(|&idx| theta[idx]).collect();
                h.fill(0.0);
                for (i, t) in theta.into_iter().enumerate() {
                    h[(i, i)] = t;
                }
                basis = kept;
            }
        }
        basis.push(w.iter().map(|x| x / beta).collect());
    };

    let mut worst_ortho = 0.0f64;
    for i in 0..basis.len() {
        for j in 0..=i {
            let d = dot(&basis[i], &basis[j]) - if i == j { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max(d.abs());
        }
    }
    let mut worst_locked = 0.0f64;
    for b in &basis {
        for l in locked {
            worst_locked = worst_locked.max(dot(b, l).abs());
        }
    }
    let k = basis.len();
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut best_unconverged = 0.0f64;
    for &idx in order.iter().take(want) {
        let est = (beta * s[(k - 1, idx)]).abs();
        if est > threshold {
            best_unconverged = best_unconverged.max(est);
            continue;
        }
        let mut v = vec![0.0; n];
        for (row, qb) in basis.iter().enumerate() {
            axpy(s[(row, idx)], qb, &mut v);
        }
        orthogonalize(&mut v, locked);
        for (_, prev) in &pairs {
            let c = dot(prev, &v);
            axpy(-c, prev, &mut v);
        }
        let vn = norm2(&v);
        v.iter_mut().for_each(|x| *x /= vn);
        // Rayleigh quotient is at least as accurate as the Ritz value.
        let av = a.spmv(&v).expect("dimension checked");
        let lambda = dot(&v, &av);
        let r = av
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - lambda * y).powi(2))
            .sum::<f64>()
            .sqrt();
        if r > threshold {
            best_unconverged = best_unconverged.max(r);
            continue;
        }
        pairs.push((lambda, v));
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Some(RunResult {
        pairs,
        best_unconverged,
    })
}

/// Eigenvectors of the leading `k × k` block of the projected matrix and the
/// ascending order of its eigenvalues.
fn projected_eigen(h: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<usize>, Vec<f64>) {
    let eig = SymmetricEigen::new(h.view((0, 0), (k, k)).into_owned());
    let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| theta[x].total_cmp(&theta[y]).then(x.cmp(&y)));
    (eig.eigenvectors, order, theta)
}
