//! Jacobi-preconditioned conjugate gradient for symmetric positive definite
//! sparse systems.

use crate::error::{check_len, Error, Result};
use crate::linalg::dense::{axpy, dot, norm2};
use crate::linalg::sparse::SparseSymMatrix;

/// Solves `A x = b` to relative residual `tol`, with a budget of `10 n`
/// iterations.
pub fn solve_spd(a: &SparseSymMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_len("solve_spd", a.n(), b.len())?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("CG tolerance must be positive, got {tol}")));
    }
    let n = a.n();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect() };

    let budget = 10 * n;
    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for _ in 0..budget {
        if norm2(&r) <= target {
            break;
        }
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::invalid("matrix is not positive definite (pᵀAp <= 0)"));
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    // The recursive residual drifts; the contract is on the true one.
    let ax = a.spmv(&x)?;
    let residual = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    if residual > target {
        return Err(Error::NonConvergence {
            what: "conjugate gradient",
            iterations: budget,
            residual: residual / b_norm,
        });
    }
    Ok(x)
}
