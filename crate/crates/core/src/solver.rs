//! Solvers for the two regularized fitting problems.
//!
//! The L1 problem is solved in the coefficient space of a spectral basis:
//!
//! ```text
//! min_α  ½‖V_m α − y‖₂² + λ Σᵢ Σᵢᵢ^½ |αᵢ|
//! ```
//!
//! with FISTA, whose proximal step is a per-coordinate soft-threshold at
//! `λ Σᵢᵢ^½ / L`. For an orthonormal `V_m` the Lipschitz constant `L` of the
//! smooth part is exactly 1; backtracking is kept for general designs.
//!
//! The L2 baseline `min_f ½‖f − y‖₂² + (λ/2) fᵀ𝓛f` reduces to the sparse SPD
//! system `(I + λ𝓛) f = y`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, solve_spd, DenseMatrix, SparseSymMatrix};
use crate::spectral::SpectralBasis;

/// Relative residual requested from CG for the L2 baseline.
pub const L2_CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Lipschitz {
    /// Step size 1, exact for orthonormal designs.
    ExactOne,
    /// Increase the estimate by `eta` until the sufficient-decrease test
    /// passes, starting from `l0`.
    Backtracking { eta: f64, l0: f64 },
}

impl Lipschitz {
    pub fn backtracking() -> Self {
        Lipschitz::Backtracking { eta: 2.0, l0: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once `|Q_k − Q_{k−1}| / max(1, Q_{k−1})` falls below this.
    pub rel_tol: f64,
    pub lipschitz: Lipschitz,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            max_iters: 2000,
            rel_tol: 1e-8,
            lipschitz: Lipschitz::ExactOne,
        }
    }
}

impl SolverOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if let Lipschitz::Backtracking { eta, l0 } = self.lipschitz {
            if !(eta > 1.0) || !(l0 > 0.0) {
                return Err(Error::invalid(format!(
                    "backtracking needs eta > 1 and L0 > 0, got eta = {eta}, L0 = {l0}"
                )));
            }
        }
        Ok(())
    }
}

/// Equality ignores `wall_time`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Best objective value seen after each iteration, starting with the
    /// value at `α = 0`.
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for SolverReport {
    fn eq(&self, other: &Self) -> bool {
        self.iterations == other.iterations
            && self.objective_trace == other.objective_trace
            && self.final_objective == other.final_objective
            && self.kkt_residual == other.kkt_residual
            && self.converged == other.converged
    }
}

/// `sign(x) · max(|x| − t, 0)`
pub fn soft_threshold(x: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("threshold must be >= 0, got {t}")));
    }
    Ok(soft(x, t))
}

#[inline]
pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Least-squares design with per-coefficient L1 weights:
/// `½‖A α − y‖² + λ Σ wᵢ|αᵢ|`.
struct WeightedLasso<'a> {
    design: &'a DenseMatrix,
    weights: &'a [f64],
    y: &'a [f64],
    lambda: f64,
}

impl WeightedLasso<'_> {
    fn residual(&self, alpha: &[f64]) -> Vec<f64> {
        let mut r = self.design.matvec(alpha).expect("checked dimensions");
        for (ri, yi) in r.iter_mut().zip(self.y) {
            *ri -= yi;
        }
        r
    }

    fn smooth(&self, alpha: &[f64]) -> f64 {
        let r = self.residual(alpha);
        0.5 * dot(&r, &r)
    }

    fn penalty(&self, alpha: &[f64]) -> f64 {
        self.lambda * alpha.iter().zip(self.weights).map(|(a, w)| w * a.abs()).sum::<f64>()
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        self.smooth(alpha) + self.penalty(alpha)
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        self.design
            .tr_matvec(&self.residual(alpha))
            .expect("checked dimensions")
    }

    fn prox_step(&self, z: &[f64], grad: &[f64], step_l: f64) -> Vec<f64> {
        z.iter()
            .zip(grad)
            .zip(self.weights)
            .map(|((zi, gi), wi)| soft(zi - gi / step_l, self.lambda * wi / step_l))
            .collect()
    }

    /// Largest violation of the subgradient optimality conditions.
    fn kkt_residual(&self, alpha: &[f64]) -> f64 {
        let g = self.gradient(alpha);
        alpha
            .iter()
            .zip(&g)
            .zip(self.weights)
            .map(|((&a, &gi), &wi)| {
                let t = self.lambda * wi;
                if a == 0.0 {
                    (gi.abs() - t).max(0.0)
                } else {
                    (gi + t * a.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// FISTA on `½‖A α − y‖² + λ Σ wᵢ|αᵢ|` for an arbitrary `n × m` design.
/// Starts from `α = 0` and returns the best iterate.
pub fn fista_weighted_lasso(
    design: &DenseMatrix,
    weights: &[f64],
    y: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolverReport)> {
    opts.validate()?;
    check_len("fista: y", design.rows(), y.len())?;
    check_len("fista: weights", design.cols(), weights.len())?;
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("penalty weights must be nonnegative"));
    }
    let start = Instant::now();
    let problem = WeightedLasso {
        design,
        weights,
        y,
        lambda: opts.lambda,
    };
    let m = design.cols();

    let mut x_prev = vec![0.0; m];
    let mut z = x_prev.clone();
    let mut t = 1.0f64;
    let mut step_l = match opts.lipschitz {
        Lipschitz::ExactOne => 1.0,
        Lipschitz::Backtracking { l0, .. } => l0,
    };

    let mut prev_obj = problem.objective(&x_prev);
    let mut best = x_prev.clone();
    let mut best_obj = prev_obj;
    let mut trace = vec![best_obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let grad = problem.gradient(&z);
        let x = match opts.lipschitz {
            Lipschitz::ExactOne => problem.prox_step(&z, &grad, step_l),
            Lipschitz::Backtracking { eta, .. } => {
                let fz = problem.smooth(&z);
                loop {
                    let p = problem.prox_step(&z, &grad, step_l);
                    let diff: Vec<f64> = p.iter().zip(&z).map(|(a, b)| a - b).collect();
                    let model = fz + dot(&diff, &grad) + 0.5 * step_l * dot(&diff, &diff);
                    // Relative slack absorbs rounding once the iterates settle.
                    if problem.smooth(&p) <= model + 1e-14 * fz.abs().max(1.0) {
                        break p;
                    }
                    step_l *= eta;
                    if !step_l.is_finite() {
                        return Err(Error::NonConvergence {
                            what: "FISTA backtracking",
                            iterations,
                            residual: f64::INFINITY,
                        });
                    }
                }
            }
        };

        let obj = problem.objective(&x);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&x);
        }
        trace.push(best_obj);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        z = x.iter().zip(&x_prev).map(|(a, b)| a + momentum * (a - b)).collect();
        t = t_next;

        let change = (obj - prev_obj).abs() / prev_obj.abs().max(1.0);
        x_prev = x;
        prev_obj = obj;
        if change < opts.rel_tol {
            converged = true;
            break;
        }
    }

    let report = SolverReport {
        iterations,
        objective_trace: trace,
        final_objective: best_obj,
        kkt_residual: problem.kkt_residual(&best),
        converged,
        wall_time: start.elapsed(),
    };
    Ok((best, report))
}

/// Minimizes `½‖V_m α − y‖² + λ Σᵢ Σᵢᵢ^½ |αᵢ|` over the basis coefficients.
pub fn fista_weighted_l1(basis: &SpectralBasis, y: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolverReport)> {
    fista_weighted_lasso(basis.vectors(), basis.sqrt_eigenvalues(), y, opts)
}

/// `½‖V_m α − y‖₂² + λ Σᵢ Σᵢᵢ^½ |αᵢ|`
pub fn objective(basis: &SpectralBasis, y: &[f64], lambda: f64, alpha: &[f64]) -> Result<f64> {
    check_len("objective: y", basis.n(), y.len())?;
    check_len("objective: alpha", basis.m(), alpha.len())?;
    let problem = WeightedLasso {
        design: basis.vectors(),
        weights: basis.sqrt_eigenvalues(),
        y,
        lambda,
    };
    Ok(problem.objective(alpha))
}

/// KKT residual of `alpha` for the basis problem.
pub fn kkt_residual(basis: &SpectralBasis, y: &[f64], lambda: f64, alpha: &[f64]) -> Result<f64> {
    check_len("kkt_residual: y", basis.n(), y.len())?;
    check_len("kkt_residual: alpha", basis.m(), alpha.len())?;
    let problem = WeightedLasso {
        design: basis.vectors(),
        weights: basis.sqrt_eigenvalues(),
        y,
        lambda,
    };
    Ok(problem.kkt_residual(alpha))
}

/// Solves `(I + λ𝓛) f = y`, the stationarity condition of
/// `½‖f − y‖² + (λ/2) fᵀ𝓛f`.
pub fn l2_ssl_solve(laplacian: &SparseSymMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_len("l2_ssl_solve", laplacian.n(), y.len())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(y.to_vec());
    }
    let system = laplacian.shifted(1.0, lambda)?;
    solve_spd(&system, y, L2_CG_TOL)
}

/// `½‖f − y‖₂² + (λ/2) fᵀ𝓛f`
pub fn l2_objective(laplacian: &SparseSymMatrix, y: &[f64], lambda: f64, f: &[f64]) -> Result<f64> {
    check_len("l2_objective", f.len(), y.len())?;
    let fit: f64 = f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * fit + 0.5 * lambda * laplacian.quadratic_form(f)?)
}
