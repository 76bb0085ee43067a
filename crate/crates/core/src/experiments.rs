//! Seeded experiment drivers shared by the command-line tool and the tests.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::two_moons;
use crate::error::{Error, Result};
use crate::graph::{GraphConfig, Symmetrization};
use crate::linalg::{dense_smallest, SparseSymMatrix};
use crate::solver::SolverOptions;
use crate::spectral::{smoothness_report, SmoothnessReport, SpectralBasis};
use crate::ssl::{
    choose_labeled, encode_labels, evaluate, inject_label_noise, l1_ssl_fit, l2_ssl_fit, prepare, unlabeled_mask,
    LabelMatrix, NoiseScope, NoiseSpec, Solution,
};

/// Seed of run `index` derived from a master seed. Each run reads its own
/// ChaCha stream, so adding runs never changes the seeds of earlier ones.
pub fn run_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoonsConfig {
    pub n: usize,
    pub noise_sd: f64,
    pub graph: GraphConfig,
    pub m: usize,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub labels_per_class: usize,
    /// Fraction of each class's labels that is flipped.
    pub noise_fraction: f64,
}

impl Default for MoonsConfig {
    /// 200 points, 5 labels per class with one of them flipped.
    fn default() -> Self {
        Self {
            n: 200,
            noise_sd: 0.1,
            graph: GraphConfig {
                sigma: 0.1,
                k: 10,
                symmetrization: Symmetrization::Union,
            },
            m: 3,
            lambda_l1: 1.0,
            lambda_l2: 10.0,
            labels_per_class: 5,
            noise_fraction: 0.2,
        }
    }
}

impl MoonsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "two-moons needs an even n >= 4, got {}",
                self.n
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        self.graph.validate(self.n)?;
        if self.m == 0 || self.m > self.n {
            return Err(Error::invalid(format!(
                "basis size m = {} must satisfy 1 <= m <= n = {}",
                self.m, self.n
            )));
        }
        SolverOptions::with_lambda(self.lambda_l1).validate()?;
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_l2 must be >= 0, got {}",
                self.lambda_l2
            )));
        }
        if self.labels_per_class == 0 || self.labels_per_class > self.n / 2 {
            return Err(Error::invalid(format!(
                "labels per class must lie in [1, {}], got {}",
                self.n / 2,
                self.labels_per_class
            )));
        }
        self.noise_spec(0).validate()
    }

    fn noise_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            labeled_per_class: self.labels_per_class,
            noise_fraction: self.noise_fraction,
            seed,
            scope: NoiseScope::PerClass,
        }
    }
}

/// Plot-ready per-point output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MoonsPoints {
    pub coords: Vec<[f64; 2]>,
    pub truth: Vec<usize>,
    /// Observed (possibly flipped) label, if the point was labeled.
    pub given: Vec<Option<usize>>,
    pub l1_labels: Vec<usize>,
    pub l2_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoonsRun {
    pub seed: u64,
    pub accuracy_l1: f64,
    pub accuracy_l2: f64,
    /// Smoothness measures of each solution, summed over the class columns.
    pub smoothness_l1: SmoothnessReport,
    pub smoothness_l2: SmoothnessReport,
    /// L2 solution refitted with the L1 method's `λ`.
    pub smoothness_l2_matched: SmoothnessReport,
    pub points: MoonsPoints,
}

/// One seeded two-moons run of both classifiers.
pub fn run_moons(cfg: &MoonsConfig, seed: u64) -> Result<MoonsRun> {
    cfg.validate()?;
    let (x, truth) = two_moons(cfg.n, cfg.noise_sd, seed)?;
    let (laplacian, basis) = prepare(&x, &cfg.graph, cfg.m, seed)?;
    let labeled = choose_labeled(&truth, 2, cfg.labels_per_class, seed)?;
    let given = inject_label_noise(&labeled, &cfg.noise_spec(seed), 2)?;
    let y = encode_labels(&given, cfg.n, 2)?;
    let mask = unlabeled_mask(cfg.n, &given);

    let l1 = l1_ssl_fit(&basis, &y, &SolverOptions::with_lambda(cfg.lambda_l1))?;
    let l2 = l2_ssl_fit(&laplacian, &y, cfg.lambda_l2)?;
    let l2_matched = l2_ssl_fit(&laplacian, &y, cfg.lambda_l1)?;

    let full = SpectralBasis::from_eigenpairs(dense_smallest(&laplacian, cfg.n)?)?;
    let mut given_labels = vec![None; cfg.n];
    for &(i, c) in &given {
        given_labels[i] = Some(c);
    }
    Ok(MoonsRun {
        seed,
        accuracy_l1: evaluate(&l1.labels, &truth, &mask)?,
        accuracy_l2: evaluate(&l2.labels, &truth, &mask)?,
        smoothness_l1: summed_smoothness(&full, &laplacian, &l1, &y)?,
        smoothness_l2: summed_smoothness(&full, &laplacian, &l2, &y)?,
        smoothness_l2_matched: summed_smoothness(&full, &laplacian, &l2_matched, &y)?,
        points: MoonsPoints {
            coords: (0..cfg.n).map(|i| [x.row(i)[0], x.row(i)[1]]).collect(),
            truth,
            given: given_labels,
            l1_labels: l1.labels,
            l2_labels: l2.labels,
        },
    })
}

fn summed_smoothness(
    full: &SpectralBasis,
    laplacian: &SparseSymMatrix,
    solution: &Solution,
    y: &LabelMatrix,
) -> Result<SmoothnessReport> {
    let mut total = SmoothnessReport {
        l2_smoothness: 0.0,
        l1_smoothness: 0.0,
        fitting_error: 0.0,
    };
    for j in 0..y.classes() {
        let r = smoothness_report(full, laplacian, &solution.scores.column(j), &y.column(j))?;
        total.l2_smoothness += r.l2_smoothness;
        total.l1_smoothness += r.l1_smoothness;
        total.fitting_error += r.fitting_error;
    }
    Ok(total)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Sample standard deviation (`n − 1` denominator); zero for fewer than two
/// values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Half-width of the normal-approximation 95% interval of the mean,
/// `1.96 · sd / √runs`.
pub fn ci95_half_width(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    1.96 * sample_sd(values) / (values.len() as f64).sqrt()
}
