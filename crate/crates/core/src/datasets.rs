//! Seeded synthetic datasets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bow::BowMatrix;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::linalg::DenseMatrix;

/// Geometry of the two interleaved half-circles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoonsGeometry {
    pub radius: f64,
    /// Horizontal shift of the lower arc.
    pub x_offset: f64,
    /// Vertical shift of the lower arc (downwards).
    pub y_offset: f64,
}

impl Default for MoonsGeometry {
    fn default() -> Self {
        Self {
            radius: 1.0,
            x_offset: 1.0,
            y_offset: 0.5,
        }
    }
}

/// `n / 2` points on the upper arc (class 0) followed by `n / 2` on the
/// lower arc (class 1), evenly spaced in angle, then perturbed by isotropic
/// Gaussian noise of standard deviation `noise_sd`.
pub fn two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<(FeatureMatrix, Vec<usize>)> {
    two_moons_with(n, noise_sd, seed, &MoonsGeometry::default())
}

pub fn two_moons_with(
    n: usize,
    noise_sd: f64,
    seed: u64,
    geometry: &MoonsGeometry,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!("two-moons needs an even n >= 4, got {n}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let half = n / 2;
    let r = geometry.radius;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..half {
        let t = PI * i as f64 / (half - 1) as f64;
        data.extend_from_slice(&[r * t.cos(), r * t.sin()]);
        labels.push(0);
    }
    for i in 0..half {
        let t = PI * i as f64 / (half - 1) as f64;
        data.extend_from_slice(&[geometry.x_offset - r * t.cos(), geometry.y_offset - r * t.sin()]);
        labels.push(1);
    }
    if noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok((FeatureMatrix::new(n, 2, data)?, labels))
}

/// `n` points split round-robin over `centers` isotropic Gaussian clusters in
/// `dim` dimensions. Centers are drawn uniformly from `[−10, 10]^dim`.
pub fn gaussian_blobs(
    n: usize,
    centers: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    if centers == 0 || dim == 0 || n < centers {
        return Err(Error::invalid("blobs need n >= centers >= 1 and dim >= 1"));
    }
    if !(spread > 0.0) {
        return Err(Error::invalid(format!("spread must be positive, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let middles: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let normal = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers;
        for &mu in &middles[c] {
            data.push(mu + normal.sample(&mut rng));
        }
        labels.push(c);
    }
    Ok((FeatureMatrix::new(n, dim, data)?, labels))
}

/// Paired document collections with two topical blocks and spiky corruption
/// in the primary modality.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlockCorpus {
    pub clean: BowMatrix,
    pub corrupted: BowMatrix,
    /// Row-major `n × M` flags of the corrupted entries.
    pub corrupted_mask: Vec<bool>,
    /// Clean second modality sharing the block structure.
    pub companion: BowMatrix,
    /// Block of each document (first half 0, second half 1).
    pub block: Vec<usize>,
}

impl TwoBlockCorpus {
    /// Mean clean value of column `j` over the documents in `i`'s block.
    pub fn consensus(&self, i: usize, j: usize) -> f64 {
        let members: Vec<usize> = (0..self.block.len())
            .filter(|&r| self.block[r] == self.block[i])
            .collect();
        members.iter().map(|&r| self.clean.get(r, j)).sum::<f64>() / members.len() as f64
    }
}

/// Normalized word histograms: a document of block `b` spreads its mass over
/// the `b`-th half of the vocabulary with ±10% jitter. A `corrupt_fraction`
/// of the primary entries, drawn without replacement, receives an extra
/// `spike` of mass.
pub fn two_block_corpus(
    n: usize,
    vocabulary: usize,
    companion_vocabulary: usize,
    corrupt_fraction: f64,
    spike: f64,
    seed: u64,
) -> Result<TwoBlockCorpus> {
    if n < 4
        || !n.is_multiple_of(2)
        || vocabulary < 2
        || !vocabulary.is_multiple_of(2)
        || companion_vocabulary < 2
        || !companion_vocabulary.is_multiple_of(2)
    {
        return Err(Error::invalid(
            "two-block corpus needs even n >= 4 and even vocabularies >= 2",
        ));
    }
    if !(0.0..=1.0).contains(&corrupt_fraction) || !(spike > 0.0) {
        return Err(Error::invalid(
            "corrupt fraction must lie in [0, 1] and spike must be positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    let mut histograms = |vocab: usize| {
        let half = vocab / 2;
        let mut m = DenseMatrix::zeros(n, vocab);
        for (i, &b) in block.iter().enumerate() {
            for j in b * half..(b + 1) * half {
                m.set(i, j, (1.0 + rng.random_range(-0.1..0.1)) / half as f64);
            }
        }
        m
    };
    let clean = histograms(vocabulary);
    let companion = histograms(companion_vocabulary);
    let total = n * vocabulary;
    let count = (corrupt_fraction * total as f64 + 1e-9).floor() as usize;
    let mut corrupted = clean.clone();
    let mut corrupted_mask = vec![false; total];
    for p in rand::seq::index::sample(&mut rng, total, count).into_vec() {
        let (i, j) = (p / vocabulary, p % vocabulary);
        corrupted.set(i, j, clean.get(i, j) + spike);
        corrupted_mask[p] = true;
    }
    Ok(TwoBlockCorpus {
        clean: BowMatrix::new(clean)?,
        corrupted: BowMatrix::new(corrupted)?,
        corrupted_mask,
        companion: BowMatrix::new(companion)?,
        block,
    })
}
