//! Estimator output and the error models behind it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default number of batches for batch means and jackknife errors.
pub const BATCHES: usize = 20;

/// Result of a Monte Carlo (or exact, with zero error) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    pub batches: usize,
    /// (ΣW)² / ΣW² of the importance weights, when weights were used.
    pub n_eff: Option<f64>,
}

impl MCEstimate {
    /// An exact value, reported with zero error.
    pub fn exact(mean: f64) -> Self {
        MCEstimate { mean, stderr: 0.0, n: 1, seed: 0, batches: 0, n_eff: None }
    }

    /// |self − target| in units of the standard error (∞ for a nonzero gap
    /// with zero error).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr
    }
}

/// Half-open sample ranges of `batches` nearly equal batches covering `0..n`.
pub fn batch_ranges(n: u64, batches: usize) -> Vec<std::ops::Range<u64>> {
    let b = batches as u64;
    (0..b).map(|i| i * n / b..(i + 1) * n / b).collect()
}

/// Sums accumulated over one batch of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchSums {
    pub count: u64,
    pub num: f64,
    pub den: f64,
    pub den_sq: f64,
}

/// Mean and batch-means standard error of the numerators.
pub fn batch_means(batches: &[BatchSums]) -> (f64, f64) {
    let total: u64 = batches.iter().map(|b| b.count).sum();
    let mean = batches.iter().map(|b| b.num).sum::<f64>() / total as f64;
    let means: Vec<f64> = batches.iter().filter(|b| b.count > 0).map(|b| b.num / b.count as f64).collect();
    let k = means.len() as f64;
    if means.len() < 2 {
        return (mean, 0.0);
    }
    let centre = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - centre).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Ratio Σnum/Σden with a delete-one-batch jackknife error.
pub fn jackknife_ratio(batches: &[BatchSums]) -> Result<(f64, f64)> {
    if let Some(i) = batches.iter().position(|b| !(b.den > 0.0)) {
        return Err(Error::UnderSampled(format!("batch {i} has zero total weight")));
    }
    let num: f64 = batches.iter().map(|b| b.num).sum();
    let den: f64 = batches.iter().map(|b| b.den).sum();
    let ratio = num / den;
    let k = batches.len();
    if k < 2 {
        return Ok((ratio, 0.0));
    }
    let leave_out: Vec<f64> = batches.iter().map(|b| (num - b.num) / (den - b.den)).collect();
    let centre = leave_out.iter().sum::<f64>() / k as f64;
    let var = (k as f64 - 1.0) / k as f64 * leave_out.iter().map(|r| (r - centre).powi(2)).sum::<f64>();
    Ok((ratio, var.sqrt()))
}

/// Kish effective sample size of the denominators.
pub fn effective_sample_size(batches: &[BatchSums]) -> f64 {
    let s: f64 = batches.iter().map(|b| b.den).sum();
    let s2: f64 = batches.iter().map(|b| b.den_sq).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Empirical frequency `hits / n` with binomial standard error.
pub fn binomial(hits: u64, n: u64) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}
