//! Weighted log-linear fits of y ≈ C e^{−c r}.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One observation at distance `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub r: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl DecayPoint {
    pub fn new(r: f64, mean: f64, stderr: f64) -> Self {
        DecayPoint { r, mean, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Prefactor C.
    pub amplitude: f64,
    /// Decay rate c; negative values are reported as such.
    pub rate: f64,
    /// Standard error of `rate` from the weighted normal equations.
    pub rate_stderr: f64,
    pub r_squared: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Fits ln y = ln C − c r by weighted least squares.
///
/// Points with mean ≤ 3·stderr are dropped and counted. Weights are
/// (mean/stderr)², the inverse variance of ln(mean) to first order; when any
/// retained point has zero stderr every point gets unit weight.
pub fn fit_exponential(points: &[DecayPoint]) -> Result<DecayFit> {
    let kept: Vec<&DecayPoint> = points
        .iter()
        .filter(|p| p.mean > 3.0 * p.stderr && p.mean > 0.0 && p.r.is_finite())
        .collect();
    let dropped = points.len() - kept.len();
    if kept.len() < 3 {
        return Err(Error::Fit(format!(
            "{} usable points after dropping {dropped} consistent with zero; need at least 3",
            kept.len()
        )));
    }
    let exact = kept.iter().any(|p| p.stderr == 0.0);
    let w: Vec<f64> = kept.iter().map(|p| if exact { 1.0 } else { (p.mean / p.stderr).powi(2) }).collect();
    let y: Vec<f64> = kept.iter().map(|p| p.mean.ln()).collect();
    let x: Vec<f64> = kept.iter().map(|p| p.r).collect();

    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("all usable points share one distance".into()));
    }
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;

    let ss_res: f64 = (0..x.len()).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let ss_tot: f64 = (0..x.len()).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    // Known-variance weights give Var(slope) = 1/Sxx; unit weights fall back
    // to the residual variance.
    let rate_stderr = if exact {
        (ss_res / (x.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        (1.0 / sxx).sqrt()
    };

    Ok(DecayFit {
        amplitude: intercept.exp(),
        rate: -slope,
        rate_stderr,
        r_squared,
        used: kept.len(),
        dropped,
    })
}
