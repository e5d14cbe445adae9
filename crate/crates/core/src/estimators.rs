//! Importance-sampling estimators under the Poisson reference measure ρ.
//!
//! Each replica ω ~ ρ carries the weight W(ω) = ∏_γ z_h(γ). The partition
//! function is E_ρ[W]; correlation functions are ratios E_ρ[W·f]/E_ρ[W]
//! whose numerator and denominator come from the same stream of ω, with
//! errors from a delete-one-batch jackknife.
//!
//! Internally W is divided by the constant e^{S β Σ_y h_y} (every ω has
//! Σ_γ Σ_y h_y ℓ_y(γ) = β Σ_y h_y), which keeps each weight in [1, θ^{|L(ω)|}].

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::bridges::BridgeProcess;
use crate::exec::Execution;
use crate::lattice::Lattice;
use crate::loops::LoopDecomposition;
use crate::rng;
use crate::stats::{self, BatchSums, MCEstimate, BATCHES};
use crate::weights::{self, Field, Spin};
use crate::{Error, Result};

/// Everything that defines the quantum model on a finite lattice.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub lattice: Lattice,
    pub beta: f64,
    pub u: f64,
    pub spin: Spin,
    pub field: Field,
}

impl ModelParams {
    pub fn new(lattice: Lattice, beta: f64, u: f64, spin: Spin, field: Field) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::pre(format!("beta must be positive, got {beta}")));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::pre(format!("u must lie in [0, 1], got {u}")));
        }
        if field.len() != lattice.len() {
            return Err(Error::pre(format!(
                "field has {} entries for {} sites",
                field.len(),
                lattice.len()
            )));
        }
        Ok(ModelParams { lattice, beta, u, spin, field })
    }

    pub fn with_field(&self, field: Field) -> Result<Self> {
        ModelParams::new(self.lattice.clone(), self.beta, self.u, self.spin, field)
    }

    /// Site index of `x`, rejecting points outside the box and the origin.
    pub fn target(&self, x: &[i32]) -> Result<usize> {
        let site = self.lattice.require_site(x)?;
        if site == self.lattice.origin() {
            return Err(Error::pre("x = 0 is not covered by the loop estimators"));
        }
        Ok(site)
    }

    fn process(&self) -> BridgeProcess {
        BridgeProcess { beta: self.beta, u: self.u, intensity: 1.0 }
    }

    /// ln of the constant e^{S β Σ h} factored out of every weight.
    fn ln_weight_offset(&self) -> f64 {
        self.spin.value() * self.beta * self.field.values().iter().sum::<f64>()
    }
}

/// A quantity estimated from the shared ω stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    /// Z = E_ρ[W].
    Partition,
    /// Tr(S¹₀ e^{−(β−t)H} S¹ₓ e^{−tH}) / Z; `time = 0` is the two-point function.
    Schwinger { site: usize, time: f64 },
    /// ⅓S(S+1)(2S+1) · E_h[1_{0↔(x,t)} e^{−Σ h ℓ⁺}].
    LoopBound { site: usize, time: f64 },
    /// E_h[1_{0↔(x,t)}] under the weighted loop measure.
    Connection { site: usize, time: f64 },
}

impl Observable {
    pub fn two_point(site: usize) -> Self {
        Observable::Schwinger { site, time: 0.0 }
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        match *self {
            Observable::Partition => Ok(()),
            Observable::Schwinger { site, time }
            | Observable::LoopBound { site, time }
            | Observable::Connection { site, time } => {
                if site >= params.lattice.len() {
                    return Err(Error::pre(format!("site {site} outside the lattice")));
                }
                if site == params.lattice.origin() {
                    return Err(Error::pre("x = 0 is not covered by the loop estimators"));
                }
                if !(0.0..params.beta).contains(&time) {
                    return Err(Error::pre(format!("time {time} outside [0, beta)")));
                }
                Ok(())
            }
        }
    }
}

/// Configures how samples are batched and executed.
#[derive(Clone, Copy, Debug)]
pub struct Estimator {
    pub execution: Execution,
    pub batches: usize,
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator { execution: Execution::default(), batches: BATCHES }
    }
}

impl Estimator {
    pub fn sequential() -> Self {
        Estimator { execution: Execution::Sequential, ..Self::default() }
    }

    /// Estimates every observable from one stream of `n` replicas.
    pub fn run(&self, params: &ModelParams, observables: &[Observable], n: u64, seed: u64) -> Result<Vec<MCEstimate>> {
        if n < 2 {
            return Err(Error::pre("need at least 2 samples"));
        }
        for obs in observables {
            obs.validate(params)?;
        }
        let batches = self.batches.clamp(1, n as usize);
        let ranges = stats::batch_ranges(n, batches);
        let process = params.process();
        let per_batch: Vec<Vec<BatchSums>> = self.execution.map(batches, |b| {
            let mut sums = vec![BatchSums::default(); observables.len()];
            let mut loop_x = Vec::new();
            for replica in ranges[b].clone() {
                let omega = process.sample(&params.lattice, seed, replica);
                let decomposition = LoopDecomposition::trace(&params.lattice, &omega, crate::loops::Direction::Up)
                    .expect("sampled configurations are well formed");
                let w = replica_weight(params, &decomposition, &mut loop_x);
                for (acc, obs) in sums.iter_mut().zip(observables) {
                    let value = observe(params, &decomposition, &loop_x, obs);
                    acc.count += 1;
                    acc.num += w * value;
                    acc.den += w;
                    acc.den_sq += w * w;
                }
            }
            sums
        });

        let offset = params.ln_weight_offset();
        observables
            .iter()
            .enumerate()
            .map(|(i, obs)| {
                let column: Vec<BatchSums> = per_batch.iter().map(|b| b[i]).collect();
                let n_eff = stats::effective_sample_size(&column);
                let (mean, stderr) = match obs {
                    Observable::Partition => {
                        let (m, e) = stats::batch_means(&column);
                        let scale = offset.exp();
                        (m * scale, e * scale)
                    }
                    _ => stats::jackknife_ratio(&column)?,
                };
                Ok(MCEstimate { mean, stderr, n, seed, batches, n_eff: Some(n_eff) })
            })
            .collect()
    }
}

/// W(ω) / e^{S β Σ h}; fills `loop_x` with Σ h ℓ per loop.
pub(crate) fn replica_weight(params: &ModelParams, d: &LoopDecomposition, loop_x: &mut Vec<f64>) -> f64 {
    d.weighted_lengths_into(&params.field, loop_x);
    let s = params.spin.value();
    let ln_w: f64 = loop_x.iter().map(|&x| weights::ln_loop_activity(params.spin, x) - s * x).sum();
    ln_w.exp()
}

/// The per-sample factor multiplying W for one observable.
fn observe(params: &ModelParams, d: &LoopDecomposition, loop_x: &[f64], obs: &Observable) -> f64 {
    match *obs {
        Observable::Partition => 1.0,
        Observable::Schwinger { site, time } => d
            .split_weighted(site, time, &params.field, loop_x)
            .map_or(0.0, |(p, m)| weights::split_ratio(params.spin, p, m)),
        Observable::LoopBound { site, time } => d
            .split_weighted(site, time, &params.field, loop_x)
            .map_or(0.0, |(p, _)| weights::bound_prefactor(params.spin) * (-p).exp()),
        Observable::Connection { site, time } => {
            let a = d.loop_through(d.origin(), 0.0);
            f64::from(u8::from(a.is_some() && a == d.loop_through(site, time)))
        }
    }
}

fn run_one(params: &ModelParams, obs: Observable, n: u64, seed: u64) -> Result<MCEstimate> {
    Ok(Estimator::default().run(params, &[obs], n, seed)?.remove(0))
}

/// Z(β, Λ, h) = ∫ρ(dω) ∏_γ z_h(γ).
pub fn estimate_partition(params: &ModelParams, n: u64, seed: u64) -> Result<MCEstimate> {
    run_one(params, Observable::Partition, n, seed)
}

/// ⟨S¹₀ S¹ₓ⟩.
pub fn estimate_two_point(params: &ModelParams, x: &[i32], n: u64, seed: u64) -> Result<MCEstimate> {
    let site = params.target(x)?;
    run_one(params, Observable::two_point(site), n, seed)
}

/// ⅓S(S+1)(2S+1) · E_h[1_{0↔x} e^{−Σ_y h_y ℓ⁺_y}].
pub fn estimate_corollary_rhs(params: &ModelParams, x: &[i32], n: u64, seed: u64) -> Result<MCEstimate> {
    let site = params.target(x)?;
    run_one(params, Observable::LoopBound { site, time: 0.0 }, n, seed)
}

/// ⟨S¹₀ e^{−(β−t)H} S¹ₓ e^{−tH}⟩.
pub fn estimate_schwinger(params: &ModelParams, x: &[i32], t: f64, n: u64, seed: u64) -> Result<MCEstimate> {
    let site = params.target(x)?;
    run_one(params, Observable::Schwinger { site, time: t }, n, seed)
}

/// Law of the i.i.d. site fields in a quenched average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldDistribution {
    /// Point mass at `value`.
    Constant { value: f64 },
    /// 0 with probability `eps`, `alpha` otherwise.
    Bernoulli { eps: f64, alpha: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
}

impl FieldDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FieldDistribution::Constant { value } => value >= 0.0 && value.is_finite(),
            FieldDistribution::Bernoulli { eps, alpha } => (0.0..=1.0).contains(&eps) && alpha >= 0.0 && alpha.is_finite(),
            FieldDistribution::Uniform { low, high } => low >= 0.0 && high >= low && high.is_finite(),
            FieldDistribution::Exponential { mean } => mean > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::pre(format!("field distribution {self:?} is not supported on [0, inf)")))
        }
    }

    /// One i.i.d. field on `sites` sites, drawn from the stream `(seed, sample)`.
    pub fn sample(&self, sites: usize, seed: u64, sample: u64) -> Field {
        let mut r = rng::stream(seed, sample, 0);
        let values = (0..sites)
            .map(|_| match *self {
                FieldDistribution::Constant { value } => value,
                FieldDistribution::Bernoulli { eps, alpha } => {
                    if r.random::<f64>() < eps {
                        0.0
                    } else {
                        alpha
                    }
                }
                FieldDistribution::Uniform { low, high } => low + (high - low) * r.random::<f64>(),
                FieldDistribution::Exponential { mean } => Exp::new(1.0 / mean).expect("positive rate").sample(&mut r),
            })
            .collect();
        Field::new(values).expect("distribution supported on [0, inf)")
    }
}

const FIELD_STREAM: u64 = 0x6669_656c_64;

/// ⟪S¹₀ S¹ₓ⟫: average over `n_fields` i.i.d. fields of the two-point
/// function, each estimated from `n_omega` replicas with its own split seed.
///
/// The field stored in `params` is ignored. With two or more field samples
/// the error is the standard error of the inner means, which by the law of
/// total variance already contains both the thermal and the disorder noise.
pub fn quenched_two_point(
    params: &ModelParams,
    dist: &FieldDistribution,
    x: &[i32],
    n_fields: u64,
    n_omega: u64,
    seed: u64,
) -> Result<MCEstimate> {
    dist.validate()?;
    let site = params.target(x)?;
    if n_fields == 0 {
        return Err(Error::pre("need at least one field sample"));
    }
    let field_seed = rng::split(seed, FIELD_STREAM);
    let mut inner = Vec::with_capacity(n_fields as usize);
    for k in 0..n_fields {
        let field = dist.sample(params.lattice.len(), field_seed, k);
        let p = params.with_field(field.clone())?;
        let est = run_one(&p, Observable::two_point(site), n_omega, rng::split(seed, k))
            .map_err(|e| attach_field(e, k, &field))?;
        inner.push(est);
    }
    let k = inner.len() as f64;
    let mean = inner.iter().map(|e| e.mean).sum::<f64>() / k;
    let stderr = if inner.len() >= 2 {
        let var = inner.iter().map(|e| (e.mean - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        inner[0].stderr
    };
    let n_eff = inner.iter().filter_map(|e| e.n_eff).fold(f64::INFINITY, f64::min);
    Ok(MCEstimate {
        mean,
        stderr,
        n: n_fields * n_omega,
        seed,
        batches: inner.len(),
        n_eff: n_eff.is_finite().then_some(n_eff),
    })
}

fn attach_field(e: Error, k: u64, field: &Field) -> Error {
    let ctx = format!("field sample {k} ({:?})", field.values());
    match e {
        Error::UnderSampled(m) => Error::UnderSampled(format!("{ctx}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{ctx}: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(beta: f64, u: f64, h: f64) -> ModelParams {
        let l = Lattice::segment(2).unwrap();
        ModelParams::new(l, beta, u, Spin::HALF, Field::uniform(2, h)).unwrap()
    }

    #[test]
    fn single_site_partition_is_exact() {
        let l = Lattice::segment(1).unwrap();
        let p = ModelParams::new(l, 1.3, 0.5, Spin::HALF, Field::uniform(1, 0.7)).unwrap();
        let est = estimate_partition(&p, 100, 4).unwrap();
        let want = 2.0 * (1.3f64 * 0.7 / 2.0).cosh();
        assert!((est.mean - want).abs() < 1e-12 * want);
        assert!(est.stderr < 1e-12);
    }

    #[test]
    fn two_site_heisenberg_partition_and_correlation() {
        let p = pair(1.0, 1.0, 1.0);
        let e = std::f64::consts::E;
        let z = e + 1.0 + 1.0 / e + (-2.0f64).exp();
        let est = estimate_partition(&p, 100_000, 17).unwrap();
        assert!(est.within(z, 3.0), "Z {est:?} vs {z}");
        let g = (1.0 - (-2.0f64).exp()) / (4.0 * z);
        let est = estimate_two_point(&p, &[1], 100_000, 17).unwrap();
        assert!(est.within(g, 3.0), "G {est:?} vs {g}");
    }

    #[test]
    fn preconditions() {
        let p = pair(1.0, 1.0, 1.0);
        assert!(matches!(estimate_two_point(&p, &[5], 100, 1), Err(Error::Precondition(_))));
        assert!(matches!(estimate_two_point(&p, &[0], 100, 1), Err(Error::Precondition(_))));
        assert!(estimate_schwinger(&p, &[1], 1.0, 100, 1).is_err());
        assert!(estimate_partition(&p, 1, 1).is_err());
        assert!(ModelParams::new(Lattice::segment(2).unwrap(), 1.0, 1.0, Spin::HALF, Field::uniform(3, 1.0)).is_err());
    }

    #[test]
    fn schwinger_at_zero_is_the_two_point_function() {
        let p = pair(1.0, 0.5, 0.8);
        let a = estimate_two_point(&p, &[1], 2000, 9).unwrap();
        let b = estimate_schwinger(&p, &[1], 0.0, 2000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_field_rhs_is_half_the_connection_probability() {
        let p = pair(1.0, 0.5, 0.0);
        let out = Estimator::default()
            .run(
                &p,
                &[Observable::LoopBound { site: 1, time: 0.0 }, Observable::Connection { site: 1, time: 0.0 }],
                20_000,
                3,
            )
            .unwrap();
        assert!((out[0].mean - 0.5 * out[1].mean).abs() < 1e-12);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let p = pair(1.0, 0.5, 1.0);
        let obs = [Observable::Partition, Observable::two_point(1)];
        let a = Estimator::sequential().run(&p, &obs, 5000, 2).unwrap();
        let b = Estimator::default().run(&p, &obs, 5000, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quenched_with_zero_eps_matches_constant_field() {
        let p = pair(1.0, 1.0, 0.0);
        let a = quenched_two_point(&p, &FieldDistribution::Bernoulli { eps: 0.0, alpha: 1.0 }, &[1], 3, 1000, 5).unwrap();
        let b = quenched_two_point(&p, &FieldDistribution::Constant { value: 1.0 }, &[1], 3, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(FieldDistribution::Uniform { low: -1.0, high: 1.0 }.validate().is_err());
    }
}
