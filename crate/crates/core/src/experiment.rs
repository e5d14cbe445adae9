//! Experiment orchestration: one config in, CSV + JSON + log out.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentKind, FppMode, RunConfig};
use crate::estimators::{quenched_two_point, Estimator, ModelParams, Observable};
use crate::fit::{fit_exponential, DecayPoint};
use crate::lattice;
use crate::oracle::{build_hamiltonian_general, Spectrum};
use crate::percolation::{self, domination_check, tail_estimate, GammaSetup, TailModel};
use crate::report::{fmt_f64, fmt_point, CsvTable, EstimateRecord, OutputDir};
use crate::rng;
use crate::stats::MCEstimate;
use crate::weights;
use crate::{Error, Result};

/// Runs below this effective sample size are flagged as under-sampled.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

/// Files written by a run and its JSON summary.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Runs `config` and writes its artifacts under `out`.
///
/// Under-sampled runs and failed verdicts still write every artifact before
/// returning [`Error::UnderSampled`] or [`Error::Acceptance`].
pub fn run_experiment(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut dir = OutputDir::create(out, config.experiment.as_str(), config.seed)?;
    let mut files = vec![dir.json("config.json", config)?];
    let result = match config.experiment {
        ExperimentKind::OracleSweep => oracle_sweep(config, &mut dir, &mut files),
        ExperimentKind::McSweep => mc_sweep(config, &mut dir, &mut files),
        ExperimentKind::SchwingerSweep => schwinger_sweep(config, &mut dir, &mut files),
        ExperimentKind::QuenchedSweep => quenched_sweep(config, &mut dir, &mut files),
        ExperimentKind::FppSweep => fpp_sweep(config, &mut dir, &mut files),
        ExperimentKind::DominationCheck => domination(config, &mut dir, &mut files),
        ExperimentKind::FullPipeline => full_pipeline(config, &mut dir, &mut files),
    };
    match &result {
        Ok(_) => dir.log("status=ok"),
        Err(e) => dir.log(format!("status=error {e}")),
    }
    files.push(dir.finish()?);
    let summary = result?;
    Ok(Outcome { files, summary })
}

fn point_site(params: &ModelParams, x: &[i32]) -> Result<usize> {
    params.target(x)
}

#[derive(Serialize)]
struct PointParams<'a> {
    x: &'a [i32],
    norm: u32,
    t: f64,
    observable: &'static str,
}

fn under_sampled(estimates: &[MCEstimate]) -> Option<f64> {
    let worst = estimates.iter().filter_map(|e| e.n_eff).fold(f64::INFINITY, f64::min);
    (worst < MIN_EFFECTIVE_SAMPLES).then_some(worst)
}

fn oracle_sweep(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let params = config.model()?;
    let h = build_hamiltonian_general(&params.lattice, params.spin, params.u, &params.field)?;
    let spectrum = Spectrum::new(&h)?;
    let z = spectrum.partition(params.beta);
    let times = if config.times.is_empty() { vec![0.0] } else { config.times.clone() };
    let mut table = CsvTable::new(&["x", "norm", "t", "observable", "value", "source"]);
    table.push(["".into(), "".into(), "".into(), "partition".into(), fmt_f64(z), "oracle".to_string()]);
    let mut records = vec![serde_json::to_value(EstimateRecord::oracle(json!({"observable": "partition"}), z))?];
    for x in config.targets(&params.lattice) {
        let site = params.lattice.require_site(&x)?;
        for &t in &times {
            let v = spectrum.schwinger(params.beta, t, params.lattice.origin(), site)?;
            let norm = lattice::norm(&x);
            table.push([fmt_point(&x), norm.to_string(), fmt_f64(t), "schwinger".into(), fmt_f64(v), "oracle".into()]);
            records.push(serde_json::to_value(EstimateRecord::oracle(
                PointParams { x: &x, norm, t, observable: "schwinger" },
                v,
            ))?);
            dir.log(format!("oracle x={} t={t} value={v:e}", fmt_point(&x)));
        }
    }
    files.push(dir.csv("oracle.csv", &table)?);
    let summary = json!({"experiment": "oracle-sweep", "partition": z, "records": records});
    files.push(dir.json("summary.json", &summary)?);
    Ok(summary)
}

fn mc_sweep(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let params = config.model()?;
    let targets = config.targets(&params.lattice);
    let mut observables = vec![Observable::Partition];
    for x in &targets {
        observables.push(Observable::two_point(point_site(&params, x)?));
    }
    let estimates = Estimator::default().run(&params, &observables, config.n, config.seed)?;
    let mut table = CsvTable::new(&["x", "norm", "observable", "mean", "stderr", "n", "seed", "n_eff"]);
    let mut records = Vec::new();
    for (i, e) in estimates.iter().enumerate() {
        let (x, name) = if i == 0 { (Vec::new(), "partition") } else { (targets[i - 1].clone(), "two-point") };
        let norm = lattice::norm(&x);
        table.push([
            fmt_point(&x),
            norm.to_string(),
            name.into(),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            e.n.to_string(),
            e.seed.to_string(),
            e.n_eff.map(fmt_f64).unwrap_or_default(),
        ]);
        records.push(serde_json::to_value(EstimateRecord::monte_carlo(
            PointParams { x: &x, norm, t: 0.0, observable: name },
            e,
        ))?);
        dir.log(format!("{name} x={} mean={:e} stderr={:e}", fmt_point(&x), e.mean, e.stderr));
    }
    finish_mc(dir, files, table, "mc.csv", &estimates, json!({"experiment": "mc-sweep", "records": records}))
}

/// Writes the table and summary, then applies the effective-sample guardrail.
fn finish_mc(
    dir: &mut OutputDir,
    files: &mut Vec<PathBuf>,
    mut table: CsvTable,
    name: &str,
    estimates: &[MCEstimate],
    mut summary: serde_json::Value,
) -> Result<serde_json::Value> {
    let flag = under_sampled(estimates);
    if let Some(worst) = flag {
        table.note("flag", "under-sampled");
        table.note("min_n_eff", fmt_f64(worst));
        summary["under_sampled"] = json!(true);
        dir.log(format!("warning: effective sample size {worst:.1} below {MIN_EFFECTIVE_SAMPLES}"));
    }
    files.push(dir.csv(name, &table)?);
    files.push(dir.json("summary.json", &summary)?);
    match flag {
        Some(worst) => Err(Error::UnderSampled(format!(
            "effective sample size {worst:.1} below {MIN_EFFECTIVE_SAMPLES}"
        ))),
        None => Ok(summary),
    }
}

fn schwinger_sweep(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let params = config.model()?;
    let times = if config.times.is_empty() { vec![0.0, params.beta / 2.0] } else { config.times.clone() };
    let targets = config.targets(&params.lattice);
    let mut observables = Vec::new();
    let mut cells = Vec::new();
    for x in &targets {
        let site = point_site(&params, x)?;
        for &t in &times {
            observables.push(Observable::Schwinger { site, time: t });
            cells.push((x.clone(), site, t));
        }
    }
    let estimates = Estimator::default().run(&params, &observables, config.n, config.seed)?;
    let spectrum = build_hamiltonian_general(&params.lattice, params.spin, params.u, &params.field)
        .and_then(|h| Spectrum::new(&h))
        .ok();
    let mut table = CsvTable::new(&["x", "norm", "t", "mean", "stderr", "n", "seed", "n_eff", "oracle"]);
    let mut records = Vec::new();
    for ((x, site, t), e) in cells.iter().zip(&estimates) {
        let exact = match &spectrum {
            Some(s) => Some(s.schwinger(params.beta, *t, params.lattice.origin(), *site)?),
            None => None,
        };
        let norm = lattice::norm(x);
        table.push([
            fmt_point(x),
            norm.to_string(),
            fmt_f64(*t),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            e.n.to_string(),
            e.seed.to_string(),
            e.n_eff.map(fmt_f64).unwrap_or_default(),
            exact.map(fmt_f64).unwrap_or_default(),
        ]);
        let mut rec = serde_json::to_value(EstimateRecord::monte_carlo(
            PointParams { x, norm, t: *t, observable: "schwinger" },
            e,
        ))?;
        rec["oracle"] = json!(exact);
        records.push(rec);
    }
    finish_mc(dir, files, table, "schwinger.csv", &estimates, json!({"experiment": "schwinger-sweep", "records": records}))
}

fn quenched_sweep(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let params = config.model()?;
    let dist = config.field_distribution()?;
    let n_fields = config.n_fields.unwrap_or(20);
    let mut table = CsvTable::new(&["x", "norm", "mean", "stderr", "n_fields", "n_omega", "seed", "n_eff"]);
    table.note("field", serde_json::to_string(&dist)?.replace(',', ";"));
    let mut estimates = Vec::new();
    let mut records = Vec::new();
    for x in config.targets(&params.lattice) {
        let e = quenched_two_point(&params, &dist, &x, n_fields, config.n, config.seed)?;
        let norm = lattice::norm(&x);
        table.push([
            fmt_point(&x),
            norm.to_string(),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            n_fields.to_string(),
            config.n.to_string(),
            e.seed.to_string(),
            e.n_eff.map(fmt_f64).unwrap_or_default(),
        ]);
        records.push(serde_json::to_value(EstimateRecord::monte_carlo(
            PointParams { x: &x, norm, t: 0.0, observable: "quenched-two-point" },
            &e,
        ))?);
        dir.log(format!("quenched x={} mean={:e} stderr={:e}", fmt_point(&x), e.mean, e.stderr));
        estimates.push(e);
    }
    let summary = json!({"experiment": "quenched-sweep", "distribution": dist, "records": records});
    finish_mc(dir, files, table, "quenched.csv", &estimates, summary)
}

/// The i.i.d. label probability: `p` from the config, or the domination bound.
pub fn label_probability(config: &RunConfig, params: &ModelParams) -> Result<f64> {
    if let Some(p) = config.p {
        return Ok(p);
    }
    let slabs = config.slabs.unwrap_or_else(|| (params.beta / config.delta).round() as usize);
    let below = params.field.values().iter().filter(|h| **h < config.alpha).count() as f64 / params.field.len() as f64;
    Ok(percolation::good_probability_bound(
        below,
        slabs,
        params.lattice.dim(),
        params.spin.theta() as f64,
        config.delta,
    ))
}

fn fpp_sweep(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let mode = config.fpp_mode.unwrap_or(FppMode::XiIid);
    let mut table = CsvTable::new(&["mode", "d", "N", "p", "alpha", "delta", "phi", "x", "norm", "estimate", "stderr", "n", "seed"]);
    let (model, d, slabs, p) = match mode {
        FppMode::XiIid => {
            let d = config.dim.ok_or_else(|| Error::Config("`dim` is required for xi-iid".into()))?;
            let slabs = config.slabs.unwrap_or(4);
            let p = match config.p {
                Some(p) => p,
                None => label_probability(config, &config.model()?)?,
            };
            (TailModel::XiIid { dim: d, slabs, p, radius: config.radius }, d, slabs, p)
        }
        FppMode::GammaWeighted | FppMode::GammaPoisson => {
            let params = config.model()?;
            let p = label_probability(config, &params)?;
            let theta = params.spin.theta() as f64;
            let d = params.lattice.dim();
            let setup = GammaSetup::new(params, config.delta, config.alpha)?;
            let slabs = setup.grid.slabs();
            let model = if mode == FppMode::GammaWeighted {
                TailModel::GammaWeighted(setup)
            } else {
                TailModel::GammaPoisson { setup, intensity: config.intensity.unwrap_or(theta) }
            };
            (model, d, slabs, p)
        }
    };
    let mode_name = match mode {
        FppMode::XiIid => "xi-iid",
        FppMode::GammaWeighted => "gamma-weighted",
        FppMode::GammaPoisson => "gamma-poisson",
    };
    if let TailModel::XiIid { .. } = model {
        let radii: Vec<u32> = config.points.iter().map(|x| config.radius.unwrap_or(3 * lattice::norm(x))).collect();
        table.note("radius", format!("{radii:?}").replace(',', ";"));
    }
    dir.log(format!("fpp mode={mode_name} d={d} N={slabs} p={p}"));
    if config.points.is_empty() {
        return Err(Error::Config("`points` is required for fpp-sweep".into()));
    }
    let mut estimates = Vec::new();
    let mut points = Vec::new();
    let mut records = Vec::new();
    for x in &config.points {
        let e = tail_estimate(&model, config.phi, x, config.n, config.seed)?;
        let norm = lattice::norm(x);
        table.push([
            mode_name.to_string(),
            d.to_string(),
            slabs.to_string(),
            fmt_f64(p),
            fmt_f64(config.alpha),
            fmt_f64(config.delta),
            fmt_f64(config.phi),
            fmt_point(x),
            norm.to_string(),
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            e.n.to_string(),
            e.seed.to_string(),
        ]);
        dir.log(format!("tail x={} estimate={:e} stderr={:e}", fmt_point(x), e.mean, e.stderr));
        points.push(DecayPoint::new(norm as f64, e.mean, e.stderr));
        records.push(serde_json::to_value(EstimateRecord::monte_carlo(
            PointParams { x, norm, t: 0.0, observable: "tail" },
            &e,
        ))?);
        estimates.push(e);
    }
    let fit = match fit_exponential(&points) {
        Ok(f) => {
            dir.log(format!("fit C={:e} c={:e} R2={:.4}", f.amplitude, f.rate, f.r_squared));
            json!(f)
        }
        Err(e) => {
            dir.log(format!("fit unavailable: {e}"));
            json!({"error": e.to_string()})
        }
    };
    let summary = json!({"experiment": "fpp-sweep", "mode": mode_name, "p": p, "records": records, "fit": fit});
    finish_mc(dir, files, table, "fpp.csv", &estimates, summary)
}

fn domination(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let params = config.model()?;
    let setup = GammaSetup::new(params, config.delta, config.alpha)?;
    let targets = config.targets(&setup.params.lattice);
    let mut table = CsvTable::new(&["x", "norm", "phi", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "diff", "combined_se", "pass"]);
    let mut verdicts = Vec::new();
    let mut failed = Vec::new();
    for (i, x) in targets.iter().enumerate() {
        let r = domination_check(&setup, x, config.phi, config.n, rng::split(config.seed, i as u64))?;
        table.push([
            fmt_point(x),
            lattice::norm(x).to_string(),
            fmt_f64(config.phi),
            fmt_f64(r.lhs.mean),
            fmt_f64(r.lhs.stderr),
            fmt_f64(r.rhs.mean),
            fmt_f64(r.rhs.stderr),
            fmt_f64(r.diff),
            fmt_f64(r.combined_se),
            r.pass.to_string(),
        ]);
        dir.log(format!(
            "domination x={} lhs={:.5} rhs={:.5} {}",
            fmt_point(x),
            r.lhs.mean,
            r.rhs.mean,
            if r.pass { "PASS" } else { "FAIL" }
        ));
        if !r.pass {
            failed.push(fmt_point(x));
        }
        verdicts.push(json!({"x": x, "report": r}));
    }
    files.push(dir.csv("domination.csv", &table)?);
    let summary = json!({"experiment": "domination-check", "pass": failed.is_empty(), "verdicts": verdicts});
    files.push(dir.json("verdict.json", &summary)?);
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Error::Acceptance(format!("domination fails at x = {}", failed.join(", "))))
    }
}

/// Inputs to the bound chain at one target x.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainValues {
    pub x: Vec<i32>,
    pub norm: u32,
    /// ⟨S¹₀S¹ₓ⟩.
    pub two_point: MCEstimate,
    /// ⅓S(S+1)(2S+1)·E_h[1_{0↔x} e^{−Σ h ℓ⁺}].
    pub rhs: MCEstimate,
    /// ⅓S(S+1)(2S+1).
    pub constant: f64,
    /// e^{−αδ(φ‖x‖−1)}.
    pub deterministic: f64,
    /// P_h(T_Λ(x) < φ‖x‖).
    pub tail: MCEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainLink {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub combined_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainPoint {
    pub values: ChainValues,
    pub links: Vec<ChainLink>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub points: Vec<ChainPoint>,
    pub pass: bool,
    /// `link@x` of the first failing link.
    pub failing: Option<String>,
}

fn link(name: &str, lower: f64, upper: f64, combined_se: f64) -> ChainLink {
    ChainLink { name: name.into(), lower, upper, combined_se, pass: lower <= upper + 3.0 * combined_se }
}

/// Checks two-point ≤ loop bound ≤ constant·(deterministic + tail), each
/// within three combined standard errors.
pub fn evaluate_chain(values: ChainValues) -> ChainPoint {
    let v = &values;
    let links = vec![
        link("two-point<=loop-bound", v.two_point.mean, v.rhs.mean, v.two_point.stderr.hypot(v.rhs.stderr)),
        link(
            "loop-bound<=passage-split",
            v.rhs.mean,
            v.constant * (v.deterministic + v.tail.mean),
            v.rhs.stderr.hypot(v.constant * v.tail.stderr),
        ),
    ];
    let pass = links.iter().all(|l| l.pass);
    ChainPoint { values, links, pass }
}

pub fn summarize_chain(points: Vec<ChainPoint>) -> ChainReport {
    let failing = points.iter().find_map(|p| {
        p.links.iter().find(|l| !l.pass).map(|l| format!("{}@{}", l.name, fmt_point(&p.values.x)))
    });
    ChainReport { pass: failing.is_none(), points, failing }
}

/// Estimates every quantity of the chain at each configured target.
pub fn verify_corollary_chain(config: &RunConfig) -> Result<ChainReport> {
    let params = config.model()?;
    let setup = GammaSetup::new(params.clone(), config.delta, config.alpha)?;
    let constant = weights::bound_prefactor(params.spin);
    let mut points = Vec::new();
    for (i, x) in config.targets(&params.lattice).iter().enumerate() {
        let site = point_site(&params, x)?;
        let seed = rng::split(config.seed, i as u64);
        let mc = Estimator::default().run(
            &params,
            &[Observable::two_point(site), Observable::LoopBound { site, time: 0.0 }],
            config.n,
            rng::split(seed, 0),
        )?;
        let norm = lattice::norm(x);
        let tail = tail_estimate(&TailModel::GammaWeighted(setup.clone()), config.phi, x, config.n, rng::split(seed, 1))?;
        let deterministic = (-config.alpha * config.delta * (config.phi * norm as f64 - 1.0)).exp();
        points.push(evaluate_chain(ChainValues {
            x: x.clone(),
            norm,
            two_point: mc[0].clone(),
            rhs: mc[1].clone(),
            constant,
            deterministic,
            tail,
        }));
    }
    Ok(summarize_chain(points))
}

fn full_pipeline(config: &RunConfig, dir: &mut OutputDir, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let report = verify_corollary_chain(config)?;
    let mut table = CsvTable::new(&[
        "x", "norm", "two_point", "two_point_se", "loop_bound", "loop_bound_se", "deterministic", "tail", "tail_se", "pass",
    ]);
    for p in &report.points {
        let v = &p.values;
        table.push([
            fmt_point(&v.x),
            v.norm.to_string(),
            fmt_f64(v.two_point.mean),
            fmt_f64(v.two_point.stderr),
            fmt_f64(v.rhs.mean),
            fmt_f64(v.rhs.stderr),
            fmt_f64(v.deterministic),
            fmt_f64(v.tail.mean),
            fmt_f64(v.tail.stderr),
            p.pass.to_string(),
        ]);
        for l in &p.links {
            dir.log(format!(
                "chain x={} {} {:e} <= {:e} (se {:e}) {}",
                fmt_point(&v.x),
                l.name,
                l.lower,
                l.upper,
                l.combined_se,
                if l.pass { "PASS" } else { "FAIL" }
            ));
        }
    }
    files.push(dir.csv("chain.csv", &table)?);
    let summary = serde_json::to_value(&report)?;
    files.push(dir.json("verdict.json", &summary)?);
    match &report.failing {
        None => Ok(summary),
        Some(link) => Err(Error::Acceptance(format!("chain link {link} fails"))),
    }
}

/// Points for a fit from a CSV with `norm`, a mean column and a stderr column.
pub fn read_fit_points(path: &Path, mean_col: &str, se_col: &str) -> Result<Vec<DecayPoint>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Parse(format!("column `{name}` not found in {}", path.display())))
    };
    let (r, m, s) = (col("norm")?, col(mean_col)?, col(se_col)?);
    let parse = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("{v:?}: {e}")));
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Parse(format!("ragged row: {l}")));
            }
            Ok(DecayPoint::new(parse(cells[r])?, parse(cells[m])?, parse(cells[s])?))
        })
        .filter(|p| !matches!(p, Ok(p) if p.r == 0.0))
        .collect()
}
