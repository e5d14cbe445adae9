//! Good/bad labelling of space-time intervals and passage times on Γ and Ξ.
//!
//! Passage times are vertex-weighted shortest paths with weights in {0, 1},
//! solved by a deque-based BFS. Start and end vertices are charged like any
//! other vertex on the path.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bridges::{Bridge, BridgeConfig, BridgeProcess};
use crate::estimators::{self, ModelParams};
use crate::exec::Execution;
use crate::lattice::{self, IntervalGrid, XiGraph};
use crate::loops::{Direction, LoopDecomposition};
use crate::rng;
use crate::stats::{self, BatchSums, MCEstimate, BATCHES};
use crate::weights::Field;
use crate::{Error, Result};

/// Per-interval labels η on Γ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    pub good: Vec<bool>,
    pub h_good: Vec<bool>,
    pub omega_good: Vec<bool>,
}

impl Labeling {
    pub fn len(&self) -> usize {
        self.good.len()
    }

    pub fn is_empty(&self) -> bool {
        self.good.is_empty()
    }

    pub fn good_count(&self) -> usize {
        self.good.iter().filter(|g| **g).count()
    }
}

/// Labels every interval of Γ: h-good iff h_x ≥ α, ω-good iff no bridge has
/// an endpoint in it, good iff both.
pub fn classify(grid: &IntervalGrid, omega: &BridgeConfig, field: &Field, alpha: f64) -> Result<Labeling> {
    if !(alpha > 0.0) {
        return Err(Error::pre(format!("alpha must be positive, got {alpha}")));
    }
    let lattice = grid.lattice();
    if omega.sites() != lattice.len() || field.len() != lattice.len() {
        return Err(Error::pre("bridge configuration or field does not match the lattice"));
    }
    if (omega.beta() - grid.beta()).abs() > 1e-12 * grid.beta() {
        return Err(Error::pre("bridge configuration and interval grid disagree on beta"));
    }
    let n = grid.slabs();
    let mut h_good = vec![false; grid.len()];
    for (site, &h) in field.values().iter().enumerate() {
        h_good[site * n..(site + 1) * n].fill(h >= alpha);
    }
    let mut omega_good = vec![true; grid.len()];
    for b in omega.bridges() {
        let (x, y) = lattice.edges()[b.edge];
        let k = grid.slab_at(b.time);
        omega_good[grid.interval(x, k)] = false;
        omega_good[grid.interval(y, k)] = false;
    }
    let good = h_good.iter().zip(&omega_good).map(|(a, b)| *a && *b).collect();
    Ok(Labeling { good, h_good, omega_good })
}

/// A passage time and the path that attains it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageResult {
    pub value: u32,
    /// Vertices from start to target; empty when not requested.
    pub witness: Vec<usize>,
}

/// Reusable 0-1 BFS workspace. Visited state is generation-stamped, so
/// repeated solves on large graphs cost only what they explore.
#[derive(Debug, Default)]
pub struct ZeroOneBfs {
    dist: Vec<u32>,
    parent: Vec<u32>,
    weight: Vec<u8>,
    stamp: Vec<u32>,
    generation: u32,
    deque: VecDeque<(u32, u32)>,
    scratch: Vec<usize>,
}

impl ZeroOneBfs {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, vertices: usize) {
        if self.stamp.len() < vertices {
            self.dist.resize(vertices, 0);
            self.parent.resize(vertices, 0);
            self.weight.resize(vertices, 0);
            self.stamp.resize(vertices, 0);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        self.deque.clear();
    }

    #[inline]
    fn touch(&mut self, v: usize, weight: &mut impl FnMut(usize) -> u32) {
        if self.stamp[v] != self.generation {
            self.stamp[v] = self.generation;
            self.dist[v] = u32::MAX;
            self.weight[v] = weight(v) as u8;
        }
    }

    /// Minimum over paths from `start` to `target` of the summed vertex
    /// weights, or `None` if every path costs at least `bound`.
    pub fn solve(
        &mut self,
        vertices: usize,
        start: usize,
        target: usize,
        mut weight: impl FnMut(usize) -> u32,
        mut neighbours: impl FnMut(usize, &mut Vec<usize>),
        bound: u32,
        witness: bool,
    ) -> Option<PassageResult> {
        self.reset(vertices);
        self.touch(start, &mut weight);
        let d0 = u32::from(self.weight[start]);
        if d0 >= bound {
            return None;
        }
        self.dist[start] = d0;
        self.parent[start] = start as u32;
        self.deque.push_back((start as u32, d0));
        let mut buf = std::mem::take(&mut self.scratch);
        let mut found = None;
        while let Some((u, d)) = self.deque.pop_front() {
            let u = u as usize;
            if d > self.dist[u] {
                continue;
            }
            if u == target {
                found = Some(d);
                break;
            }
            neighbours(u, &mut buf);
            for &v in &buf {
                self.touch(v, &mut weight);
                let w = u32::from(self.weight[v]);
                let nd = d + w;
                if nd < self.dist[v] && nd < bound {
                    self.dist[v] = nd;
                    self.parent[v] = u as u32;
                    if w == 0 {
                        self.deque.push_front((v as u32, nd));
                    } else {
                        self.deque.push_back((v as u32, nd));
                    }
                }
            }
        }
        self.scratch = buf;
        let value = found?;
        let mut path = Vec::new();
        if witness {
            let mut v = target;
            path.push(v);
            while v != start {
                v = self.parent[v] as usize;
                path.push(v);
            }
            path.reverse();
        }
        Some(PassageResult { value, witness: path })
    }
}

fn gamma_weight<'a>(grid: &'a IntervalGrid, labels: &'a Labeling) -> impl Fn(usize) -> u32 + 'a {
    move |i| u32::from(labels.good[i] && grid.lattice().is_even(grid.site_of(i)))
}

fn gamma_endpoints(grid: &IntervalGrid, labels: &Labeling, x: usize) -> Result<(usize, usize)> {
    if labels.len() != grid.len() {
        return Err(Error::pre("labelling does not match the interval grid"));
    }
    if x >= grid.lattice().len() {
        return Err(Error::pre(format!("site {x} outside the lattice")));
    }
    Ok((grid.interval(grid.lattice().origin(), 0), grid.interval(x, 0)))
}

/// T_Λ(x): the least number of good even-sublattice intervals on a Γ-path
/// from ({0}, [0,δ)) to ({x}, [0,δ)). For x = 0 this is the single-interval
/// path.
pub fn passage_time_gamma(grid: &IntervalGrid, labels: &Labeling, x: usize) -> Result<PassageResult> {
    let (start, target) = gamma_endpoints(grid, labels, x)?;
    let mut bfs = ZeroOneBfs::new();
    let result = bfs.solve(
        grid.len(),
        start,
        target,
        gamma_weight(grid, labels),
        |i, out| {
            out.clear();
            out.extend(grid.neighbours(i));
        },
        u32::MAX,
        true,
    );
    Ok(result.expect("Γ is connected"))
}

/// Whether T_Λ(x) < `bound`, exploring only intervals at distance < `bound`.
pub fn gamma_below(bfs: &mut ZeroOneBfs, grid: &IntervalGrid, labels: &Labeling, x: usize, bound: u32) -> Result<bool> {
    let (start, target) = gamma_endpoints(grid, labels, x)?;
    let hit = bfs.solve(
        grid.len(),
        start,
        target,
        gamma_weight(grid, labels),
        |i, out| {
            out.clear();
            out.extend(grid.neighbours(i));
        },
        bound,
        false,
    );
    Ok(hit.is_some())
}

/// Counter-based i.i.d. Bernoulli(p) labels on even sites × slabs, keyed by
/// lattice coordinates so that boxes of different radii share values.
#[derive(Clone, Copy, Debug)]
pub struct XiLabels {
    key: u64,
    threshold: u64,
    always: bool,
}

impl XiLabels {
    pub fn new(p: f64, seed: u64, replica: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::pre(format!("p must lie in [0, 1], got {p}")));
        }
        // P(u < threshold) = p for u uniform on 64 bits; p = 1 is special-cased.
        let threshold = (p * 2f64.powi(64)).min(u64::MAX as f64) as u64;
        Ok(XiLabels { key: rng::split(seed, replica), threshold, always: p >= 1.0 })
    }

    #[inline]
    pub fn label(&self, coords: &[i32], slab: usize) -> bool {
        if self.always {
            return true;
        }
        let mut h = self.key;
        for &c in coords {
            h = rng::mix64(h ^ (c as i64 as u64));
        }
        rng::mix64(h ^ ((slab as u64) << 32 | 0x5bd1)) < self.threshold
    }
}

/// Eagerly materialized Ξ labels, indexed by vertex.
pub fn sample_xi_labels(xi: &XiGraph, p: f64, seed: u64) -> Result<Vec<bool>> {
    let labels = XiLabels::new(p, seed, 0)?;
    Ok((0..xi.len())
        .map(|v| labels.label(xi.site_coords(xi.site_of(v)), xi.slab_of(v)))
        .collect())
}

fn xi_endpoints(xi: &XiGraph, x: &[i32]) -> Result<(usize, usize)> {
    let origin = vec![0; xi.dim()];
    let s = xi.site_index(&origin).expect("origin is even");
    let t = xi
        .site_index(x)
        .ok_or_else(|| Error::pre(format!("{x:?} is not an even site of the radius-{} box", xi.radius())))?;
    Ok((xi.vertex(s, 0), xi.vertex(t, 0)))
}

/// T(x) on the truncated Ξ with explicit labels.
pub fn passage_time_xi(xi: &XiGraph, labels: &[bool], x: &[i32]) -> Result<PassageResult> {
    if labels.len() != xi.len() {
        return Err(Error::pre("labelling does not match Ξ"));
    }
    let (start, target) = xi_endpoints(xi, x)?;
    let mut bfs = ZeroOneBfs::new();
    let r = bfs.solve(xi.len(), start, target, |v| u32::from(labels[v]), |v, out| xi.neighbours_into(v, out), u32::MAX, true);
    Ok(r.expect("Ξ slab graph is connected"))
}

/// Lazily labelled Ξ passage time, optionally stopped at `bound`.
pub fn passage_time_xi_lazy(
    bfs: &mut ZeroOneBfs,
    xi: &XiGraph,
    labels: &XiLabels,
    x: &[i32],
    bound: u32,
) -> Result<Option<PassageResult>> {
    let (start, target) = xi_endpoints(xi, x)?;
    Ok(bfs.solve(
        xi.len(),
        start,
        target,
        |v| u32::from(labels.label(xi.site_coords(xi.site_of(v)), xi.slab_of(v))),
        |v, out| xi.neighbours_into(v, out),
        bound,
        false,
    ))
}

/// Γ built over a model's lattice, with slab width δ and field threshold α.
#[derive(Clone, Debug)]
pub struct GammaSetup {
    pub params: ModelParams,
    pub grid: IntervalGrid,
    pub alpha: f64,
}

impl GammaSetup {
    pub fn new(params: ModelParams, delta: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::pre(format!("alpha must be positive, got {alpha}")));
        }
        let grid = IntervalGrid::new(&params.lattice, params.beta, delta)?;
        Ok(GammaSetup { params, grid, alpha })
    }
}

/// Source of labels for a tail estimate.
#[derive(Clone, Debug)]
pub enum TailModel {
    /// Γ labels from ω ~ ρ reweighted by ∏ z_h(γ): the measure P_h.
    GammaWeighted(GammaSetup),
    /// Γ labels from an unweighted Poisson process of the given intensity.
    GammaPoisson { setup: GammaSetup, intensity: f64 },
    /// I.i.d. Bernoulli(p) labels on Ξ truncated to radius R (default 3‖x‖).
    XiIid { dim: usize, slabs: usize, p: f64, radius: Option<u32> },
}

/// The integer bound b with {T < φ‖x‖} = {T < b}.
pub fn passage_bound(phi: f64, norm: u32) -> Result<u32> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::pre(format!("phi must be positive, got {phi}")));
    }
    Ok((phi * norm as f64).ceil() as u32)
}

/// Estimates P(T(x) < φ‖x‖) under `model`.
pub fn tail_estimate(model: &TailModel, phi: f64, x: &[i32], n: u64, seed: u64) -> Result<MCEstimate> {
    tail_estimate_with(Execution::default(), model, phi, x, n, seed)
}

pub fn tail_estimate_with(
    execution: Execution,
    model: &TailModel,
    phi: f64,
    x: &[i32],
    n: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::pre("need at least 2 samples"));
    }
    let norm = lattice::norm(x);
    let bound = passage_bound(phi, norm)?;
    let batches = BATCHES.min(n as usize);
    let ranges = stats::batch_ranges(n, batches);
    match model {
        TailModel::GammaWeighted(setup) => {
            let site = setup.params.lattice.require_site(x)?;
            let process = BridgeProcess::new(setup.params.beta, setup.params.u, 1.0)?;
            let sums = execution.map(batches, |b| {
                let mut acc = BatchSums::default();
                let mut bfs = ZeroOneBfs::new();
                let mut buf = Vec::new();
                for replica in ranges[b].clone() {
                    let omega = process.sample(&setup.params.lattice, seed, replica);
                    let d = LoopDecomposition::trace(&setup.params.lattice, &omega, Direction::Up)
                        .expect("sampled configurations are well formed");
                    let w = estimators::replica_weight(&setup.params, &d, &mut buf);
                    let labels = classify(&setup.grid, &omega, &setup.params.field, setup.alpha).expect("validated");
                    let hit = gamma_below(&mut bfs, &setup.grid, &labels, site, bound).expect("validated");
                    acc.count += 1;
                    acc.num += if hit { w } else { 0.0 };
                    acc.den += w;
                    acc.den_sq += w * w;
                }
                acc
            });
            let (mean, stderr) = stats::jackknife_ratio(&sums)?;
            let n_eff = stats::effective_sample_size(&sums);
            Ok(MCEstimate { mean, stderr, n, seed, batches, n_eff: Some(n_eff) })
        }
        TailModel::GammaPoisson { setup, intensity } => {
            let site = setup.params.lattice.require_site(x)?;
            let process = BridgeProcess::new(setup.params.beta, setup.params.u, *intensity)?;
            let hits = execution.map(batches, |b| {
                let mut bfs = ZeroOneBfs::new();
                ranges[b]
                    .clone()
                    .filter(|&replica| {
                        let omega = process.sample(&setup.params.lattice, seed, replica);
                        let labels = classify(&setup.grid, &omega, &setup.params.field, setup.alpha).expect("validated");
                        gamma_below(&mut bfs, &setup.grid, &labels, site, bound).expect("validated")
                    })
                    .count() as u64
            });
            Ok(binomial_estimate(&hits, n, seed))
        }
        TailModel::XiIid { dim, slabs, p, radius } => {
            if x.len() != *dim {
                return Err(Error::pre(format!("point {x:?} is not {dim}-dimensional")));
            }
            let r = radius.unwrap_or(3 * norm).max(1);
            let xi = XiGraph::new(*dim, r, *slabs)?;
            xi_endpoints(&xi, x)?;
            XiLabels::new(*p, seed, 0)?;
            let hits = execution.map(batches, |b| {
                let mut bfs = ZeroOneBfs::new();
                ranges[b]
                    .clone()
                    .filter(|&replica| {
                        let labels = XiLabels::new(*p, seed, replica).expect("validated");
                        passage_time_xi_lazy(&mut bfs, &xi, &labels, x, bound).expect("validated").is_some()
                    })
                    .count() as u64
            });
            Ok(binomial_estimate(&hits, n, seed))
        }
    }
}

fn binomial_estimate(hits: &[u64], n: u64, seed: u64) -> MCEstimate {
    let (mean, stderr) = stats::binomial(hits.iter().sum(), n);
    MCEstimate { mean, stderr, n, seed, batches: hits.len(), n_eff: None }
}

/// p = (1 − P(h < α)^{1/N}) e^{−2dθδ}, a lower bound on the probability that
/// an interval is good under the dominating measure.
pub fn good_probability_bound(prob_h_bad: f64, slabs: usize, dim: usize, theta: f64, delta: f64) -> f64 {
    (1.0 - prob_h_bad.powf(1.0 / slabs as f64)) * (-2.0 * dim as f64 * theta * delta).exp()
}

/// Both sides of P_h(T_Λ(x) < φ‖x‖) ≤ P'(T_Λ(x) < φ‖x‖).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub theta: f64,
    pub diff: f64,
    pub combined_se: f64,
    pub pass: bool,
}

pub fn domination_check(setup: &GammaSetup, x: &[i32], phi: f64, n: u64, seed: u64) -> Result<DominationReport> {
    let theta = setup.params.spin.theta() as f64;
    let lhs = tail_estimate(&TailModel::GammaWeighted(setup.clone()), phi, x, n, rng::split(seed, 0))?;
    let rhs = tail_estimate(
        &TailModel::GammaPoisson { setup: setup.clone(), intensity: theta },
        phi,
        x,
        n,
        rng::split(seed, 1),
    )?;
    let combined_se = lhs.stderr.hypot(rhs.stderr);
    let diff = lhs.mean - rhs.mean;
    Ok(DominationReport { pass: diff <= 3.0 * combined_se, lhs, rhs, theta, diff, combined_se })
}

/// Whether {T_Λ(x) < φ‖x‖} still holds after adding `bridge`, given that it
/// held before (vacuously true otherwise).
pub fn monotone_increase_check(
    grid: &IntervalGrid,
    omega: &BridgeConfig,
    bridge: Bridge,
    field: &Field,
    alpha: f64,
    x: usize,
    phi: f64,
) -> Result<bool> {
    let lattice = grid.lattice();
    let bound = passage_bound(phi, lattice.norm(x))?;
    let before = passage_time_gamma(grid, &classify(grid, omega, field, alpha)?, x)?.value;
    let grown = omega.with_bridge(lattice, bridge)?;
    let after = passage_time_gamma(grid, &classify(grid, &grown, field, alpha)?, x)?.value;
    Ok(before >= bound || after < bound)
}

/// One coupled (ω, h) sample where the Ξ passage time exceeded the Γ one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingViolation {
    pub replica: u64,
    pub t_xi: u32,
    pub t_gamma: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub samples: u64,
    pub violations: u64,
    pub max_excess: u32,
    pub first: Option<CouplingViolation>,
    pub seed: u64,
}

/// Ξ over the same box as a lattice, labelled by restricting Γ's η to the
/// even sublattice.
pub fn induced_xi(grid: &IntervalGrid, labels: &Labeling) -> Result<(XiGraph, Vec<bool>)> {
    let lattice = grid.lattice();
    let side = lattice.side().ok_or_else(|| Error::pre("coupling needs a box lattice"))?;
    let xi = XiGraph::new(lattice.dim(), side / 2, grid.slabs())?;
    let induced = (0..xi.len())
        .map(|v| {
            let site = lattice.site_index(xi.site_coords(xi.site_of(v))).expect("same box");
            labels.good[grid.interval(site, xi.slab_of(v))]
        })
        .collect();
    Ok((xi, induced))
}

/// Compares T(x) on the induced Ξ with T_Λ(x) on Γ over `n` coupled samples
/// of ω at the given bridge intensity.
pub fn coupling_check(setup: &GammaSetup, intensity: f64, x: &[i32], n: u64, seed: u64) -> Result<CouplingReport> {
    if !lattice::is_even(x) {
        return Err(Error::pre(format!("{x:?} is not on the even sublattice")));
    }
    let site = setup.params.lattice.require_site(x)?;
    let process = BridgeProcess::new(setup.params.beta, setup.params.u, intensity)?;
    let results = Execution::default().map(n as usize, |replica| -> Result<(u32, u32)> {
        let omega = process.sample(&setup.params.lattice, seed, replica as u64);
        let labels = classify(&setup.grid, &omega, &setup.params.field, setup.alpha)?;
        let t_gamma = passage_time_gamma(&setup.grid, &labels, site)?.value;
        let (xi, induced) = induced_xi(&setup.grid, &labels)?;
        let t_xi = passage_time_xi(&xi, &induced, x)?.value;
        Ok((t_xi, t_gamma))
    });
    let mut report = CouplingReport { samples: n, violations: 0, max_excess: 0, first: None, seed };
    for (replica, r) in results.into_iter().enumerate() {
        let (t_xi, t_gamma) = r?;
        if t_xi > t_gamma {
            report.violations += 1;
            report.max_excess = report.max_excess.max(t_xi - t_gamma);
            report.first.get_or_insert(CouplingViolation { replica: replica as u64, t_xi, t_gamma });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridges::BridgeKind;
    use crate::weights::Spin;
    use crate::Lattice;

    fn grid(l: &Lattice, beta: f64, delta: f64) -> IntervalGrid {
        IntervalGrid::new(l, beta, delta).unwrap()
    }

    fn all(grid: &IntervalGrid, good: bool) -> Labeling {
        Labeling { good: vec![good; grid.len()], h_good: vec![true; grid.len()], omega_good: vec![good; grid.len()] }
    }

    #[test]
    fn classify_examples() {
        let l = Lattice::new_box(1, 2).unwrap();
        let g = grid(&l, 1.0, 0.25);
        let empty = BridgeConfig::empty(&l, 1.0);
        assert!(classify(&g, &empty, &Field::uniform(3, 1.0), 1.0).unwrap().good.iter().all(|b| *b));

        let weak = Field::new(vec![1.0, 0.5, 1.0]).unwrap();
        let lab = classify(&g, &empty, &weak, 1.0).unwrap();
        assert_eq!(lab.good_count(), 8);
        assert!((0..4).all(|k| !lab.good[g.interval(1, k)]));

        let one = BridgeConfig::new(&l, 1.0, vec![Bridge { edge: 1, time: 0.6, kind: BridgeKind::Bar }]).unwrap();
        let lab = classify(&g, &one, &Field::uniform(3, 1.0), 1.0).unwrap();
        let (x, y) = l.edges()[1];
        let bad: Vec<usize> = (0..g.len()).filter(|&i| !lab.good[i]).collect();
        assert_eq!(bad, vec![g.interval(x, 2), g.interval(y, 2)]);
        assert!(classify(&g, &one, &Field::uniform(3, 1.0), 0.0).is_err());
    }

    #[test]
    fn gamma_passage_examples() {
        let l = Lattice::new_box(1, 4).unwrap();
        for delta in [1.0, 0.5, 0.25] {
            let g = grid(&l, 1.0, delta);
            let x2 = l.site_index(&[2]).unwrap();
            assert_eq!(passage_time_gamma(&g, &all(&g, false), x2).unwrap().value, 0);
            let r = passage_time_gamma(&g, &all(&g, true), x2).unwrap();
            assert_eq!(r.value, 2);
            assert_eq!(r.witness.first(), Some(&g.interval(l.origin(), 0)));
            assert_eq!(r.witness.last(), Some(&g.interval(x2, 0)));
        }
    }

    #[test]
    fn origin_column_free() {
        let l = Lattice::segment(3).unwrap();
        let g = grid(&l, 1.0, 1.0);
        let mut lab = all(&g, true);
        lab.good[g.interval(0, 0)] = false;
        assert_eq!(passage_time_gamma(&g, &lab, 2).unwrap().value, 1);
    }

    #[test]
    fn bounded_solver_matches_full() {
        let l = Lattice::new_box(2, 4).unwrap();
        let g = grid(&l, 1.0, 0.25);
        let process = BridgeProcess::new(1.0, 0.5, 2.0).unwrap();
        let mut bfs = ZeroOneBfs::new();
        for replica in 0..50 {
            let omega = process.sample(&l, 3, replica);
            let lab = classify(&g, &omega, &Field::uniform(l.len(), 1.0), 1.0).unwrap();
            for site in [l.site_index(&[2, 0]).unwrap(), l.site_index(&[2, 2]).unwrap()] {
                let t = passage_time_gamma(&g, &lab, site).unwrap().value;
                for bound in 0..5 {
                    assert_eq!(gamma_below(&mut bfs, &g, &lab, site, bound).unwrap(), t < bound);
                }
            }
        }
    }

    #[test]
    fn xi_labels_are_bernoulli() {
        let xi = XiGraph::new(2, 1, 1).unwrap();
        assert!(sample_xi_labels(&xi, 1.0, 5).unwrap().iter().all(|b| *b));
        assert!(sample_xi_labels(&xi, 0.0, 5).unwrap().iter().all(|b| !*b));
        let xi = XiGraph::new(2, 230, 1).unwrap();
        let labels = sample_xi_labels(&xi, 0.5, 11).unwrap();
        let (m, se) = stats::binomial(labels.iter().filter(|b| **b).count() as u64, labels.len() as u64);
        assert!(labels.len() >= 100_000);
        assert!((m - 0.5).abs() < 5.0 * se);
    }

    #[test]
    fn xi_passage_examples() {
        let xi = XiGraph::new(2, 3, 1).unwrap();
        let ones = vec![true; xi.len()];
        assert_eq!(passage_time_xi(&xi, &ones, &[2, 0]).unwrap().value, 2);
        assert_eq!(passage_time_xi(&xi, &vec![false; xi.len()], &[2, 2]).unwrap().value, 0);
        assert!(passage_time_xi(&xi, &ones, &[1, 0]).is_err());
        assert!(passage_time_xi(&xi, &ones, &[4, 0]).is_err());
    }

    #[test]
    fn lazy_and_eager_labels_agree() {
        let xi = XiGraph::new(2, 6, 3).unwrap();
        let eager = sample_xi_labels(&xi, 0.7, 21).unwrap();
        let lazy = XiLabels::new(0.7, 21, 0).unwrap();
        let mut bfs = ZeroOneBfs::new();
        for x in [[2, 0], [4, 2], [6, 0]] {
            let t = passage_time_xi(&xi, &eager, &x).unwrap().value;
            assert_eq!(passage_time_xi_lazy(&mut bfs, &xi, &lazy, &x, u32::MAX).unwrap().unwrap().value, t);
            assert!(passage_time_xi_lazy(&mut bfs, &xi, &lazy, &x, t).unwrap().is_none());
        }
    }

    #[test]
    fn odd_column_detour_beats_the_induced_xi() {
        // Chain {-4..4}, every interval good except (2, slab 1). On Γ the path
        // climbs the odd column 1 for free, crosses the bad interval and comes
        // back down on column 3, paying only for both endpoints. On Ξ every
        // route to (2, slab 1) pays for a second interval.
        let l = Lattice::new_box(1, 8).unwrap();
        let g = grid(&l, 1.0, 0.25);
        let mut lab = all(&g, true);
        lab.good[g.interval(l.site_index(&[2]).unwrap(), 1)] = false;
        let t_gamma = passage_time_gamma(&g, &lab, l.site_index(&[4]).unwrap()).unwrap();
        let (xi, induced) = induced_xi(&g, &lab).unwrap();
        let t_xi = passage_time_xi(&xi, &induced, &[4]).unwrap().value;
        assert_eq!((t_xi, t_gamma.value), (3, 2));
        let cols: Vec<usize> = t_gamma.witness.iter().map(|&i| g.site_of(i)).collect();
        assert!(cols.contains(&l.site_index(&[1]).unwrap()));
    }

    #[test]
    fn p_bound() {
        assert!((good_probability_bound(0.0, 4, 2, 2.0, 0.25) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(good_probability_bound(1.0, 4, 2, 2.0, 0.25), 0.0);
    }

    #[test]
    fn tail_limits() {
        let m = TailModel::XiIid { dim: 2, slabs: 4, p: 1.0, radius: None };
        let e = tail_estimate(&m, 0.1, &[4, 0], 200, 1).unwrap();
        assert_eq!((e.mean, e.stderr), (0.0, 0.0));
        let m = TailModel::XiIid { dim: 2, slabs: 4, p: 0.0, radius: None };
        assert_eq!(tail_estimate(&m, 0.1, &[4, 0], 200, 1).unwrap().mean, 1.0);
        assert!(tail_estimate(&m, 0.0, &[4, 0], 200, 1).is_err());
    }

    #[test]
    fn domination_on_a_small_box() {
        let l = Lattice::new_box(2, 2).unwrap();
        let params = ModelParams::new(l.clone(), 1.0, 0.5, Spin::HALF, Field::uniform(l.len(), 1.0)).unwrap();
        let setup = GammaSetup::new(params, 0.25, 1.0).unwrap();
        let r = domination_check(&setup, &[1, 1], 0.25, 4000, 8).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.lhs.mean < r.rhs.mean);
        let r = domination_check(&setup, &[1, 1], 100.0, 500, 8).unwrap();
        assert!(r.pass && r.lhs.mean == 1.0 && r.rhs.mean == 1.0);
    }
}
