//! Poisson processes of crosses and double bars on E_Λ × [0, β).

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::lattice::Lattice;
use crate::rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BridgeKind {
    /// The loop keeps its direction.
    Cross,
    /// Double bar: the loop reverses direction.
    Bar,
}

impl BridgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BridgeKind::Cross => "cross",
            BridgeKind::Bar => "bar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bridge {
    pub edge: usize,
    pub time: f64,
    pub kind: BridgeKind,
}

/// One bridge endpoint as seen from a site column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub bridge: u32,
}

/// A realization ω: bridges sorted by (edge, time) plus a per-site index of
/// endpoint events sorted by time.
#[derive(Clone, Debug)]
pub struct BridgeConfig {
    beta: f64,
    sites: usize,
    bridges: Vec<Bridge>,
    // CSR layout: events of site x are events[offsets[x]..offsets[x + 1]].
    offsets: Vec<usize>,
    events: Vec<Event>,
    resampled: u32,
}

impl BridgeConfig {
    /// Validates and indexes an explicit list of bridges.
    ///
    /// Times must lie in (0, β) and no two endpoints on the same site may
    /// share a time.
    pub fn new(lattice: &Lattice, beta: f64, mut bridges: Vec<Bridge>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::pre("beta must be positive"));
        }
        for b in &bridges {
            if b.edge >= lattice.edges().len() {
                return Err(Error::Malformed(format!("edge {} out of range", b.edge)));
            }
            if !(b.time > 0.0 && b.time < beta) {
                return Err(Error::Malformed(format!("time {} outside (0, beta)", b.time)));
            }
        }
        bridges.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.time.total_cmp(&b.time)));
        let cfg = Self::index(lattice, beta, bridges, 0);
        if let Some(site) = cfg.first_collision() {
            return Err(Error::Malformed(format!("two bridge endpoints share a time at site {site}")));
        }
        Ok(cfg)
    }

    fn index(lattice: &Lattice, beta: f64, bridges: Vec<Bridge>, resampled: u32) -> Self {
        let n = lattice.len();
        let mut offsets = vec![0usize; n + 1];
        for b in &bridges {
            let (x, y) = lattice.edges()[b.edge];
            offsets[x + 1] += 1;
            offsets[y + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut events = vec![Event { time: 0.0, bridge: 0 }; 2 * bridges.len()];
        for (i, b) in bridges.iter().enumerate() {
            let (x, y) = lattice.edges()[b.edge];
            for s in [x, y] {
                events[fill[s]] = Event { time: b.time, bridge: i as u32 };
                fill[s] += 1;
            }
        }
        for x in 0..n {
            events[offsets[x]..offsets[x + 1]].sort_by(|a, b| a.time.total_cmp(&b.time));
        }
        BridgeConfig { beta, sites: n, bridges, offsets, events, resampled }
    }

    fn first_collision(&self) -> Option<usize> {
        (0..self.sites).find(|&x| self.site_events(x).windows(2).any(|w| w[0].time == w[1].time))
    }

    pub fn empty(lattice: &Lattice, beta: f64) -> Self {
        Self::index(lattice, beta, Vec::new(), 0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn bridges(&self) -> &[Bridge] {
        &self.bridges
    }

    pub fn len(&self) -> usize {
        self.bridges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bridges.is_empty()
    }

    /// Endpoint events on `site`, sorted by time.
    pub fn site_events(&self, site: usize) -> &[Event] {
        &self.events[self.offsets[site]..self.offsets[site + 1]]
    }

    /// Number of tie-breaking resamples performed while sampling.
    pub fn resampled(&self) -> u32 {
        self.resampled
    }

    /// A new configuration with one more bridge.
    pub fn with_bridge(&self, lattice: &Lattice, bridge: Bridge) -> Result<Self> {
        let mut all = self.bridges.clone();
        all.push(bridge);
        Self::new(lattice, self.beta, all)
    }

    /// Writes `site_a,site_b,time,kind` rows preceded by a `# beta=` line.
    pub fn write_csv<W: Write>(&self, lattice: &Lattice, mut out: W) -> Result<()> {
        writeln!(out, "# beta={:?}", self.beta)?;
        writeln!(out, "site_a,site_b,time,kind")?;
        for b in &self.bridges {
            let (x, y) = lattice.edges()[b.edge];
            writeln!(out, "{x},{y},{:?},{}", b.time, b.kind.as_str())?;
        }
        Ok(())
    }

    /// Reads the format produced by [`BridgeConfig::write_csv`].
    pub fn read_csv<R: BufRead>(lattice: &Lattice, input: R) -> Result<Self> {
        let mut beta = None;
        let mut bridges = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# beta=") {
                beta = Some(rest.parse::<f64>().map_err(|e| Error::Parse(format!("beta: {e}")))?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') || line.starts_with("site_a") {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let x: usize = fields[0].parse().map_err(|_| bad("site_a"))?;
            let y: usize = fields[1].parse().map_err(|_| bad("site_b"))?;
            let time: f64 = fields[2].parse().map_err(|_| bad("time"))?;
            let kind = match fields[3] {
                "cross" => BridgeKind::Cross,
                "bar" => BridgeKind::Bar,
                _ => return Err(bad("kind")),
            };
            let edge = lattice.edge_between(x, y).ok_or_else(|| bad("not an edge"))?;
            bridges.push(Bridge { edge, time, kind });
        }
        let beta = beta.ok_or_else(|| Error::Parse("missing '# beta=' header".into()))?;
        Self::new(lattice, beta, bridges)
    }
}

/// Parameters of the bridge process: per-edge intensity, with each bridge a
/// cross with probability `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeProcess {
    pub beta: f64,
    pub u: f64,
    pub intensity: f64,
}

impl BridgeProcess {
    pub fn new(beta: f64, u: f64, intensity: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::pre(format!("beta must be positive, got {beta}")));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::pre(format!("u must lie in [0, 1], got {u}")));
        }
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::pre(format!("intensity must be non-negative, got {intensity}")));
        }
        Ok(BridgeProcess { beta, u, intensity })
    }

    /// Replica `replica` of the process under master seed `seed`.
    ///
    /// Edge `e` draws from the stream `(seed, replica, e)`, so the result does
    /// not depend on the order in which replicas are produced.
    pub fn sample(&self, lattice: &Lattice, seed: u64, replica: u64) -> BridgeConfig {
        let mean = self.intensity * self.beta;
        let mut bridges = Vec::new();
        if mean > 0.0 {
            let poisson = Poisson::new(mean).expect("positive finite mean");
            for edge in 0..lattice.edges().len() {
                let mut r = rng::stream(seed, replica, edge as u64);
                let count = poisson.sample(&mut r) as usize;
                for _ in 0..count {
                    let time = self.draw_time(&mut r);
                    let kind = if r.random::<f64>() < self.u { BridgeKind::Cross } else { BridgeKind::Bar };
                    bridges.push(Bridge { edge, time, kind });
                }
            }
        }
        bridges.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.time.total_cmp(&b.time)));
        let mut cfg = BridgeConfig::index(lattice, self.beta, bridges, 0);

        // Ties have probability zero but are possible at f64 resolution.
        let mut attempt = 0u64;
        while let Some(site) = cfg.first_collision() {
            let events = cfg.site_events(site);
            let victim = events
                .windows(2)
                .find(|w| w[0].time == w[1].time)
                .map(|w| w[1].bridge as usize)
                .expect("collision located");
            let mut r = rng::stream(seed, replica, u64::MAX - attempt);
            attempt += 1;
            let mut bridges = std::mem::take(&mut cfg.bridges);
            bridges[victim].time = self.draw_time(&mut r);
            bridges.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.time.total_cmp(&b.time)));
            cfg = BridgeConfig::index(lattice, self.beta, bridges, attempt as u32);
        }
        cfg
    }

    fn draw_time<R: Rng>(&self, r: &mut R) -> f64 {
        loop {
            let t = r.random::<f64>() * self.beta;
            if t > 0.0 && t < self.beta {
                return t;
            }
        }
    }
}

/// Samples one configuration (replica 0) of the bridge process.
pub fn sample_bridges(lattice: &Lattice, beta: f64, u: f64, intensity: f64, seed: u64) -> Result<BridgeConfig> {
    Ok(BridgeProcess::new(beta, u, intensity)?.sample(lattice, seed, 0))
}

/// Empirical statistics of bridge counts over a batch of configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct CountSummary {
    pub configs: usize,
    /// Mean bridge count per edge.
    pub edge_mean: Vec<f64>,
    /// Sample variance (n − 1 denominator) of the count per edge.
    pub edge_var: Vec<f64>,
    pub total_mean: f64,
    pub total_var: f64,
    /// Fraction of all bridges that are crosses; 0 when there are none.
    pub cross_fraction: f64,
}

pub fn count_statistics(lattice: &Lattice, configs: &[BridgeConfig]) -> Result<CountSummary> {
    if configs.is_empty() {
        return Err(Error::pre("count_statistics needs a nonempty batch"));
    }
    let edges = lattice.edges().len();
    let n = configs.len() as f64;
    let mut per_edge = vec![vec![0.0f64; configs.len()]; edges];
    let mut totals = Vec::with_capacity(configs.len());
    let (mut crosses, mut all) = (0usize, 0usize);
    for (i, cfg) in configs.iter().enumerate() {
        for b in cfg.bridges() {
            per_edge[b.edge][i] += 1.0;
            all += 1;
            crosses += usize::from(b.kind == BridgeKind::Cross);
        }
        totals.push(cfg.len() as f64);
    }
    let moments = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var)
    };
    let (edge_mean, edge_var) = per_edge.iter().map(|xs| moments(xs)).unzip();
    let (total_mean, total_var) = moments(&totals);
    Ok(CountSummary {
        configs: configs.len(),
        edge_mean,
        edge_var,
        total_mean,
        total_var,
        cross_fraction: if all == 0 { 0.0 } else { crosses as f64 / all as f64 },
    })
}

impl std::fmt::Display for CountSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "configs={} total_mean={:.6} total_var={:.6} cross_fraction={:.6}",
            self.configs, self.total_mean, self.total_var, self.cross_fraction
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Lattice {
        Lattice::segment(2).unwrap()
    }

    #[test]
    fn all_crosses_when_u_is_one() {
        let l = Lattice::new_box(2, 2).unwrap();
        let p = BridgeProcess::new(2.0, 1.0, 1.0).unwrap();
        for r in 0..50 {
            assert!(p.sample(&l, 11, r).bridges().iter().all(|b| b.kind == BridgeKind::Cross));
        }
        let p = BridgeProcess::new(2.0, 0.0, 1.0).unwrap();
        assert!(p.sample(&l, 11, 3).bridges().iter().all(|b| b.kind == BridgeKind::Bar));
    }

    #[test]
    fn zero_intensity_is_empty() {
        let l = Lattice::new_box(1, 4).unwrap();
        let cfg = sample_bridges(&l, 1.0, 0.5, 0.0, 5).unwrap();
        assert!(cfg.is_empty());
        let s = count_statistics(&l, &[cfg]).unwrap();
        assert_eq!(s.total_mean, 0.0);
        assert!(s.edge_mean.iter().all(|&m| m == 0.0));
        assert_eq!(s.cross_fraction, 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let l = Lattice::new_box(2, 2).unwrap();
        let p = BridgeProcess::new(1.5, 0.3, 2.0).unwrap();
        let a = p.sample(&l, 99, 7);
        let b = p.sample(&l, 99, 7);
        assert_eq!(a.bridges(), b.bridges());
        assert_ne!(a.bridges(), p.sample(&l, 99, 8).bridges());
    }

    #[test]
    fn single_config_mean_is_its_count() {
        let l = pair();
        let cfg = BridgeConfig::new(
            &l,
            1.0,
            vec![
                Bridge { edge: 0, time: 0.2, kind: BridgeKind::Cross },
                Bridge { edge: 0, time: 0.7, kind: BridgeKind::Bar },
                Bridge { edge: 0, time: 0.5, kind: BridgeKind::Cross },
            ],
        )
        .unwrap();
        let s = count_statistics(&l, &[cfg]).unwrap();
        assert_eq!(s.total_mean, 3.0);
        assert_eq!(s.edge_var, vec![0.0]);
    }

    #[test]
    fn bridges_sorted_and_events_consistent() {
        let l = Lattice::new_box(2, 2).unwrap();
        let cfg = sample_bridges(&l, 3.0, 0.5, 1.0, 1).unwrap();
        let b = cfg.bridges();
        assert!(b.windows(2).all(|w| (w[0].edge, w[0].time) < (w[1].edge, w[1].time)));
        let mut touched = 0;
        for x in 0..l.len() {
            let ev = cfg.site_events(x);
            assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
            for e in ev {
                let br = b[e.bridge as usize];
                let (p, q) = l.edges()[br.edge];
                assert!(p == x || q == x);
                assert_eq!(br.time, e.time);
            }
            touched += ev.len();
        }
        assert_eq!(touched, 2 * b.len());
    }

    #[test]
    fn malformed_configs_rejected() {
        let l = pair();
        let dup = vec![
            Bridge { edge: 0, time: 0.5, kind: BridgeKind::Cross },
            Bridge { edge: 0, time: 0.5, kind: BridgeKind::Bar },
        ];
        assert!(matches!(BridgeConfig::new(&l, 1.0, dup), Err(Error::Malformed(_))));
        let out = vec![Bridge { edge: 0, time: 1.0, kind: BridgeKind::Cross }];
        assert!(BridgeConfig::new(&l, 1.0, out).is_err());
        let bad_edge = vec![Bridge { edge: 3, time: 0.1, kind: BridgeKind::Cross }];
        assert!(BridgeConfig::new(&l, 1.0, bad_edge).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let l = Lattice::new_box(2, 2).unwrap();
        let cfg = sample_bridges(&l, 1.0, 0.5, 1.0, 3).unwrap();
        let mut buf = Vec::new();
        cfg.write_csv(&l, &mut buf).unwrap();
        let back = BridgeConfig::read_csv(&l, buf.as_slice()).unwrap();
        assert_eq!(back.bridges(), cfg.bridges());
        assert_eq!(back.beta(), cfg.beta());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BridgeProcess::new(1.0, 1.5, 1.0).is_err());
        assert!(BridgeProcess::new(0.0, 0.5, 1.0).is_err());
        assert!(BridgeProcess::new(1.0, 0.5, -1.0).is_err());
    }
}
