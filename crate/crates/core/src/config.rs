//! Flat TOML run configuration.
//!
//! ```toml
//! experiment = "mc-sweep"
//! dim = 1
//! side = 6
//! two_s = 1
//! u = 1.0
//! beta = 1.0
//! h = 1.0
//! points = [[1], [2], [3]]
//! n = 100000
//! seed = 7
//! ```
//!
//! Unknown keys are rejected. Sweeps are explicit lists.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimators::{FieldDistribution, ModelParams};
use crate::lattice::Lattice;
use crate::weights::{Field, Spin};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OracleSweep,
    McSweep,
    SchwingerSweep,
    QuenchedSweep,
    FppSweep,
    DominationCheck,
    FullPipeline,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::OracleSweep => "oracle-sweep",
            ExperimentKind::McSweep => "mc-sweep",
            ExperimentKind::SchwingerSweep => "schwinger-sweep",
            ExperimentKind::QuenchedSweep => "quenched-sweep",
            ExperimentKind::FppSweep => "fpp-sweep",
            ExperimentKind::DominationCheck => "domination-check",
            ExperimentKind::FullPipeline => "full-pipeline",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldLaw {
    Constant,
    Bernoulli,
    Uniform,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FppMode {
    XiIid,
    GammaWeighted,
    GammaPoisson,
}

fn default_two_s() -> u32 {
    1
}
fn default_u() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    1.0
}
fn default_n() -> u64 {
    100_000
}
fn default_delta() -> f64 {
    0.25
}
fn default_alpha() -> f64 {
    1.0
}
fn default_phi() -> f64 {
    0.1
}

/// One experiment. Every key except `experiment` has a default or is only
/// required by the experiments that use it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,

    /// Box {−L/2, …, L/2}^dim; ignored when `sites` is set.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub side: Option<u32>,
    /// Open chain 0, …, sites−1 (origin at 0) instead of a box.
    #[serde(default)]
    pub sites: Option<usize>,

    #[serde(default = "default_two_s")]
    pub two_s: u32,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Uniform field value; overridden by `field`.
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub field: Option<Vec<f64>>,

    /// Targets x, each a coordinate vector.
    #[serde(default)]
    pub points: Vec<Vec<i32>>,
    /// Imaginary times t for Schwinger sweeps.
    #[serde(default)]
    pub times: Vec<f64>,

    #[serde(default)]
    pub field_law: Option<FieldLaw>,
    #[serde(default)]
    pub field_eps: Option<f64>,
    #[serde(default)]
    pub field_low: Option<f64>,
    #[serde(default)]
    pub field_high: Option<f64>,
    #[serde(default)]
    pub field_mean: Option<f64>,
    #[serde(default)]
    pub n_fields: Option<u64>,

    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default)]
    pub fpp_mode: Option<FppMode>,
    /// Label probability for the i.i.d. Ξ model; derived from δ, α and θ when absent.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default)]
    pub slabs: Option<usize>,
    #[serde(default)]
    pub intensity: Option<f64>,

    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        RunConfig {
            experiment,
            dim: None,
            side: None,
            sites: None,
            two_s: default_two_s(),
            u: default_u(),
            beta: default_beta(),
            h: 0.0,
            field: None,
            points: Vec::new(),
            times: Vec::new(),
            field_law: None,
            field_eps: None,
            field_low: None,
            field_high: None,
            field_mean: None,
            n_fields: None,
            delta: default_delta(),
            alpha: default_alpha(),
            phi: default_phi(),
            fpp_mode: None,
            p: None,
            radius: None,
            slabs: None,
            intensity: None,
            n: default_n(),
            seed: 0,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Parses a config for `kind`. The `experiment` key may be omitted; if
    /// present it must name `kind`.
    pub fn from_toml_for(text: &str, kind: ExperimentKind) -> Result<Self> {
        let bad = |e: toml::de::Error| Error::Config(e.to_string());
        let mut table: toml::Table = text.parse().map_err(bad)?;
        match table.get("experiment") {
            None => {
                table.insert("experiment".into(), toml::Value::String(kind.as_str().into()));
            }
            Some(v) if v.as_str() == Some(kind.as_str()) => {}
            Some(v) => {
                return Err(Error::Config(format!("config is for experiment {v}, not \"{}\"", kind.as_str())));
            }
        }
        table.try_into().map_err(bad)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn spin(&self) -> Result<Spin> {
        Spin::from_twice(self.two_s)
    }

    pub fn lattice(&self) -> Result<Lattice> {
        match (self.sites, self.dim, self.side) {
            (Some(n), _, _) => Lattice::segment(n),
            (None, Some(d), Some(l)) => Lattice::new_box(d, l),
            _ => Err(Error::Config("set either `sites` or both `dim` and `side`".into())),
        }
    }

    pub fn field_for(&self, lattice: &Lattice) -> Result<Field> {
        match &self.field {
            Some(v) => Field::new(v.clone()),
            None => Field::new(vec![self.h; lattice.len()]),
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        let lattice = self.lattice()?;
        let field = self.field_for(&lattice)?;
        ModelParams::new(lattice, self.beta, self.u, self.spin()?, field)
    }

    pub fn field_distribution(&self) -> Result<FieldDistribution> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::Config(format!("`{key}` is required for this field law")));
        let dist = match self.field_law.unwrap_or(FieldLaw::Constant) {
            FieldLaw::Constant => FieldDistribution::Constant { value: self.h },
            FieldLaw::Bernoulli => FieldDistribution::Bernoulli { eps: need(self.field_eps, "field_eps")?, alpha: self.h },
            FieldLaw::Uniform => FieldDistribution::Uniform {
                low: need(self.field_low, "field_low")?,
                high: need(self.field_high, "field_high")?,
            },
            FieldLaw::Exponential => FieldDistribution::Exponential { mean: need(self.field_mean, "field_mean")? },
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Explicit targets, or the positive half of the first axis up to L/2.
    pub fn targets(&self, lattice: &Lattice) -> Vec<Vec<i32>> {
        if !self.points.is_empty() {
            return self.points.clone();
        }
        let reach = match lattice.side() {
            Some(l) => (l / 2) as i32,
            None => lattice.len() as i32 - 1,
        };
        (1..=reach)
            .map(|r| {
                let mut x = vec![0; lattice.dim()];
                x[0] = r;
                x
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new(ExperimentKind::FppSweep);
        c.dim = Some(2);
        c.side = Some(4);
        c.points = vec![vec![2, 0], vec![2, 2]];
        c.fpp_mode = Some(FppMode::XiIid);
        c.p = Some(0.98);
        c.seed = 99;
        c.out = Some("results/fpp".into());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("experiment = \"mc-sweep\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("bogus")), "{err}");
        assert!(RunConfig::from_toml("experiment = \"nope\"\n").is_err());
        assert!(RunConfig::from_toml("experiment = \"mc-sweep\"\nn = \"many\"\n").is_err());
    }

    #[test]
    fn experiment_key_is_filled_or_checked() {
        let c = RunConfig::from_toml_for("sites = 2\n", ExperimentKind::McSweep).unwrap();
        assert_eq!(c.experiment, ExperimentKind::McSweep);
        let c = RunConfig::from_toml_for("experiment = \"fpp-sweep\"\n", ExperimentKind::FppSweep).unwrap();
        assert_eq!(c.experiment, ExperimentKind::FppSweep);
        assert!(matches!(
            RunConfig::from_toml_for("experiment = \"fpp-sweep\"\n", ExperimentKind::McSweep),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::from_toml_for("typo = 1\n", ExperimentKind::McSweep), Err(Error::Config(_))));
    }

    #[test]
    fn defaults_and_lattice() {
        let c = RunConfig::from_toml("experiment = \"oracle-sweep\"\nsites = 2\nh = 1.0\n").unwrap();
        assert_eq!(c.n, 100_000);
        let p = c.model().unwrap();
        assert_eq!(p.lattice.len(), 2);
        assert_eq!(c.targets(&p.lattice), vec![vec![1]]);
        let c = RunConfig::from_toml("experiment = \"oracle-sweep\"\n").unwrap();
        assert!(matches!(c.lattice(), Err(Error::Config(_))));
    }
}
