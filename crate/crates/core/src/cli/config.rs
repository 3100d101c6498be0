//! Experiment configuration files.
//!
//! Configs are TOML with one table per block; every key can also be
//! written flat with a dotted name (`model.L = 12`). Grids are explicit
//! lists, and a single number is accepted wherever a list is.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::dmqmc::DmqmcConfig;
use crate::error::{Error, Result};
use crate::model::{Basis, ModelParams, Observable, ObservableKind};
use crate::truncation::{SweepPoint, TruncationTarget};

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn one() -> f64 {
    1.0
}

/// Sampling basis, either fixed or chosen from `g0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisChoice {
    /// z for `g0 <= 1`, x for `g0 > 1`.
    #[default]
    Auto,
    Z,
    X,
}

impl BasisChoice {
    pub fn resolve(&self, g0: f64) -> Basis {
        match self {
            BasisChoice::Auto if g0 > 1.0 => Basis::X,
            BasisChoice::Auto => Basis::Z,
            BasisChoice::Z => Basis::Z,
            BasisChoice::X => Basis::X,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub g0: Vec<f64>,
    #[serde(default)]
    pub h0: f64,
    /// Staggered field of the initial Hamiltonian; `1/L` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_s: Option<f64>,
    #[serde(default)]
    pub basis: BasisChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchBlock {
    pub g: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    #[default]
    Ed,
    Dmqmc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmqmcBlock {
    pub n_psip: u64,
    pub n_loops: usize,
    pub delta_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population_ceiling: Option<u64>,
    pub shift_damping: f64,
}

impl Default for DmqmcBlock {
    fn default() -> Self {
        let d = DmqmcConfig::default();
        DmqmcBlock {
            n_psip: d.n_psip,
            n_loops: d.n_loops,
            delta_beta: d.delta_beta,
            population_ceiling: d.population_ceiling,
            shift_damping: d.shift_damping,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBlock {
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default)]
    pub dmqmc: DmqmcBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub t_max: f64,
    pub points: usize,
}

fn full_weight() -> TruncationTarget {
    TruncationTarget::Weight(1.0)
}

fn default_observable() -> ObservableKind {
    ObservableKind::StaggeredMagnetizationZ
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_observable")]
    pub observable: ObservableKind,
    pub model: ModelBlock,
    pub quench: QuenchBlock,
    pub thermal: ThermalBlock,
    #[serde(default = "full_weight")]
    pub truncation: TruncationTarget,
    pub time: TimeBlock,
}

/// One `(beta, g0)` point of an experiment with every default resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunPoint {
    pub beta: f64,
    pub g0: f64,
    pub basis: Basis,
    #[serde(skip)]
    pub initial: ModelParams,
    #[serde(skip)]
    pub quench: ModelParams,
}

impl RunPoint {
    /// File-name tag, e.g. `b0.5_g1`.
    pub fn tag(&self) -> String {
        format!("b{}_g{}", self.beta, self.g0)
    }
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e))?;
    toml::from_str(&text).map_err(|e| config_error(path, e))
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} = {v} is not finite")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| config_error(path, e))?)
            .map_err(|e| match e {
                Error::Config(msg) => config_error(path, msg),
                other => other,
            })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.h_s.get_or_insert(1.0 / cfg.model.l.max(1) as f64);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("model.g0", &self.model.g0)?;
        check_finite("thermal.beta", &self.thermal.beta)?;
        if let Some(b) = self.thermal.beta.iter().find(|b| **b < 0.0) {
            return Err(Error::Config(format!("thermal.beta = {b} must be non-negative")));
        }
        if self.time.points == 0 || !(self.time.t_max >= 0.0) || !self.time.t_max.is_finite() {
            return Err(Error::Config("time grid needs points >= 1 and a finite t_max >= 0".into()));
        }
        if self.thermal.source == SourceKind::Dmqmc && self.thermal.dmqmc.n_loops == 0 {
            return Err(Error::Config("thermal.dmqmc.n_loops must be at least 1".into()));
        }
        self.points().map(|_| ())
    }

    /// Every `(beta, g0)` combination, `beta` varying slowest.
    pub fn points(&self) -> Result<Vec<RunPoint>> {
        let m = &self.model;
        let mut out = Vec::new();
        for &beta in &self.thermal.beta {
            for &g0 in &m.g0 {
                let basis = m.basis.resolve(g0);
                let initial = ModelParams::new(m.l, m.j, g0, m.h0, m.h_s.unwrap_or(1.0 / m.l as f64), basis)?;
                let quench = ModelParams::new(m.l, m.j, self.quench.g, self.quench.h, 0.0, basis)?;
                out.push(RunPoint { beta, g0, basis, initial, quench });
            }
        }
        Ok(out)
    }

    pub fn observable(&self) -> Observable {
        Observable::new(self.observable, self.model.l)
    }

    pub fn times(&self) -> Vec<f64> {
        crate::series::uniform_grid(self.time.t_max, self.time.points)
    }

    pub fn dmqmc(&self) -> DmqmcConfig {
        let d = &self.thermal.dmqmc;
        DmqmcConfig {
            n_psip: d.n_psip,
            n_loops: d.n_loops,
            delta_beta: d.delta_beta,
            seed: self.seed,
            population_ceiling: d.population_ceiling,
            shift_damping: d.shift_damping,
        }
    }
}

/// Grid for the `N_w` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "L", deserialize_with = "one_or_many")]
    pub l: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub g0: Vec<f64>,
    #[serde(default = "zero_list", deserialize_with = "one_or_many")]
    pub h0: Vec<f64>,
    #[serde(default = "both_bases", deserialize_with = "one_or_many")]
    pub basis: Vec<Basis>,
}

fn zero_list() -> Vec<f64> {
    vec![0.0]
}

fn both_bases() -> Vec<Basis> {
    vec![Basis::Z, Basis::X]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub output: PathBuf,
    pub w_target: f64,
    pub grid: GridBlock,
}

impl StructureConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let cfg: StructureConfig = read_toml(path)?;
        cfg.validate().map_err(|e| config_error(path, e))?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StructureConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.w_target > 0.0 && self.w_target <= 1.0) {
            return Err(Error::Config(format!("w_target = {} must lie in (0, 1]", self.w_target)));
        }
        check_finite("grid.beta", &self.grid.beta)?;
        check_finite("grid.g0", &self.grid.g0)?;
        check_finite("grid.h0", &self.grid.h0)?;
        if self.grid.l.is_empty() || self.grid.basis.is_empty() {
            return Err(Error::Config("grid.L and grid.basis must be non-empty".into()));
        }
        for &l in &self.grid.l {
            ModelParams::initial(l, 1.0, 0.0)?;
        }
        Ok(())
    }

    /// Grid points ordered by `L`, then `beta`, `g0`, `h0`, basis.
    pub fn points(&self) -> Vec<SweepPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &l in &g.l {
            for &beta in &g.beta {
                for &g0 in &g.g0 {
                    for &h0 in &g.h0 {
                        for &basis in &g.basis {
                            out.push(SweepPoint { l, beta, g0, h0, basis });
                        }
                    }
                }
            }
        }
        out
    }
}
