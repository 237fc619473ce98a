//! Experiment configuration.
//!
//! The on-disk format is flat `section.key = value` lines, which is also
//! valid TOML, so parsing goes through the `toml` crate. Every key has a
//! default; the defaults reproduce the acceptance setup.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use infctl_core::{char_roots, Absorption, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub boundary: BoundarySection,
    pub grid: GridSection,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub eta: f64,
    pub rho: f64,
    pub q: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { mu: 1.0, eta: 1.0, rho: 1.0, q: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    /// Right end of the solved range; defaults to `5 b_circ`.
    pub i_max: Option<f64>,
    pub step: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection { i_max: None, step: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ni: usize,
    /// Defaults to `2 b_circ`.
    pub x_max: Option<f64>,
    /// Defaults to `2 i*`.
    pub i_max: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nx: 200, ni: 200, x_max: None, i_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// `optimal`, `null`, `immediate`, `constant` or `scaled`.
    pub policy: String,
    /// Level for `constant`; defaults to `b_circ`.
    pub barrier: Option<f64>,
    /// Factor for `scaled`.
    pub factor: Option<f64>,
    pub x0: f64,
    pub i0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// `bridge` or `grid`.
    pub absorption: String,
    /// Write every `stride`-th node.
    pub stride: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            policy: "optimal".into(),
            barrier: None,
            factor: None,
            x0: 0.5,
            i0: 0.2,
            n_paths: 10,
            dt: 1e-3,
            horizon: 12.0,
            seed: 2024,
            absorption: "bridge".into(),
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub absorption: String,
    pub probe_c: [f64; 2],
    pub probe_d1: [f64; 2],
    pub probe_d2: [f64; 2],
    pub perturbations: Vec<f64>,
    pub support_paths: usize,
    pub operator_paths: usize,
    pub negative_drift_cases: usize,
    pub smooth_fit_points: usize,
    pub residual_grid: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            n_paths: 100_000,
            dt: 1e-4,
            horizon: 12.0,
            seed: 20_240_601,
            absorption: "bridge".into(),
            probe_c: [0.5, 0.2],
            probe_d1: [1.0, 0.2],
            probe_d2: [1.0, 0.7],
            perturbations: vec![0.8, 1.2],
            support_paths: 1000,
            operator_paths: 1000,
            negative_drift_cases: 100,
            smooth_fit_points: 20,
            residual_grid: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub q_list: Vec<f64>,
    pub i_probes: Vec<f64>,
    pub x_probe: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            q_list: vec![0.5, 0.1, 0.02, 0.004],
            i_probes: vec![0.1, 0.3],
            x_probe: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

pub fn parse_absorption(s: &str) -> anyhow::Result<Absorption> {
    match s {
        "bridge" => Ok(Absorption::Bridge),
        "grid" => Ok(Absorption::Grid),
        other => bail!("unknown absorption rule {other:?} (expected \"bridge\" or \"grid\")"),
    }
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn params(&self) -> anyhow::Result<ModelParams> {
        let m = &self.model;
        Ok(ModelParams::new(m.mu, m.eta, m.rho, m.q)?)
    }

    /// `boundary.i_max`, or `5 b_circ` when unset.
    pub fn boundary_i_max(&self) -> anyhow::Result<f64> {
        if let Some(v) = self.boundary.i_max {
            return Ok(v);
        }
        let roots = char_roots(&self.params()?)?;
        match roots.b_circ {
            Some(b) => Ok(5.0 * b),
            None => bail!("the free boundary is only defined for mu > 0"),
        }
    }

    /// Flat `section.key = value` rendering; parsing it back yields `self`.
    pub fn to_flat(&self) -> anyhow::Result<String> {
        let value = toml::Value::try_from(self)?;
        let mut out = String::new();
        let toml::Value::Table(sections) = value else { unreachable!("config serializes to a table") };
        for (section, body) in &sections {
            let toml::Value::Table(keys) = body else { continue };
            for (key, v) in keys {
                writeln!(out, "{section}.{key} = {v}")?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut c = Config::default();
        c.model.q = 0.123_456_789_012_345_68;
        c.boundary.i_max = Some(3.8);
        c.verify.dt = 1e-4;
        c.sweep.q_list = vec![0.5, 1e-3];
        let text = c.to_flat().unwrap();
        assert!(text.contains("model.q = 0.12345678901234568"));
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = Config::parse("model.q = 0.25\nverify.n_paths = 500\n").unwrap();
        assert_eq!(c.model.q, 0.25);
        assert_eq!(c.verify.n_paths, 500);
        assert_eq!(c.model.mu, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_params() {
        assert!(Config::parse("model.nu = 1.0\n").is_err());
        assert!(Config::parse("model.eta = -1.0\n").is_err());
    }
}
