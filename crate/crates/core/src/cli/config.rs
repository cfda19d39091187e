//! Run configuration: a TOML file with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::BestResponseOptions;
use crate::model::ModelParams;
use crate::population::PopulationMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub initial: Initial,
    /// Integrator step for rollouts.
    pub step: f64,
    /// Relative certification tolerance on `ΔJ / J`.
    pub tolerance: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub synthesize: SynthesizeConfig,
    pub certify: CertifyConfig,
    pub oracle: OracleConfig,
    pub reduce: ReduceConfig,
    pub popsim: PopsimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Initial {
    pub p0: f64,
    pub n0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesizeConfig {
    pub boundary_samples: usize,
    pub arc_rows: usize,
    /// Initial `x` of the exported tributaries.
    pub tributaries: Vec<f64>,
    pub tributary_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub segments: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub dp_nodes: usize,
    pub dp_controls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub nt: usize,
    pub nx: usize,
    /// Defaults to `1.05·(b/4a)·e^{aT}` when absent.
    pub x_max: Option<f64>,
    pub controls: usize,
    pub probes: Vec<f64>,
    /// Keep every `export_stride`-th node on both axes of the grid CSV.
    pub export_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceConfig {
    pub full_nt: usize,
    pub full_np: usize,
    pub full_nn: usize,
    pub full_controls: usize,
    pub reduced_nt: usize,
    pub reduced_nx: usize,
}

/// Target feeding fraction of a population run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Constant(f64),
    Field(crate::synthesis::FieldKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopsimConfig {
    pub size: usize,
    /// Interval length; defaults to `T / 10⁴`.
    pub tau: Option<f64>,
    pub mode: PopulationMode,
    pub target: Target,
    /// Number of seeds, counted up from the run seed.
    pub runs: usize,
    /// Halvings of `T/100` used by `popsim --sweep`.
    pub halvings: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::baseline(),
            initial: Initial::default(),
            step: 1e-4,
            tolerance: crate::game::CERT_TOLERANCE,
            seed: 0,
            out: PathBuf::from("out"),
            synthesize: SynthesizeConfig::default(),
            certify: CertifyConfig::default(),
            oracle: OracleConfig::default(),
            reduce: ReduceConfig::default(),
            popsim: PopsimConfig::default(),
        }
    }
}

impl Default for Initial {
    fn default() -> Self {
        Initial { p0: 0.3, n0: 1.0 }
    }
}

impl Default for SynthesizeConfig {
    fn default() -> Self {
        SynthesizeConfig {
            boundary_samples: 400,
            arc_rows: 1000,
            tributaries: vec![0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0],
            tributary_rows: 400,
        }
    }
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let o = BestResponseOptions::default();
        CertifyConfig {
            segments: o.segments,
            max_iterations: o.max_iterations,
            gradient_tolerance: o.tolerance,
            dp_nodes: o.dp_nodes,
            dp_controls: o.dp_controls,
        }
    }
}

impl CertifyConfig {
    pub fn options(&self) -> BestResponseOptions {
        BestResponseOptions {
            segments: self.segments,
            max_iterations: self.max_iterations,
            tolerance: self.gradient_tolerance,
            dp_nodes: self.dp_nodes,
            dp_controls: self.dp_controls,
        }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            nt: 2000,
            nx: 2000,
            x_max: None,
            controls: 21,
            probes: vec![0.1, 0.2, 0.3, 0.45, 0.6],
            export_stride: 10,
        }
    }
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig {
            full_nt: 400,
            full_np: 400,
            full_nn: 400,
            full_controls: 11,
            reduced_nt: 2000,
            reduced_nx: 2000,
        }
    }
}

impl Default for PopsimConfig {
    fn default() -> Self {
        PopsimConfig {
            size: 10_000,
            tau: None,
            mode: PopulationMode::RandomRedraw,
            target: Target::Field(crate::synthesis::FieldKind::Ess),
            runs: 10,
            halvings: 4,
        }
    }
}

/// Replaces the value at a dotted path, creating tables on the way. The
/// value is read as TOML and falls back to a plain string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?} descends into a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses TOML text over the defaults, applies overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let file: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut table = toml::Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut table, file);
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` if given, otherwise starts from the defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.initial.p0 >= 0.0 && self.initial.p0.is_finite()) {
            return bad("initial.p0 must be finite and nonnegative");
        }
        if !(self.initial.n0 > 0.0 && self.initial.n0.is_finite()) {
            return bad("initial.n0 must be finite and positive");
        }
        if !(self.step > 0.0 && self.step <= self.params.horizon()) {
            return bad("step must lie in (0, T]");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.certify.segments == 0 || self.certify.dp_nodes < 2 || self.certify.dp_controls < 2 {
            return bad("certify needs segments > 0, dp_nodes >= 2, dp_controls >= 2");
        }
        if self.oracle.nt == 0 || self.oracle.nx < 2 || self.oracle.controls < 11 {
            return bad("oracle needs nt > 0, nx >= 2 and at least 11 controls");
        }
        if self.popsim.size == 0 || self.popsim.runs == 0 {
            return bad("popsim needs size > 0 and runs > 0");
        }
        if let Target::Constant(u) = self.popsim.target {
            if !(0.0..=1.0).contains(&u) {
                return bad("popsim.target must be coop, ess or a number in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn popsim_tau(&self) -> f64 {
        self.popsim.tau.unwrap_or(self.params.horizon() / 1e4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        let c = RunConfig::from_toml(
            "seed = 4\n[params]\na = 1\nb = 1\nc = 2\nT = 2\n",
            &["params.T=0.5".into(), "popsim.mode=fixed-split".into(), "popsim.target=0.5".into()],
        )
        .unwrap();
        assert_eq!(c.params.horizon(), 0.5);
        assert_eq!(RunConfig::from_toml("", &["params.a=2".into()]).unwrap().params.a(), 2.0);
        assert_eq!(c.seed, 4);
        assert_eq!(c.popsim.mode, PopulationMode::FixedSplit);
        assert_eq!(c.popsim.target, Target::Constant(0.5));
        let c = RunConfig::from_toml("", &["popsim.target=coop".into()]).unwrap();
        assert_eq!(c.popsim.target, Target::Field(crate::synthesis::FieldKind::Cooperative));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::from_toml("colour = 1", &[]).is_err());
        assert!(RunConfig::from_toml("[oracle]\nnz = 1", &[]).is_err());
        assert!(RunConfig::from_toml("", &["certify.segmets=3".into()]).is_err());
        assert!(RunConfig::from_toml("[params]\na = -1\nb = 1\nc = 2\nT = 2\n", &[]).is_err());
        assert!(RunConfig::from_toml("[initial]\np0 = 0.3\nn0 = 0\n", &[]).is_err());
        assert!(RunConfig::from_toml("step = ", &[]).is_err());
        assert!(RunConfig::from_toml("", &["nokey".into()]).is_err());
        assert!(RunConfig::from_toml("", &["popsim.target=1.5".into()]).is_err());
        assert!(RunConfig::from_toml("", &["oracle.nt=x".into()]).is_err());
    }
}
