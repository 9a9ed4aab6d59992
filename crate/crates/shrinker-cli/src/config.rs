//! Run configuration: one TOML file with a section per command, every key
//! optional, plus command-line overrides applied on top.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use shrinker::soliton::Anchor;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub out_dir: Option<PathBuf>,
    pub construct: ConstructConfig,
    pub flow: FlowConfig,
    pub carleman: CarlemanConfig,
    pub diff: DiffConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            out_dir: None,
            construct: ConstructConfig::default(),
            flow: FlowConfig::default(),
            carleman: CarlemanConfig::default(),
            diff: DiffConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructConfig {
    pub n: usize,
    pub alpha: f64,
    /// Fixed anchor; when absent S0 is doubled until the window converges.
    pub s0: Option<f64>,
    pub s_min: Option<f64>,
    pub tol: f64,
    pub rtol: f64,
    pub window: [f64; 2],
    pub anchor: Anchor,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            n: 3,
            alpha: 0.5,
            s0: None,
            s_min: None,
            tol: 1e-8,
            rtol: 1e-12,
            window: [100.0, 400.0],
            anchor: Anchor::Expansion,
        }
    }
}

/// Where the flow's soliton comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub n: usize,
    /// `1` selects the Gaussian soliton.
    pub alpha: f64,
    /// Profile CSV written by `construct`; overrides `n` and `alpha`.
    pub profile: Option<PathBuf>,
    pub tol: f64,
    pub rtol: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { n: 3, alpha: 0.5, profile: None, tol: 1e-8, rtol: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub taus: Vec<f64>,
    pub tau_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_min: 4.0, x_max: 150.0, points: 2921, taus: vec![1.0, 0.5, 0.2, 0.1, 0.05, 0.01], tau_step: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub source: SourceConfig,
    pub grid: GridConfig,
    pub trajectory_r0: Vec<f64>,
    pub trajectory_s: f64,
    pub cone_b: f64,
    pub rh_min_label: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            source: SourceConfig::default(),
            grid: GridConfig::default(),
            trajectory_r0: vec![5.0, 10.0, 20.0],
            trajectory_s: 2.0,
            cone_b: 10.0,
            rh_min_label: 8.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub source: SourceConfig,
    pub grid: GridConfig,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub a_values: Vec<f64>,
    pub rho_multiples: Vec<f64>,
    pub gamma: f64,
    /// Runs the Carleman inequality battery as well as the threshold scan.
    pub battery: bool,
    pub battery_tau0: f64,
    pub battery_inner: f64,
    pub battery_rho: f64,
    pub battery_x_max: f64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        CarlemanConfig {
            source: SourceConfig::default(),
            grid: GridConfig::default(),
            alphas: vec![1.0, 10.0, 100.0],
            deltas: vec![0.25, 0.5, 0.75],
            a_values: vec![0.01, 0.1],
            rho_multiples: vec![2.0, 4.0],
            gamma: 1.0 / 12.0,
            battery: false,
            battery_tau0: 0.25,
            battery_inner: 10.0,
            battery_rho: 22.0,
            battery_x_max: 400.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffConfig {
    pub n: usize,
    pub alpha: f64,
    /// Anchor of the first flow; defaults to the smallest covering the grid.
    pub s0: Option<f64>,
    /// Anchor ratio of the second flow to the first.
    pub s0_factor: f64,
    pub s_min: f64,
    pub tol: f64,
    pub rtol: f64,
    pub grid: GridConfig,
    /// Also difference against the Gaussian flow as a negative control.
    pub negative_control: bool,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            n: 3,
            alpha: 0.5,
            s0: None,
            s0_factor: 2.0,
            s_min: 2.0,
            tol: 1e-8,
            rtol: 1e-12,
            grid: GridConfig { x_min: 4.0, x_max: 50.0, points: 401, taus: vec![1.0, 0.5, 0.35, 0.25], tau_step: 0.05 },
            negative_control: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Criteria to run, 1 to 10; empty means all.
    pub criteria: Vec<u8>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_source(name: &str, s: &SourceConfig) -> CliResult<()> {
    if s.profile.is_none() {
        if s.n < 3 {
            return Err(bad(format!("{name}.n = {} must be at least 3", s.n)));
        }
        if !(s.alpha > 0.0 && s.alpha.is_finite()) {
            return Err(bad(format!("{name}.alpha = {} must be positive", s.alpha)));
        }
    }
    if !(s.tol > 0.0 && s.rtol > 0.0) {
        return Err(bad(format!("{name}: tol and rtol must be positive")));
    }
    Ok(())
}

fn check_grid(name: &str, g: &GridConfig) -> CliResult<()> {
    if !(g.x_min > 0.0 && g.x_max > g.x_min) {
        return Err(bad(format!("{name}: need 0 < x_min < x_max, got {} and {}", g.x_min, g.x_max)));
    }
    if g.points < 21 {
        return Err(bad(format!("{name}.points = {} is below 21", g.points)));
    }
    if g.taus.is_empty() || g.taus.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(bad(format!("{name}.taus must be non-empty and inside (0, 1], got {:?}", g.taus)));
    }
    if !(g.tau_step > 0.0 && g.tau_step < 0.2) {
        return Err(bad(format!("{name}.tau_step = {} must lie in (0, 0.2)", g.tau_step)));
    }
    Ok(())
}

fn positive(name: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(bad(format!("{name} must be a non-empty list of positive numbers, got {v:?}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Re-checks the physical constraints of every section.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        let c = &self.construct;
        if c.n < 3 {
            return Err(bad(format!("construct.n = {} must be at least 3", c.n)));
        }
        if !(c.alpha > 0.0 && c.alpha.is_finite()) {
            return Err(bad(format!("construct.alpha = {} must be positive", c.alpha)));
        }
        if !(c.tol > 0.0 && c.rtol > 0.0) {
            return Err(bad("construct: tol and rtol must be positive"));
        }
        if !(c.window[0] > 0.0 && c.window[1] > c.window[0]) {
            return Err(bad(format!("construct.window {:?} is empty", c.window)));
        }
        if let Some(s0) = c.s0 {
            if !(s0 > c.window[1]) {
                return Err(bad(format!("construct.s0 = {s0} must exceed the window end {}", c.window[1])));
            }
        }
        if let Some(s) = c.s_min {
            if !(s > 0.0 && s <= c.window[0]) {
                return Err(bad(format!("construct.s_min = {s} must lie in (0, window start]")));
            }
        }
        check_source("flow.source", &self.flow.source)?;
        check_grid("flow.grid", &self.flow.grid)?;
        positive("flow.trajectory_r0", &self.flow.trajectory_r0)?;
        let k = &self.carleman;
        check_source("carleman.source", &k.source)?;
        check_grid("carleman.grid", &k.grid)?;
        positive("carleman.alphas", &k.alphas)?;
        positive("carleman.a_values", &k.a_values)?;
        positive("carleman.rho_multiples", &k.rho_multiples)?;
        if k.deltas.is_empty() || k.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(bad(format!("carleman.deltas must lie in (0, 1), got {:?}", k.deltas)));
        }
        if !(k.gamma > 0.0 && k.gamma < 1.0) {
            return Err(bad(format!("carleman.gamma = {} must lie in (0, 1)", k.gamma)));
        }
        if !(k.battery_tau0 > 0.0 && k.battery_tau0 <= 0.25) {
            return Err(bad(format!("carleman.battery_tau0 = {} must lie in (0, 1/4]", k.battery_tau0)));
        }
        if !(k.battery_inner > 0.0 && k.battery_rho * 0.9 >= k.battery_inner && k.battery_x_max > 2.2 * k.battery_rho) {
            return Err(bad("carleman: need battery_inner ≤ 0.9·battery_rho and battery_x_max > 2.2·battery_rho"));
        }
        let d = &self.diff;
        if d.n < 3 || !(d.alpha > 0.0) || d.alpha == 1.0 {
            return Err(bad("diff: need n ≥ 3 and a curved soliton (alpha > 0, alpha ≠ 1)"));
        }
        if !(d.s0_factor >= 1.0) {
            return Err(bad(format!("diff.s0_factor = {} must be at least 1", d.s0_factor)));
        }
        if !(d.s_min > 0.0 && d.tol > 0.0 && d.rtol > 0.0) {
            return Err(bad("diff: s_min, tol and rtol must be positive"));
        }
        check_grid("diff.grid", &d.grid)?;
        if d.grid.taus.len() < 3 {
            return Err(bad("diff.grid.taus needs at least 3 levels"));
        }
        if self.verify.criteria.iter().any(|c| !(1..=10).contains(c)) {
            return Err(bad(format!("verify.criteria must be in 1..=10, got {:?}", self.verify.criteria)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let c = RunConfig::parse("").unwrap();
        c.validate().unwrap();
        assert_eq!(c.construct.window, [100.0, 400.0]);
        assert_eq!(c.flow.trajectory_r0, vec![5.0, 10.0, 20.0]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::parse("[construct]\nnn = 3\n").is_err());
        let c = RunConfig::parse("[construct]\nalpha = -1.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("schema_version = 7\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("[flow.grid]\ntaus = [1.0, 1.5]\n").unwrap();
        assert!(c.validate().is_err());
    }
}
