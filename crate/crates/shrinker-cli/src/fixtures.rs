//! Backgrounds and flow families built from configuration values.

use crate::config::{GridConfig, SourceConfig};
use crate::error::CliResult;
use shrinker::exec::Execution;
use shrinker::flow::{required_q_max, source_s0_for, Background, FlowGrid, GaussianBackground, ProfileBackground, SnapshotFamily};
use shrinker::soliton::{default_s_min, normalize_potential, shoot_profile, Anchor, ShootOptions, SolitonProfile};

/// Anchor margin past the largest asymptotic radius a flow needs.
pub const COVER: f64 = 1.02;

pub fn shoot_opts(rtol: f64) -> ShootOptions {
    ShootOptions { anchor: Anchor::Expansion, rtol: Some(rtol), ..Default::default() }
}

/// A normalized profile whose end reaches asymptotic radius `q_max`.
pub fn covering_profile(n: usize, alpha: f64, q_max: f64, tol: f64, rtol: f64) -> shrinker::Result<SolitonProfile> {
    let s0 = source_s0_for(alpha, COVER * q_max).max(4.0 * (n - 2) as f64 + 1.0);
    Ok(normalize_potential(&shoot_profile(n, alpha, s0, default_s_min(n), tol, &shoot_opts(rtol))?))
}

/// The Gaussian soliton when `alpha = 1`, otherwise a shot profile; or the
/// stored profile when one is named.
pub fn background(src: &SourceConfig, q_max: f64) -> CliResult<Box<dyn Background>> {
    if let Some(path) = &src.profile {
        if !path.is_file() {
            let e = std::io::Error::new(std::io::ErrorKind::NotFound, format!("profile {} not found", path.display()));
            return Err(e.into());
        }
        let p = shrinker::io::load_profile(path)?;
        return Ok(Box::new(ProfileBackground::new(p)?));
    }
    if src.alpha == 1.0 {
        return Ok(Box::new(GaussianBackground { n: src.n, q_max: 2.0 * q_max }));
    }
    Ok(Box::new(ProfileBackground::new(covering_profile(src.n, src.alpha, q_max, src.tol, src.rtol)?)?))
}

pub fn grid(g: &GridConfig) -> shrinker::Result<FlowGrid> {
    FlowGrid::uniform(g.x_min, g.x_max, g.points)
}

pub fn family(src: &SourceConfig, g: &GridConfig, exec: Execution) -> CliResult<(Box<dyn Background>, SnapshotFamily)> {
    let grid = grid(g)?;
    let bg = background(src, required_q_max(&grid, &g.taus, g.tau_step))?;
    let fam = SnapshotFamily::build_with_step(bg.as_ref(), &grid, &g.taus, g.tau_step, exec)?;
    Ok((bg, fam))
}

/// Family on `bg` directly, for callers holding a background already.
pub fn family_on(bg: &dyn Background, g: &GridConfig, exec: Execution) -> shrinker::Result<SnapshotFamily> {
    let grid = grid(g)?;
    SnapshotFamily::build_with_step(bg, &grid, &g.taus, g.tau_step, exec)
}

/// Two profiles of one cone, anchored at `s0` and `factor·s0`.
#[derive(Debug, Clone, Copy)]
pub struct PairSpec {
    pub n: usize,
    pub alpha: f64,
    /// Defaults to the smallest anchor covering the grid.
    pub s0: Option<f64>,
    pub factor: f64,
    pub s_min: f64,
    pub tol: f64,
    pub rtol: f64,
}

pub fn pair_families(spec: &PairSpec, g: &GridConfig, exec: Execution) -> shrinker::Result<(SnapshotFamily, SnapshotFamily)> {
    let grid = grid(g)?;
    let s0 = spec.s0.unwrap_or_else(|| source_s0_for(spec.alpha, COVER * required_q_max(&grid, &g.taus, g.tau_step)));
    let shoot = |s: f64| -> shrinker::Result<ProfileBackground> {
        ProfileBackground::new(normalize_potential(&shoot_profile(spec.n, spec.alpha, s, spec.s_min, spec.tol, &shoot_opts(spec.rtol))?))
    };
    let a = SnapshotFamily::build_with_step(&shoot(s0)?, &grid, &g.taus, g.tau_step, exec)?;
    let b = SnapshotFamily::build_with_step(&shoot(spec.factor * s0)?, &grid, &g.taus, g.tau_step, exec)?;
    Ok((a, b))
}
