//! The self-similar backwards Ricci flow `g(τ) = τ Ψ_τ* ḡ` of a soliton.
//!
//! Points are labelled by their conical radius `x = r_c`, the asymptotic
//! radius of the gradient trajectory through them. In these labels the
//! flow point `(x, τ)` sits over the soliton point with `q = x/√τ`, and the
//! metric components solve `∂τ g = 2 Rc` with no extra diffeomorphism.
//! Time derivatives at fixed label are therefore plain finite differences
//! across snapshots.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fd;
use crate::geometry::{self, ConeDeviation, ConeSpec, CurvaturePointData, Potential, WarpedMetricField};
use crate::ode::{Dopri5, Stop};
use crate::soliton::{self, ProfilePoint, SolitonProfile};
use serde::{Deserialize, Serialize};

/// Soliton data at one point, arclength derivatives throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgPoint {
    pub q: f64,
    pub r: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
}

pub trait Background: Send + Sync {
    fn n(&self) -> usize;
    /// Aperture of the cone the flow emerges from.
    fn aperture(&self) -> f64;
    /// Range of asymptotic radii the background can evaluate.
    fn q_range(&self) -> (f64, f64);
    fn at_q(&self, q: f64) -> Result<BgPoint>;
    /// The soliton itself in arclength gauge, on its own nodes.
    fn radial_field(&self) -> WarpedMetricField;
    fn label(&self) -> String;
}

/// The Gaussian soliton on flat space.
#[derive(Debug, Clone)]
pub struct GaussianBackground {
    pub n: usize,
    pub q_max: f64,
}

impl Background for GaussianBackground {
    fn n(&self) -> usize {
        self.n
    }
    fn aperture(&self) -> f64 {
        1.0
    }
    fn q_range(&self) -> (f64, f64) {
        (0.0, self.q_max)
    }
    fn at_q(&self, q: f64) -> Result<BgPoint> {
        if !(q > 0.0 && q <= self.q_max) {
            return Err(Error::InsufficientDomain(format!("q={q} outside (0, {}]", self.q_max)));
        }
        Ok(BgPoint { q, r: q, a: q, a1: 1.0, a2: 0.0, a3: 0.0, f: q * q / 4.0, f1: q / 2.0, f2: 0.5 })
    }
    fn radial_field(&self) -> WarpedMetricField {
        let r: Vec<f64> = (1..=2000).map(|i| i as f64 * self.q_max / 2000.0).collect();
        let len = r.len();
        let potential =
            Potential { f: r.iter().map(|v| v * v / 4.0).collect(), f1: r.iter().map(|v| v / 2.0).collect(), f2: vec![0.5; len] };
        WarpedMetricField { n: self.n, a: r.clone(), r, a1: vec![1.0; len], a2: vec![0.0; len], potential: Some(potential) }
    }
    fn label(&self) -> String {
        format!("gaussian(n={})", self.n)
    }
}

/// A constructed, normalized soliton profile.
#[derive(Debug, Clone)]
pub struct ProfileBackground {
    pub profile: SolitonProfile,
}

impl ProfileBackground {
    pub fn new(profile: SolitonProfile) -> Result<Self> {
        if profile.f_const.is_none() {
            return Err(Error::MissingPotential);
        }
        Ok(ProfileBackground { profile })
    }

    fn lift(p: &ProfilePoint) -> BgPoint {
        BgPoint {
            q: p.q,
            r: p.r,
            a: p.a(),
            a1: p.a1(),
            a2: p.a2(),
            a3: p.w.sqrt() * (p.w1 + 2.0 * p.s * p.w2),
            f: p.f,
            f1: p.fr1(),
            f2: p.fr2(),
        }
    }
}

impl Background for ProfileBackground {
    fn n(&self) -> usize {
        self.profile.n
    }
    fn aperture(&self) -> f64 {
        self.profile.l_eff
    }
    fn q_range(&self) -> (f64, f64) {
        (self.profile.point(0).q, self.profile.point(self.profile.len() - 1).q)
    }
    fn at_q(&self, q: f64) -> Result<BgPoint> {
        let s = self.profile.s_at_asymptotic_radius(q)?;
        let p = self.profile.state_at(s)?;
        let mut b = Self::lift(&p);
        b.q = q;
        Ok(b)
    }
    fn radial_field(&self) -> WarpedMetricField {
        soliton::to_radial_chart(&self.profile)
    }
    fn label(&self) -> String {
        format!("soliton(n={}, alpha={}, S0={})", self.profile.n, self.profile.alpha, self.profile.s0)
    }
}

/// Smallest anchor `S0` whose profile covers asymptotic radius `q_max`.
pub fn source_s0_for(alpha: f64, q_max: f64) -> f64 {
    2.0 * alpha * q_max * q_max
}

/// Everything about `g(τ)` at one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub x: f64,
    pub tau: f64,
    pub q: f64,
    /// Arclength coordinate of `g(τ)`.
    pub rho: f64,
    /// `dρ/dx`.
    pub p: f64,
    /// `d²ρ/dx²`.
    pub px: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub h: f64,
    pub curvature: CurvaturePointData,
}

pub fn flow_point(bg: &dyn Background, x: f64, tau: f64) -> Result<FlowPoint> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Parameter(format!("tau={tau} outside (0, 1]")));
    }
    let st = tau.sqrt();
    let q = x / st;
    let b = bg.at_q(q)?;
    let p = 2.0 * b.f1 / q;
    let px = p / x * (2.0 * b.f2 - 1.0);
    let a = st * b.a;
    let a2 = b.a2 / st;
    Ok(FlowPoint {
        x,
        tau,
        q,
        rho: st * b.r,
        p,
        px,
        a,
        a1: b.a1,
        a2,
        a3: b.a3 / tau,
        f: b.f,
        f1: b.f1 / st,
        f2: b.f2 / tau,
        h: 2.0 * (tau * b.f).sqrt(),
        curvature: geometry::curvature(bg.n(), a, b.a1, a2),
    })
}

/// Uniform grid of conical radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGrid {
    pub x: Vec<f64>,
}

impl FlowGrid {
    pub fn uniform(x_min: f64, x_max: f64, count: usize) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min) || count < 9 {
            return Err(Error::Parameter(format!("bad grid [{x_min}, {x_max}] × {count}")));
        }
        let dx = (x_max - x_min) / (count - 1) as f64;
        Ok(FlowGrid { x: (0..count).map(|i| x_min + i as f64 * dx).collect() })
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Every other node, for refinement studies.
    pub fn coarsened(&self) -> Self {
        FlowGrid { x: self.x.iter().step_by(2).copied().collect() }
    }

    /// Checks that every label at every τ maps inside the background.
    pub fn check_domain(&self, bg: &dyn Background, taus: &[f64]) -> Result<()> {
        let (qlo, qhi) = bg.q_range();
        let tmin = taus.iter().copied().fold(1.0, f64::min);
        let tmax = taus.iter().copied().fold(0.0, f64::max);
        let need_lo = self.x[0] / tmax.sqrt();
        let need_hi = self.x[self.len() - 1] / tmin.sqrt();
        if need_lo < qlo {
            return Err(Error::InsufficientDomain(format!(
                "label {} at tau={tmax} needs q={need_lo:.4} below the source core q={qlo:.4}; raise x_min",
                self.x[0]
            )));
        }
        if need_hi > qhi {
            return Err(Error::InsufficientDomain(format!(
                "tau={tmin} needs the source end out to q={need_hi:.2} (S0 ≥ {:.4e}), have q={qhi:.2}",
                source_s0_for(bg.aperture(), need_hi)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSnapshot {
    pub tau: f64,
    pub n: usize,
    /// Conical radius of each column (the grid labels).
    pub r_c: Vec<f64>,
    pub q: Vec<f64>,
    /// `g(τ)` in arclength gauge with potential `f(τ)`.
    pub field: WarpedMetricField,
    pub h: Vec<f64>,
    pub p: Vec<f64>,
    pub px: Vec<f64>,
    pub a3: Vec<f64>,
    pub curvature: Vec<CurvaturePointData>,
}

impl FlowSnapshot {
    fn from_points(n: usize, tau: f64, pts: &[FlowPoint]) -> Result<Self> {
        let field = WarpedMetricField::new(
            n,
            pts.iter().map(|p| p.rho).collect(),
            pts.iter().map(|p| p.a).collect(),
            pts.iter().map(|p| p.a1).collect(),
            pts.iter().map(|p| p.a2).collect(),
            Some(Potential {
                f: pts.iter().map(|p| p.f).collect(),
                f1: pts.iter().map(|p| p.f1).collect(),
                f2: pts.iter().map(|p| p.f2).collect(),
            }),
        )?;
        Ok(FlowSnapshot {
            tau,
            n,
            r_c: pts.iter().map(|p| p.x).collect(),
            q: pts.iter().map(|p| p.q).collect(),
            field,
            h: pts.iter().map(|p| p.h).collect(),
            p: pts.iter().map(|p| p.p).collect(),
            px: pts.iter().map(|p| p.px).collect(),
            a3: pts.iter().map(|p| p.a3).collect(),
            curvature: pts.iter().map(|p| p.curvature).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.r_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_c.is_empty()
    }

    /// Arclength derivatives `(u_ρ, u_ρρ)` of samples on the label grid.
    pub fn radial_derivatives(&self, u: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
        let (ux, uxx) = fd::derivatives(&self.r_c, u, width);
        let d1: Vec<f64> = ux.iter().zip(&self.p).map(|(d, p)| d / p).collect();
        let d2: Vec<f64> = (0..self.len())
            .map(|i| {
                let p = self.p[i];
                uxx[i] / (p * p) - self.px[i] * ux[i] / (p * p * p)
            })
            .collect();
        (d1, d2)
    }
}

fn evaluate(bg: &dyn Background, x: &[f64], tau: f64, exec: Execution) -> Result<Vec<FlowPoint>> {
    exec::map(exec, x, |&x| flow_point(bg, x, tau)).into_iter().collect()
}

pub fn snapshot(bg: &dyn Background, grid: &FlowGrid, tau: f64, exec: Execution) -> Result<FlowSnapshot> {
    grid.check_domain(bg, &[tau])?;
    let pts = evaluate(bg, &grid.x, tau, exec)?;
    FlowSnapshot::from_points(bg.n(), tau, &pts)
}

/// Five flow evaluations per label around one τ, for time derivatives at
/// fixed label.
#[derive(Debug, Clone)]
pub struct TauStencil {
    pub tau: f64,
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
    /// `rows[k][i]`: label `i` at `tau + offsets[k]`.
    pub rows: Vec<Vec<FlowPoint>>,
}

impl TauStencil {
    pub fn new(bg: &dyn Background, grid: &FlowGrid, tau: f64, rel_step: f64, exec: Execution) -> Result<Self> {
        let offsets = stencil_offsets(tau, rel_step);
        let weights = fd::stencil_weights(&offsets);
        let taus: Vec<f64> = offsets.iter().map(|o| tau + o).collect();
        grid.check_domain(bg, &taus)?;
        let rows = taus.iter().map(|&t| evaluate(bg, &grid.x, t, exec)).collect::<Result<Vec<_>>>()?;
        Ok(TauStencil { tau, offsets, weights, rows })
    }

    pub fn center(&self) -> &[FlowPoint] {
        let k = self.offsets.iter().position(|o| *o == 0.0).unwrap();
        &self.rows[k]
    }

    /// `∂τ u` at fixed label for a quantity of the flow point.
    pub fn d_tau(&self, u: impl Fn(&FlowPoint) -> f64) -> Vec<f64> {
        let m = self.rows[0].len();
        (0..m).map(|i| self.weights.iter().zip(&self.rows).map(|(w, row)| w * u(&row[i])).sum()).collect()
    }
}

pub const DEFAULT_TAU_STEP: f64 = 0.02;

fn stencil_offsets(tau: f64, rel_step: f64) -> Vec<f64> {
    let d = rel_step * tau;
    if tau + 2.0 * d <= 1.0 {
        vec![-2.0 * d, -d, 0.0, d, 2.0 * d]
    } else {
        vec![-4.0 * d, -3.0 * d, -2.0 * d, -d, 0.0]
    }
}

/// Largest asymptotic radius the τ-stencils around `taus` reach on `grid`.
pub fn required_q_max(grid: &FlowGrid, taus: &[f64], rel_step: f64) -> f64 {
    let tmin = taus.iter().flat_map(|&t| stencil_offsets(t, rel_step).into_iter().map(move |o| t + o)).fold(f64::INFINITY, f64::min);
    grid.x[grid.len() - 1] / tmin.sqrt()
}

#[derive(Debug, Clone)]
pub struct SnapshotFamily {
    pub grid: FlowGrid,
    pub snapshots: Vec<FlowSnapshot>,
    pub stencils: Vec<TauStencil>,
    pub aperture: f64,
    pub source: String,
}

impl SnapshotFamily {
    pub fn build(bg: &dyn Background, grid: &FlowGrid, taus: &[f64], exec: Execution) -> Result<Self> {
        Self::build_with_step(bg, grid, taus, DEFAULT_TAU_STEP, exec)
    }

    /// As [`SnapshotFamily::build`] with a chosen relative τ-step.
    pub fn build_with_step(bg: &dyn Background, grid: &FlowGrid, taus: &[f64], rel_step: f64, exec: Execution) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::Parameter("empty tau list".into()));
        }
        let mut stencils = Vec::with_capacity(taus.len());
        let mut snapshots = Vec::with_capacity(taus.len());
        for &tau in taus {
            let st = TauStencil::new(bg, grid, tau, rel_step, exec)?;
            snapshots.push(FlowSnapshot::from_points(bg.n(), tau, st.center())?);
            stencils.push(st);
        }
        Ok(SnapshotFamily { grid: grid.clone(), snapshots, stencils, aperture: bg.aperture(), source: bg.label() })
    }

    pub fn taus(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.tau).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub r0: f64,
    pub s_samples: Vec<f64>,
    pub r_s: Vec<f64>,
    /// Set when the trajectory left the field's domain before `s_end`.
    pub exited: bool,
}

/// Cubic Hermite interpolation of `f′` using the stored `f″`.
fn hermite_f1(field: &WarpedMetricField, r: f64) -> Option<f64> {
    let p = field.potential.as_ref()?;
    let n = field.len();
    if !(r >= field.r[0] && r <= field.r[n - 1]) {
        return None;
    }
    let k = match field.r.binary_search_by(|v| v.total_cmp(&r)) {
        Ok(k) => return Some(p.f1[k]),
        Err(k) => k.clamp(1, n - 1),
    };
    let (x0, x1) = (field.r[k - 1], field.r[k]);
    let h = x1 - x0;
    let t = (r - x0) / h;
    let (y0, y1, m0, m1) = (p.f1[k - 1], p.f1[k], p.f2[k - 1] * h, p.f2[k] * h);
    let t2 = t * t;
    let t3 = t2 * t;
    Some((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1)
}

/// Integrates `dr/ds = f′(r)` from `r0`.
pub fn trajectory(field: &WarpedMetricField, r0: f64, s_end: f64, samples: usize) -> Result<TrajectoryRecord> {
    let f1 = hermite_f1(field, r0).ok_or_else(|| Error::InsufficientDomain(format!("r0={r0} outside field")))?;
    if !(f1 > 0.0) {
        return Err(Error::Parameter(format!("f′(r0) = {f1} is not positive")));
    }
    let count = samples.max(2);
    let ss: Vec<f64> = (0..count).map(|k| s_end * k as f64 / (count - 1) as f64).collect();
    if s_end == 0.0 {
        return Ok(TrajectoryRecord { r0, s_samples: vec![0.0], r_s: vec![r0], exited: false });
    }
    let solver = Dopri5::with_tol(1e-12, 1e-12);
    let run = solver.run(|_, y: &[f64; 1]| hermite_f1(field, y[0]).map(|v| [v]), 0.0, [r0], s_end, &ss, |_, _| false);
    let exited = run.stop != Stop::Completed;
    Ok(TrajectoryRecord {
        r0,
        s_samples: run.samples.iter().map(|p| p.t).collect(),
        r_s: run.samples.iter().map(|p| p.y[0]).collect(),
        exited,
    })
}

/// Smallest grid radius beyond which `|f′ − r/2| ≤ 1/2`, which is what the
/// exponential trajectory bounds need.
pub fn trajectory_threshold(field: &WarpedMetricField) -> Result<f64> {
    let p = field.potential()?;
    let mut k = field.len();
    while k > 0 && (p.f1[k - 1] - field.r[k - 1] / 2.0).abs() <= 0.5 {
        k -= 1;
    }
    if k == field.len() {
        return Err(Error::InsufficientDomain("trajectory bound fails at the grid end".into()));
    }
    Ok(field.r[k.min(field.len() - 1)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryBounds {
    pub threshold: f64,
    /// `(r0, worst lower margin, worst upper margin)`; both margins ≥ 0 when
    /// the bounds hold.
    pub rows: Vec<(f64, f64, f64)>,
    pub holds: bool,
}

/// `(r0−1)e^{s/2}+1 ≤ r_s ≤ (r0+1)e^{s/2}−1` for each starting radius.
pub fn check_trajectory_bounds(field: &WarpedMetricField, r0s: &[f64], s_end: f64) -> Result<TrajectoryBounds> {
    let threshold = trajectory_threshold(field)?;
    let mut rows = Vec::new();
    let mut holds = true;
    for &r0 in r0s {
        let rec = trajectory(field, r0, s_end, 64)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
        for (s, r) in rec.s_samples.iter().zip(&rec.r_s) {
            let e = (s / 2.0).exp();
            let scale = r.abs().max(1.0) * 1e-10;
            lo = lo.min(r - ((r0 - 1.0) * e + 1.0) + scale);
            hi = hi.min((r0 + 1.0) * e - 1.0 - r + scale);
        }
        holds &= !rec.exited && lo >= 0.0 && hi >= 0.0;
        rows.push((r0, lo, hi));
    }
    Ok(TrajectoryBounds { threshold, rows, holds })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauResiduals {
    pub tau: f64,
    /// `τ²|∇f|² − τf + τ²R`.
    pub gradient: f64,
    /// `τ Rc + τ ∇∇f − g/2`, radial and tangential.
    pub soliton: (f64, f64),
    /// `∂τ(τf) − τR` at fixed label.
    pub time_derivative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowIdentityReport {
    pub per_tau: Vec<TauResiduals>,
    pub algebraic: f64,
    pub time_derivative: f64,
}

pub fn verify_flow_identities(family: &SnapshotFamily) -> FlowIdentityReport {
    let per_tau: Vec<TauResiduals> = family
        .snapshots
        .iter()
        .zip(&family.stencils)
        .map(|(snap, st)| {
            let tau = snap.tau;
            let p = snap.field.potential.as_ref().expect("snapshots carry a potential");
            let mut gradient = 0.0f64;
            let mut sol = (0.0f64, 0.0f64);
            for i in 0..snap.len() {
                let c = &snap.curvature[i];
                gradient = gradient.max((tau * tau * p.f1[i] * p.f1[i] - tau * p.f[i] + tau * tau * c.scalar).abs());
                let (hr, hs) = geometry::hessian_of_radial(snap.field.a[i], snap.field.a1[i], p.f1[i], p.f2[i]);
                sol.0 = sol.0.max((tau * (c.rc_rad + hr) - 0.5).abs());
                sol.1 = sol.1.max((tau * (c.rc_sph + hs) - 0.5).abs());
            }
            let dt = st.d_tau(|p| p.tau * p.f);
            let time_derivative = dt.iter().zip(st.center()).fold(0.0f64, |m, (d, p)| m.max((d - p.tau * p.curvature.scalar).abs()));
            TauResiduals { tau, gradient, soliton: sol, time_derivative }
        })
        .collect();
    let algebraic = per_tau.iter().fold(0.0f64, |m, t| m.max(t.gradient).max(t.soliton.0).max(t.soliton.1));
    let time_derivative = per_tau.iter().fold(0.0f64, |m, t| m.max(t.time_derivative));
    FlowIdentityReport { per_tau, algebraic, time_derivative }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fid0Report {
    /// Smallest `N₀` with `|4τf − r_c²| ≤ N₀/r_c²` over the family.
    pub n0: f64,
    pub per_tau: Vec<(f64, f64)>,
}

pub fn verify_fid0(family: &SnapshotFamily) -> Fid0Report {
    let per_tau: Vec<(f64, f64)> = family
        .snapshots
        .iter()
        .map(|s| {
            let p = s.field.potential.as_ref().expect("snapshots carry a potential");
            let n0 = s.r_c.iter().zip(&p.f).fold(0.0f64, |m, (x, f)| m.max(x * x * (4.0 * s.tau * f - x * x).abs()));
            (s.tau, n0)
        })
        .collect();
    Fid0Report { n0: per_tau.iter().fold(0.0f64, |m, v| m.max(v.1)), per_tau }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HderReport {
    /// `|∂ρh − 2τf′/h|`.
    pub gradient: f64,
    /// `|(∂ρh)² − (1 − 4τ²R/h²)|`.
    pub gradient_sq: f64,
    /// `|hΔh − (n − 2τR − |∇h|²)|`.
    pub laplacian: f64,
    /// `|∂τh − 2τR/h|`.
    pub time_derivative: f64,
    /// `sup |1 − |∇h|²|` at the smallest τ of the family.
    pub unit_gradient_defect: f64,
}

pub fn verify_hder(family: &SnapshotFamily) -> HderReport {
    let mut rep = HderReport { gradient: 0.0, gradient_sq: 0.0, laplacian: 0.0, time_derivative: 0.0, unit_gradient_defect: 0.0 };
    let mut tmin = f64::INFINITY;
    for (snap, st) in family.snapshots.iter().zip(&family.stencils) {
        let tau = snap.tau;
        let n = snap.n as f64;
        let p = snap.field.potential.as_ref().expect("snapshots carry a potential");
        let (h1, h2) = snap.radial_derivatives(&snap.h, 7);
        let mut unit = 0.0f64;
        for i in 3..snap.len() - 3 {
            let h = snap.h[i];
            let r = snap.curvature[i].scalar;
            rep.gradient = rep.gradient.max((h1[i] - 2.0 * tau * p.f1[i] / h).abs());
            let g2 = h1[i] * h1[i];
            rep.gradient_sq = rep.gradient_sq.max((g2 - (1.0 - 4.0 * tau * tau * r / (h * h))).abs());
            let lap = geometry::laplacian_radial(snap.n, snap.field.a[i], snap.field.a1[i], h1[i], h2[i]);
            rep.laplacian = rep.laplacian.max((h * lap - (n - 2.0 * tau * r - g2)).abs());
            unit = unit.max((1.0 - g2).abs());
        }
        let dh = st.d_tau(|p| p.h);
        for (i, pt) in st.center().iter().enumerate() {
            rep.time_derivative = rep.time_derivative.max((dh[i] - 2.0 * tau * pt.curvature.scalar / pt.h).abs());
        }
        if tau < tmin {
            tmin = tau;
            rep.unit_gradient_defect = unit;
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhReport {
    pub tau_exponent: f64,
    pub tau_exponent_se: f64,
    pub rc_exponent: f64,
    pub rc_exponent_se: f64,
    /// `sup |h − r_c| r_c³ / τ²`.
    pub ck0: f64,
    pub samples: usize,
}

/// Regresses `log|h − r_c|` on `log τ` and `log r_c` jointly, using labels
/// in `[rc_lo, ∞)` whose gap stands clear of round-off.
pub fn verify_rh_comparison(family: &SnapshotFamily, rc_lo: f64) -> Result<RhReport> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut ck0 = 0.0f64;
    let (mut tlo, mut thi, mut xlo, mut xhi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for snap in &family.snapshots {
        for (x, h) in snap.r_c.iter().zip(&snap.h) {
            let gap = (h - x).abs();
            ck0 = ck0.max(gap * x.powi(3) / (snap.tau * snap.tau));
            if *x < rc_lo || gap < 1e-12 * x {
                continue;
            }
            rows.push(vec![1.0, snap.tau.ln(), x.ln()]);
            y.push(gap.ln());
            tlo = tlo.min(snap.tau);
            thi = thi.max(snap.tau);
            xlo = xlo.min(*x);
            xhi = xhi.max(*x);
        }
    }
    if rows.len() < 10 || thi / tlo < 10.0 || xhi / xlo < 10.0 {
        return Err(Error::Fit(format!(
            "need a decade in both τ and r_c: τ ∈ [{tlo}, {thi}], r_c ∈ [{xlo}, {xhi}], {} samples",
            rows.len()
        )));
    }
    let (b, se) = fd::least_squares(&rows, &y).ok_or_else(|| Error::Fit("singular regression".into()))?;
    Ok(RhReport { tau_exponent: b[1], tau_exponent_se: se[1], rc_exponent: b[2], rc_exponent_se: se[2], ck0, samples: rows.len() })
}

/// Per-column extrapolation of `h` to `τ = 0` from the three smallest
/// snapshot times, assuming `h = r + c τ² + O(τ³)`. Returns the relative
/// discrepancy from the label at each column.
pub fn richardson_rc(family: &SnapshotFamily) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..family.snapshots.len()).collect();
    order.sort_by(|&a, &b| family.snapshots[a].tau.total_cmp(&family.snapshots[b].tau));
    if order.len() < 3 {
        return Err(Error::Fit("need three snapshots to extrapolate".into()));
    }
    let picks = &order[..3];
    let m = family.grid.len();
    Ok((0..m)
        .map(|i| {
            let rows: Vec<Vec<f64>> = picks
                .iter()
                .map(|&k| {
                    let t = family.snapshots[k].tau;
                    vec![1.0, t * t, t * t * t]
                })
                .collect();
            let hs: Vec<f64> = picks.iter().map(|&k| family.snapshots[k].h[i]).collect();
            let est = solve3(&rows, &hs);
            let x = family.grid.x[i];
            (est - x).abs() / x
        })
        .collect())
}

fn solve3(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    // Cramer's rule on the 3×3 system; only the constant term is needed.
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let a = [[rows[0][0], rows[0][1], rows[0][2]], [rows[1][0], rows[1][1], rows[1][2]], [rows[2][0], rows[2][1], rows[2][2]]];
    let mut b = a;
    for k in 0..3 {
        b[k][0] = y[k];
    }
    det(b) / det(a)
}

/// `(1/2) r_c ≤ h ≤ 2 r_c` on every snapshot.
pub fn hr_bounds_hold(family: &SnapshotFamily) -> bool {
    family.snapshots.iter().all(|s| s.r_c.iter().zip(&s.h).all(|(x, h)| *h >= 0.5 * x && *h <= 2.0 * x))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureDecay {
    pub m: usize,
    pub k0: f64,
    pub per_tau: Vec<(f64, f64)>,
    /// `(max − min)/max` of the per-τ values.
    pub variation: f64,
}

/// The `m`-th derivative of curvature in arclength along each snapshot.
pub fn nabla_rm(snap: &FlowSnapshot) -> Vec<f64> {
    let kr: Vec<f64> = snap.curvature.iter().map(|c| c.k_rad).collect();
    let ks: Vec<f64> = snap.curvature.iter().map(|c| c.k_sph).collect();
    let (dkr, _) = snap.radial_derivatives(&kr, 5);
    let (dks, _) = snap.radial_derivatives(&ks, 5);
    (0..snap.len()).map(|i| geometry::nabla_rm_norm(snap.n, snap.field.a[i], snap.field.a1[i], kr[i], ks[i], dkr[i], dks[i])).collect()
}

pub fn curvature_decay(family: &SnapshotFamily, m: usize) -> Result<CurvatureDecay> {
    if m > 1 {
        return Err(Error::Parameter(format!("derivative order {m} not supported")));
    }
    let per_tau: Vec<(f64, f64)> = family
        .snapshots
        .iter()
        .map(|s| {
            let vals: Vec<f64> = if m == 0 { s.curvature.iter().map(|c| c.rm_norm).collect() } else { nabla_rm(s) };
            let lo = if m == 0 { 0 } else { 2 };
            let sup = (lo..s.len() - lo).fold(0.0f64, |acc, i| acc.max((s.r_c[i].powi(m as i32 + 2) + 1.0) * vals[i]));
            (s.tau, sup)
        })
        .collect();
    let k0 = per_tau.iter().fold(0.0f64, |a, v| a.max(v.1));
    let kmin = per_tau.iter().fold(f64::INFINITY, |a, v| a.min(v.1));
    let variation = if k0 > 0.0 { (k0 - kmin) / k0 } else { 0.0 };
    Ok(CurvatureDecay { m, k0, per_tau, variation })
}

/// Deviation of each snapshot from the limit cone on `ρ ≥ b`.
pub fn cone_deviation_sequence(family: &SnapshotFamily, b: f64) -> Result<Vec<(f64, ConeDeviation)>> {
    let n = family.snapshots[0].n;
    let cone = ConeSpec::new(n, family.aperture)?;
    family.snapshots.iter().map(|s| Ok((s.tau, geometry::cone_deviation(&s.field, &cone, b)?))).collect()
}

pub fn is_monotone_decreasing(seq: &[(f64, ConeDeviation)]) -> bool {
    let mut sorted: Vec<&(f64, ConeDeviation)> = seq.iter().collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    sorted.windows(2).all(|w| w[1].1.sup <= w[0].1.sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_flow_point_is_flat() {
        let bg = GaussianBackground { n: 4, q_max: 1e4 };
        for &tau in &[1.0, 0.3, 0.01] {
            let p = flow_point(&bg, 7.0, tau).unwrap();
            assert!((p.h - 7.0).abs() < 1e-12);
            assert!((p.rho - 7.0).abs() < 1e-12 && (p.a - 7.0).abs() < 1e-12);
            assert_eq!((p.p, p.px), (1.0, 0.0));
            assert_eq!(p.curvature.rm_norm, 0.0);
        }
    }

    #[test]
    fn gaussian_trajectory_is_exponential() {
        let field = GaussianBackground { n: 3, q_max: 200.0 }.radial_field();
        let rec = trajectory(&field, 2.0, 3.0, 7).unwrap();
        for (s, r) in rec.s_samples.iter().zip(&rec.r_s) {
            assert!((r - 2.0 * (s / 2.0).exp()).abs() < 1e-8);
        }
        let rec = trajectory(&field, 2.0, 0.0, 7).unwrap();
        assert_eq!(rec.r_s, vec![2.0]);
    }

    #[test]
    fn short_source_is_reported() {
        let bg = GaussianBackground { n: 3, q_max: 100.0 };
        let grid = FlowGrid::uniform(1.0, 50.0, 50).unwrap();
        assert!(matches!(snapshot(&bg, &grid, 0.01, Execution::Sequential), Err(Error::InsufficientDomain(_))));
    }
}
