//! Rotationally symmetric shrinking solitons asymptotic to `dr² + α r² g_S`.
//!
//! With `s = a²` and `w(s) = (a′)²` the soliton system collapses to one
//! second-order ODE for `w`. Profiles are produced by integrating it
//! backward from a far anchor `S0`, together with four quadratures that
//! recover the potential, the arclength and the asymptotic-radius map used
//! by the flow. Every quadrature is carried relative to its leading
//! asymptotic term so that values near `S0` never cancel catastrophically.

use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::{Potential, WarpedMetricField};
use crate::ode::{Dopri5, Stop};
use serde::{Deserialize, Serialize};

/// `w″` from the master ODE.
pub fn metric_soliton_rhs(s: f64, w: f64, w1: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) || !(w > 0.0) {
        return Err(Error::Singular(format!("s={s}, w={w}")));
    }
    Ok(rhs_unchecked(s, w, w1, n))
}

#[inline]
fn rhs_unchecked(s: f64, w: f64, w1: f64, n: usize) -> f64 {
    let m = (n - 2) as f64;
    ((2.0 * s * w1 + s - 2.0 * m) * s * w1 - 2.0 * m * (1.0 - w) * w) / (4.0 * s * s * w)
}

/// `f′(s)` recovered from `w`.
pub fn potential_slope(s: f64, w: f64, w1: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) || !(w > 0.0) {
        return Err(Error::Singular(format!("s={s}, w={w}")));
    }
    Ok(slope_numerator(s, w, w1, n) / (4.0 * s * w))
}

#[inline]
fn slope_numerator(s: f64, w: f64, w1: f64, n: usize) -> f64 {
    let m = (n - 2) as f64;
    s - 2.0 * (m - s * w1 - m * w)
}

/// `f″(s)`, the s-derivative of [`potential_slope`].
pub fn potential_curvature(s: f64, w: f64, w1: f64, w2: f64, n: usize) -> f64 {
    let m = (n - 2) as f64;
    let num = slope_numerator(s, w, w1, n);
    let dnum = 1.0 + 2.0 * w1 + 2.0 * s * w2 + 2.0 * m * w1;
    let den = 4.0 * s * w;
    let dden = 4.0 * w + 4.0 * s * w1;
    (dnum * den - num * dden) / (den * den)
}

/// Scalar curvature written in the s variable.
pub fn scalar_curvature_s(s: f64, w: f64, w1: f64, n: usize) -> f64 {
    let m = (n - 1) as f64;
    m * (-2.0 * w1 + (m - 1.0) * (1.0 - w) / s)
}

/// Leading `1/s` coefficient of `w`.
pub fn expansion_c1(n: usize, alpha: f64) -> f64 {
    -2.0 * (n - 2) as f64 * alpha * (1.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// `w(S0) = α`, `w′(S0) = 0`.
    #[default]
    Cone,
    /// `w(S0) = α + c1/S0`, `w′(S0) = −c1/S0²`: starts on the two-term
    /// expansion so the profile's limit stays at α to second order.
    Expansion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootOptions {
    pub anchor: Anchor,
    /// Retained nodes per unit of `ln s`.
    pub points_per_e: f64,
    /// Integrator relative tolerance; derived from `tol` when absent.
    pub rtol: Option<f64>,
    /// Upper end of the retained grid (defaults to `S0`).
    pub s_keep: Option<f64>,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { anchor: Anchor::Cone, points_per_e: 2000.0, rtol: None, s_keep: None }
    }
}

/// Integration state: `[w, w′, ψ, ϱ, κ]` with
/// `f = s/(4L) + ψ`, `r = √(s/L) + ϱ`, `ln q = ½ ln s + κ − ½ ln L`.
type State = [f64; 5];

#[derive(Debug, Clone, Copy)]
struct System {
    n: usize,
    l: f64,
}

impl System {
    fn deriv(&self, s: f64, y: &State) -> Option<State> {
        let (w, w1) = (y[0], y[1]);
        if !(w > 0.0) || !(s > 0.0) {
            return None;
        }
        let m = (self.n - 2) as f64;
        let l = self.l;
        let w2 = rhs_unchecked(s, w, w1, self.n);
        let psi1 = (s * (l - w) - 2.0 * m * (1.0 - w) * l + 2.0 * s * w1 * l) / (4.0 * s * w * l);
        let sw = (s * w).sqrt();
        let rho1 = (l - w) / (2.0 * sw * l.sqrt() * (l.sqrt() + w.sqrt()));
        let e = -4.0 * m * (1.0 - w) + 4.0 * s * w1;
        let d = 2.0 * s + e;
        if !(d > 0.0) {
            return None;
        }
        let kappa1 = -e / (2.0 * s * d);
        Some([w1, w2, psi1, rho1, kappa1])
    }
}

/// Everything known about the profile at one value of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub s: f64,
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    /// Arclength coordinate.
    pub r: f64,
    /// Asymptotic radius `q = lim e^{-t/2} r_t` of this point under the
    /// gradient flow of `f`.
    pub q: f64,
}

impl ProfilePoint {
    pub fn a(&self) -> f64 {
        self.s.sqrt()
    }
    pub fn a1(&self) -> f64 {
        self.w.sqrt()
    }
    pub fn a2(&self) -> f64 {
        self.s.sqrt() * self.w1
    }
    /// `df/dr`.
    pub fn fr1(&self) -> f64 {
        2.0 * (self.s * self.w).sqrt() * self.f1
    }
    /// `d²f/dr²`.
    pub fn fr2(&self) -> f64 {
        2.0 * (self.w + self.s * self.w1) * self.f1 + 4.0 * self.s * self.w * self.f2
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub n: usize,
    pub alpha: f64,
    pub s0: f64,
    /// Inner end actually reached.
    pub s_min: f64,
    pub tol: f64,
    pub rtol: f64,
    pub anchor: Anchor,
    /// Limit of `w` implied by the anchor (α corrected by the `1/S0`
    /// offset of the plain anchor).
    pub l_eff: f64,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub w1: Vec<f64>,
    pub psi: Vec<f64>,
    pub rho: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Additive constant of the potential; `None` until normalized.
    pub f_const: Option<f64>,
    pub normalization_residual: Option<f64>,
    /// Reason integration stopped before the requested `s_min`.
    pub inner_stop: Option<String>,
}

impl SolitonProfile {
    fn system(&self) -> System {
        System { n: self.n, l: self.l_eff }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    fn state(&self, i: usize) -> State {
        [self.w[i], self.w1[i], self.psi[i], self.rho[i], self.kappa[i]]
    }

    fn assemble(&self, s: f64, y: &State) -> ProfilePoint {
        let (n, l) = (self.n, self.l_eff);
        let (w, w1) = (y[0], y[1]);
        let w2 = rhs_unchecked(s, w, w1, n);
        let f1 = slope_numerator(s, w, w1, n) / (4.0 * s * w);
        let f2 = potential_curvature(s, w, w1, w2, n);
        let f = s / (4.0 * l) + y[2] + self.f_const.unwrap_or(0.0);
        let r = (s / l).sqrt() + y[3];
        let q = (0.5 * s.ln() + y[4] - 0.5 * l.ln()).exp();
        ProfilePoint { s, w, w1, w2, f, f1, f2, r, q }
    }

    pub fn point(&self, i: usize) -> ProfilePoint {
        self.assemble(self.s[i], &self.state(i))
    }

    fn bracket(&self, s: f64) -> Result<usize> {
        let lo = self.s[0];
        let hi = *self.s.last().unwrap();
        if !(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)) {
            return Err(Error::InsufficientDomain(format!("s={s} outside retained grid [{lo}, {hi}]")));
        }
        Ok(match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => k.max(1),
            Err(k) => k.clamp(1, self.len() - 1),
        })
    }

    /// Profile at an arbitrary `s`: cubic Hermite interpolation of the
    /// state between the bracketing nodes, with node slopes taken from the
    /// ODE itself.
    pub fn state_at(&self, s: f64) -> Result<ProfilePoint> {
        let k = self.bracket(s)?;
        let sys = self.system();
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let (y0, y1) = (self.state(k - 1), self.state(k));
        let d0 = sys.deriv(s0, &y0).ok_or_else(|| Error::Singular(format!("node at s={s0}")))?;
        let d1 = sys.deriv(s1, &y1).ok_or_else(|| Error::Singular(format!("node at s={s1}")))?;
        let h = s1 - s0;
        let t = ((s - s0) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2);
        let mut y = [0.0; 5];
        for i in 0..5 {
            y[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
        }
        Ok(self.assemble(s, &y))
    }

    /// Profile at `s` by integrating down from the node above, the stable
    /// direction for this ODE.
    pub fn state_at_exact(&self, s: f64) -> Result<ProfilePoint> {
        let k = self.bracket(s)?;
        let sys = self.system();
        let solver = Dopri5::with_tol(self.rtol, self.rtol * 1e-3);
        let run = solver.run(|t, y| sys.deriv(t, y), self.s[k], self.state(k), s, &[], |_, _| false);
        if run.stop != Stop::Completed {
            return Err(Error::Singular(format!("re-integration to s={s} stopped: {:?}", run.stop)));
        }
        Ok(self.assemble(s, &run.y))
    }

    /// Solves `r(s) = r` on the retained grid.
    pub fn s_at_radius(&self, r: f64) -> Result<f64> {
        self.invert(r, |p| p.r, |p| 1.0 / (2.0 * (p.s * p.w).sqrt()))
    }

    /// Solves `q(s) = q` on the retained grid.
    pub fn s_at_asymptotic_radius(&self, q: f64) -> Result<f64> {
        let lq = q.ln();
        self.invert(lq, |p| p.q.ln(), |p| 1.0 / (8.0 * p.s * p.w * p.f1))
    }

    fn invert(&self, target: f64, value: impl Fn(&ProfilePoint) -> f64, slope: impl Fn(&ProfilePoint) -> f64) -> Result<f64> {
        let first = value(&self.point(0));
        let last = value(&self.point(self.len() - 1));
        if !(target >= first && target <= last) {
            return Err(Error::InsufficientDomain(format!("target {target} outside retained range [{first}, {last}]")));
        }
        let (mut lo, mut hi) = (0usize, self.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if value(&self.point(mid)) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (slo, shi) = (self.s[lo], self.s[hi]);
        let (vlo, vhi) = (value(&self.point(lo)), value(&self.point(hi)));
        let mut s = if vhi > vlo { slo + (target - vlo) * (shi - slo) / (vhi - vlo) } else { slo };
        for _ in 0..30 {
            let p = self.state_at(s.clamp(slo, shi))?;
            let step = (value(&p) - target) / slope(&p);
            let next = (s - step).clamp(slo, shi);
            if (next - s).abs() <= 1e-15 * s.abs() {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }

    /// Residual of the master ODE at the nodes (with `w″` from the model).
    pub fn ode_residual(&self) -> f64 {
        let m = (self.n - 2) as f64;
        (0..self.len())
            .map(|i| {
                let (s, w, w1) = (self.s[i], self.w[i], self.w1[i]);
                let w2 = rhs_unchecked(s, w, w1, self.n);
                (4.0 * s * s * w * w2 - (2.0 * s * w1 + s - 2.0 * m) * s * w1 + 2.0 * m * (1.0 - w) * w).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Whether `w` is monotone in the direction the aperture predicts.
    pub fn is_monotone(&self) -> bool {
        if self.alpha < 1.0 {
            self.w.windows(2).all(|p| p[1] >= p[0])
        } else if self.alpha > 1.0 {
            self.w.windows(2).all(|p| p[1] <= p[0])
        } else {
            true
        }
    }

    pub fn within_band(&self) -> bool {
        self.w.iter().all(|&w| w >= 0.5 * self.alpha && w <= 2.0 * self.alpha)
    }

    /// Signed `R + 4 s w f′² − f` at each node for the current constant,
    /// evaluated without forming the large terms `s/(4L)`.
    pub fn normalization_defect(&self) -> Vec<f64> {
        let m = (self.n - 2) as f64;
        let l = self.l_eff;
        let c = self.f_const.unwrap_or(0.0);
        (0..self.len())
            .map(|i| {
                let (s, w, w1) = (self.s[i], self.w[i], self.w1[i]);
                let e = -2.0 * m * (1.0 - w) + 2.0 * s * w1;
                let excess = (s * s * (l - w) + 2.0 * s * e * l + e * e * l) / (4.0 * s * w * l);
                scalar_curvature_s(s, w, w1, self.n) + excess - self.psi[i] - c
            })
            .collect()
    }
}

/// Backward shooting from `S0`.
pub fn shoot_profile(n: usize, alpha: f64, s0: f64, s_min: f64, tol: f64, opts: &ShootOptions) -> Result<SolitonProfile> {
    if n < 3 {
        return Err(Error::Parameter(format!("n={n} must be at least 3")));
    }
    if !(alpha > 0.0) || !(tol > 0.0) || !(s_min > 0.0) {
        return Err(Error::Parameter("alpha, tol and s_min must be positive".into()));
    }
    if !(s0 > 1.0 && s0 > s_min && s0 > 4.0 * (n - 2) as f64) {
        return Err(Error::Parameter(format!("S0={s0} must exceed max(1, s_min, 4(n-2))")));
    }
    let c1 = expansion_c1(n, alpha);
    let (y_w, y_w1, l) = match opts.anchor {
        Anchor::Cone => (alpha, 0.0, alpha - c1 / s0),
        Anchor::Expansion => (alpha + c1 / s0, -c1 / (s0 * s0), alpha),
    };
    let c1l = expansion_c1(n, l);
    let rho0 = c1l / (2.0 * l.powf(1.5) * s0.sqrt());
    let kappa0 = -((n - 2) as f64) * (1.0 - l) / s0;
    let sys = System { n, l };
    let rtol = opts.rtol.unwrap_or((tol * 1e-2).clamp(1e-13, 1e-6));
    let solver = Dopri5::with_tol(rtol, rtol * 1e-3);

    let s_keep = opts.s_keep.unwrap_or(s0).min(s0);
    let count = ((s_keep / s_min).ln() * opts.points_per_e).ceil().max(8.0) as usize;
    let mut nodes: Vec<f64> = (0..=count).map(|k| s_min * (s_keep / s_min).powf(k as f64 / count as f64)).collect();
    nodes[0] = s_min;
    if s_keep == s0 {
        nodes[count] = s0;
    }
    nodes.reverse();

    let band = (0.5 * alpha, 2.0 * alpha);
    let mut exited = None;
    let run = solver.run(
        |s, y| sys.deriv(s, y),
        s0,
        [y_w, y_w1, 0.0, rho0, kappa0],
        s_min,
        &nodes,
        |s, y| {
            if y[0] < band.0 || y[0] > band.1 {
                exited = Some(s);
                true
            } else {
                false
            }
        },
    );
    let inner_stop = match run.stop {
        Stop::Completed => None,
        Stop::Halted => Some(format!("w left the band [{}, {}] at s={:.6}", band.0, band.1, exited.unwrap_or(run.t))),
        Stop::StepUnderflow => Some(format!("step-size underflow at s={:.6}", run.t)),
        Stop::MaxSteps => Some(format!("step budget exhausted at s={:.6}", run.t)),
    };
    let mut samples = run.samples;
    samples.reverse();
    if samples.len() < 8 {
        return Err(Error::Singular(format!("integration produced only {} nodes ({})", samples.len(), inner_stop.unwrap_or_default())));
    }
    let s_min_reached = samples[0].t;
    Ok(SolitonProfile {
        n,
        alpha,
        s0,
        s_min: s_min_reached,
        tol,
        rtol,
        anchor: opts.anchor,
        l_eff: l,
        s: samples.iter().map(|p| p.t).collect(),
        w: samples.iter().map(|p| p.y[0]).collect(),
        w1: samples.iter().map(|p| p.y[1]).collect(),
        psi: samples.iter().map(|p| p.y[2]).collect(),
        rho: samples.iter().map(|p| p.y[3]).collect(),
        kappa: samples.iter().map(|p| p.y[4]).collect(),
        f_const: None,
        normalization_residual: None,
        inner_stop,
    })
}

/// Default inner cutoff: half the barrier estimate `4(n−2)`, at least 1.
pub fn default_s_min(n: usize) -> f64 {
    (2.0 * (n - 2) as f64).max(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Construction {
    pub profile: SolitonProfile,
    /// `(S0, sup-difference against the 2·S0 profile on the window)`.
    pub history: Vec<(f64, f64)>,
}

pub const MAX_DOUBLINGS: usize = 40;

/// S0-doubling until two successive profiles agree on `window` to `tol`.
pub fn construct_soliton(
    n: usize,
    alpha: f64,
    window: (f64, f64),
    tol: f64,
    s_min: Option<f64>,
    opts: &ShootOptions,
) -> Result<Construction> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("window [{lo}, {hi}] is empty")));
    }
    let s_min = s_min.unwrap_or_else(|| default_s_min(n));
    if lo < s_min {
        return Err(Error::Parameter(format!("window starts below s_min={s_min}")));
    }
    let mut s0 = (4.0 * hi).max(4.0 * (n - 2) as f64 + 1.0).max(16.0);
    let probes: Vec<f64> = (0..64).map(|k| lo * (hi / lo).powf(k as f64 / 63.0)).collect();
    let sample = |p: &SolitonProfile| -> Result<Vec<f64>> { probes.iter().map(|&s| p.state_at(s).map(|q| q.w)).collect() };
    let mut prev = shoot_profile(n, alpha, s0, s_min, tol, opts)?;
    let mut prev_w = sample(&prev)?;
    let mut history = Vec::new();
    for _ in 0..MAX_DOUBLINGS {
        let next = shoot_profile(n, alpha, 2.0 * s0, s_min, tol, opts)?;
        let next_w = sample(&next)?;
        let diff = prev_w.iter().zip(&next_w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        history.push((s0, diff));
        if diff < tol {
            return Ok(Construction { profile: next, history });
        }
        prev = next;
        prev_w = next_w;
        s0 *= 2.0;
    }
    drop(prev);
    Err(Error::Convergence { history: history.into_iter().map(|h| h.1).collect() })
}

/// Fixes the additive constant of `f` by least squares of
/// `R + 4 s w f′² − f` over the outer quarter of the grid.
pub fn normalize_potential(profile: &SolitonProfile) -> SolitonProfile {
    let mut out = profile.clone();
    out.f_const = Some(0.0);
    let defect = out.normalization_defect();
    let start = out.len() - out.len() / 4;
    let tail = &defect[start..];
    let c = tail.iter().sum::<f64>() / tail.len() as f64;
    out.f_const = Some(c);
    let resid = out.normalization_defect().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.normalization_residual = Some(resid);
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub c0: f64,
    pub c1: f64,
    pub c0_se: f64,
    pub c1_se: f64,
    pub window: (f64, f64),
    /// Decay order `p` of the remainder, `|rem| ~ s^{-p}`.
    pub residual_order: f64,
    /// Standard error of `residual_order` from the log-log regression.
    pub residual_order_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFits {
    pub w: ExpansionFit,
    pub f: ExpansionFit,
    /// Expected `1/s` coefficient `−2(n−2)α(1−α)`.
    pub c1_expected: f64,
    /// Limit of `f − s/(4L)` forced by `R + |∇f|² = f`: `c1/(4L²)`.
    pub psi_limit: f64,
}

/// Least-squares fits `w ≈ c0 + c1/s` and `f − s/(4L) ≈ c0 + c1/s` on the
/// window, plus decay orders of the remainders
/// `w − L − c1(L)/s` and `f − s/(4L) − c1(L)/(4L²)`.
pub fn fit_asymptotics(profile: &SolitonProfile, window: (f64, f64)) -> Result<AsymptoticFits> {
    if profile.f_const.is_none() {
        return Err(Error::Fit("potential not normalized".into()));
    }
    let (lo, hi) = window;
    let idx: Vec<usize> = (0..profile.len()).filter(|&i| profile.s[i] >= lo && profile.s[i] <= hi).collect();
    if idx.len() < 16 || hi / lo < 1.5 {
        return Err(Error::Fit(format!("window [{lo}, {hi}] holds only {} nodes", idx.len())));
    }
    let l = profile.l_eff;
    let c1l = expansion_c1(profile.n, l);
    let psi_limit = c1l / (4.0 * l * l);
    let pts: Vec<ProfilePoint> = idx.iter().map(|&i| profile.point(i)).collect();
    let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![1.0, 1.0 / p.s]).collect();
    let fit = |y: Vec<f64>, rem: Vec<f64>| -> Result<ExpansionFit> {
        let (b, se) = fd::least_squares(&rows, &y).ok_or_else(|| Error::Fit("ill-conditioned normal equations".into()))?;
        let xs: Vec<f64> = pts.iter().map(|p| p.s).collect();
        let (order, order_se) = if rem.iter().all(|v| v.abs() < 1e-14) {
            (f64::INFINITY, 0.0)
        } else {
            let (slope, se) = fd::loglog_slope(&xs, &rem).ok_or_else(|| Error::Fit("remainder vanishes in window".into()))?;
            (-slope, se)
        };
        Ok(ExpansionFit { c0: b[0], c1: b[1], c0_se: se[0], c1_se: se[1], window, residual_order: order, residual_order_se: order_se })
    };
    let w_fit = fit(pts.iter().map(|p| p.w).collect(), pts.iter().map(|p| p.w - l - c1l / p.s).collect())?;
    let f_fit = fit(pts.iter().map(|p| p.f - p.s / (4.0 * l)).collect(), pts.iter().map(|p| p.f - p.s / (4.0 * l) - psi_limit).collect())?;
    Ok(AsymptoticFits { w: w_fit, f: f_fit, c1_expected: expansion_c1(profile.n, profile.alpha), psi_limit })
}

/// Arclength-gauge field of the profile nodes.
pub fn to_radial_chart(profile: &SolitonProfile) -> WarpedMetricField {
    let pts: Vec<ProfilePoint> = (0..profile.len()).map(|i| profile.point(i)).collect();
    let potential = profile.f_const.map(|_| Potential {
        f: pts.iter().map(|p| p.f).collect(),
        f1: pts.iter().map(|p| p.fr1()).collect(),
        f2: pts.iter().map(|p| p.fr2()).collect(),
    });
    WarpedMetricField {
        n: profile.n,
        r: pts.iter().map(|p| p.r).collect(),
        a: pts.iter().map(|p| p.a()).collect(),
        a1: pts.iter().map(|p| p.a1()).collect(),
        a2: pts.iter().map(|p| p.a2()).collect(),
        potential,
    }
}

#[derive(Debug, Clone)]
pub struct PotentialGauge {
    /// New radial coordinate `u = 2√f` at each input node.
    pub u: Vec<f64>,
    /// `g_uu` in the new coordinate.
    pub g_uu: Vec<f64>,
    /// The field re-ingested into arclength from the `u` chart.
    pub field: WarpedMetricField,
    /// Smallest N with `N⁻¹(u−1) ≤ r ≤ N(u+1)` on the grid.
    pub comparability: f64,
}

/// Reparametrizes by `u = 2√f`, then re-ingests the `u`-chart description
/// into arclength.
pub fn gauge_by_potential(field: &WarpedMetricField) -> Result<PotentialGauge> {
    let p = field.potential()?;
    if p.f.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Gauge("f must be positive".into()));
    }
    if p.f1.iter().any(|v| !(*v > 0.0)) || p.f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Gauge("f is not monotone increasing".into()));
    }
    let u: Vec<f64> = p.f.iter().map(|f| 2.0 * f.sqrt()).collect();
    let g_uu: Vec<f64> = u.iter().zip(&p.f1).map(|(u, f1)| (u / 2.0).powi(2) / (f1 * f1)).collect();
    let back = WarpedMetricField::from_gauge(field.n, &u, &g_uu, field.a.clone(), Some(p.f.clone()), field.r[0])?;
    let mut nmax = 1.0f64;
    for (uu, rr) in u.iter().zip(&back.r) {
        if *uu > 1.0 {
            nmax = nmax.max((uu - 1.0) / rr);
        }
        nmax = nmax.max(rr / (uu + 1.0));
    }
    Ok(PotentialGauge { u, g_uu, field: back, comparability: nmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        assert_eq!(metric_soliton_rhs(7.0, 1.0, 0.0, 5).unwrap(), 0.0);
        assert!((metric_soliton_rhs(4.0, 0.5, 0.0, 3).unwrap() + 1.0 / 64.0).abs() < 1e-16);
        assert!(metric_soliton_rhs(400.0, 0.5, 0.0, 4).unwrap() < 0.0);
        assert!(metric_soliton_rhs(0.0, 0.5, 0.0, 4).is_err());
        assert!(metric_soliton_rhs(1.0, -0.5, 0.0, 4).is_err());
    }

    #[test]
    fn slope_examples() {
        for n in 3..9 {
            assert!((potential_slope(13.0, 1.0, 0.0, n).unwrap() - 0.25).abs() < 1e-16);
        }
        assert!((potential_slope(4.0, 0.5, 0.0, 3).unwrap() - 0.375).abs() < 1e-16);
        assert!((potential_slope(1e12, 0.5, 0.0, 3).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn gaussian_profile_is_flat() {
        let p = shoot_profile(3, 1.0, 100.0, 1.0, 1e-10, &ShootOptions::default()).unwrap();
        assert!(p.w.iter().all(|w| *w == 1.0));
        let p = normalize_potential(&p);
        for i in 0..p.len() {
            let pt = p.point(i);
            assert!((pt.f - pt.s / 4.0).abs() < 1e-12);
            assert!((pt.r - pt.s.sqrt()).abs() < 1e-12);
            assert!((pt.q - pt.r).abs() < 1e-12);
        }
    }
}
