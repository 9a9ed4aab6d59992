//! Carleman weights on the backwards flow and the weighted inequalities
//! they support, all in radial reduction.
//!
//! Everything here works on labels `x = r_c`. For a radial function `u` the
//! Hessian eigenvalues are `(u_ρρ, (a′/a) u_ρ)` and `Δu` is their trace.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::flow::{Background, FlowPoint, FlowSnapshot, SnapshotFamily, TauStencil};
use serde::{Deserialize, Serialize};

/// Width of the spatial difference stencils used for cross-checks.
const FD_WIDTH: usize = 7;
/// Columns dropped at each end of a snapshot for finite-difference margins.
const EDGE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaA {
    pub value: f64,
    pub derivative: f64,
    /// `−(σ/σ̇) (log σ)¨`.
    pub log_convexity: f64,
}

/// `σ_a(τ) = (τ+a) e^{−(τ+a)/3}`.
pub fn sigma_a(tau: f64, a: f64) -> SigmaA {
    let t = tau + a;
    let e = (-t / 3.0).exp();
    let value = t * e;
    let derivative = e * (1.0 - t / 3.0);
    // (log σ)′ = 1/t − 1/3 and (log σ)″ = −1/t².
    let log_convexity = value / derivative / (t * t);
    SigmaA { value, derivative, log_convexity }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G1Params {
    pub alpha: f64,
    pub tau0: f64,
    pub delta: f64,
}

impl G1Params {
    pub fn new(alpha: f64, tau0: f64, delta: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !(tau0 > 0.0 && tau0 <= 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("G1 needs α ≥ 1, τ₀ ∈ (0,1], δ ∈ (0,1); got {alpha}, {tau0}, {delta}")));
        }
        Ok(G1Params { alpha, tau0, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Params {
    pub a: f64,
    pub rho: f64,
    pub gamma: f64,
    pub n: usize,
}

impl G2Params {
    pub fn new(a: f64, rho: f64, gamma: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && a <= 0.125) || !(rho > 0.0) || !(gamma > 0.0) || n < 3 {
            return Err(Error::Parameter(format!("G2 needs a ∈ (0,1/8], ρ > 0, γ > 0, n ≥ 3; got {a}, {rho}, {gamma}, {n}")));
        }
        Ok(G2Params { a, rho, gamma, n })
    }

    /// Inner edge `γρ` of the region the G2 estimates live on.
    pub fn inner(&self) -> f64 {
        self.gamma * self.rho
    }
}

/// Pointwise data the closed forms need.
#[derive(Debug, Clone, Copy)]
struct Local {
    n: f64,
    tau: f64,
    h: f64,
    /// `|∇h|² = 1 − 4τ²R/h²`.
    gsq: f64,
    r: f64,
    rc_rad: f64,
    rc_sph: f64,
    /// `a′/a`.
    warp: f64,
}

impl Local {
    fn new(n: usize, p: &FlowPoint) -> Self {
        let r = p.curvature.scalar;
        Local {
            n: n as f64,
            tau: p.tau,
            h: p.h,
            gsq: 1.0 - 4.0 * p.tau * p.tau * r / (p.h * p.h),
            r,
            rc_rad: p.curvature.rc_rad,
            rc_sph: p.curvature.rc_sph,
            warp: p.a1 / p.a,
        }
    }
}

/// A closed-form value beside its finite-difference counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub closed: f64,
    pub fd: f64,
}

impl Pair {
    pub fn rel_error(&self) -> f64 {
        (self.closed - self.fd).abs() / self.closed.abs().max(1e-300)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightEvaluation {
    pub x: f64,
    pub tau: f64,
    /// `log G`.
    pub log_value: f64,
    pub time_derivative: Pair,
    pub grad_radial: Pair,
    pub hess_rad: Pair,
    pub hess_sph: Pair,
    /// `F₁` for the first family, `F̃₂` for the second.
    pub f: Pair,
}

fn g1_phi(l: &Local, p: &G1Params) -> f64 {
    p.alpha * (p.tau0 - l.tau) * l.h.powf(2.0 - p.delta) + l.h * l.h
}

/// `F₁ = B₀ + α B₁ + α² B₂`.
fn g1_parts(l: &Local, p: &G1Params) -> [f64; 3] {
    let (h, tau, r, d) = (l.h, l.tau, l.r, p.delta);
    let a = (2.0 - d) * (p.tau0 - tau);
    let hd = h.powf(-d);
    let b0 = (8.0 * tau + 1.0) * r - 2.0 * l.n - 4.0 * h * h * l.gsq;
    let b1 = -h * h * hd + 2.0 * a * tau * hd * r
        - a * ((l.n - d - 2.0 * tau * r) * hd + 4.0 * d * tau * tau * hd * r / (h * h))
        - 4.0 * a * h * h * hd * l.gsq;
    let b2 = -a * a * h * h * hd * hd * l.gsq;
    [b0, b1, b2]
}

fn g1_f(l: &Local, p: &G1Params) -> f64 {
    let b = g1_parts(l, p);
    b[0] + p.alpha * (b[1] + p.alpha * b[2])
}

struct G1Closed {
    phi_tau: f64,
    grad: f64,
    hess_rad: f64,
    hess_sph: f64,
}

fn g1_closed(l: &Local, p: &G1Params) -> G1Closed {
    let (h, tau, d, al) = (l.h, l.tau, p.delta, p.alpha);
    let a = (2.0 - d) * (p.tau0 - tau);
    let hd = h.powf(-d);
    G1Closed {
        phi_tau: 4.0 * tau * l.r - al * h.powf(2.0 - d) * (1.0 - 2.0 * a * tau * l.r / (h * h)),
        grad: (al * a * h * hd + 2.0 * h) * l.gsq.sqrt(),
        hess_rad: 2.0 * (1.0 - 2.0 * tau * l.rc_rad) + al * a * hd * (1.0 - 2.0 * tau * l.rc_rad - d * l.gsq),
        hess_sph: 2.0 * (1.0 - 2.0 * tau * l.rc_sph) + al * a * hd * (1.0 - 2.0 * tau * l.rc_sph),
    }
}

fn locals(n: usize, pts: &[FlowPoint]) -> Vec<Local> {
    pts.iter().map(|p| Local::new(n, p)).collect()
}

/// Radial Laplacian by differencing samples on a snapshot.
fn fd_laplacian(snap: &FlowSnapshot, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (d1, d2) = snap.radial_derivatives(u, FD_WIDTH);
    let n1 = (snap.n - 1) as f64;
    let lap = (0..u.len()).map(|i| d2[i] + n1 * snap.field.a1[i] / snap.field.a[i] * d1[i]).collect();
    (d1, d2, lap)
}

/// Closed-form and differenced G1 quantities on snapshot `k` of the family.
pub fn g1_evaluate(family: &SnapshotFamily, k: usize, params: &G1Params) -> Vec<WeightEvaluation> {
    g1_evaluate_with(&family.snapshots[k], &family.stencils[k], params)
}

fn g1_evaluate_with(snap: &FlowSnapshot, st: &TauStencil, params: &G1Params) -> Vec<WeightEvaluation> {
    let n = snap.n;
    let loc = locals(n, st.center());
    let phi: Vec<f64> = loc.iter().map(|l| g1_phi(l, params)).collect();
    let phi_tau = st.d_tau(|p| g1_phi(&Local::new(n, p), params));
    let (d1, d2, lap) = fd_laplacian(snap, &phi);
    loc.iter()
        .enumerate()
        .map(|(i, l)| {
            let c = g1_closed(l, params);
            let f_fd = phi_tau[i] - lap[i] - d1[i] * d1[i] + l.r;
            WeightEvaluation {
                x: snap.r_c[i],
                tau: l.tau,
                log_value: phi[i],
                time_derivative: Pair { closed: c.phi_tau, fd: phi_tau[i] },
                grad_radial: Pair { closed: c.grad, fd: d1[i] },
                hess_rad: Pair { closed: c.hess_rad, fd: d2[i] },
                hess_sph: Pair { closed: c.hess_sph, fd: l.warp * d1[i] },
                f: Pair { closed: g1_f(l, params), fd: f_fd },
            }
        })
        .collect()
}

/// Smallest label beyond which `ok` holds at every interior column of every
/// row. `None` when it already fails at the last column.
pub fn threshold_radius(x: &[f64], rows: &[Vec<bool>]) -> Option<f64> {
    let m = x.len();
    let mut k = m;
    while k > 0 && rows.iter().all(|r| r[k - 1]) {
        k -= 1;
    }
    if k == m {
        None
    } else {
        Some(x[k])
    }
}

/// Minimum of `values` over columns at or beyond `x0`.
fn min_beyond(x: &[f64], rows: &[Vec<f64>], x0: Option<f64>) -> f64 {
    let Some(x0) = x0 else { return f64::NAN };
    rows.iter().flat_map(|r| r.iter().zip(x).filter(|(_, xi)| **xi >= x0).map(|(v, _)| *v)).fold(f64::INFINITY, f64::min)
}

/// One inequality family over a snapshot family: its margin field (one row
/// per τ, interior columns), the threshold beyond which it is positive and
/// the worst margin found there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginField {
    pub name: String,
    pub x: Vec<f64>,
    pub taus: Vec<f64>,
    pub margins: Vec<Vec<f64>>,
    pub threshold: Option<f64>,
    pub min_margin: f64,
}

impl MarginField {
    fn new(name: &str, x: Vec<f64>, taus: Vec<f64>, margins: Vec<Vec<f64>>, floor: f64) -> Self {
        let ok: Vec<Vec<bool>> = margins.iter().map(|r| r.iter().map(|v| *v > 0.0).collect()).collect();
        let mut threshold = threshold_radius(&x, &ok);
        if let Some(t) = threshold {
            threshold = Some(t.max(floor));
        }
        let min_margin = min_beyond(&x, &margins, threshold);
        MarginField { name: name.into(), x, taus, margins, threshold, min_margin }
    }

    pub fn holds(&self) -> bool {
        self.threshold.is_some() && self.min_margin > 0.0
    }
}

fn interior_x(snap: &FlowSnapshot) -> Vec<f64> {
    snap.r_c[EDGE..snap.len() - EDGE].to_vec()
}

fn interior<T: Copy>(v: &[T]) -> Vec<T> {
    v[EDGE..v.len() - EDGE].to_vec()
}

/// Constant in the lower bound `F₁ ≥ −N(1 + h² + αh^{2−δ} + α²(τ₀−τ)²h^{2−2δ})`.
pub const F1_LOWER_N: f64 = 10.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiHessReport {
    pub params: G1Params,
    pub hess_rad: MarginField,
    pub hess_sph: MarginField,
    pub f_nonpositive: MarginField,
    pub f_lower: MarginField,
    /// Smallest `N` for the lower bound beyond the `F₁ ≤ 0` threshold.
    pub n_empirical: f64,
}

impl PhiHessReport {
    pub fn holds(&self) -> bool {
        self.hess_rad.holds() && self.hess_sph.holds() && self.f_nonpositive.holds() && self.f_lower.holds()
    }

    pub fn threshold(&self) -> Option<f64> {
        let t = [&self.hess_rad, &self.hess_sph, &self.f_nonpositive, &self.f_lower];
        t.iter().map(|m| m.threshold).try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }
}

fn f1_scale(l: &Local, p: &G1Params) -> f64 {
    let (h, d, al) = (l.h, p.delta, p.alpha);
    let s = p.tau0 - l.tau;
    1.0 + h * h + al * h.powf(2.0 - d) + al * al * s * s * h.powf(2.0 - 2.0 * d)
}

/// `∇∇φ₁ ≥ g` and `0 ≥ F₁ ≥ −N(…)` from the closed forms.
pub fn check_phihess_f(family: &SnapshotFamily, params: &G1Params) -> PhiHessReport {
    let taus = family.taus();
    let x = family.grid.x.clone();
    let n = family.snapshots[0].n;
    let mut rows = [vec![], vec![], vec![], vec![]];
    let mut ratio = vec![];
    for st in &family.stencils {
        let loc = locals(n, st.center());
        let c: Vec<G1Closed> = loc.iter().map(|l| g1_closed(l, params)).collect();
        let f: Vec<f64> = loc.iter().map(|l| g1_f(l, params)).collect();
        rows[0].push(c.iter().map(|c| c.hess_rad - 1.0).collect::<Vec<_>>());
        rows[1].push(c.iter().map(|c| c.hess_sph - 1.0).collect());
        rows[2].push(f.iter().map(|f| -f).collect());
        rows[3].push(f.iter().zip(&loc).map(|(f, l)| f + F1_LOWER_N * f1_scale(l, params)).collect());
        ratio.push(f.iter().zip(&loc).map(|(f, l)| -f / f1_scale(l, params)).collect::<Vec<f64>>());
    }
    let [r0, r1, r2, r3] = rows;
    let f_nonpositive = MarginField::new("F1 <= 0", x.clone(), taus.clone(), r2, 0.0);
    let n_empirical = match f_nonpositive.threshold {
        Some(t) => ratio.iter().flat_map(|r| r.iter().zip(&x).filter(|(_, xi)| **xi >= t).map(|(v, _)| *v)).fold(0.0f64, f64::max),
        None => f64::NAN,
    };
    PhiHessReport {
        params: *params,
        hess_rad: MarginField::new("hess_rad phi1 >= 1", x.clone(), taus.clone(), r0, 0.0),
        hess_sph: MarginField::new("hess_sph phi1 >= 1", x.clone(), taus.clone(), r1, 0.0),
        f_nonpositive,
        f_lower: MarginField::new("F1 >= -N(...)", x, taus, r3, 0.0),
        n_empirical,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackheatReport {
    pub params: G1Params,
    /// `(∂τ+Δ)F₁ − 3αh^{2−δ} − α²(τ₀−τ)h^{2−2δ}`.
    pub margin: MarginField,
    /// Largest relative gap between `(∂τ+Δ)F₁` differenced directly and
    /// assembled from the differenced `B₀, B₁, B₂`.
    pub split_gap: f64,
}

impl BackheatReport {
    pub fn holds(&self) -> bool {
        self.margin.holds()
    }
}

/// `(∂τ + Δ) u` for a closed-form quantity of flow points.
fn backheat_of(snap: &FlowSnapshot, st: &TauStencil, u: impl Fn(&FlowPoint) -> f64) -> Vec<f64> {
    let dt = st.d_tau(&u);
    let vals: Vec<f64> = st.center().iter().map(&u).collect();
    let (_, _, lap) = fd_laplacian(snap, &vals);
    dt.iter().zip(&lap).map(|(a, b)| a + b).collect()
}

pub fn check_f1_backheat(family: &SnapshotFamily, params: &G1Params) -> BackheatReport {
    let n = family.snapshots[0].n;
    let x = interior_x(&family.snapshots[0]);
    let mut margins = vec![];
    let mut split_gap = 0.0f64;
    for (snap, st) in family.snapshots.iter().zip(&family.stencils) {
        let direct = backheat_of(snap, st, |p| g1_f(&Local::new(n, p), params));
        let parts: Vec<Vec<f64>> = (0..3).map(|j| backheat_of(snap, st, |p| g1_parts(&Local::new(n, p), params)[j])).collect();
        let al = params.alpha;
        let mut row = vec![];
        for (i, p) in st.center().iter().enumerate().take(snap.len() - EDGE).skip(EDGE) {
            let split = parts[0][i] + al * parts[1][i] + al * al * parts[2][i];
            split_gap = split_gap.max((split - direct[i]).abs() / direct[i].abs().max(1.0));
            let h = p.h;
            let need = 3.0 * al * h.powf(2.0 - params.delta) + al * al * (params.tau0 - p.tau) * h.powf(2.0 - 2.0 * params.delta);
            row.push(direct[i] - need);
        }
        margins.push(row);
    }
    BackheatReport { params: *params, margin: MarginField::new("backheat F1", x, family.taus(), margins, 0.0), split_gap }
}

fn g2_log(l: &Local, p: &G2Params) -> f64 {
    let t = l.tau + p.a;
    -(l.n / 2.0) * t.ln() - (l.h - p.rho).powi(2) / (4.0 * t)
}

/// `F̃₂ = −(n−1)ρ/(2h(τ+a)) + R·H(ρ/h, τ)`.
fn g2_ftilde(l: &Local, p: &G2Params) -> f64 {
    let t = l.tau + p.a;
    let s = p.rho / l.h;
    let hh = ((p.a + s * l.tau) / t).powi(2) - 2.0 * l.tau * l.tau * s.powi(3) / (p.rho * p.rho * t);
    -(l.n - 1.0) * p.rho / (2.0 * l.h * t) + l.r * hh
}

struct G2Closed {
    phi_tau: f64,
    grad: f64,
    hess_rad: f64,
    hess_sph: f64,
}

fn g2_closed(l: &Local, p: &G2Params) -> G2Closed {
    let t = l.tau + p.a;
    let (h, rho) = (l.h, p.rho);
    let d = h - rho;
    G2Closed {
        phi_tau: d * d / (4.0 * t * t) - l.tau * l.r * d / (h * t) - l.n / (2.0 * t),
        grad: -d * l.gsq.sqrt() / (2.0 * t),
        hess_rad: -(d * (1.0 - 2.0 * l.tau * l.rc_rad - l.gsq) / h + l.gsq) / (2.0 * t),
        hess_sph: -d * (1.0 - 2.0 * l.tau * l.rc_sph) / (2.0 * h * t),
    }
}

/// Closed-form and differenced G2 quantities on snapshot `k`.
///
/// `log G₂` is an explicit function `Φ(h, τ)`, so the differenced side uses
/// differenced `h` together with the exact partials of `Φ`.
pub fn g2_evaluate(family: &SnapshotFamily, k: usize, params: &G2Params) -> Vec<WeightEvaluation> {
    g2_evaluate_with(&family.snapshots[k], &family.stencils[k], params)
}

fn g2_evaluate_with(snap: &FlowSnapshot, st: &TauStencil, params: &G2Params) -> Vec<WeightEvaluation> {
    let n = snap.n;
    let loc = locals(n, st.center());
    let h_tau = st.d_tau(|p| p.h);
    let (h1, h2, hlap) = fd_laplacian(snap, &snap.h);
    loc.iter()
        .enumerate()
        .map(|(i, l)| {
            let t = l.tau + params.a;
            let d = l.h - params.rho;
            let c = g2_closed(l, params);
            let ph = -d / (2.0 * t);
            let phh = -1.0 / (2.0 * t);
            let pt = d * d / (4.0 * t * t) - l.n / (2.0 * t);
            let gsq = h1[i] * h1[i];
            let phi_tau = pt + ph * h_tau[i];
            let lap = ph * hlap[i] + phh * gsq;
            let f_fd = phi_tau - lap - ph * ph * gsq + l.r;
            WeightEvaluation {
                x: snap.r_c[i],
                tau: l.tau,
                log_value: g2_log(l, params),
                time_derivative: Pair { closed: c.phi_tau, fd: phi_tau },
                grad_radial: Pair { closed: c.grad, fd: ph * h1[i] },
                hess_rad: Pair { closed: c.hess_rad, fd: ph * h2[i] + phh * gsq },
                hess_sph: Pair { closed: c.hess_sph, fd: ph * l.warp * h1[i] },
                f: Pair { closed: g2_ftilde(l, params), fd: f_fd },
            }
        })
        .collect()
}

/// Worst relative closed-form/differenced gap of `F` over interior columns.
pub fn max_f_error(evals: &[WeightEvaluation]) -> f64 {
    interior(evals).iter().map(|e| e.f.rel_error()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct G2BoundsReport {
    pub params: G2Params,
    /// `(τ+a)^{n/2} G₂ / Ĝ₂ ∈ [1/2, 2]`, as the smaller log-distance to an end.
    pub gghat: MarginField,
    pub ftilde_lower: MarginField,
    pub ftilde_upper: MarginField,
    pub ftilde_nonpositive: MarginField,
    pub hess_rad: MarginField,
    pub hess_sph: MarginField,
    /// `(∂τ+Δ)F̃₂ − (n−1)ρ/(2h(τ+a)²) + N/(τ+a)` with `N = n_used`.
    pub backheat: MarginField,
    /// Smallest `N` for the backheat bound on `x ≥ γρ`.
    pub n_empirical: f64,
    pub n_used: f64,
}

impl G2BoundsReport {
    pub fn fields(&self) -> [&MarginField; 7] {
        [&self.gghat, &self.ftilde_lower, &self.ftilde_upper, &self.ftilde_nonpositive, &self.hess_rad, &self.hess_sph, &self.backheat]
    }

    pub fn holds(&self) -> bool {
        self.fields().iter().all(|m| m.holds())
    }

    pub fn threshold(&self) -> Option<f64> {
        self.fields().iter().map(|m| m.threshold).try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }
}

/// Margins of the G2 bounds restricted to labels `x ≥ γρ`. The backheat
/// constant is `n_backheat` when given, otherwise twice the empirical
/// one and at least 1.
pub fn check_g2_bounds(family: &SnapshotFamily, params: &G2Params, n_backheat: Option<f64>) -> G2BoundsReport {
    let n = family.snapshots[0].n;
    let x = interior_x(&family.snapshots[0]);
    let taus = family.taus();
    let inner = params.inner();
    let mut rows: Vec<Vec<Vec<f64>>> = vec![vec![]; 7];
    let mut n_emp = 0.0f64;
    let mut heat_rows = vec![];
    let nf = (n - 1) as f64;
    for (snap, st) in family.snapshots.iter().zip(&family.stencils) {
        let heat = backheat_of(snap, st, |p| g2_ftilde(&Local::new(n, p), params));
        let mut r: Vec<Vec<f64>> = vec![vec![]; 7];
        let mut lhs = vec![];
        for (i, p) in st.center().iter().enumerate().take(snap.len() - EDGE).skip(EDGE) {
            let l = Local::new(n, p);
            let t = l.tau + params.a;
            let lead = -nf * params.rho / (2.0 * l.h * t);
            let f = g2_ftilde(&l, params);
            let c = g2_closed(&l, params);
            let xc = snap.r_c[i];
            let lr = -((l.h - params.rho).powi(2) - (xc - params.rho).powi(2)) / (4.0 * t);
            let ln2 = std::f64::consts::LN_2;
            r[0].push((ln2 - lr).min(lr + ln2));
            r[1].push(f - (lead - 1.0 / (8.0 * l.h)));
            r[2].push(lead + 1.0 / (8.0 * l.h) - f);
            r[3].push(-(lead + 1.0 / (8.0 * l.h)));
            r[4].push(c.hess_rad + 1.0 / (2.0 * t) + 1.0 / 48.0);
            r[5].push(c.hess_sph + 1.0 / (2.0 * t) + 1.0 / 48.0);
            let need = nf * params.rho / (2.0 * l.h * t * t);
            if xc >= inner {
                n_emp = n_emp.max(t * (need - heat[i]));
            }
            lhs.push((heat[i] - need, t));
        }
        for (k, v) in r.into_iter().enumerate().take(6) {
            rows[k].push(v);
        }
        heat_rows.push(lhs);
    }
    let n_used = n_backheat.unwrap_or((2.0 * n_emp).max(1.0));
    rows[6] = heat_rows.iter().map(|row| row.iter().map(|(v, t)| v + n_used / t).collect()).collect();
    let names = ["gghat", "ftilde lower", "ftilde upper", "ftilde <= 0", "hess_rad phi2", "hess_sph phi2", "backheat ftilde"];
    let mut fields: Vec<MarginField> =
        rows.into_iter().zip(names).map(|(m, name)| MarginField::new(name, x.clone(), taus.clone(), m, inner)).collect();
    let backheat = fields.pop().unwrap();
    let hess_sph = fields.pop().unwrap();
    let hess_rad = fields.pop().unwrap();
    let ftilde_nonpositive = fields.pop().unwrap();
    let ftilde_upper = fields.pop().unwrap();
    let ftilde_lower = fields.pop().unwrap();
    let gghat = fields.pop().unwrap();
    G2BoundsReport {
        params: *params,
        gghat,
        ftilde_lower,
        ftilde_upper,
        ftilde_nonpositive,
        hess_rad,
        hess_sph,
        backheat,
        n_empirical: n_emp,
        n_used,
    }
}

/// Worst interior `F₁` and `F̃₂` closed-form/differenced gaps over `taus`,
/// with the given spatial grid and relative τ-step.
pub fn weight_fd_errors(
    bg: &dyn Background,
    grid: &crate::flow::FlowGrid,
    taus: &[f64],
    rel_step: f64,
    g1: &G1Params,
    g2: &G2Params,
    exec: Execution,
) -> Result<(f64, f64)> {
    let mut e = (0.0f64, 0.0f64);
    for &tau in taus {
        let st = TauStencil::new(bg, grid, tau, rel_step, exec)?;
        let snap = crate::flow::snapshot(bg, grid, tau, exec)?;
        e.0 = e.0.max(max_f_error(&g1_evaluate_with(&snap, &st, g1)));
        e.1 = e.1.max(max_f_error(&g2_evaluate_with(&snap, &st, g2)));
    }
    Ok(e)
}

/// Area of the unit sphere `S^{n−1}`.
pub fn sphere_area(n: usize) -> f64 {
    // Γ(n/2) by the half-integer recursion.
    let mut g = if n.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while k + 0.5 < n as f64 / 2.0 {
        g *= k;
        k += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / g
}

/// Quintic smoothstep on `[0, 1]` and its derivative.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let t2 = t * t;
        (t2 * t * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - t) * (1.0 - t))
    }
}

/// Time factor of a test section: rises on `rise`, and falls back to zero
/// on `fall` when given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub rise: (f64, f64),
    pub fall: Option<(f64, f64)>,
}

impl TimeProfile {
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let (r0, r1) = self.rise;
        let (u, du) = smoothstep((tau - r0) / (r1 - r0));
        let du = du / (r1 - r0);
        match self.fall {
            None => (u, du),
            Some((f0, f1)) => {
                let (v, dv) = smoothstep((tau - f0) / (f1 - f0));
                let dv = dv / (f1 - f0);
                (u * (1.0 - v), du * (1.0 - v) - u * dv)
            }
        }
    }

    pub fn start(&self) -> f64 {
        self.rise.0
    }

    /// Last time the profile is nonzero, if it vanishes again.
    pub fn end(&self) -> Option<f64> {
        self.fall.map(|f| f.1)
    }
}

/// `(1 − t²)⁴` in `t = (2x − lo − hi)/(hi − lo)`, with two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialBump {
    pub lo: f64,
    pub hi: f64,
}

impl SpatialBump {
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let c = 2.0 / (self.hi - self.lo);
        let t = c * x - (self.lo + self.hi) / (self.hi - self.lo);
        if t.abs() >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let u = 1.0 - t * t;
        let u3 = u * u * u;
        let v = u3 * u;
        let d1 = -8.0 * t * u3;
        let d2 = -8.0 * u3 + 48.0 * t * t * u * u;
        (v, d1 * c, d2 * c * c)
    }
}

/// A separable radial test section `Z(x, τ) = β(x) η(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSection {
    pub bump: SpatialBump,
    pub profile: TimeProfile,
    pub amplitude: f64,
}

/// Values a section contributes at one flow point.
#[derive(Debug, Clone, Copy)]
struct SectionPoint {
    z: f64,
    grad: f64,
    z_tau: f64,
    lap: f64,
}

impl TestSection {
    fn at(&self, n: usize, p: &FlowPoint) -> SectionPoint {
        let (b, bx, bxx) = self.bump.eval(p.x);
        let (e, de) = self.profile.eval(p.tau);
        let (e, de) = (self.amplitude * e, self.amplitude * de);
        let (zx, zxx) = (bx * e, bxx * e);
        let grad = zx / p.p;
        let zrr = zxx / (p.p * p.p) - p.px * zx / (p.p * p.p * p.p);
        SectionPoint { z: b * e, grad, z_tau: b * de, lap: zrr + (n - 1) as f64 * p.a1 / p.a * grad }
    }

    fn check_support(&self, inner: f64, tau0: f64, vanish_before_end: bool) -> Result<()> {
        if self.bump.lo < inner {
            return Err(Error::Support(format!("bump starts at {} inside the admissible radius {inner}", self.bump.lo)));
        }
        if !(self.profile.start() > 0.0) {
            return Err(Error::Support("time profile must vanish near τ = 0".into()));
        }
        if vanish_before_end && !matches!(self.profile.end(), Some(e) if e < tau0) {
            return Err(Error::Support(format!("time profile must vanish before τ₀ = {tau0}")));
        }
        if self.profile.rise.1 > tau0 {
            return Err(Error::Support(format!("time profile rises past τ₀ = {tau0}")));
        }
        Ok(())
    }
}

/// Nodes on `[lo, hi]`: `uniform` equispaced ones plus geometric clusters
/// (`per_decade` per decade down to `min_frac` of the width) at the chosen ends.
pub fn graded_nodes(lo: f64, hi: f64, uniform: usize, per_decade: usize, min_frac: f64, at_lo: bool, at_hi: bool) -> Vec<f64> {
    let w = hi - lo;
    let mut v: Vec<f64> = (0..uniform).map(|i| lo + w * i as f64 / (uniform - 1) as f64).collect();
    let decades = -min_frac.log10();
    let count = (decades * per_decade as f64).ceil() as usize;
    for k in 1..=count {
        let f = 10f64.powf(-(k as f64) / per_decade as f64);
        if at_lo {
            v.push(lo + w * f);
        }
        if at_hi {
            v.push(hi - w * f);
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * w);
    v
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|i| {
            let l = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let r = if i + 1 < m { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (l + r)
        })
        .collect()
}

/// Accumulates `log Σ w e^{l}` without overflow.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    acc: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, acc: 0.0 }
    }

    fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            self.acc = self.acc * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.acc += (l - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Flow points on a tensor grid covering a section's support, with
/// trapezoid weights. `pts[j][i]` sits at `(x[i], tau[j])`.
#[derive(Debug, Clone)]
pub struct SpaceTimeSlab {
    pub n: usize,
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    pub pts: Vec<Vec<FlowPoint>>,
}

/// Node counts for a slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabResolution {
    pub uniform: usize,
    pub per_decade: usize,
    pub min_frac: f64,
}

impl Default for SlabResolution {
    fn default() -> Self {
        SlabResolution { uniform: 161, per_decade: 20, min_frac: 1e-7 }
    }
}

impl SpaceTimeSlab {
    /// Samples the support of `section` on `[start, tau0]`.
    pub fn for_section(bg: &dyn Background, section: &TestSection, tau0: f64, res: SlabResolution, exec: Execution) -> Result<Self> {
        let b = section.bump;
        let x = graded_nodes(b.lo, b.hi, res.uniform, res.per_decade, res.min_frac, true, true);
        let t0 = section.profile.start();
        let mut tau = graded_nodes(t0, tau0, res.uniform, res.per_decade, res.min_frac, true, false);
        if let Some(e) = section.profile.end() {
            tau.retain(|t| *t <= e);
            tau.push(e);
            tau.dedup();
        }
        let pts = tau
            .iter()
            .map(|&t| exec::map(exec, &x, |&xi| crate::flow::flow_point(bg, xi, t)).into_iter().collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(SpaceTimeSlab { n: bg.n(), x, tau, pts })
    }

    /// Every other node in both directions, ends kept.
    pub fn coarsened(&self) -> Self {
        let pick = |m: usize| -> Vec<usize> {
            let mut v: Vec<usize> = (0..m).step_by(2).collect();
            if *v.last().unwrap() != m - 1 {
                v.push(m - 1);
            }
            v
        };
        let ix = pick(self.x.len());
        let it = pick(self.tau.len());
        SpaceTimeSlab {
            n: self.n,
            x: ix.iter().map(|&i| self.x[i]).collect(),
            tau: it.iter().map(|&j| self.tau[j]).collect(),
            pts: it.iter().map(|&j| ix.iter().map(|&i| self.pts[j][i]).collect()).collect(),
        }
    }

    /// `log ∫∫ |q|² e^{w} dμ dτ` for `q, w` given per point.
    fn log_integral(&self, f: impl Fn(&FlowPoint) -> (f64, f64)) -> f64 {
        let wx = trapezoid_weights(&self.x);
        let wt = trapezoid_weights(&self.tau);
        let area = sphere_area(self.n).ln();
        let mut s = LogSum::new();
        for (row, w_t) in self.pts.iter().zip(&wt) {
            for ((p, w_x), _) in row.iter().zip(&wx).zip(&self.x) {
                let (q, w) = f(p);
                if q == 0.0 || *w_t == 0.0 || *w_x == 0.0 {
                    continue;
                }
                let vol = area + (self.n - 1) as f64 * p.a.ln() + p.p.ln();
                s.add(2.0 * q.abs().ln() + w + vol + w_t.ln() + w_x.ln());
            }
        }
        s.value()
    }

    /// `log ∫ |q|² e^{w} dμ` on the last τ level.
    fn log_terminal(&self, f: impl Fn(&FlowPoint) -> (f64, f64)) -> f64 {
        let wx = trapezoid_weights(&self.x);
        let area = sphere_area(self.n).ln();
        let mut s = LogSum::new();
        for (p, w_x) in self.pts.last().unwrap().iter().zip(&wx) {
            let (q, w) = f(p);
            if q == 0.0 || *w_x == 0.0 {
                continue;
            }
            let vol = area + (self.n - 1) as f64 * p.a.ln() + p.p.ln();
            s.add(2.0 * q.abs().ln() + w + vol + w_x.ln());
        }
        s.value()
    }

    fn sup(&self, f: impl Fn(&FlowPoint) -> f64) -> f64 {
        self.pts.iter().flatten().map(|p| f(p).abs()).fold(0.0, f64::max)
    }
}

/// Both sides of one weighted inequality, in logarithms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub alpha: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `log_rhs − log_lhs`; the inequality holds when it is ≥ 0.
    pub margin: f64,
    /// Named logarithms of the individual norms.
    pub terms: Vec<(String, f64)>,
}

impl InequalityReport {
    fn new(name: &str, alpha: f64, log_lhs: f64, log_rhs: f64, terms: Vec<(String, f64)>) -> Self {
        let margin = if log_lhs == f64::NEG_INFINITY && log_rhs == f64::NEG_INFINITY { 0.0 } else { log_rhs - log_lhs };
        InequalityReport { name: name.into(), alpha, log_lhs, log_rhs, margin, terms }
    }

    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }
}

fn g1_log_weight(n: usize, p: &FlowPoint, params: &G1Params) -> f64 {
    g1_phi(&Local::new(n, p), params)
}

/// First inequality for the growing weight: `α‖ZG₁^{½}‖² + ‖∇Z G₁^{½}‖² ≤
/// ½‖(∂τ+Δ)Z G₁^{½}‖² + ‖∇Z G₁^{½}‖²` on the terminal slice, squared norms.
pub fn carleman_pde_test(slab: &SpaceTimeSlab, section: &TestSection, params: &G1Params, inner: f64) -> Result<InequalityReport> {
    section.check_support(inner, params.tau0, false)?;
    check_slab_end(slab, params.tau0)?;
    let n = slab.n;
    let lz = slab.log_integral(|p| (section.at(n, p).z, g1_log_weight(n, p, params)));
    let lg = slab.log_integral(|p| (section.at(n, p).grad, g1_log_weight(n, p, params)));
    let lh = slab.log_integral(|p| {
        let s = section.at(n, p);
        (s.z_tau + s.lap, g1_log_weight(n, p, params))
    });
    let lt = slab.log_terminal(|p| (section.at(n, p).grad, g1_log_weight(n, p, params)));
    let lhs = log_add(params.alpha.ln() + lz, lg);
    let rhs = log_add(0.5f64.ln() + lh, lt);
    Ok(InequalityReport::new(
        "G1 pde",
        params.alpha,
        lhs,
        rhs,
        vec![("Z".into(), lz), ("grad Z".into(), lg), ("heat Z".into(), lh), ("terminal grad Z".into(), lt)],
    ))
}

/// `α‖ZG₁^{½}‖² ≤ 2‖∂τZ G₁^{½}‖²`.
pub fn carleman_ode_test(slab: &SpaceTimeSlab, section: &TestSection, params: &G1Params, inner: f64) -> Result<InequalityReport> {
    section.check_support(inner, params.tau0, false)?;
    check_slab_end(slab, params.tau0)?;
    let n = slab.n;
    let lz = slab.log_integral(|p| (section.at(n, p).z, g1_log_weight(n, p, params)));
    let lt = slab.log_integral(|p| (section.at(n, p).z_tau, g1_log_weight(n, p, params)));
    Ok(InequalityReport::new("G1 ode", params.alpha, params.alpha.ln() + lz, 2f64.ln() + lt, vec![("Z".into(), lz), ("dtau Z".into(), lt)]))
}

fn check_slab_end(slab: &SpaceTimeSlab, tau0: f64) -> Result<()> {
    let end = *slab.tau.last().unwrap();
    if end > tau0 * (1.0 + 1e-12) {
        return Err(Error::Support(format!("slab reaches τ = {end} past τ₀ = {tau0}")));
    }
    Ok(())
}

/// `−2α log σ_a + log Ĝ₂` with an optional extra power of `σ_a⁻¹`.
fn g2_hat_log_weight(p: &FlowPoint, g2: &G2Params, alpha: f64, extra: f64) -> f64 {
    let t = p.tau + g2.a;
    let s = sigma_a(p.tau, g2.a).value.ln();
    -(2.0 * alpha + extra) * s - (p.x - g2.rho).powi(2) / (4.0 * t)
}

/// Constant pinned in the decay estimates' right-hand sides.
pub const DECAY_CONSTANT: f64 = 1.0;

/// `√α‖σ_a^{−α−½}ZĜ₂^{½}‖ + ‖σ_a^{−α}∇ZĜ₂^{½}‖ ≤ C‖σ_a^{−α}(∂τ+Δ)ZĜ₂^{½}‖`,
/// with `C = DECAY_CONSTANT`. The empirical constant is the `C` term.
pub fn carleman_decay_pde_test(
    slab: &SpaceTimeSlab,
    section: &TestSection,
    g2: &G2Params,
    alpha: f64,
    tau0: f64,
    inner: f64,
) -> Result<InequalityReport> {
    section.check_support(inner.max(g2.inner()), tau0, true)?;
    let n = slab.n;
    let lz = slab.log_integral(|p| (section.at(n, p).z, g2_hat_log_weight(p, g2, alpha, 1.0)));
    let lg = slab.log_integral(|p| (section.at(n, p).grad, g2_hat_log_weight(p, g2, alpha, 0.0)));
    let lh = slab.log_integral(|p| {
        let s = section.at(n, p);
        (s.z_tau + s.lap, g2_hat_log_weight(p, g2, alpha, 0.0))
    });
    let lhs = log_add(0.5 * alpha.ln() + 0.5 * lz, 0.5 * lg);
    let rhs = DECAY_CONSTANT.ln() + 0.5 * lh;
    let mut rep = InequalityReport::new(
        "G2 pde",
        alpha,
        lhs,
        rhs,
        vec![("Z".into(), 0.5 * lz), ("grad Z".into(), 0.5 * lg), ("heat Z".into(), 0.5 * lh)],
    );
    rep.terms.push(("C".into(), lhs - 0.5 * lh));
    Ok(rep)
}

/// `‖σ_a^{−α−½}ZĜ₂^{½}‖ ≤ Nα⁻¹‖σ_a^{−α}∂τZĜ₂^{½}‖ + N a^{−½}(ρ+√α)^{n/2}(ae^{1/8})^{−α}‖Z‖_∞`
/// with `N = DECAY_CONSTANT`. Terms carry the empirical `N` and the log
/// ratio of the remainder to the first term.
pub fn carleman_decay_ode_test(
    slab: &SpaceTimeSlab,
    section: &TestSection,
    g2: &G2Params,
    alpha: f64,
    tau0: f64,
    inner: f64,
) -> Result<InequalityReport> {
    if tau0 > 0.25 || g2.a > 0.125 {
        return Err(Error::Parameter(format!("needs τ₀ ≤ 1/4 and a ≤ 1/8, got {tau0}, {}", g2.a)));
    }
    section.check_support(inner.max(g2.inner()), tau0, true)?;
    let n = slab.n;
    let lz = 0.5 * slab.log_integral(|p| (section.at(n, p).z, g2_hat_log_weight(p, g2, alpha, 1.0)));
    let lt = 0.5 * slab.log_integral(|p| (section.at(n, p).z_tau, g2_hat_log_weight(p, g2, alpha, 0.0)));
    let zmax = slab.sup(|p| section.at(n, p).z);
    let first = lt - alpha.ln();
    let rem = -0.5 * g2.a.ln() + 0.5 * n as f64 * (g2.rho + alpha.sqrt()).ln() - alpha * (g2.a.ln() + 0.125) + zmax.ln();
    let bound = log_add(first, rem);
    let mut rep = InequalityReport::new(
        "G2 ode",
        alpha,
        lz,
        DECAY_CONSTANT.ln() + bound,
        vec![("Z".into(), lz), ("first".into(), first), ("remainder".into(), rem)],
    );
    rep.terms.push(("N".into(), lz - bound));
    rep.terms.push(("remainder/first".into(), rem - first));
    Ok(rep)
}

impl InequalityReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

/// Time profiles of the standard battery as fractions of `τ₀`. With
/// `vanish` every profile returns to zero before `τ₀`.
fn battery_profiles(tau0: f64, vanish: bool) -> Vec<TimeProfile> {
    let raw: [((f64, f64), Option<(f64, f64)>); 4] = [
        ((0.1, 0.4), if vanish { Some((0.6, 0.9)) } else { None }),
        ((0.05, 0.25), Some((0.5, 0.9))),
        ((0.2, 0.6), Some((0.6, 0.95))),
        ((0.3, 0.5), if vanish { Some((0.7, 0.95)) } else { None }),
    ];
    raw.iter().map(|(r, f)| TimeProfile { rise: (r.0 * tau0, r.1 * tau0), fall: f.map(|f| (f.0 * tau0, f.1 * tau0)) }).collect()
}

fn battery(supports: &[(f64, f64)], scale: f64, tau0: f64, vanish: bool) -> Vec<TestSection> {
    let mut out = Vec::with_capacity(supports.len() * 4);
    for &(lo, hi) in supports {
        for profile in battery_profiles(tau0, vanish) {
            out.push(TestSection { bump: SpatialBump { lo: scale * lo, hi: scale * hi }, profile, amplitude: 1.0 });
        }
    }
    out
}

/// Twelve sections for the growing weight: supports `[1, 1.5]`, `[1.25, 2.5]`
/// and `[2, 4]` times `inner`, four time profiles (two reach `τ₀`).
pub fn g1_battery(inner: f64, tau0: f64) -> Vec<TestSection> {
    battery(&[(1.0, 1.5), (1.25, 2.5), (2.0, 4.0)], inner, tau0, false)
}

/// Twelve sections for the shifted-heat-kernel weight, around the centre
/// `ρ`: supports `[0.9, 1.3]`, `[1, 1.6]` and `[1.2, 2.2]` times `ρ`, with
/// profiles that vanish before `τ₀`.
pub fn g2_battery(rho: f64, tau0: f64) -> Vec<TestSection> {
    battery(&[(0.9, 1.3), (1.0, 1.6), (1.2, 2.2)], rho, tau0, true)
}

/// Radial cutoff `ψ = s((x/ρ − 1/6)·6) · (1 − s(x/ξ − 2))` in the label,
/// with `s` the quintic smoothstep: zero below `ρ/6` and beyond `3ξ`, one on
/// `[ρ/3, 2ξ]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cutoff {
    pub rho: f64,
    pub xi: f64,
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub lap: Vec<f64>,
    /// `ρ · max(|∇ψ| + |Δψ|)`.
    pub n_bound: f64,
}

fn smoothstep2(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    }
}

pub fn build_cutoff(rho: f64, xi: f64, inner: f64, snap: &FlowSnapshot) -> Result<Cutoff> {
    if !(xi > 4.0 * rho && 4.0 * rho > 48.0 * inner && inner > 0.0) {
        return Err(Error::Parameter(format!("cutoff needs ξ > 4ρ > 48·inner, got ξ={xi}, ρ={rho}, inner={inner}")));
    }
    let (lo, hi) = (snap.r_c[0], snap.r_c[snap.len() - 1]);
    if lo > rho / 6.0 || hi < 3.0 * xi {
        return Err(Error::InsufficientDomain(format!("cutoff support [{}, {}] not inside [{lo}, {hi}]", rho / 6.0, 3.0 * xi)));
    }
    let n1 = (snap.n - 1) as f64;
    let f = &snap.field;
    let mut out = Cutoff { rho, xi, x: snap.r_c.clone(), value: vec![], grad: vec![], lap: vec![], n_bound: 0.0 };
    for i in 0..snap.len() {
        let x = snap.r_c[i];
        let (u, du) = smoothstep(6.0 * x / rho - 1.0);
        let (du, ddu) = (6.0 / rho * du, 36.0 / (rho * rho) * smoothstep2(6.0 * x / rho - 1.0));
        let (v, dv) = smoothstep(x / xi - 2.0);
        let (dv, ddv) = (dv / xi, smoothstep2(x / xi - 2.0) / (xi * xi));
        let psi = u * (1.0 - v);
        let px_ = du * (1.0 - v) - u * dv;
        let pxx = ddu * (1.0 - v) - 2.0 * du * dv - u * ddv;
        let p = snap.p[i];
        let grad = px_ / p;
        let prr = pxx / (p * p) - snap.px[i] * px_ / (p * p * p);
        let lap = prr + n1 * f.a1[i] / f.a[i] * grad;
        out.n_bound = out.n_bound.max(rho * (grad.abs() + lap.abs()));
        out.value.push(psi);
        out.grad.push(grad);
        out.lap.push(lap);
    }
    Ok(out)
}

/// Margins of one inequality over an ascending α scan, one row per α and
/// one column per section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryScan {
    pub name: String,
    pub alphas: Vec<f64>,
    pub margins: Vec<Vec<f64>>,
    /// Smallest scanned α from which every section holds with margins
    /// nondecreasing up to at least `10·α₀`.
    pub alpha0: Option<f64>,
}

impl BatteryScan {
    pub fn new(name: &str, alphas: Vec<f64>, margins: Vec<Vec<f64>>) -> Self {
        let alpha0 = find_alpha0(&alphas, &margins);
        BatteryScan { name: name.into(), alphas, margins, alpha0 }
    }

    pub fn holds(&self) -> bool {
        self.alpha0.is_some()
    }
}

fn find_alpha0(alphas: &[f64], margins: &[Vec<f64>]) -> Option<f64> {
    let last = *alphas.last()?;
    let m = margins.len();
    let mut k0 = None;
    for k in (0..m).rev() {
        let ok = margins[k].iter().all(|v| *v >= 0.0) && (k + 1 == m || margins[k].iter().zip(&margins[k + 1]).all(|(a, b)| b >= a));
        if !ok {
            break;
        }
        k0 = Some(k);
    }
    let k0 = k0?;
    (last >= 10.0 * alphas[k0] * (1.0 - 1e-12)).then_some(alphas[k0])
}

/// One line of the scan report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRecord {
    pub params: std::collections::BTreeMap<String, f64>,
    pub threshold_radius: Option<f64>,
    pub alpha0: Option<f64>,
    pub margins: std::collections::BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowGrid, GaussianBackground};

    fn gaussian() -> GaussianBackground {
        GaussianBackground { n: 3, q_max: 1e5 }
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_a(0.0, 0.125);
        assert!((s.value - 0.125 * (-1.0f64 / 24.0).exp()).abs() < 1e-15);
        let s = sigma_a(0.75, 0.25);
        assert!((s.log_convexity - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_g1_hessian_closed_form() {
        let bg = gaussian();
        let p = flow_point_at(&bg, 20.0, 0.5);
        let g1 = G1Params::new(1.0, 1.0, 0.5).unwrap();
        let c = g1_closed(&Local::new(3, &p), &g1);
        let a = 1.5 * 0.5 * 20f64.powf(-0.5);
        assert!((c.hess_rad - (2.0 + a * 0.5)).abs() < 1e-12);
        assert!((c.hess_sph - (2.0 + a)).abs() < 1e-12);
    }

    fn flow_point_at(bg: &GaussianBackground, x: f64, tau: f64) -> FlowPoint {
        crate::flow::flow_point(bg, x, tau).unwrap()
    }

    #[test]
    fn flat_ftilde_reduces_to_leading_term() {
        let bg = gaussian();
        let g2 = G2Params::new(0.05, 30.0, 1.0 / 12.0, 3).unwrap();
        let p = flow_point_at(&bg, 25.0, 1e-6);
        let f = g2_ftilde(&Local::new(3, &p), &g2);
        let t = 1e-6 + 0.05;
        assert!((f + 2.0 * 30.0 / (2.0 * 25.0 * t)).abs() < 1e-10);
    }

    #[test]
    fn zero_section_gives_zero_sides() {
        let bg = gaussian();
        let mut sec = g1_battery(10.0, 0.25)[0];
        sec.amplitude = 0.0;
        let res = SlabResolution { uniform: 21, per_decade: 4, min_frac: 1e-3 };
        let slab = SpaceTimeSlab::for_section(&bg, &sec, 0.25, res, Execution::Sequential).unwrap();
        let g1 = G1Params::new(5.0, 0.25, 0.5).unwrap();
        for r in [carleman_pde_test(&slab, &sec, &g1, 10.0).unwrap(), carleman_ode_test(&slab, &sec, &g1, 10.0).unwrap()] {
            assert_eq!(r.log_lhs, f64::NEG_INFINITY);
            assert!(r.holds());
        }
        let g2 = G2Params::new(0.05, 22.0, 1.0 / 12.0, 3).unwrap();
        let sec2 = TestSection { amplitude: 0.0, ..g2_battery(22.0, 0.25)[0] };
        let slab = SpaceTimeSlab::for_section(&bg, &sec2, 0.25, res, Execution::Sequential).unwrap();
        assert!(carleman_decay_pde_test(&slab, &sec2, &g2, 20.0, 0.25, 10.0).unwrap().holds());
        assert!(carleman_decay_ode_test(&slab, &sec2, &g2, 20.0, 0.25, 10.0).unwrap().holds());
    }

    #[test]
    fn support_violations_are_errors() {
        let bg = gaussian();
        let res = SlabResolution { uniform: 21, per_decade: 4, min_frac: 1e-3 };
        let sec = g1_battery(10.0, 0.25)[0];
        let slab = SpaceTimeSlab::for_section(&bg, &sec, 0.25, res, Execution::Sequential).unwrap();
        let g1 = G1Params::new(5.0, 0.25, 0.5).unwrap();
        assert!(matches!(carleman_pde_test(&slab, &sec, &g1, 12.0), Err(Error::Support(_))));
        // Inside E_{γρ} for ρ = 200: γρ ≈ 16.7 > 10.
        let g2 = G2Params::new(0.05, 200.0, 1.0 / 12.0, 3).unwrap();
        let sec = g1_battery(10.0, 0.25)[1];
        assert!(matches!(carleman_decay_pde_test(&slab, &sec, &g2, 20.0, 0.25, 10.0), Err(Error::Support(_))));
        // Profile reaching τ₀ is not allowed for the decay estimates.
        let g2 = G2Params::new(0.05, 22.0, 1.0 / 12.0, 3).unwrap();
        let sec = g1_battery(22.0, 0.25)[0];
        assert!(matches!(carleman_decay_ode_test(&slab, &sec, &g2, 20.0, 0.25, 10.0), Err(Error::Support(_))));
        assert!(matches!(carleman_decay_ode_test(&slab, &g2_battery(22.0, 0.25)[0], &g2, 20.0, 0.5, 10.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn cutoff_plateau_and_scaling() {
        let bg = GaussianBackground { n: 3, q_max: 1e5 };
        let mut ns = vec![];
        for rho in [100.0, 200.0] {
            let xi = 5.0 * rho;
            let grid = FlowGrid::uniform(rho / 10.0, 3.5 * xi, 8001).unwrap();
            let snap = crate::flow::snapshot(&bg, &grid, 0.5, Execution::Sequential).unwrap();
            let c = build_cutoff(rho, xi, 1.0, &snap).unwrap();
            for (x, v) in c.x.iter().zip(&c.value) {
                if *x >= rho / 3.0 && *x <= 2.0 * xi {
                    assert_eq!(*v, 1.0);
                }
                if *x <= rho / 6.0 || *x >= 3.0 * xi {
                    assert_eq!(*v, 0.0);
                }
            }
            ns.push(c.n_bound);
        }
        assert!(ns[1] <= ns[0] && ns[0] < 1.1 * ns[1], "{ns:?}");
        let grid = FlowGrid::uniform(1.0, 2000.0, 101).unwrap();
        let snap = crate::flow::snapshot(&bg, &grid, 0.5, Execution::Sequential).unwrap();
        assert!(matches!(build_cutoff(100.0, 300.0, 1.0, &snap), Err(Error::Parameter(_))));
        assert!(matches!(build_cutoff(100.0, 500.0, 10.0, &snap), Err(Error::Parameter(_))));
    }

    #[test]
    fn alpha0_needs_a_monotone_decade() {
        let alphas = vec![1.0, 2.0, 5.0, 10.0, 20.0];
        let m = vec![vec![-1.0, 1.0], vec![0.5, 1.0], vec![0.6, 2.0], vec![0.7, 2.0], vec![0.9, 3.0]];
        assert_eq!(find_alpha0(&alphas, &m), Some(2.0));
        let m = vec![vec![0.1], vec![0.5], vec![0.4], vec![0.7], vec![0.9]];
        assert_eq!(find_alpha0(&alphas, &m), None);
    }
}
