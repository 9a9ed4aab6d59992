//! Differences of two rotationally symmetric flows on a common end.
//!
//! Both flows are sampled on the same labels `x = r_c`, which serves as the
//! shared chart. Tensors are held as dense component arrays in the
//! orthonormal frame `e₀ = ∂ρ`, `eᵢ = êᵢ/a` of the first flow; index `0` is
//! radial. Every tensor that occurs is invariant under rotations of the
//! sphere, so the intrinsic sphere connection drops out of `∇` and only the
//! warping terms `∇ₖe₀ = (a′/a) eₖ`, `∇ₖeⱼ = −(a′/a) δₖⱼ e₀` remain.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fd;
use crate::flow::{FlowPoint, SnapshotFamily};
use serde::{Deserialize, Serialize};

const WIDTH: usize = 7;
/// Columns dropped at each end before reporting.
pub const EDGE: usize = 6;

/// Component array of a tensor in an orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    /// Variance of each slot, `true` for contravariant.
    pub upper: Vec<bool>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, upper: &[bool]) -> Self {
        Tensor { n, upper: upper.to_vec(), data: vec![0.0; n.pow(upper.len() as u32)] }
    }

    pub fn from_fn(n: usize, upper: &[bool], f: impl Fn(&[usize]) -> f64) -> Self {
        let mut t = Tensor::zeros(n, upper);
        let mut idx = vec![0usize; upper.len()];
        for k in 0..t.data.len() {
            decode(k, n, &mut idx);
            t.data[k] = f(&idx);
        }
        t
    }

    pub fn rank(&self) -> usize {
        self.upper.len()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    /// Rescales every component by `radial` or `sph` per lower slot, and by
    /// their inverses per upper slot, according to the slot's direction.
    fn rescale(&self, radial: f64, sph: f64) -> Tensor {
        let mut out = self.clone();
        let mut idx = vec![0usize; self.rank()];
        for k in 0..out.data.len() {
            decode(k, self.n, &mut idx);
            let mut s = 1.0;
            for (slot, &i) in idx.iter().enumerate() {
                let f = if i == 0 { radial } else { sph };
                s *= if self.upper[slot] { 1.0 / f } else { f };
            }
            out.data[k] *= s;
        }
        out
    }

    /// Components in the coordinate frame `(∂x, êᵢ)` given `P = dρ/dx` and `a`.
    pub fn to_coords(&self, p: f64, a: f64) -> Tensor {
        self.rescale(p, a)
    }

    pub fn from_coords(&self, p: f64, a: f64) -> Tensor {
        self.rescale(1.0 / p, 1.0 / a)
    }

    fn sub(&self, o: &Tensor) -> Tensor {
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&o.data) {
            *v -= w;
        }
        out
    }

    /// Metric-free contraction of slots `i` (upper) and `j` (lower).
    pub fn contract(&self, i: usize, j: usize) -> Tensor {
        assert!(self.upper[i] && !self.upper[j] && i != j);
        let upper: Vec<bool> = self.upper.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, u)| *u).collect();
        let r = self.rank();
        Tensor::from_fn(self.n, &upper, |rest| {
            let mut full = vec![0usize; r];
            let mut it = rest.iter();
            for (k, slot) in full.iter_mut().enumerate() {
                if k != i && k != j {
                    *slot = *it.next().unwrap();
                }
            }
            (0..self.n)
                .map(|l| {
                    full[i] = l;
                    full[j] = l;
                    self.get(&full)
                })
                .sum()
        })
    }
}

fn decode(mut k: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = k % n;
        k /= n;
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// `Rm` as a `(1,3)` tensor, `R^a_{bcd} = K_{ab}(δ_ad δ_bc − δ_ac δ_bd)`,
/// with `K = k_rad` on planes containing `e₀` and `k_sph` otherwise.
pub fn rm_tensor(n: usize, k_rad: f64, k_sph: f64) -> Tensor {
    Tensor::from_fn(n, &[true, false, false, false], |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        if a == b {
            return 0.0;
        }
        let k = if a == 0 || b == 0 { k_rad } else { k_sph };
        k * (delta(a, d) * delta(b, c) - delta(a, c) * delta(b, d))
    })
}

/// `∇T` with the derivative slot first, from `T` and `∂ρT` at one point,
/// for warping `w = a′/a`.
pub fn covariant(t: &Tensor, t_rho: &Tensor, w: f64) -> Tensor {
    let n = t.n;
    let r = t.rank();
    let mut upper = vec![false];
    upper.extend_from_slice(&t.upper);
    // ω^c_{kb}: ∇_{e_k} e_b = Σ_c ω^c_{kb} e_c.
    let omega = |c: usize, k: usize, b: usize| -> f64 {
        if k == 0 {
            0.0
        } else if b == 0 {
            w * delta(c, k)
        } else if c == 0 {
            -w * delta(k, b)
        } else {
            0.0
        }
    };
    Tensor::from_fn(n, &upper, |i| {
        let k = i[0];
        let idx = &i[1..];
        if k == 0 {
            return t_rho.get(idx);
        }
        let mut s = 0.0;
        let mut j = idx.to_vec();
        for slot in 0..r {
            let orig = idx[slot];
            for c in 0..n {
                let om = if t.upper[slot] { omega(orig, k, c) } else { -omega(c, k, orig) };
                if om != 0.0 {
                    j[slot] = c;
                    s += om * t.get(&j);
                }
            }
            j[slot] = orig;
        }
        s
    })
}

/// Cached first-derivative weights on a grid.
struct Diff1 {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Diff1 {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let half = WIDTH / 2;
        let rows = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half).min(n - WIDTH);
                (lo, fd::fornberg(x[i], &x[lo..lo + WIDTH], 1)[1].clone())
            })
            .collect();
        Diff1 { rows }
    }

    /// `∂ρ` of a tensor field, given `P` per node.
    fn apply(&self, field: &[Tensor], p: &[f64]) -> Vec<Tensor> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, (lo, w))| {
                let mut out = Tensor::zeros(field[i].n, &field[i].upper);
                for (j, wj) in w.iter().enumerate() {
                    for (o, v) in out.data.iter_mut().zip(&field[lo + j].data) {
                        *o += wj * v;
                    }
                }
                for o in out.data.iter_mut() {
                    *o /= p[i];
                }
                out
            })
            .collect()
    }
}

/// `U = g − g̃` in coordinates: `(P² − P̃², a² − ã²)`.
fn u_coords(pa: &FlowPoint, pb: &FlowPoint) -> (f64, f64) {
    (pa.p * pa.p - pb.p * pb.p, pa.a * pa.a - pb.a * pb.a)
}

fn u_norm(u: (f64, f64), p: &FlowPoint, m: f64) -> f64 {
    ((u.0 / (p.p * p.p)).powi(2) + m * (u.1 / (p.a * p.a)).powi(2)).sqrt()
}

/// Christoffel symbols in coordinates: `Γ^x_xx = P_x/P`, `Γ^x_ij = −(a a′/P) ĝ_ij`,
/// `Γ^i_xj = (a′P/a) δ^i_j`.
fn christoffel(p: &FlowPoint) -> (f64, f64, f64) {
    (p.px / p.p, -p.a * p.a1 / p.p, p.a1 * p.p / p.a)
}

/// `V = ∇ − ∇̃` in coordinates.
fn v_coords(pa: &FlowPoint, pb: &FlowPoint) -> (f64, f64, f64) {
    let (a, b) = (christoffel(pa), christoffel(pb));
    (a.0 - b.0, a.1 - b.1, a.2 - b.2)
}

fn v_coord_tensor(n: usize, v: (f64, f64, f64)) -> Tensor {
    Tensor::from_fn(n, &[true, false, false], |i| match (i[0], i[1], i[2]) {
        (0, 0, 0) => v.0,
        (0, b, c) if b > 0 && c > 0 => v.1 * delta(b, c),
        (a, 0, c) if a > 0 && c > 0 => v.2 * delta(a, c),
        (a, b, 0) if a > 0 && b > 0 => v.2 * delta(a, b),
        _ => 0.0,
    })
}

/// `∇Rm` in the flow's own frame, from the exact arclength derivatives of
/// the sectional curvatures.
fn nabla_rm(n: usize, p: &FlowPoint) -> Tensor {
    let c = &p.curvature;
    let dk_rad = -(p.a3 * p.a - p.a2 * p.a1) / (p.a * p.a);
    let dk_sph = -2.0 * p.a1 * (p.a2 * p.a + 1.0 - p.a1 * p.a1) / p.a.powi(3);
    covariant(&rm_tensor(n, c.k_rad, c.k_sph), &rm_tensor(n, dk_rad, dk_sph), p.a1 / p.a)
}

/// A tensor of the second flow, given in its own frame, expressed in the
/// frame of the first.
fn transfer(t: &Tensor, pa: &FlowPoint, pb: &FlowPoint) -> Tensor {
    t.rescale(pb.p / pa.p, pb.a / pa.a)
}

/// Norms of the difference system at one τ, on interior labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferenceLevel {
    pub tau: f64,
    pub r_c: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub grad_s: Vec<f64>,
    pub grad_t: Vec<f64>,
    pub du_tau: Vec<f64>,
    pub dv_tau: Vec<f64>,
    pub dw_tau: Vec<f64>,
    /// `|∂τU − 2 tr S|` over the level's largest `|2Rc| + |2R̃c|`, all in `g`.
    pub uev_residual: Vec<f64>,
    pub uev_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifferenceFields {
    pub n: usize,
    pub levels: Vec<DifferenceLevel>,
}

fn check_compatible(a: &SnapshotFamily, b: &SnapshotFamily) -> Result<()> {
    let (sa, sb) = (&a.snapshots, &b.snapshots);
    if sa[0].n != sb[0].n {
        return Err(Error::GridMismatch(format!("dimensions {} and {}", sa[0].n, sb[0].n)));
    }
    if a.grid.x != b.grid.x {
        return Err(Error::GridMismatch("the two families use different label grids".into()));
    }
    if a.taus() != b.taus() {
        return Err(Error::GridMismatch(format!("tau lists {:?} and {:?}", a.taus(), b.taus())));
    }
    for (x, y) in a.stencils.iter().zip(&b.stencils) {
        if x.offsets != y.offsets {
            return Err(Error::GridMismatch(format!("tau stencils differ at tau={}", x.tau)));
        }
    }
    if a.grid.len() < 2 * EDGE + WIDTH {
        return Err(Error::GridMismatch(format!("grid of {} labels is too short", a.grid.len())));
    }
    Ok(())
}

/// `W = ∇V` in the first flow's frame along one stencil row.
fn w_row(n: usize, d1: &Diff1, ra: &[FlowPoint], rb: &[FlowPoint]) -> Vec<Tensor> {
    let v: Vec<Tensor> = ra.iter().zip(rb).map(|(pa, pb)| v_coord_tensor(n, v_coords(pa, pb)).from_coords(pa.p, pa.a)).collect();
    let p: Vec<f64> = ra.iter().map(|q| q.p).collect();
    let dv = d1.apply(&v, &p);
    v.iter().zip(&dv).zip(ra).map(|((t, dt), pa)| covariant(t, dt, pa.a1 / pa.a)).collect()
}

pub fn difference_fields(flow_a: &SnapshotFamily, flow_b: &SnapshotFamily, exec: Execution) -> Result<DifferenceFields> {
    check_compatible(flow_a, flow_b)?;
    let n = flow_a.snapshots[0].n;
    let m = (n - 1) as f64;
    let x = &flow_a.grid.x;
    let d1 = Diff1::new(x);
    let len = x.len();
    let levels = exec::map_range(exec, flow_a.stencils.len(), |k| {
        let (sa, sb) = (&flow_a.stencils[k], &flow_b.stencils[k]);
        let (ca, cb) = (sa.center(), sb.center());
        let pa_p: Vec<f64> = ca.iter().map(|q| q.p).collect();

        let s_field: Vec<Tensor> = ca
            .iter()
            .zip(cb)
            .map(|(pa, pb)| {
                let ra = rm_tensor(n, pa.curvature.k_rad, pa.curvature.k_sph);
                let rb = rm_tensor(n, pb.curvature.k_rad, pb.curvature.k_sph);
                ra.sub(&transfer(&rb, pa, pb))
            })
            .collect();
        let t_field: Vec<Tensor> = ca.iter().zip(cb).map(|(pa, pb)| nabla_rm(n, pa).sub(&transfer(&nabla_rm(n, pb), pa, pb))).collect();
        let ds = d1.apply(&s_field, &pa_p);
        let dt = d1.apply(&t_field, &pa_p);

        // Time derivatives at fixed label, in coordinates.
        let w_rows: Vec<Vec<Tensor>> = sa.rows.iter().zip(&sb.rows).map(|(ra, rb)| w_row(n, &d1, ra, rb)).collect();
        let w_coords: Vec<Vec<Tensor>> =
            w_rows.iter().zip(&sa.rows).map(|(row, ra)| row.iter().zip(ra).map(|(t, p)| t.to_coords(p.p, p.a)).collect()).collect();
        let c_idx = sa.offsets.iter().position(|o| *o == 0.0).unwrap();

        let mut lvl = DifferenceLevel {
            tau: sa.tau,
            r_c: vec![],
            u: vec![],
            v: vec![],
            w: vec![],
            s: vec![],
            t: vec![],
            grad_s: vec![],
            grad_t: vec![],
            du_tau: vec![],
            dv_tau: vec![],
            dw_tau: vec![],
            uev_residual: vec![],
            uev_scale: 0.0,
        };
        let mut uev_abs = vec![];
        for i in EDGE..len - EDGE {
            let (pa, pb) = (&ca[i], &cb[i]);
            let w = pa.a1 / pa.a;
            lvl.r_c.push(x[i]);
            lvl.u.push(u_norm(u_coords(pa, pb), pa, m));
            lvl.v.push(v_coord_tensor(n, v_coords(pa, pb)).from_coords(pa.p, pa.a).norm());
            lvl.w.push(w_rows[c_idx][i].norm());
            lvl.s.push(s_field[i].norm());
            lvl.t.push(t_field[i].norm());
            lvl.grad_s.push(covariant(&s_field[i], &ds[i], w).norm());
            lvl.grad_t.push(covariant(&t_field[i], &dt[i], w).norm());

            let mut du = (0.0, 0.0);
            let mut dv = (0.0, 0.0, 0.0);
            let mut dw = Tensor::zeros(n, &w_coords[0][i].upper);
            for (r, wt) in sa.weights.iter().enumerate() {
                let (qa, qb) = (&sa.rows[r][i], &sb.rows[r][i]);
                let u = u_coords(qa, qb);
                let v = v_coords(qa, qb);
                du = (du.0 + wt * u.0, du.1 + wt * u.1);
                dv = (dv.0 + wt * v.0, dv.1 + wt * v.1, dv.2 + wt * v.2);
                for (o, c) in dw.data.iter_mut().zip(&w_coords[r][i].data) {
                    *o += wt * c;
                }
            }
            lvl.du_tau.push(u_norm(du, pa, m));
            lvl.dv_tau.push(v_coord_tensor(n, dv).from_coords(pa.p, pa.a).norm());
            lvl.dw_tau.push(dw.from_coords(pa.p, pa.a).norm());

            // Ricci difference as the trace R^a_{bca} of S, back in coordinates.
            let rc = s_field[i].contract(0, 3).to_coords(pa.p, pa.a);
            let two_tr = (2.0 * rc.get(&[0, 0]), if n > 1 { 2.0 * rc.get(&[1, 1]) } else { 0.0 });
            let res = (du.0 - two_tr.0, du.1 - two_tr.1);
            let ric = |p: &FlowPoint| (2.0 * p.curvature.rc_rad * p.p * p.p, 2.0 * p.curvature.rc_sph * p.a * p.a);
            lvl.uev_scale = lvl.uev_scale.max(u_norm(ric(pa), pa, m) + u_norm(ric(pb), pa, m));
            uev_abs.push(u_norm(res, pa, m));
        }
        let scale = lvl.uev_scale.max(f64::MIN_POSITIVE);
        lvl.uev_residual = uev_abs.iter().map(|v| v / scale).collect();
        lvl
    });
    Ok(DifferenceFields { n, levels })
}

/// Smallest `N` with `lhs ≤ N · rhs` over the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalConstant {
    pub name: String,
    pub n: f64,
    /// `(r_c, τ)` where `N` is attained.
    pub at: Option<(f64, f64)>,
    /// Points where the right side vanished but the left side did not.
    pub guard_failures: usize,
}

impl EmpiricalConstant {
    pub fn is_finite(&self) -> bool {
        self.n.is_finite() && self.guard_failures == 0
    }
}

/// Absolute size below which a side counts as zero.
pub const ZERO_TOL: f64 = 1e-13;

fn empirical(
    name: &str,
    diff: &DifferenceFields,
    lhs: impl Fn(&DifferenceLevel, usize) -> f64,
    rhs: impl Fn(&DifferenceLevel, usize) -> f64,
) -> EmpiricalConstant {
    let mut out = EmpiricalConstant { name: name.into(), n: 0.0, at: None, guard_failures: 0 };
    for l in &diff.levels {
        for i in 0..l.r_c.len() {
            let (a, b) = (lhs(l, i), rhs(l, i));
            if b <= ZERO_TOL {
                if a > ZERO_TOL {
                    out.guard_failures += 1;
                }
                continue;
            }
            if a / b > out.n {
                out.n = a / b;
                out.at = Some((l.r_c[i], l.tau));
            }
        }
    }
    out
}

/// Empirical constants for `|∂τU| ≤ N|S|`, `|∂τV| ≤ N|T| + N r_c⁻²|U|` and
/// `|∂τW| ≤ N|∇T| + N r_c⁻²(|U| + |V|)`.
pub fn check_ode_inequalities(diff: &DifferenceFields) -> Result<[EmpiricalConstant; 3]> {
    if diff.levels.len() < 3 {
        return Err(Error::Parameter(format!("need at least 3 tau levels, have {}", diff.levels.len())));
    }
    let r2 = |l: &DifferenceLevel, i: usize| l.r_c[i].powi(-2);
    Ok([
        empirical("dU <= N|S|", diff, |l, i| l.du_tau[i], |l, i| l.s[i]),
        empirical("dV <= N(|T| + |U|/r^2)", diff, |l, i| l.dv_tau[i], |l, i| l.t[i] + r2(l, i) * l.u[i]),
        empirical("dW <= N(|grad T| + (|U|+|V|)/r^2)", diff, |l, i| l.dw_tau[i], |l, i| l.grad_t[i] + r2(l, i) * (l.u[i] + l.v[i])),
    ])
}

/// `sup r_c² (|S|+|T|+|∇S|+|∇T|+|U|+|V|+|W|)` over all levels, with its location.
pub fn check_decay(diff: &DifferenceFields) -> (f64, Option<(f64, f64)>) {
    let mut best = (0.0, None);
    for l in &diff.levels {
        for i in 0..l.r_c.len() {
            let v = l.r_c[i].powi(2) * (l.s[i] + l.t[i] + l.grad_s[i] + l.grad_t[i] + l.u[i] + l.v[i] + l.w[i]);
            if v > best.0 || !v.is_finite() {
                best = (v, Some((l.r_c[i], l.tau)));
            }
        }
    }
    best
}

/// Largest `uev` residual over all levels.
pub fn uev_residual(diff: &DifferenceFields) -> f64 {
    diff.levels.iter().flat_map(|l| l.uev_residual.iter().copied()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rm_norm_matches_closed_form() {
        for n in [3, 4, 6] {
            let r = rm_tensor(n, 0.3, -1.7);
            let c = crate::geometry::curvature(n, 2.0, 0.4, -0.6);
            let r2 = rm_tensor(n, c.k_rad, c.k_sph);
            assert!((r2.norm() - c.rm_norm).abs() < 1e-12 * c.rm_norm);
            let ric = r.contract(0, 3);
            let m = (n - 1) as f64;
            assert!((ric.get(&[0, 0]) - m * 0.3).abs() < 1e-14);
            assert!((ric.get(&[1, 1]) - (0.3 + (m - 1.0) * -1.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn covariant_rm_matches_closed_form() {
        for n in [3, 5] {
            let (k1, k2, d1, d2, w) = (0.2, -0.5, 0.03, 0.7, 0.9);
            let t = covariant(&rm_tensor(n, k1, k2), &rm_tensor(n, d1, d2), w);
            let expect = crate::geometry::nabla_rm_norm(n, 1.0, w, k1, k2, d1, d2);
            assert!((t.norm() - expect).abs() < 1e-12 * expect, "{} {}", t.norm(), expect);
        }
    }

    #[test]
    fn coordinate_round_trip() {
        let t = Tensor::from_fn(3, &[true, false, false], |i| (i[0] + 2 * i[1] + 5 * i[2]) as f64 - 3.5);
        let back = t.to_coords(1.3, 7.0).from_coords(1.3, 7.0);
        for (x, y) in t.data.iter().zip(&back.data) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
