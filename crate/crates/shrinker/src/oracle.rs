//! Curvature of a warped field computed the long way: the metric is written
//! in hyperspherical coordinates `(r, θ₁, …, θ_{n−1})`, and Christoffel
//! symbols, the Riemann tensor and its contractions come from nested
//! central differences of the metric components. Nothing here uses the
//! warped-product formulas.

use crate::error::{Error, Result};
use crate::geometry::WarpedMetricField;
use serde::{Deserialize, Serialize};

/// `a(r)` between nodes by the quintic Hermite interpolant of `(a, a′, a″)`.
pub fn warp_at(field: &WarpedMetricField, r: f64) -> Result<f64> {
    let x = &field.r;
    if !(r >= x[0] && r <= x[x.len() - 1]) {
        return Err(Error::InsufficientDomain(format!("r={r} outside [{}, {}]", x[0], x[x.len() - 1])));
    }
    let i = match x.partition_point(|v| *v <= r) {
        0 => 0,
        k if k >= x.len() => x.len() - 2,
        k => k - 1,
    };
    let h = x[i + 1] - x[i];
    let t = (r - x[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    Ok(h00 * field.a[i]
        + h * h10 * field.a1[i]
        + h * h * h20 * field.a2[i]
        + h01 * field.a[i + 1]
        + h * h11 * field.a1[i + 1]
        + h * h * h21 * field.a2[i + 1])
}

type Metric<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

/// Diagonal of `dr² + a(r)² (dθ₁² + sin²θ₁ dθ₂² + …)`.
fn hyperspherical<'a>(field: &'a WarpedMetricField) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a {
    move |c: &[f64]| {
        let a = warp_at(field, c[0])?;
        let mut g = vec![1.0];
        let mut s = a * a;
        for ck in &c[1..] {
            g.push(s);
            s *= ck.sin().powi(2);
        }
        Ok(g)
    }
}

/// Fourth-order central difference of `f` along coordinate `k`.
fn partial<T>(f: &dyn Fn(&[f64]) -> Result<T>, c: &[f64], k: usize, h: f64, lin: impl Fn(&[(f64, &T)]) -> T) -> Result<T> {
    let at = |s: f64| -> Result<T> {
        let mut y = c.to_vec();
        y[k] += s * h;
        f(&y)
    };
    let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
    Ok(lin(&[(1.0 / (12.0 * h), &m2), (-8.0 / (12.0 * h), &m1), (8.0 / (12.0 * h), &p1), (-1.0 / (12.0 * h), &p2)]))
}

fn combine(terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].1.len()];
    for (w, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    out
}

/// `Γ^i_{jk}` flattened as `i·n² + j·n + k`, for a diagonal metric.
fn christoffel(g: &Metric, c: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let n = c.len();
    let g0 = g(c)?;
    let dg: Vec<Vec<f64>> = (0..n).map(|k| partial(g, c, k, h[k], combine)).collect::<Result<_>>()?;
    let mut gam = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // ½ g^{ii} (∂_j g_{ik} + ∂_k g_{ij} − ∂_i g_{jk}), diagonal g.
                let mut s = 0.0;
                if i == k {
                    s += dg[j][i];
                }
                if i == j {
                    s += dg[k][i];
                }
                if j == k {
                    s -= dg[i][j];
                }
                gam[(i * n + j) * n + k] = 0.5 * s / g0[i];
            }
        }
    }
    Ok(gam)
}

/// Curvature quantities at one point, by differencing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCurvature {
    pub r: f64,
    pub rc_rad: f64,
    pub rc_sph: f64,
    pub scalar: f64,
    pub rm_norm: f64,
}

/// Oracle curvature at arclength `r` on a generic angular point.
pub fn oracle_curvature(field: &WarpedMetricField, r: f64) -> Result<OracleCurvature> {
    let n = field.n;
    let metric = hyperspherical(field);
    let mut c = vec![r];
    c.extend((1..n).map(|k| 1.0 + 0.13 * k as f64));
    let hr = 2e-3 * r.min(field.r[field.len() - 1] - r).clamp(1e-3, 1.0);
    let mut h = vec![hr];
    h.extend(std::iter::repeat_n(2e-3, n - 1));
    let gam_fn = |y: &[f64]| christoffel(&metric, y, &h);
    let gam = gam_fn(&c)?;
    let dgam: Vec<Vec<f64>> = (0..n).map(|k| partial(&gam_fn, &c, k, h[k], combine)).collect::<Result<_>>()?;
    let g = metric(&c)?;
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}.
    let mut riem = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgam[k][idx(i, l, j)] - dgam[l][idx(i, k, j)];
                    for m in 0..n {
                        v += gam[idx(i, k, m)] * gam[idx(m, l, j)] - gam[idx(i, l, m)] * gam[idx(m, k, j)];
                    }
                    riem[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    let r4 = |i: usize, j: usize, k: usize, l: usize| riem[((i * n + j) * n + k) * n + l];
    let ric = |j: usize, l: usize| (0..n).map(|i| r4(i, j, i, l)).sum::<f64>();
    let scalar: f64 = (0..n).map(|j| ric(j, j) / g[j]).sum();
    // |Rm|² = g_{ii} g^{jj} g^{kk} g^{ll} (R^i_{jkl})².
    let mut rm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    rm2 += g[i] / (g[j] * g[k] * g[l]) * r4(i, j, k, l).powi(2);
                }
            }
        }
    }
    Ok(OracleCurvature { r, rc_rad: ric(0, 0) / g[0], rc_sph: ric(1, 1) / g[1], scalar, rm_norm: rm2.sqrt() })
}

/// Worst relative gap between the formula curvature and the oracle at the
/// given node indices, each gap scaled by `max(|value|, |Rm|)`.
pub fn curvature_oracle_gap(field: &WarpedMetricField, indices: &[usize]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &i in indices {
        let f = crate::geometry::ricci_of_field(field, i)?;
        let o = oracle_curvature(field, field.r[i])?;
        let scale = f.rm_norm.abs().max(1e-300);
        for (a, b) in [(f.rc_rad, o.rc_rad), (f.rc_sph, o.rc_sph), (f.scalar, o.scalar), (f.rm_norm, o.rm_norm)] {
            worst = worst.max((a - b).abs() / a.abs().max(scale));
        }
    }
    Ok(worst)
}

/// `count` node indices spread over the middle of the field.
pub fn sample_indices(field: &WarpedMetricField, count: usize) -> Vec<usize> {
    let len = field.len();
    (0..count).map(|k| len / 10 + k * (len * 8 / 10) / count.max(1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sphere_of_radius_two() {
        // a = 2 sin(r/2): constant sectional curvature 1/4.
        let r: Vec<f64> = (1..400).map(|i| i as f64 * 0.015).collect();
        let a: Vec<f64> = r.iter().map(|v| 2.0 * (v / 2.0).sin()).collect();
        let a1: Vec<f64> = r.iter().map(|v| (v / 2.0).cos()).collect();
        let a2: Vec<f64> = r.iter().map(|v| -0.5 * (v / 2.0).sin()).collect();
        let field = WarpedMetricField::new(4, r, a, a1, a2, None).unwrap();
        let o = oracle_curvature(&field, 3.0).unwrap();
        assert!((o.rc_rad - 0.75).abs() < 1e-6, "{o:?}");
        assert!((o.rc_sph - 0.75).abs() < 1e-6);
        assert!((o.scalar - 3.0).abs() < 1e-6);
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let r: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.37).collect();
        let p = |x: f64| 1.0 + x + 0.1 * x.powi(5);
        let a = r.iter().map(|&x| p(x)).collect();
        let a1 = r.iter().map(|&x| 1.0 + 0.5 * x.powi(4)).collect();
        let a2 = r.iter().map(|&x| 2.0 * x.powi(3)).collect();
        let field = WarpedMetricField::new(3, r, a, a1, a2, None).unwrap();
        for x in [1.1, 2.345, 7.9] {
            assert!((warp_at(&field, x).unwrap() - p(x)).abs() < 1e-10 * p(x));
        }
    }
}
