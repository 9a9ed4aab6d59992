//! Curvature of rotationally symmetric metrics `dr² + a(r)² g_{S^{n-1}}`.
//!
//! Fields are always held in the arclength gauge. Curvature quantities are
//! eigenvalues with respect to `g` (radial direction, then any unit
//! direction tangent to the spheres).

use crate::error::{Error, Result};
use crate::fd;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub n: usize,
    pub alpha: f64,
}

impl ConeSpec {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("dimension n={n} must be at least 3")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("cone aperture alpha={alpha} must be positive")));
        }
        Ok(ConeSpec { n, alpha })
    }

    pub fn is_flat(&self) -> bool {
        self.alpha == 1.0
    }

    /// "flat/Gaussian" or "curved cone".
    pub fn kind(&self) -> &'static str {
        if self.is_flat() {
            "flat/Gaussian"
        } else {
            "curved cone"
        }
    }

    /// Sectional curvature of tangential planes of the cone at radius `r`.
    pub fn k_sph(&self, r: f64) -> f64 {
        (1.0 - self.alpha) / (self.alpha * r * r)
    }

    /// The cone itself sampled at `count` equispaced radii.
    pub fn field(&self, r_min: f64, r_max: f64, count: usize) -> Result<WarpedMetricField> {
        if !(r_min > 0.0 && r_max > r_min) || count < 5 {
            return Err(Error::Parameter(format!("bad cone grid [{r_min}, {r_max}] × {count}")));
        }
        let s = self.alpha.sqrt();
        let r: Vec<f64> = (0..count).map(|i| r_min + (r_max - r_min) * i as f64 / (count - 1) as f64).collect();
        let a = r.iter().map(|v| s * v).collect();
        WarpedMetricField::new(self.n, r, a, vec![s; count], vec![0.0; count], None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub f: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedMetricField {
    pub n: usize,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub potential: Option<Potential>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub r: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub f: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePointData {
    pub rc_rad: f64,
    pub rc_sph: f64,
    pub k_rad: f64,
    pub k_sph: f64,
    #[serde(rename = "R")]
    pub scalar: f64,
    pub rm_norm: f64,
}

/// Warped-product curvature from `(a, a′, a″)` in the arclength gauge.
pub fn curvature(n: usize, a: f64, a1: f64, a2: f64) -> CurvaturePointData {
    let m = (n - 1) as f64;
    let k_rad = -a2 / a;
    let k_sph = (1.0 - a1 * a1) / (a * a);
    let rc_rad = m * k_rad;
    let rc_sph = k_rad + (m - 1.0) * k_sph;
    let scalar = m * (2.0 * k_rad + (m - 1.0) * k_sph);
    let rm_norm = (4.0 * m * k_rad * k_rad + 2.0 * m * (m - 1.0) * k_sph * k_sph).sqrt();
    CurvaturePointData { rc_rad, rc_sph, k_rad, k_sph, scalar, rm_norm }
}

/// `|∇Rm|` for a warped product, given the curvature functions and their
/// arclength derivatives.
pub fn nabla_rm_norm(n: usize, a: f64, a1: f64, k_rad: f64, k_sph: f64, dk_rad: f64, dk_sph: f64) -> f64 {
    let m = (n - 1) as f64;
    let ang = a1 / a * (k_rad - k_sph);
    (4.0 * m * dk_rad * dk_rad + 2.0 * m * (m - 1.0) * dk_sph * dk_sph + 8.0 * m * (m - 1.0) * ang * ang).sqrt()
}

/// Eigenvalues `(∇∇φ)(∂r,∂r)` and the tangential one, for radial φ.
pub fn hessian_of_radial(a: f64, a1: f64, phi1: f64, phi2: f64) -> (f64, f64) {
    (phi2, a1 / a * phi1)
}

/// `Δu = u″ + (n−1)(a′/a)u′` for radial u.
pub fn laplacian_radial(n: usize, a: f64, a1: f64, u1: f64, u2: f64) -> f64 {
    u2 + (n - 1) as f64 * a1 / a * u1
}

impl WarpedMetricField {
    pub fn new(n: usize, r: Vec<f64>, a: Vec<f64>, a1: Vec<f64>, a2: Vec<f64>, potential: Option<Potential>) -> Result<Self> {
        let len = r.len();
        if n < 3 {
            return Err(Error::InvalidField(format!("dimension {n} < 3")));
        }
        if len < 5 || a.len() != len || a1.len() != len || a2.len() != len {
            return Err(Error::InvalidField("grids must share a length of at least 5".into()));
        }
        if let Some(p) = &potential {
            if p.f.len() != len || p.f1.len() != len || p.f2.len() != len {
                return Err(Error::InvalidField("potential grids differ in length".into()));
            }
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidField("r grid not strictly increasing".into()));
        }
        if let Some(i) = a.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidField(format!("a ≤ 0 at index {i}")));
        }
        Ok(WarpedMetricField { n, r, a, a1, a2, potential })
    }

    /// Builds a field from arclength samples only, reconstructing derivatives
    /// with five-point (fourth-order) stencils.
    pub fn from_samples(n: usize, r: Vec<f64>, a: Vec<f64>, f: Option<Vec<f64>>) -> Result<Self> {
        if r.len() < 5 || r.len() != a.len() {
            return Err(Error::InvalidField("need at least 5 matching samples".into()));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidField("r grid not strictly increasing".into()));
        }
        let (a1, a2) = fd::derivatives(&r, &a, 5);
        let potential = f.map(|f| {
            let (f1, f2) = fd::derivatives(&r, &f, 5);
            Potential { f, f1, f2 }
        });
        Self::new(n, r, a, a1, a2, potential)
    }

    /// Ingests a field given in an arbitrary radial coordinate `x` with
    /// `g = g_xx dx² + a² g_S`, reparametrizing by arclength from `x[0]`
    /// shifted by `r0`.
    pub fn from_gauge(n: usize, x: &[f64], g_xx: &[f64], a: Vec<f64>, f: Option<Vec<f64>>, r0: f64) -> Result<Self> {
        if g_xx.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Gauge("g_xx must be positive".into()));
        }
        let speed: Vec<f64> = g_xx.iter().map(|g| g.sqrt()).collect();
        let r: Vec<f64> = fd::cumulative(x, &speed).into_iter().map(|v| v + r0).collect();
        Self::from_samples(n, r, a, f)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn point(&self, i: usize) -> FieldPoint {
        FieldPoint {
            r: self.r[i],
            a: self.a[i],
            a1: self.a1[i],
            a2: self.a2[i],
            f: self.potential.as_ref().map(|p| (p.f[i], p.f1[i], p.f2[i])),
        }
    }

    pub fn potential(&self) -> Result<&Potential> {
        self.potential.as_ref().ok_or(Error::MissingPotential)
    }

    /// Largest relative discrepancy between the stored derivatives and
    /// five-point differences of the stored values (interior points only).
    pub fn derivative_consistency(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut check = |u: &[f64], u1: &[f64], u2: &[f64]| {
            let (d1, d2) = fd::derivatives(&self.r, u, 5);
            for i in 2..self.len() - 2 {
                let s1 = u1[i].abs().max(1.0);
                let s2 = u2[i].abs().max(1e-3 * s1);
                worst = worst.max((d1[i] - u1[i]).abs() / s1).max((d2[i] - u2[i]).abs() / s2.max(1.0));
            }
        };
        check(&self.a, &self.a1, &self.a2);
        if let Some(p) = &self.potential {
            check(&p.f, &p.f1, &p.f2);
        }
        worst
    }

    /// Applies `f ↦ λ f` to the potential (used for negative controls).
    pub fn with_scaled_potential(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        if let Some(p) = out.potential.as_mut() {
            for v in p.f.iter_mut().chain(p.f1.iter_mut()).chain(p.f2.iter_mut()) {
                *v *= lambda;
            }
        }
        out
    }

    /// Adds a constant to the potential.
    pub fn with_shifted_potential(&self, c: f64) -> Self {
        let mut out = self.clone();
        if let Some(p) = out.potential.as_mut() {
            for v in p.f.iter_mut() {
                *v += c;
            }
        }
        out
    }
}

pub fn ricci_of_field(field: &WarpedMetricField, index: usize) -> Result<CurvaturePointData> {
    if index >= field.len() {
        return Err(Error::InvalidField(format!("index {index} outside grid")));
    }
    let a = field.a[index];
    if !(a > 0.0) {
        return Err(Error::InvalidField(format!("a ≤ 0 at index {index}")));
    }
    Ok(curvature(field.n, a, field.a1[index], field.a2[index]))
}

/// Residuals of `Rc + ∇∇f = g/2` at one point: (radial, tangential).
pub fn soliton_residual_at(field: &WarpedMetricField, i: usize) -> Result<(f64, f64)> {
    let p = field.potential()?;
    let c = ricci_of_field(field, i)?;
    let (h_rad, h_sph) = hessian_of_radial(field.a[i], field.a1[i], p.f1[i], p.f2[i]);
    Ok(((c.rc_rad + h_rad - 0.5).abs(), (c.rc_sph + h_sph - 0.5).abs()))
}

/// Sup of both soliton residuals over the index range.
pub fn soliton_residual_on(field: &WarpedMetricField, range: std::ops::Range<usize>) -> Result<(f64, f64)> {
    field.potential()?;
    let mut out = (0.0f64, 0.0f64);
    for i in range {
        let (r, s) = soliton_residual_at(field, i)?;
        out.0 = out.0.max(r);
        out.1 = out.1.max(s);
    }
    Ok(out)
}

/// Sup over the interior grid (the two end points on each side excluded).
pub fn soliton_residual(field: &WarpedMetricField) -> Result<(f64, f64)> {
    let n = field.len();
    soliton_residual_on(field, 2..n - 2)
}

/// Signed `R + |∇f|² − f` at each grid point.
pub fn normalization_defect(field: &WarpedMetricField) -> Result<Vec<f64>> {
    let p = field.potential()?;
    (0..field.len())
        .map(|i| {
            let c = ricci_of_field(field, i)?;
            Ok(c.scalar + p.f1[i] * p.f1[i] - p.f[i])
        })
        .collect()
}

pub fn normalization_residual_on(field: &WarpedMetricField, range: std::ops::Range<usize>) -> Result<f64> {
    let d = normalization_defect(field)?;
    Ok(d[range].iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

pub fn normalization_residual(field: &WarpedMetricField) -> Result<f64> {
    let n = field.len();
    normalization_residual_on(field, 0..n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeDeviation {
    /// `sup_{r ≥ b} |a²/(α r²) − 1|`.
    pub sup: f64,
    /// Pairs `(b', sup_{r ≥ b'})` for every grid radius `b' ≥ b`.
    pub sequence: Vec<(f64, f64)>,
    /// `sup_{r ≥ b} r² · |a²/(α r²) − 1|`.
    pub r2_sup: f64,
    /// Log-log slope of `r²·deviation` over the outer half of the tail.
    pub r2_growth: f64,
    pub r2_bounded: bool,
}

pub fn cone_deviation(field: &WarpedMetricField, cone: &ConeSpec, b: f64) -> Result<ConeDeviation> {
    let start = field.r.iter().position(|&r| r >= b).ok_or_else(|| Error::InsufficientDomain(format!("no grid points beyond b={b}")))?;
    let tail = field.len() - start;
    if tail < 8 {
        return Err(Error::InsufficientDomain(format!("only {tail} grid points beyond b={b}")));
    }
    let last = field.len() - 1;
    let ratio = field.a[last] / (cone.alpha.sqrt() * field.r[last]);
    if (ratio - 1.0).abs() > 0.05 {
        return Err(Error::InsufficientDomain(format!("a/(√α r) = {ratio:.4} at the grid end; tail not conical")));
    }
    let dev: Vec<f64> =
        (start..field.len()).map(|i| (field.a[i] * field.a[i] / (cone.alpha * field.r[i] * field.r[i]) - 1.0).abs()).collect();
    let mut sequence = vec![(0.0, 0.0); tail];
    let mut running = 0.0f64;
    for k in (0..tail).rev() {
        running = running.max(dev[k]);
        sequence[k] = (field.r[start + k], running);
    }
    let weighted: Vec<f64> = (0..tail).map(|k| field.r[start + k].powi(2) * dev[k]).collect();
    let r2_sup = weighted.iter().fold(0.0f64, |m, v| m.max(*v));
    let half = tail / 2;
    let xs: Vec<f64> = (half..tail).map(|k| field.r[start + k]).collect();
    let ys: Vec<f64> = (half..tail).map(|k| weighted[k].max(1e-300)).collect();
    let r2_growth = if dev.iter().all(|d| *d < 1e-13) { 0.0 } else { fd::loglog_slope(&xs, &ys).map(|v| v.0).unwrap_or(0.0) };
    Ok(ConeDeviation { sup: sequence[0].1, sequence, r2_sup, r2_growth, r2_bounded: r2_growth <= 0.25 })
}

/// Arclength distance between two grid points.
pub fn radial_distance(field: &WarpedMetricField, i: usize, j: usize) -> f64 {
    (field.r[i] - field.r[j]).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone_field(n: usize, alpha: f64) -> WarpedMetricField {
        let r: Vec<f64> = (0..200).map(|i| 1.0 + 0.1 * i as f64).collect();
        let s = alpha.sqrt();
        let a = r.iter().map(|v| s * v).collect();
        WarpedMetricField::new(n, r, a, vec![s; 200], vec![0.0; 200], None).unwrap()
    }

    #[test]
    fn flat_space_has_no_curvature() {
        let f = cone_field(3, 1.0);
        let c = ricci_of_field(&f, 10).unwrap();
        assert_eq!((c.rc_rad, c.rc_sph, c.k_rad, c.k_sph, c.scalar, c.rm_norm), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn cone_point_values() {
        let c = curvature(3, 0.5f64.sqrt() * 2.0, 0.5f64.sqrt(), 0.0);
        assert_eq!(c.k_rad, 0.0);
        assert!((c.k_sph - 0.25).abs() < 1e-15);
        assert!((c.scalar - 0.5).abs() < 1e-15);
        assert!((c.scalar - (c.rc_rad + 2.0 * c.rc_sph)).abs() < 1e-15);
    }

    #[test]
    fn hessian_examples() {
        assert_eq!(hessian_of_radial(3.0, 1.0, 1.5, 0.5), (0.5, 0.5));
        assert_eq!(hessian_of_radial(3.0, 1.0, 0.0, 0.0), (0.0, 0.0));
        let s = 0.5f64.sqrt();
        let (h0, h1) = hessian_of_radial(s * 4.0, s, 1.0, 0.0);
        assert_eq!(h0, 0.0);
        assert!((h1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_cone_has_zero_deviation() {
        let f = cone_field(4, 0.5);
        let d = cone_deviation(&f, &ConeSpec::new(4, 0.5).unwrap(), 2.0).unwrap();
        assert!(d.sup < 1e-15 && d.r2_bounded);
        let g = cone_field(4, 1.0);
        assert!(cone_deviation(&g, &ConeSpec::new(4, 1.0).unwrap(), 1.0).unwrap().sup < 1e-15);
    }

    #[test]
    fn short_tail_is_rejected() {
        let f = cone_field(3, 0.5);
        assert!(matches!(cone_deviation(&f, &ConeSpec::new(3, 0.5).unwrap(), 20.5), Err(Error::InsufficientDomain(_))));
    }

    #[test]
    fn distances() {
        let f = cone_field(3, 1.0);
        assert_eq!(radial_distance(&f, 4, 4), 0.0);
        assert!((radial_distance(&f, 4, 5) - 0.1).abs() < 1e-12);
        assert!((radial_distance(&f, 9, 2) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn gaussian_soliton_residuals_vanish() {
        let r: Vec<f64> = (0..100).map(|i| 0.5 + 0.05 * i as f64).collect();
        let f: Vec<f64> = r.iter().map(|v| v * v / 4.0).collect();
        let f1: Vec<f64> = r.iter().map(|v| v / 2.0).collect();
        let field =
            WarpedMetricField::new(3, r.clone(), r.clone(), vec![1.0; 100], vec![0.0; 100], Some(Potential { f, f1, f2: vec![0.5; 100] }))
                .unwrap();
        let (a, b) = soliton_residual(&field).unwrap();
        assert!(a < 1e-15 && b < 1e-15);
        assert_eq!(normalization_residual(&field).unwrap(), 0.0);
        let shifted = field.with_shifted_potential(0.3);
        assert!((normalization_residual(&shifted).unwrap() - 0.3).abs() < 1e-12);
        let scaled = field.with_scaled_potential(1.01);
        let (a, b) = soliton_residual(&scaled).unwrap();
        assert!(a > 1e-3 && b > 1e-3);
    }
}
