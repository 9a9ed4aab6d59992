use approx::assert_relative_eq;
use proptest::prelude::*;
use shrinker::geometry::*;
use shrinker::oracle::{curvature_oracle_gap, sample_indices};

#[test]
fn round_sphere_has_unit_curvature() {
    for n in 3..7 {
        let r = 0.7f64;
        let c = curvature(n, r.sin(), r.cos(), -r.sin());
        let nf = n as f64;
        assert_relative_eq!(c.k_rad, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.k_sph, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.scalar, nf * (nf - 1.0), max_relative = 1e-14);
        assert_relative_eq!(c.rm_norm, (2.0 * nf * (nf - 1.0)).sqrt(), max_relative = 1e-14);
    }
}

#[test]
fn sphere_field_passes_the_oracle() {
    let r: Vec<f64> = (0..400).map(|i| 0.3 + 2.4 * i as f64 / 399.0).collect();
    let a = r.iter().map(|v| v.sin()).collect();
    let a1 = r.iter().map(|v| v.cos()).collect();
    let a2 = r.iter().map(|v| -v.sin()).collect();
    let field = WarpedMetricField::new(4, r, a, a1, a2, None).unwrap();
    let idx = sample_indices(&field, 10);
    assert_eq!(idx.len(), 10);
    assert!(curvature_oracle_gap(&field, &idx).unwrap() < 1e-5);
}

#[test]
fn flat_cone_has_no_deviation() {
    let cone = ConeSpec::new(3, 1.0).unwrap();
    assert!(cone.is_flat());
    let f = cone.field(1.0, 20.0, 200).unwrap();
    let d = cone_deviation(&f, &cone, 2.0).unwrap();
    assert_eq!(d.sup, 0.0);
    assert!(ConeSpec::new(2, 0.5).is_err());
    assert!(ConeSpec::new(3, 0.0).is_err());
}

proptest! {
    #[test]
    fn cone_curvature_is_tangential(n in 3usize..9, alpha in 0.05f64..4.0, r in 0.1f64..1e3) {
        let s = alpha.sqrt();
        let c = curvature(n, s * r, s, 0.0);
        let k = (1.0 - alpha) / (alpha * r * r);
        let m = (n - 1) as f64;
        prop_assert_eq!(c.k_rad, 0.0);
        prop_assert!((c.k_sph - k).abs() <= 1e-12 * k.abs().max(1e-300));
        prop_assert!((c.rc_sph - (m - 1.0) * k).abs() <= 1e-12 * c.rc_sph.abs().max(1e-300));
        prop_assert!((c.scalar - m * (m - 1.0) * k).abs() <= 1e-12 * c.scalar.abs().max(1e-300));
        prop_assert!((ConeSpec::new(n, alpha).unwrap().k_sph(r) - k).abs() <= 1e-12 * k.abs().max(1e-300));
    }

    #[test]
    fn scalar_curvature_is_the_ricci_trace(n in 3usize..9, a in 0.1f64..10.0, a1 in -2.0f64..2.0, a2 in -5.0f64..5.0) {
        let c = curvature(n, a, a1, a2);
        let tr = c.rc_rad + (n - 1) as f64 * c.rc_sph;
        prop_assert!((c.scalar - tr).abs() <= 1e-10 * (1.0 + tr.abs()));
        prop_assert!(c.rm_norm >= 0.0);
    }
}
