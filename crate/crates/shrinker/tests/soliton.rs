use approx::assert_relative_eq;
use proptest::prelude::*;
use shrinker::soliton::*;

fn expansion() -> ShootOptions {
    ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() }
}

/// Integrates the soliton equations in the warp `a` itself, with state
/// `(a′, f′)` in arclength: `a″ = −a/2 + (n−2)(1−a′²)/a + a′f′` and
/// `f″ = 1/2 + (n−1)a″/a`. Classical RK4 with a fixed step in `a`.
fn warp_oracle(n: usize, alpha: f64, s0: f64, s_end: f64, steps: usize) -> f64 {
    let m = (n - 2) as f64;
    let c1 = -2.0 * m * alpha * (1.0 - alpha);
    let (w0, w10) = (alpha + c1 / s0, -c1 / (s0 * s0));
    let a0 = s0.sqrt();
    let ap = w0.sqrt();
    let app = a0 * w10;
    let fp = (a0 / ap) * (0.5 + app / a0 - m * (1.0 - ap * ap) / (a0 * a0));
    let rhs = |a: f64, y: [f64; 2]| -> [f64; 2] {
        let (ap, fp) = (y[0], y[1]);
        let app = -a / 2.0 + m * (1.0 - ap * ap) / a + ap * fp;
        let fpp = 0.5 + (n - 1) as f64 * app / a;
        [app / ap, fpp / ap]
    };
    let a1 = s_end.sqrt();
    let h = (a1 - a0) / steps as f64;
    let mut y = [ap, fp];
    let mut a = a0;
    for _ in 0..steps {
        let k1 = rhs(a, y);
        let k2 = rhs(a + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(a + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(a + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        a += h;
    }
    y[0] * y[0]
}

#[test]
fn warp_form_oracle_matches_the_shooting() {
    for (n, alpha) in [(3, 0.5), (4, 2.0), (5, 0.8)] {
        let p = shoot_profile(n, alpha, 1600.0, default_s_min(n), 1e-8, &expansion()).unwrap();
        let lib = p.state_at(50.0).unwrap().w;
        let oracle = warp_oracle(n, alpha, 1600.0, 50.0, 20000);
        assert_relative_eq!(lib, oracle, max_relative = 1e-9);
    }
}

#[test]
fn frozen_profile_value() {
    // w(50) for n = 3, α = 1/2 anchored at S0 = 1600 on the two-term expansion.
    let oracle = warp_oracle(3, 0.5, 1600.0, 50.0, 20000);
    let p = shoot_profile(3, 0.5, 1600.0, default_s_min(3), 1e-8, &expansion()).unwrap();
    assert_relative_eq!(oracle, W50_N3_HALF, max_relative = 1e-9);
    assert_relative_eq!(p.state_at(50.0).unwrap().w, W50_N3_HALF, max_relative = 1e-9);
}

const W50_N3_HALF: f64 = 0.490_187_699_13;

#[test]
fn construction_history_shrinks() {
    let c = construct_soliton(3, 0.5, (100.0, 400.0), 1e-8, None, &expansion()).unwrap();
    assert!(c.profile.s0 >= 1600.0);
    assert!(c.history.last().unwrap().1 < 1e-8);
}

#[test]
fn bad_parameters_are_rejected() {
    assert!(shoot_profile(2, 0.5, 1600.0, 1.0, 1e-8, &expansion()).is_err());
    assert!(shoot_profile(3, -0.5, 1600.0, 1.0, 1e-8, &expansion()).is_err());
    assert!(shoot_profile(3, 0.5, 1.0, 2.0, 1e-8, &expansion()).is_err());
    assert!(construct_soliton(3, 0.5, (400.0, 100.0), 1e-8, None, &expansion()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_is_flat_in_every_dimension(n in 3usize..9, s0 in 500.0f64..5000.0) {
        let p = normalize_potential(&shoot_profile(n, 1.0, s0, default_s_min(n), 1e-8, &expansion()).unwrap());
        for i in (0..p.len()).step_by(97) {
            let q = p.point(i);
            prop_assert!((q.w - 1.0).abs() < 1e-12);
            prop_assert!((q.f - q.s / 4.0).abs() < 1e-9 * (1.0 + q.s));
        }
    }

    #[test]
    fn normalized_profiles_satisfy_the_gauge(n in 3usize..6, alpha in 0.3f64..2.5) {
        let p = normalize_potential(&shoot_profile(n, alpha, 2000.0, default_s_min(n), 1e-8, &expansion()).unwrap());
        prop_assert!(p.normalization_residual.unwrap() < 1e-8);
        prop_assert!(p.ode_residual() < 1e-6);
    }

    #[test]
    fn leading_coefficient_sign(n in 3usize..8, alpha in 0.05f64..3.0) {
        let c1 = expansion_c1(n, alpha);
        prop_assert_eq!(c1 < 0.0, alpha < 1.0);
        prop_assert_eq!(expansion_c1(n, 1.0), 0.0);
    }
}
