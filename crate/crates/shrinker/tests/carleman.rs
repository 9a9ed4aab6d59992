use proptest::prelude::*;
use shrinker::carleman::*;
use shrinker::exec::Execution;
use shrinker::flow::{required_q_max, source_s0_for, FlowGrid, GaussianBackground, ProfileBackground};
use shrinker::soliton::{default_s_min, normalize_potential, shoot_profile, Anchor, ShootOptions};

const EXEC: Execution = Execution::Sequential;

fn coarse() -> SlabResolution {
    SlabResolution { uniform: 41, per_decade: 6, min_frac: 1e-5 }
}

fn gaussian() -> GaussianBackground {
    GaussianBackground { n: 3, q_max: 1e5 }
}

#[test]
fn sigma_bounds_on_a_dense_grid() {
    for i in 0..1000 {
        let tau = i as f64 / 999.0;
        for a in [1e-3, 0.01, 0.1, 0.125] {
            let s = sigma_a(tau, a);
            let t = tau + a;
            assert!(s.value <= t && s.value >= t * (-0.375f64).exp(), "tau={tau} a={a}");
            assert!(s.derivative > 0.0 && s.derivative <= 1.0);
            assert!(s.log_convexity > 0.0);
        }
    }
}

#[test]
fn refinement_shrinks_the_f1_gap() {
    let taus = [1.0, 0.5, 0.2];
    let grid = FlowGrid::uniform(4.0, 50.0, 47).unwrap();
    let q = required_q_max(&grid, &taus, 0.08);
    let opts = ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() };
    let p = shoot_profile(3, 0.5, source_s0_for(0.5, 1.02 * q), default_s_min(3), 1e-8, &opts).unwrap();
    let bg = ProfileBackground::new(normalize_potential(&p)).unwrap();
    let g1 = G1Params::new(10.0, 1.0, 0.5).unwrap();
    let g2 = G2Params::new(0.01, 28.0, 1.0 / 12.0, 3).unwrap();
    let mut errs = vec![];
    for (k, count) in [47usize, 93, 185].into_iter().enumerate() {
        let grid = FlowGrid::uniform(4.0, 50.0, count).unwrap();
        errs.push(weight_fd_errors(&bg, &grid, &taus, 0.08 / 2f64.powi(k as i32), &g1, &g2, EXEC).unwrap().0);
    }
    assert!(errs[0] < 1e-3);
    assert!(errs[1] < errs[0] / 4.0 && errs[2] < errs[1] / 4.0, "{errs:?}");
}

#[test]
fn parameters_are_validated() {
    assert!(G1Params::new(0.0, 1.0, 0.5).is_err());
    assert!(G1Params::new(1.0, 1.0, 1.5).is_err());
    assert!(G2Params::new(-0.1, 22.0, 1.0 / 12.0, 3).is_err());
    let sec = g2_battery(22.0, 0.25)[0];
    let slab = SpaceTimeSlab::for_section(&gaussian(), &sec, 0.25, coarse(), EXEC).unwrap();
    assert!(G2Params::new(0.2, 22.0, 1.0 / 12.0, 3).is_err());
    let g2 = G2Params::new(0.1, 22.0, 1.0 / 12.0, 3).unwrap();
    assert!(carleman_decay_ode_test(&slab, &sec, &g2, 5.0, 0.3, 10.0).is_err());
    assert!(carleman_decay_pde_test(&slab, &sec, &g2, 5.0, 0.25, 30.0).is_err());
}

#[test]
fn batteries_have_twelve_sections() {
    assert_eq!(g1_battery(10.0, 0.25).len(), 12);
    assert_eq!(g2_battery(22.0, 0.25).len(), 12);
}

#[test]
fn alpha0_is_the_start_of_a_monotone_tail() {
    let alphas = vec![1.0, 2.0, 5.0, 10.0, 20.0];
    let m = vec![vec![-1.0, 0.1], vec![0.2, 0.3], vec![0.3, 0.3], vec![0.5, 0.4], vec![0.6, 0.9]];
    assert_eq!(BatteryScan::new("t", alphas.clone(), m.clone()).alpha0, Some(2.0));
    let mut dip = m;
    dip[3][1] = 0.2;
    assert_eq!(BatteryScan::new("t", alphas, dip).alpha0, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_convexity_matches_differencing(tau in 0.05f64..1.0, a in 1e-3f64..0.125) {
        let h = 1e-4;
        let l = |t: f64| sigma_a(t, a).value.ln();
        let d2 = (l(tau + h) - 2.0 * l(tau) + l(tau - h)) / (h * h);
        let s = sigma_a(tau, a);
        let fd = -s.value / s.derivative * d2;
        prop_assert!((s.log_convexity - fd).abs() < 1e-5 * s.log_convexity);
        let fd1 = (sigma_a(tau + h, a).value - sigma_a(tau - h, a).value) / (2.0 * h);
        prop_assert!((s.derivative - fd1).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn margins_ignore_the_amplitude(scale in 1e-3f64..1e3) {
        let bg = gaussian();
        let s1 = g1_battery(10.0, 0.25)[5];
        let slab1 = SpaceTimeSlab::for_section(&bg, &s1, 0.25, coarse(), EXEC).unwrap();
        let g1 = G1Params::new(10.0, 0.25, 0.5).unwrap();
        let s2 = g2_battery(22.0, 0.25)[3];
        let slab2 = SpaceTimeSlab::for_section(&bg, &s2, 0.25, coarse(), EXEC).unwrap();
        let g2 = G2Params::new(0.01, 22.0, 1.0 / 12.0, 3).unwrap();
        let scaled = |s: TestSection| TestSection { amplitude: s.amplitude * scale, ..s };
        let pairs = [
            (carleman_pde_test(&slab1, &s1, &g1, 10.0).unwrap(), carleman_pde_test(&slab1, &scaled(s1), &g1, 10.0).unwrap()),
            (carleman_ode_test(&slab1, &s1, &g1, 10.0).unwrap(), carleman_ode_test(&slab1, &scaled(s1), &g1, 10.0).unwrap()),
            (
                carleman_decay_pde_test(&slab2, &s2, &g2, 20.0, 0.25, 10.0).unwrap(),
                carleman_decay_pde_test(&slab2, &scaled(s2), &g2, 20.0, 0.25, 10.0).unwrap(),
            ),
            (
                carleman_decay_ode_test(&slab2, &s2, &g2, 5.0, 0.25, 10.0).unwrap(),
                carleman_decay_ode_test(&slab2, &scaled(s2), &g2, 5.0, 0.25, 10.0).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            prop_assert!((a.margin - b.margin).abs() < 1e-9 * (1.0 + a.margin.abs()), "{}: {} vs {}", a.name, a.margin, b.margin);
        }
    }
}
