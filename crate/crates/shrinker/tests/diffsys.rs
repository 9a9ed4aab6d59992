use proptest::prelude::*;
use shrinker::diffsys::*;
use shrinker::exec::Execution;
use shrinker::flow::*;
use shrinker::soliton::{default_s_min, normalize_potential, shoot_profile, Anchor, ShootOptions};

const TAUS: [f64; 4] = [1.0, 0.5, 0.35, 0.25];
const STEP: f64 = 0.05;

fn family(s0: f64, grid: &FlowGrid) -> SnapshotFamily {
    let opts = ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() };
    let p = shoot_profile(3, 0.5, s0, default_s_min(3), 1e-8, &opts).unwrap();
    let bg = ProfileBackground::new(normalize_potential(&p)).unwrap();
    SnapshotFamily::build_with_step(&bg, grid, &TAUS, STEP, Execution::default_policy()).unwrap()
}

fn pair() -> (SnapshotFamily, SnapshotFamily) {
    let grid = FlowGrid::uniform(4.0, 50.0, 401).unwrap();
    let s0 = source_s0_for(0.5, 1.02 * required_q_max(&grid, &TAUS, STEP));
    (family(s0, &grid), family(2.0 * s0, &grid))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[test]
fn coincident_flows_give_zero_fields() {
    let (a, _) = pair();
    let d = difference_fields(&a, &a, Execution::Sequential).unwrap();
    for l in &d.levels {
        for v in [&l.u, &l.v, &l.w, &l.s, &l.t, &l.grad_s, &l.grad_t, &l.du_tau, &l.dv_tau, &l.dw_tau] {
            assert!(v.iter().all(|x| *x == 0.0));
        }
    }
    assert_eq!(check_decay(&d).0, 0.0);
    assert!(check_ode_inequalities(&d).unwrap().iter().all(|c| c.is_finite() && c.n == 0.0));
}

#[test]
fn swapping_the_flows_changes_norms_only_by_metric_equivalence() {
    let (a, b) = pair();
    let ab = difference_fields(&a, &b, Execution::default_policy()).unwrap();
    let ba = difference_fields(&b, &a, Execution::default_policy()).unwrap();
    for (x, y) in ab.levels.iter().zip(&ba.levels) {
        let q = 1.0 + sup(&x.u).max(sup(&y.u));
        let k = q.powi(4) - 1.0 + 1e-10;
        for (fx, fy) in [(&x.u, &y.u), (&x.v, &y.v), (&x.s, &y.s), (&x.t, &y.t)] {
            for (p, r) in fx.iter().zip(fy) {
                assert!((p - r).abs() <= k * p.abs().max(*r) + 1e-15, "tau={}: {p} vs {r}", x.tau);
            }
        }
    }
}

#[test]
fn pair_has_finite_constants_and_exact_uev() {
    let (a, b) = pair();
    let d = difference_fields(&a, &b, Execution::default_policy()).unwrap();
    for c in check_ode_inequalities(&d).unwrap() {
        assert!(c.is_finite(), "{c:?}");
    }
    assert!(uev_residual(&d) < 1e-6);
    let (v, at) = check_decay(&d);
    assert!(v.is_finite() && at.is_some());
}

#[test]
fn mismatched_grids_are_rejected() {
    let (a, _) = pair();
    let other = FlowGrid::uniform(4.0, 50.0, 201).unwrap();
    let s0 = source_s0_for(0.5, 1.02 * required_q_max(&other, &TAUS, STEP));
    let b = family(s0, &other);
    assert!(difference_fields(&a, &b, Execution::Sequential).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rm_tensor_norm_matches_the_closed_form(n in 3usize..7, kr in -3.0f64..3.0, ks in -3.0f64..3.0) {
        let t = rm_tensor(n, kr, ks);
        let m = (n - 1) as f64;
        let closed = (4.0 * m * kr * kr + 2.0 * m * (m - 1.0) * ks * ks).sqrt();
        prop_assert!((t.norm() - closed).abs() < 1e-10 * (1.0 + closed));
    }
}
