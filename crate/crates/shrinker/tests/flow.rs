use shrinker::exec::Execution;
use shrinker::flow::*;
use shrinker::soliton::{default_s_min, normalize_potential, shoot_profile, Anchor, ShootOptions};
use shrinker::Error;

const TAUS: [f64; 4] = [1.0, 0.3, 0.1, 0.03];

fn soliton_family(exec: Execution) -> SnapshotFamily {
    let grid = FlowGrid::uniform(4.0, 60.0, 561).unwrap();
    let q = required_q_max(&grid, &TAUS, DEFAULT_TAU_STEP);
    let opts = ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() };
    let p = shoot_profile(3, 0.5, source_s0_for(0.5, 1.02 * q), default_s_min(3), 1e-8, &opts).unwrap();
    let bg = ProfileBackground::new(normalize_potential(&p)).unwrap();
    SnapshotFamily::build(&bg, &grid, &TAUS, exec).unwrap()
}

#[test]
fn gaussian_flow_is_static() {
    let bg = GaussianBackground { n: 4, q_max: 1e4 };
    let grid = FlowGrid::uniform(1.0, 40.0, 200).unwrap();
    let fam = SnapshotFamily::build(&bg, &grid, &TAUS, Execution::Sequential).unwrap();
    let rep = verify_flow_identities(&fam);
    assert!(rep.algebraic < 1e-10 && rep.time_derivative < 1e-8, "{rep:?}");
    assert!(verify_fid0(&fam).n0 < 1e-6);
    assert!(hr_bounds_hold(&fam));
    for s in &fam.snapshots {
        assert!(s.r_c.iter().zip(&s.h).all(|(x, h)| (h - x).abs() < 1e-12 * x));
    }
}

#[test]
fn soliton_flow_identities_hold() {
    let fam = soliton_family(Execution::default_policy());
    let rep = verify_flow_identities(&fam);
    assert!(rep.algebraic < 1e-6, "{}", rep.algebraic);
    assert!(rep.time_derivative < 1e-4, "{}", rep.time_derivative);
    assert!(hr_bounds_hold(&fam));
    let hd = verify_hder(&fam);
    assert!(hd.gradient < 1e-6 && hd.time_derivative < 1e-4, "{hd:?}");
    let cd = cone_deviation_sequence(&fam, 10.0).unwrap();
    assert!(is_monotone_decreasing(&cd));
}

#[test]
fn execution_policies_agree() {
    let a = soliton_family(Execution::Sequential);
    let b = soliton_family(Execution::Parallel);
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.h, y.h);
        assert_eq!(x.field.a, y.field.a);
    }
}

#[test]
fn h_gap_scales_like_tau_squared_over_r_cubed() {
    let grid = FlowGrid::uniform(4.0, 150.0, 1461).unwrap();
    let taus = [1.0, 0.5, 0.2, 0.1, 0.05];
    let q = required_q_max(&grid, &taus, DEFAULT_TAU_STEP);
    let opts = ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() };
    let p = shoot_profile(3, 0.5, source_s0_for(0.5, 1.02 * q), default_s_min(3), 1e-8, &opts).unwrap();
    let fam = SnapshotFamily::build(&ProfileBackground::new(normalize_potential(&p)).unwrap(), &grid, &taus, Execution::default_policy())
        .unwrap();
    let rh = verify_rh_comparison(&fam, 8.0).unwrap();
    assert!((1.8..=2.2).contains(&rh.tau_exponent), "{rh:?}");
    assert!(rh.rc_exponent <= -2.7, "{rh:?}");
}

#[test]
fn short_source_is_an_error() {
    let grid = FlowGrid::uniform(4.0, 60.0, 100).unwrap();
    let bg = GaussianBackground { n: 3, q_max: 100.0 };
    let err = SnapshotFamily::build(&bg, &grid, &[1.0, 0.01], Execution::Sequential).unwrap_err();
    assert!(matches!(err, Error::InsufficientDomain(_)));
    assert!(FlowGrid::uniform(5.0, 4.0, 10).is_err());
}

#[test]
fn gaussian_trajectories_meet_the_exponential_bounds() {
    let field = GaussianBackground { n: 3, q_max: 400.0 }.radial_field();
    let tb = check_trajectory_bounds(&field, &[2.0, 5.0, 20.0], 2.0).unwrap();
    assert!(tb.holds, "{tb:?}");
}
