use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shrinker::diffsys::difference_fields;
use shrinker::exec::Execution;
use shrinker::flow::*;
use shrinker::soliton::{default_s_min, normalize_potential, shoot_profile, Anchor, ShootOptions};

const TAUS: [f64; 6] = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01];

fn background(grid: &FlowGrid, s0_factor: f64) -> ProfileBackground {
    let q = required_q_max(grid, &TAUS, DEFAULT_TAU_STEP);
    let opts = ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() };
    let s0 = s0_factor * source_s0_for(0.5, 1.02 * q);
    ProfileBackground::new(normalize_potential(&shoot_profile(3, 0.5, s0, default_s_min(3), 1e-8, &opts).unwrap())).unwrap()
}

fn policies() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Execution::Parallel));
    }
    v
}

fn snapshot_family(c: &mut Criterion) {
    let grid = FlowGrid::uniform(4.0, 150.0, 2921).unwrap();
    let bg = background(&grid, 1.0);
    let mut g = c.benchmark_group("snapshot_family");
    g.sample_size(20);
    for (name, exec) in policies() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| SnapshotFamily::build(&bg, &grid, &TAUS, exec).unwrap())
        });
    }
    g.finish();
}

fn difference_system(c: &mut Criterion) {
    let grid = FlowGrid::uniform(4.0, 50.0, 401).unwrap();
    let a = SnapshotFamily::build(&background(&grid, 1.0), &grid, &TAUS, Execution::Parallel).unwrap();
    let b = SnapshotFamily::build(&background(&grid, 2.0), &grid, &TAUS, Execution::Parallel).unwrap();
    let mut g = c.benchmark_group("difference_fields");
    g.sample_size(20);
    for (name, exec) in policies() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bch, &exec| bch.iter(|| difference_fields(&a, &b, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, snapshot_family, difference_system);
criterion_main!(benches);
