use std::hint::black_box;

use arp_core::driver::{solve, SolverConfig};
use arp_core::hermite::SlowInstance;
use arp_core::problems::find;
use arp_core::trust_region::{solve_cubic, solve_trust_region};
use arp_core::FeasibleRegion;
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;

fn subproblems(c: &mut Criterion) {
    let h = DMatrix::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.3, 2.0, 0.5, 0.0, 0.5, 1.0]);
    let g = [0.2, -0.4, 0.1];
    c.bench_function("cubic model minimizer, n = 3", |b| b.iter(|| solve_cubic(black_box(&g), black_box(&h), 2.0).unwrap()));
    c.bench_function("trust-region measure, n = 3", |b| {
        b.iter(|| solve_trust_region(black_box(&g), black_box(&h), 0.5).unwrap())
    });
}

fn instances(c: &mut Criterion) {
    c.bench_function("slow instance build, p = 3, q = 2, eps = 0.1", |b| {
        b.iter(|| SlowInstance::build(3, 2, black_box(0.1)).unwrap())
    });
    let inst = SlowInstance::build(2, 2, 0.1).unwrap();
    let config = SolverConfig::prescribed(2, 2, 0.1).unwrap();
    let region = FeasibleRegion::whole_space(1).unwrap();
    c.bench_function("prescribed run, p = q = 2, eps = 0.1", |b| {
        b.iter(|| solve(inst.interpolant(), &region, &[0.0], black_box(&config)).unwrap())
    });
}

fn registry_runs(c: &mut Criterion) {
    let spec = find("rosenbrock").unwrap();
    let oracle = spec.oracle();
    let config = SolverConfig::new(2, 2, 1e-6).unwrap();
    c.bench_function("adaptive run, rosenbrock, p = q = 2", |b| {
        b.iter(|| solve(&oracle, &spec.region, &spec.x0, black_box(&config)).unwrap())
    });
}

criterion_group!(benches, subproblems, instances, registry_runs);
criterion_main!(benches);
