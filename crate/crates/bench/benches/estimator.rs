use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmnar_bench::fixture;
use gmnar_core::estimate::{assemble_normal_equations, solve_theta, update_col_memberships, update_row_memberships};
use gmnar_core::{fit, FitOptions};
use std::hint::black_box;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("normal_equations");
    for &(n1, n2, t) in &[(50, 40, 20), (100, 80, 20)] {
        let sim = fixture(n1, n2, t);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n1}x{n2}x{t}")), &sim, |b, sim| {
            b.iter(|| assemble_normal_equations(black_box(&sim.data), &sim.nets, &sim.assign).unwrap())
        });
    }
    group.finish();
}

fn membership(c: &mut Criterion) {
    let sim = fixture(100, 80, 20);
    let ne = assemble_normal_equations(&sim.data, &sim.nets, &sim.assign).unwrap();
    let theta = solve_theta(&ne, true).unwrap();
    let params = theta.params;
    c.bench_function("update_rows_100x80x20", |b| b.iter(|| update_row_memberships(&params, &sim.assign, black_box(&sim.data), &sim.nets).unwrap()));
    c.bench_function("update_cols_100x80x20", |b| b.iter(|| update_col_memberships(&params, &sim.assign, black_box(&sim.data), &sim.nets).unwrap()));
}

fn full_fit(c: &mut Criterion) {
    let sim = fixture(100, 80, 20);
    let opts = FitOptions::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("preset1_100x80x20", |b| b.iter(|| fit(black_box(&sim.data), &sim.nets, 2, 2, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, assembly, membership, full_fit);
criterion_main!(benches);
