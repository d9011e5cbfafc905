use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use speclab_bench::{corpus_operator, torus};
use speclab_core::lp::{op_norm_power, IterationConfig};
use speclab_core::manifolds::sphere_band;
use speclab_core::perturbation::{perturbed_resolvent, ResolventMethod};
use speclab_core::spectral::{project, resolvent_sq, ResolventQuery, SpectralWindow};

fn power_iteration(c: &mut Criterion) {
    let cfg = IterationConfig::default();
    let mut group = c.benchmark_group("power_iteration");
    for dim in [10usize, 20, 40] {
        let op = corpus_operator(dim);
        let r = resolvent_sq(&op, &ResolventQuery::new(8.0, 1.0).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &r, |b, r| {
            b.iter(|| op_norm_power(black_box(r), 1.2, 6.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn sphere_cluster(c: &mut Criterion) {
    let cfg = IterationConfig::default();
    let mut group = c.benchmark_group("sphere_band");
    for l in [8usize, 16, 32] {
        group.bench_with_input(BenchmarkId::new("build", l), &l, |b, &l| {
            b.iter(|| sphere_band(l, l, 3 * l + 1, 6 * l + 1).unwrap())
        });
        let op = sphere_band(l, l, 3 * l + 1, 6 * l + 1).unwrap();
        let lam = op.eigenvalues()[0];
        let pi = project(&op, &SpectralWindow::new(lam, lam + 1.0).unwrap());
        group.bench_with_input(BenchmarkId::new("cluster_2_6", l), &pi, |b, pi| {
            b.iter(|| op_norm_power(black_box(pi), 2.0, 6.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn torus_build(c: &mut Criterion) {
    c.bench_function("torus_build_k8", |b| b.iter(|| torus(black_box(8))));
}

fn perturbed(c: &mut Criterion) {
    let model = torus(4);
    let v: Vec<f64> = (0..model.op.space().len())
        .map(|i| if i % 7 == 0 { 0.3 } else { 0.0 })
        .collect();
    let mut group = c.benchmark_group("perturbed_resolvent");
    group.bench_function("direct", |b| {
        b.iter(|| perturbed_resolvent(&model.op, black_box(&v), 2.0, ResolventMethod::Direct).unwrap())
    });
    group.bench_function("neumann_12", |b| {
        b.iter(|| perturbed_resolvent(&model.op, black_box(&v), 2.0, ResolventMethod::Neumann(12)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, power_iteration, sphere_cluster, torus_build, perturbed);
criterion_main!(benches);
