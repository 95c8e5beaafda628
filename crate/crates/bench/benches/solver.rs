use std::hint::black_box;

use cheeger_core::capacity::cap1_variational;
use cheeger_core::cheeger_solver::{inner_pd, solve};
use cheeger_core::geometry::rasterize;
use cheeger_core::tv_core::{div_into, grad_into};
use cheeger_core::{CompactSet, GridSpec, Shape, SolverOptions};
use criterion::{criterion_group, criterion_main, Criterion};

fn operators(c: &mut Criterion) {
    let spec = GridSpec::cube(2, 512, -1.25, 1.25).unwrap();
    let u: Vec<f64> = (0..spec.len()).map(|i| (i % 97) as f64 / 97.0).collect();
    let mut p = vec![0.0; 2 * spec.len()];
    let mut out = vec![0.0; spec.len()];
    c.bench_function("grad 512x512", |b| b.iter(|| grad_into(&spec, black_box(&u), &mut p)));
    c.bench_function("div 512x512", |b| b.iter(|| div_into(&spec, black_box(&p), &mut out)));
}

fn solvers(c: &mut Criterion) {
    let spec = GridSpec::cube(2, 128, -1.25, 1.25).unwrap();
    let disk = rasterize(&Shape::ball(&[0.0, 0.0], 1.0), &spec).unwrap();
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("disk 128x128");
    g.sample_size(10);
    g.bench_function("inner problem at λ = 2", |b| b.iter(|| inner_pd(&disk, 2.0, None, &opts).unwrap()));
    g.bench_function("eigenvalue", |b| b.iter(|| solve(&disk, &opts).unwrap()));
    let ball = CompactSet(rasterize(&Shape::ball(&[0.0, 0.0], 0.3), &spec).unwrap());
    g.bench_function("capacity of a ball", |b| b.iter(|| cap1_variational(&ball, &spec).unwrap()));
    g.finish();
}

criterion_group!(benches, operators, solvers);
criterion_main!(benches);
