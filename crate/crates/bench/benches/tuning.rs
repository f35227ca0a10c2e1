use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfabc_bench::repressilator_like_estimates;
use mfabc_core::tuning::{optimal_eta, phi, Bounds};

fn eta(c: &mut Criterion) {
    let est = repressilator_like_estimates();
    c.bench_function("optimal_eta", |b| b.iter(|| optimal_eta(black_box(&est), Bounds::default())));
    c.bench_function("phi", |b| b.iter(|| phi(black_box(0.4), black_box(0.1), &est)));
}

criterion_group!(benches, eta);
criterion_main!(benches);
