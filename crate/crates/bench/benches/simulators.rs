use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use mfabc_bench::repressilator;
use mfabc_core::models::REPRESSILATOR_TAU;
use mfabc_core::network::{viral_model, ParamVector};
use mfabc_core::rng::stream_rng;
use mfabc_core::sim::{
    coupled_high_fi, hybrid_viral_simulate, ssa_simulate, tau_leap_simulate, NoiseRecord, SimOptions,
};

fn ssa(c: &mut Criterion) {
    let (net, theta, opts) = repressilator();
    let mut i = 0;
    c.bench_function("repressilator ssa", |b| {
        b.iter(|| {
            i += 1;
            ssa_simulate(&net, &theta, &opts, &mut stream_rng(1, "bench", i)).unwrap()
        })
    });
}

fn tau_leap_and_coupling(c: &mut Criterion) {
    let (net, theta, opts) = repressilator();
    let mut i = 0;
    c.bench_function("repressilator tau-leap", |b| {
        b.iter(|| {
            i += 1;
            tau_leap_simulate(&net, &theta, REPRESSILATOR_TAU, &opts, &mut stream_rng(2, "bench", i)).unwrap()
        })
    });
    let mut j = 0;
    c.bench_function("repressilator coupled completion", |b| {
        b.iter_batched(
            || {
                j += 1;
                let mut rng = stream_rng(3, "bench", j);
                let (_, sk) = tau_leap_simulate(&net, &theta, REPRESSILATOR_TAU, &opts, &mut rng).unwrap();
                (NoiseRecord::Skeleton(sk), rng)
            },
            |(noise, mut rng)| coupled_high_fi(&noise, &net, &theta, &opts, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn viral(c: &mut Criterion) {
    let net = viral_model();
    let opts = SimOptions::grid(vec![net.horizon]);
    let theta = ParamVector::empty();
    let mut i = 0;
    let mut group = c.benchmark_group("viral cell");
    group.sample_size(20);
    group.bench_function("hybrid", |b| {
        b.iter(|| {
            i += 1;
            hybrid_viral_simulate(&net, &theta, &opts, &mut stream_rng(4, "bench", i)).unwrap()
        })
    });
    group.bench_function("ssa", |b| {
        b.iter(|| {
            i += 1;
            ssa_simulate(&net, &theta, &opts, &mut stream_rng(5, "bench", i)).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, ssa, tau_leap_and_coupling, viral);
criterion_main!(benches);
