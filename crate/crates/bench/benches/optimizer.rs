use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsfl_bench::{channels, config, white_noise};
use rsfl_core::adversary::worst_case;
use rsfl_core::linalg::random_psd;
use rsfl_core::optimizer::{max_eigpair, optimize_against, waterfill, OptimizerSettings};
use std::hint::black_box;

fn bench_waterfill(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let lambdas: Vec<f64> = (0..298).map(|_| rng.random_range(0.0..10.0)).collect();
    c.bench_function("waterfill_298", |b| b.iter(|| waterfill(black_box(&lambdas), 1.0)));
}

fn bench_eigpair(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_psd(&mut rng, 8, 8);
    c.bench_function("max_eigpair_8x8", |b| b.iter(|| max_eigpair(black_box(&m))));
}

fn bench_optimize(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    for nk in [64usize, 128, 256, 512] {
        let cfg = config(nk / 4, 4);
        let ch = channels(&cfg, 2);
        let white = white_noise(&cfg);
        group.bench_with_input(BenchmarkId::from_parameter(nk), &nk, |b, _| {
            b.iter(|| optimize_against(&ch, cfg.user_power, cfg.blocks_per_user(), &white, OptimizerSettings::default()))
        });
    }
    group.finish();
}

fn bench_worst_case(c: &mut Criterion) {
    let cfg = config(16, 4);
    let ch = channels(&cfg, 3);
    let (alloc, _) = optimize_against(&ch, cfg.user_power, cfg.blocks_per_user(), &white_noise(&cfg), OptimizerSettings::default())
        .expect("optimizer runs");
    c.bench_function("worst_case_64re", |b| b.iter(|| worst_case(black_box(&ch), &alloc, cfg.jammer_power)));
}

criterion_group!(benches, bench_waterfill, bench_eigpair, bench_optimize, bench_worst_case);
criterion_main!(benches);
