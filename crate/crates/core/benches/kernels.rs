//! Compares the parallel kernels against their sequential fallbacks and
//! times the end-to-end pieces that dominate a learning run.
//!
//! With default features the dispatched entry points run on rayon; the
//! `*_seq` baselines always run single threaded, so one invocation
//! shows the speedup directly:
//!
//! ```text
//! cargo bench -p amuse
//! ```

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use amuse::{
    bpdn_decode, build_secants, generate_translated_squares, solve, GameConfig, SecantBudget,
    SecantSet,
};

fn squares_secants() -> SecantSet {
    let data = generate_translated_squares(16, 4).unwrap();
    build_secants(&data, SecantBudget::AtMost(2000), 1e-12, 7).unwrap()
}

fn bench_projections(c: &mut Criterion) {
    let s = squares_secants();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..s.dim()).map(|_| rng.random::<f64>() - 0.5).collect();

    let mut group = c.benchmark_group("projections");
    group.bench_function("dispatched", |b| b.iter(|| s.projections(black_box(&x))));
    group.bench_function("sequential", |b| {
        b.iter(|| s.projections_seq(black_box(&x)))
    });
    group.finish();
}

fn bench_recombine(c: &mut Criterion) {
    let s = squares_secants();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w: Vec<f64> = (0..s.len()).map(|_| rng.random::<f64>() - 0.5).collect();

    let mut group = c.benchmark_group("recombine");
    group.bench_function("dispatched", |b| b.iter(|| s.recombine(black_box(&w))));
    group.bench_function("sequential", |b| b.iter(|| s.recombine_seq(black_box(&w))));
    group.finish();
}

fn bench_adjoint_matvec(c: &mut Criterion) {
    let s = squares_secants();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w: Vec<f64> = (0..2 * s.len()).map(|_| rng.random::<f64>()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    let action = s.plus_adjoint(&w).unwrap();
    let x: Vec<f64> = (0..s.dim()).map(|_| rng.random::<f64>() - 0.5).collect();

    c.bench_function("plus_adjoint_apply", |b| {
        b.iter(|| action.apply(black_box(&x)).unwrap())
    });
}

fn bench_small_solve(c: &mut Criterion) {
    let data = generate_translated_squares(8, 3).unwrap();
    let s = build_secants(&data, SecantBudget::AtMost(300), 1e-12, 7).unwrap();
    let mut cfg = GameConfig::new(10);
    cfg.seed = 7;

    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    group.bench_function("n64_m300_r10", |b| b.iter(|| solve(&s, &cfg).unwrap()));
    group.finish();
}

fn bench_decode(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (rows, n) = (64, 256);
    let phi: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    let mut z = vec![0.0; n];
    for _ in 0..8 {
        z[rng.random_range(0..n)] = rng.random::<f64>();
    }
    let y: Vec<f64> = phi.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum()).collect();

    let mut group = c.benchmark_group("bpdn_decode");
    group.sample_size(20);
    group.bench_function("64x256", |b| {
        b.iter(|| bpdn_decode(black_box(&phi), black_box(&y), 1e-3, 500, 1e-9).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_projections,
    bench_recombine,
    bench_adjoint_matvec,
    bench_small_solve,
    bench_decode
);
criterion_main!(benches);
