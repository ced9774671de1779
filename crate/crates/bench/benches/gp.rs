use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nalgebra::DMatrix;
use pgp_bench::{history, model, training_set};
use pgp_core::{adapt_predict, fit, FitConfig};

const DIM: usize = 12;

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [100, 300, 600] {
        let data = training_set(n, DIM, 7);
        let config = FitConfig { restarts: 1, ..FitConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| fit(black_box(data), &config).unwrap())
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict");
    for n in [100, 600] {
        let m = model(n, DIM);
        let q = vec![0.3; DIM];
        group.bench_with_input(BenchmarkId::new("single", n), &m, |b, m| b.iter(|| m.predict(black_box(&q)).unwrap()));
        let queries = DMatrix::from_fn(64, DIM, |i, j| ((i * DIM + j) as f64 * 0.37).sin());
        group.bench_with_input(BenchmarkId::new("batch64", n), &m, |b, m| {
            b.iter(|| m.predict_many(black_box(&queries)).unwrap())
        });
    }
    group.finish();
}

fn bench_adapt(c: &mut Criterion) {
    let mut group = c.benchmark_group("adapt_predict");
    let m = model(600, DIM);
    let q = vec![0.1; DIM];
    for len in [1, 6, 18] {
        let h = history(len, DIM, 3);
        group.bench_with_input(BenchmarkId::from_parameter(len), &h, |b, h| {
            b.iter(|| adapt_predict(&m, black_box(h), &q).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_predict, bench_adapt);
criterion_main!(benches);
