use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wallreg_core::global::{knn_fit, knn_predict, KnnSpec};
use wallreg_core::numerics::{rbf_fit, svd, Kernel};
use wallreg_core::pointwise::{tree_fit, TreeSpec};

fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn bench_svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd");
    group.sample_size(10);
    for n_tr in [50, 200] {
        let a = random(2000, n_tr, 1);
        group.bench_with_input(BenchmarkId::new("snapshots_2000x", n_tr), &a, |b, a| {
            b.iter(|| svd(black_box(a)).unwrap())
        });
    }
    group.finish();
}

fn bench_knn(c: &mut Criterion) {
    let params = random(312, 3, 2);
    let snaps: Vec<DMatrix<f64>> = (0..312).map(|i| random(2000, 4, 100 + i)).collect();
    let model = knn_fit(&KnnSpec::default(), &params, snaps).unwrap();
    c.bench_function("knn_predict_312x2000", |b| {
        b.iter(|| knn_predict(black_box(&model), black_box(&[0.1, -0.2, 0.3])))
    });
}

fn bench_rbf(c: &mut Criterion) {
    let mut group = c.benchmark_group("rbf_fit");
    for n in [100, 300] {
        let x = random(n, 3, 3);
        let z = random(n, 10, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(x, z), |b, (x, z)| {
            b.iter(|| rbf_fit(black_box(x), black_box(z), Kernel::Multiquadric, 1.0, 0.0).unwrap())
        });
    }
    group.finish();
}

fn bench_tree(c: &mut Criterion) {
    let mut group = c.benchmark_group("tree_fit");
    group.sample_size(10);
    let x = random(5000, 9, 5);
    let y = random(5000, 4, 6);
    let spec = TreeSpec {
        max_depth: Some(12),
        ..TreeSpec::default()
    };
    group.bench_function("5000x9", |b| b.iter(|| tree_fit(black_box(&spec), black_box(&x), black_box(&y)).unwrap()));
    group.finish();
}

criterion_group!(kernels, bench_svd, bench_knn, bench_rbf, bench_tree);
criterion_main!(kernels);
