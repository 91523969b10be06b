use std::hint::black_box;
use std::time::Duration;

use arsvd_bench::{fixture, RANK, SHAPES};
use arsvd_core::select::select;
use arsvd_core::{arsvd_fixed, power_blocks, svd_exact, ArsvdConfig, SelectConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn fixed_rank(c: &mut Criterion) {
    let mut group = c.benchmark_group("arsvd_fixed");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    for &(n, p) in &SHAPES {
        let x = fixture(n, p, 1);
        let cfg = ArsvdConfig::new(RANK, 2, 7);
        group.throughput(Throughput::Elements((n * p) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &x, |b, x| {
            b.iter(|| arsvd_fixed(black_box(x), RANK, 2, &cfg).unwrap())
        });
    }
    group.finish();
}

fn power_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("power_blocks");
    group.sample_size(10);
    let (n, p) = SHAPES[1];
    let x = fixture(n, p, 2);
    for t_max in [2, 5, 10] {
        let cfg = ArsvdConfig::new(2 * RANK, t_max, 7);
        group.bench_with_input(BenchmarkId::from_parameter(t_max), &cfg, |b, cfg| {
            b.iter(|| power_blocks(black_box(&x), cfg).unwrap())
        });
    }
    group.finish();
}

fn dense_reference(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_exact");
    group.sample_size(10);
    for n in [100, 200, 400] {
        let x = fixture(n, n, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| b.iter(|| svd_exact(black_box(x)).unwrap()));
    }
    group.finish();
}

fn rank_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("select");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    let x = fixture(300, 300, 4);
    let cfg = ArsvdConfig::new(2 * RANK, 6, 7);
    group.bench_function("300x300", |b| b.iter(|| select(black_box(&x), &cfg, &SelectConfig::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, fixed_rank, power_sweep, dense_reference, rank_selection);
criterion_main!(benches);
