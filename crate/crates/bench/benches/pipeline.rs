use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mhksc_bench::{default_split, planted};
use mhksc_core::hierarchy::{self, build_affinity, greedy_first_order, greedy_max_order};
use mhksc_core::ksc;

fn kernel_and_training(c: &mut Criterion) {
    let mut group = c.benchmark_group("ksc");
    group.sample_size(10);
    for nodes in [2_000, 8_000] {
        let g = planted(nodes);
        let split = default_split(&g);
        group.bench_with_input(BenchmarkId::new("build_kernel", nodes), &nodes, |b, _| {
            b.iter(|| ksc::build_kernel_matrix(&g, black_box(&split.train), 10_000).unwrap())
        });
        let kernel = ksc::build_kernel_matrix(&g, &split.train, 10_000).unwrap();
        group.bench_with_input(BenchmarkId::new("train", nodes), &nodes, |b, _| {
            b.iter(|| ksc::train(black_box(&kernel), 10).unwrap())
        });
        let model = ksc::train(&kernel, 10).unwrap();
        group.bench_with_input(BenchmarkId::new("project_batch", nodes), &nodes, |b, _| {
            b.iter(|| ksc::project_batch(&model, &g, black_box(&split.test), 1024).unwrap())
        });
    }
    group.finish();
}

fn hierarchy_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("hierarchy");
    group.sample_size(10);
    let g = planted(8_000);
    let split = default_split(&g);
    let kernel = ksc::build_kernel_matrix(&g, &split.train, 10_000).unwrap();
    let model = ksc::train(&kernel, 10).unwrap();
    let p_valid = ksc::project_batch(&model, &g, &split.valid, 1024).unwrap();
    let p_test = ksc::project_batch(&model, &g, &split.test, 1024).unwrap();
    let s = build_affinity(&p_valid, 10_000).unwrap();

    group.bench_function("build_affinity", |b| b.iter(|| build_affinity(black_box(&p_valid), 10_000).unwrap()));
    group.bench_function("greedy_max_order", |b| b.iter(|| greedy_max_order(black_box(&s), 0.15)));
    group.bench_function("greedy_first_order", |b| {
        b.iter(|| greedy_first_order(black_box(&p_test), 0.15, 10_000, 10_000).unwrap())
    });
    group.bench_function("determine_thresholds", |b| {
        b.iter(|| hierarchy::determine_thresholds(black_box(&p_valid), 0.15, 10_000).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernel_and_training, hierarchy_steps);
criterion_main!(benches);
