use criterion::{criterion_group, criterion_main, Criterion};
use growpop_bench::log_times;
use growpop_core::{condition_sum_from_times, dawson_f};
use std::hint::black_box;

fn condition_sums(c: &mut Criterion) {
    let times = log_times(0.5, 1_000_000);
    c.bench_function("condition_sum/1e6", |b| {
        b.iter(|| condition_sum_from_times(black_box(1.0), &times).unwrap())
    });
}

fn dawson(c: &mut Criterion) {
    c.bench_function("dawson_f/p2_x30", |b| {
        b.iter(|| dawson_f(2.0, 1.0, black_box(30.0)).unwrap())
    });
    c.bench_function("dawson_f/p4_x100", |b| {
        b.iter(|| dawson_f(4.0, 0.5, black_box(100.0)).unwrap())
    });
}

criterion_group!(benches, condition_sums, dawson);
criterion_main!(benches);
