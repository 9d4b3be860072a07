use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lte_bench::logistic_problem;
use lte_core::glm::{fit_logistic, GlmOptions};
use std::hint::black_box;

fn irls(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_logistic");
    let opts = GlmOptions::default();
    for &(n, p) in &[(1_000, 5), (5_000, 10), (20_000, 20)] {
        let (x, y) = logistic_problem(n, p, 7);
        let w = vec![1.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &(x, y, w), |b, (x, y, w)| {
            b.iter(|| fit_logistic(black_box(x), black_box(y), w, None, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, irls);
criterion_main!(benches);
