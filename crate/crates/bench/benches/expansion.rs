use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qinf_core::codec::{cylinder_of, encode_batch, encode_rational};
use qinf_core::numeric::ratio;
use qinf_core::stats::lln_harness;
use qinf_core::{SamplingMode, StochasticVector};

fn encode(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let x = ratio(123_456_789, 987_654_321);
    let mut g = c.benchmark_group("encode");
    for depth in [10usize, 30, 100] {
        g.bench_with_input(BenchmarkId::new("luroth", depth), &depth, |b, &d| {
            b.iter(|| encode_rational(black_box(&x), &v, d).unwrap())
        });
    }
    let xs: Vec<_> = (1..1000u64).map(|n| ratio(n * 7919 % 1_000_003, 1_000_003)).collect();
    g.bench_function("luroth_batch_1000x30", |b| b.iter(|| encode_batch(black_box(&xs), &v, 30)));
    g.finish();
}

fn cylinders(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let word = encode_rational(&ratio(2, 7), &v, 30).unwrap().digits;
    c.bench_function("cylinder_of/luroth_30", |b| b.iter(|| cylinder_of(black_box(&word), &v).unwrap()));
}

fn lln(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let mut g = c.benchmark_group("lln");
    g.sample_size(10);
    g.bench_function("renewal_1e4x1000", |b| {
        b.iter(|| lln_harness(&v, 10_000, 1000, 5, 2024, SamplingMode::Renewal).unwrap())
    });
    g.finish();
}

criterion_group!(benches, encode, cylinders, lln);
criterion_main!(benches);
