use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qinf_core::constructions::cantor::{cantor_samples, cantor_scheme};
use qinf_core::constructions::tsl::tsl_scheme;
use qinf_core::measures::{entropy_ratio_dimension, local_dimension_series};
use qinf_core::{CantorMode, ProductMeasure, StochasticVector};

fn entropy_ratio(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let scheme = tsl_scheme(&v, 64, 64, 10).unwrap();
    let m = ProductMeasure::xi(&v, scheme).unwrap();
    c.bench_function("entropy_ratio/xi_64_64_10_groups", |b| {
        b.iter(|| entropy_ratio_dimension(black_box(&m), 10, 1).unwrap())
    });
}

fn local_dimension(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let scheme = tsl_scheme(&v, 4, 16, 3).unwrap();
    let m = ProductMeasure::xi(&v, scheme).unwrap();
    let word = m.sample(2000, 1).unwrap();
    c.bench_function("local_dimension/xi_4_16_2000", |b| {
        b.iter(|| local_dimension_series(&m, black_box(&word.digits)).unwrap())
    });
}

fn cantor(c: &mut Criterion) {
    let v = StochasticVector::luroth();
    let scheme = cantor_scheme(&v, 8).unwrap();
    let mut g = c.benchmark_group("cantor");
    g.sample_size(10);
    g.bench_function("gamma_samples_1000_depth3", |b| {
        b.iter(|| cantor_samples(&scheme, &v, CantorMode::GammaWeighted, 3, 1000, 2024).unwrap())
    });
    g.finish();
}

criterion_group!(benches, entropy_ratio, local_dimension, cantor);
criterion_main!(benches);
