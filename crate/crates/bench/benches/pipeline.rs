use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array2, Array3};
use std::hint::black_box;

use ntfcast_core::arima::{self, ArimaSpec};
use ntfcast_core::ga::{evaluate_fitness, Chromosome, FitnessContext, FitnessKind};
use ntfcast_core::ntf::{self, NtfConfig, DEFAULT_EPSILON};
use ntfcast_core::tensor::{reconstruct_values, DemandTensor};

fn synthetic(k: usize) -> DemandTensor {
    let values = Array3::from_shape_fn((10, 10, k), |(i, j, t)| {
        let t = t as f64;
        (1.0 + i as f64) * (2.0 + j as f64 * 0.3) * (50.0 + 2.0 * t + 5.0 * (t * 0.4).sin())
    });
    DemandTensor::from_values(values, 1963).unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let x = synthetic(41);
    let mut group = c.benchmark_group("ntf_sweep");
    for rank in [2usize, 8] {
        let model = ntf::init_factors(x.dims(), rank, 10, DEFAULT_EPSILON);
        group.bench_with_input(BenchmarkId::from_parameter(rank), &model, |b, m| {
            b.iter(|| ntf::update_sweep(black_box(&x), m, DEFAULT_EPSILON).unwrap())
        });
    }
    group.finish();
}

fn bench_factorize(c: &mut Criterion) {
    let x = synthetic(41);
    let config = NtfConfig::default();
    c.bench_function("ntf_factorize_r8_100it", |b| {
        b.iter(|| ntf::factorize(black_box(&x), &config).unwrap())
    });
}

fn bench_arima(c: &mut Criterion) {
    let series: Vec<f64> = (0..41)
        .map(|t| 100.0 + 3.0 * t as f64 + 8.0 * (t as f64 * 0.7).sin())
        .collect();
    let mut group = c.benchmark_group("arima_fit");
    for spec in [
        ArimaSpec::new(1, 1, 0),
        ArimaSpec::new(3, 2, 3),
        ArimaSpec::new(5, 1, 5),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(spec), &spec, |b, s| {
            b.iter(|| arima::fit(black_box(&series), *s))
        });
    }
    group.finish();
}

fn bench_fitness(c: &mut Criterion) {
    let data = synthetic(47);
    let train = ntfcast_core::tensor::slice_years(&data, 1963, 2003).unwrap();
    let val = ntfcast_core::tensor::slice_years(&data, 2004, 2009).unwrap();
    let result = ntf::factorize(
        &train,
        &NtfConfig {
            iterations: 30,
            ..NtfConfig::default()
        },
    )
    .unwrap();
    let ctx = FitnessContext::new(&result.model, &val, FitnessKind::NegTotalMse).unwrap();
    let chrom = Chromosome::uniform(ArimaSpec::new(3, 2, 3), 8);
    c.bench_function("fitness_r8", |b| b.iter(|| evaluate_fitness(black_box(&chrom), &ctx)));

    let c_hat = Array2::from_elem((6, 8), 1.0);
    c.bench_function("reconstruct_10x10x6_r8", |b| {
        b.iter(|| reconstruct_values(result.model.factor_a(), result.model.factor_b(), black_box(&c_hat)))
    });
}

criterion_group!(benches, bench_sweep, bench_factorize, bench_arima, bench_fitness);
criterion_main!(benches);
