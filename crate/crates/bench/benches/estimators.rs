use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use flattop::bandwidth::{cv_bandwidth_gaussian, default_frequency_grid, ecf, log_grid, select_bandwidth};
use flattop::cdf::evaluate_on_grid;
use flattop::io::parse_grid;
use flattop::survival::evaluate_survival_on_grid;
use flattop::{BandwidthRule, EstimatorConfig, FlatTopSpec, KernelTable, SmoothingKernel};
use flattop_bench::{censored_weibull_sample, normal_sample};

fn table_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("table_build");
    group.sample_size(10);
    for tol in [1e-6, 1e-8] {
        group.bench_with_input(BenchmarkId::new("trapezoid", tol), &tol, |b, &tol| {
            b.iter(|| KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), tol).unwrap())
        });
    }
    group.bench_function("smooth_1e-6", |b| {
        b.iter(|| KernelTable::build(FlatTopSpec::smooth_trapezoid(1.0, 0.05).unwrap(), 1e-6).unwrap())
    });
    group.finish();
}

fn kbar_lookup(c: &mut Criterion) {
    let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
    let xs: Vec<f64> = (0..1000).map(|i| -20.0 + 0.04 * i as f64).collect();
    c.bench_function("kbar_table_1000", |b| {
        b.iter(|| xs.iter().map(|&x| table.kbar(black_box(x))).sum::<f64>())
    });
    let spec = FlatTopSpec::trapezoid(0.75).unwrap();
    c.bench_function("kbar_closed_form_1000", |b| {
        b.iter(|| xs.iter().map(|&x| spec.kbar(black_box(x))).sum::<f64>())
    });
}

fn estimation(c: &mut Criterion) {
    let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
    let grid = parse_grid("-3:3:121").unwrap();
    let mut group = c.benchmark_group("smoothed_cdf_grid121");
    for n in [30usize, 1_000, 10_000] {
        let sample = normal_sample(n, 1);
        let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), 0.3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| evaluate_on_grid(s, &cfg, &grid).unwrap())
        });
    }
    group.finish();

    let sample = censored_weibull_sample(200, 2);
    let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), 0.2)
        .with_boundary(0.0)
        .standardized(true);
    let grid = parse_grid("0:3:121").unwrap();
    c.bench_function("smoothed_survival_n200", |b| {
        b.iter(|| evaluate_survival_on_grid(&sample, &cfg, &grid).unwrap())
    });
}

fn bandwidth(c: &mut Criterion) {
    let mut group = c.benchmark_group("bandwidth");
    for n in [30usize, 10_000] {
        let sample = normal_sample(n, 3);
        let freqs = default_frequency_grid(sample.times()).unwrap();
        let rule = BandwidthRule::threshold(n, 0.75);
        group.bench_with_input(BenchmarkId::new("ecf_threshold", n), &sample, |b, s| {
            b.iter(|| select_bandwidth(&ecf(s, &freqs).unwrap(), &rule).unwrap())
        });
    }
    let sample = normal_sample(30, 4);
    let hs = log_grid(0.05, 2.0, 30);
    group.bench_function("gaussian_cv_n30", |b| {
        b.iter(|| cv_bandwidth_gaussian(&sample, &hs).unwrap())
    });
    group.finish();
}

criterion_group!(benches, table_build, kbar_lookup, estimation, bandwidth);
criterion_main!(benches);
