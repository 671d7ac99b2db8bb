use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ksi_core::diagnostics::mmd2;
use ksi_core::fit::{assemble, interpolate};
use ksi_core::presets::{gauss2d_target, quadratic_features, series_features};
use ksi_core::rng::{self, Domain};
use ksi_core::{fit_table, generate, DataPairs, Diffusion, GenConfig, Schedule, ScheduleId, TableDrift};

fn bench_assemble(c: &mut Criterion) {
    let s = Schedule::Trigonometric;
    let mut group = c.benchmark_group("assemble");
    let g = gauss2d_target();
    let pairs = DataPairs::with_generated_noise(g.sample(10_000, &mut rng::stream(1, Domain::Target, 0)), 1).unwrap();
    let f = quadratic_features(2);
    let batch = interpolate(&pairs, &s, 0.5);
    group.bench_function("gauss2d_n10000_p6", |b| {
        b.iter(|| assemble(&f, black_box(&batch)).unwrap())
    });

    let len = 256;
    let series = ksi_core::data::CascadeSpec::new(len)
        .realization(&mut rng::stream(1, Domain::Target, 0))
        .unwrap();
    let shifts = ksi_core::data::circular_shifts(&series, 64, 1).unwrap();
    let pairs = DataPairs::with_generated_noise(shifts, 1).unwrap();
    let f = series_features(len, 5, 3).unwrap();
    let batch = interpolate(&pairs, &s, 0.5);
    group.bench_function(BenchmarkId::new("series", ksi_core::FeatureMap::dim_out(&f)), |b| {
        b.iter(|| assemble(&f, black_box(&batch)).unwrap())
    });
    group.finish();
}

fn bench_generate(c: &mut Criterion) {
    let s = Schedule::Trigonometric;
    let g = gauss2d_target();
    let pairs = DataPairs::with_generated_noise(g.sample(5_000, &mut rng::stream(2, Domain::Target, 0)), 2).unwrap();
    let f = quadratic_features(2);
    let (table, _) = fit_table(&f, &pairs, &s, 100, 1e-8).unwrap();
    let drift = TableDrift::new(&table, &f).unwrap();
    let mut group = c.benchmark_group("generate");
    group.sample_size(20);
    for mode in [Diffusion::Optimal, Diffusion::Zero, Diffusion::Constant(1.0)] {
        let cfg = GenConfig {
            steps: 100,
            num_samples: 2_000,
            seed: 3,
            schedule: ScheduleId::Trigonometric,
            diffusion: mode,
        };
        group.bench_function(mode.label(), |b| {
            b.iter(|| generate(&drift, &s, black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

fn bench_mmd(c: &mut Criterion) {
    let g = gauss2d_target();
    let mut group = c.benchmark_group("mmd2");
    group.sample_size(10);
    for n in [500usize, 2_000] {
        let x = g.sample(n, &mut rng::stream(4, Domain::Evaluation, 0));
        let y = g.sample(n, &mut rng::stream(5, Domain::Evaluation, 0));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| mmd2(x.view(), y.view(), Some(1.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_assemble, bench_generate, bench_mmd);
criterion_main!(benches);
