use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use moire_bench::{loaded_frame, loaded_wrench, simulator, small_dataset};
use moire_core::estimator::fit;
use moire_core::features::{extract_all, spectral_peak};

fn render(c: &mut Criterion) {
    let mut group = c.benchmark_group("render");
    group.sample_size(10);
    for n in [400, 800] {
        let sim = simulator(n);
        group.bench_function(format!("frame_{n}px"), |b| b.iter(|| sim.frame(black_box(&loaded_wrench()), 0).unwrap()));
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("features");
    group.sample_size(20);
    let sim = simulator(800);
    let frame = loaded_frame(&sim);
    let reference = sim.reference().unwrap();
    // a broad contact spreads a loaded frame's energy below the peak floor,
    // so the unconstrained search runs on the unloaded frame
    let unloaded = sim.reference_image().unwrap();
    group.bench_function("spectral_peak_800px", |b| b.iter(|| spectral_peak(black_box(&unloaded), &sim.spectral).unwrap()));
    group.bench_function("extract_all_800px", |b| b.iter(|| extract_all(black_box(&frame), &reference).unwrap()));
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let samples = small_dataset();
    c.bench_function("fit_200_samples", |b| b.iter(|| fit(black_box(&samples), 1e-6, 0).unwrap()));
}

criterion_group!(benches, render, spectral, fitting);
criterion_main!(benches);
