use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use ota_core::constellation::{latitude_grid, los_profile, propagate, WalkerConstellation};
use ota_core::detection::{run_detection, DetectionConfig};
use ota_core::estimation::{run_analog_ceo, EstimationConfig};
use ota_core::separation::adder_mac_sum_capacity;
use ota_core::sources::GaussianCeoModel;
use ota_core::SeedStream;

fn capacity(c: &mut Criterion) {
    c.bench_function("adder_mac_sum_capacity/step_1e-3", |b| {
        b.iter(|| adder_mac_sum_capacity(black_box(1e-3)).unwrap())
    });
}

fn analog_ceo(c: &mut Criterion) {
    let cfg = EstimationConfig::new(GaussianCeoModel::new(1.0, 1.0, 64).unwrap(), 10.0, 1.0, 10_000).unwrap();
    c.bench_function("analog_ceo/N64_10k_trials", |b| {
        b.iter(|| run_analog_ceo(black_box(&cfg), SeedStream::new(1)))
    });
}

fn detection(c: &mut Criterion) {
    let cfg = DetectionConfig::binary(9).unwrap();
    c.bench_function("detection/N9_10k_trials", |b| {
        b.iter(|| run_detection(black_box(&cfg), 10_000, SeedStream::new(2)).unwrap())
    });
}

fn geometry(c: &mut Criterion) {
    let starlink = WalkerConstellation::preset("starlink-p1-like").unwrap();
    c.bench_function("propagate/starlink_1584", |b| b.iter(|| propagate(black_box(&starlink), 1234.5)));
    let lats = latitude_grid(10.0).unwrap();
    let mut group = c.benchmark_group("los_profile");
    group.sample_size(10);
    group.bench_function("starlink_10deg_100samples", |b| {
        b.iter(|| los_profile(black_box(&starlink), 40.0, &lats, 100, 86_400.0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, capacity, analog_ceo, detection, geometry);
criterion_main!(benches);
