use std::sync::Arc;
use std::time::Duration;

use attenface_core::calibration::{measure, measure_sequential, TrialConfig};
use attenface_core::camera::SimulatedCameras;
use attenface_core::engine::{
    run_jobs, run_jobs_sequential, DeviceProvider, EngineOptions, NullSink,
};
use attenface_core::scenario::{build_scenario, generate_scenario, GeneratorConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sessions(c: &mut Criterion) {
    let config = GeneratorConfig {
        students: 60,
        sessions: 20,
        courses: 20,
        min_blocks: 6,
        max_blocks: 6,
        noise_sigma: 0.05,
        ..Default::default()
    };
    let scenario = Arc::new(build_scenario(generate_scenario(&config)).unwrap());
    let jobs: Vec<_> = scenario
        .sessions
        .iter()
        .map(|s| scenario.session_job(s).unwrap())
        .collect();
    let provider = DeviceProvider::new(Arc::new(SimulatedCameras::new(Arc::clone(&scenario))));

    let mut group = c.benchmark_group("sessions");
    group.sample_size(10);
    for (label, cost) in [("cpu", None), ("io_1ms", Some(Duration::from_millis(1)))] {
        let options = EngineOptions {
            match_cost: cost,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new("sequential", label), |b| {
            b.iter(|| run_jobs_sequential(&jobs, &provider, &NullSink, &options))
        });
        group.bench_function(BenchmarkId::new("parallel", label), |b| {
            b.iter(|| run_jobs(&jobs, &provider, &NullSink, &options))
        });
    }
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let config = TrialConfig {
        trials: 200,
        ..Default::default()
    };
    let mut group = c.benchmark_group("calibration");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| measure_sequential(&config).unwrap())
    });
    group.bench_function("parallel", |b| b.iter(|| measure(&config).unwrap()));
    group.finish();
}

criterion_group!(benches, sessions, calibration);
criterion_main!(benches);
