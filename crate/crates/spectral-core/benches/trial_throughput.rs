//! Parallel vs. sequential throughput of the Monte Carlo trial kernel and
//! of a full experiment run.
//!
//! Run with `cargo bench -p spectral-core`.

use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spectral_core::experiments::{
    run_subspace_experiment, ExperimentConfig, ExperimentMode, MatrixSpec, SigmaProfile,
};
use spectral_core::linalg;
use spectral_core::mechanism::{self, NoiseConfig};
use spectral_core::parallel::{map_trials, map_trials_serial};
use spectral_core::rng::derive_seed;

fn trial_kernel(c: &mut Criterion) {
    let spec = MatrixSpec {
        m: 200,
        d: 8,
        profile: SigmaProfile::Exponential {
            sigma1: 16.0,
            ratio: 0.5,
        },
        rotation_seed: 1,
    };
    let a = spectral_core::experiments::gen_matrix(&spec).unwrap();
    let factors = linalg::svd(&a).unwrap();
    let truth = mechanism::subspace_truth(&factors, 2).unwrap();
    let t = 1e-4;
    let trial = |i: usize| {
        let cfg = NoiseConfig::new(t, derive_seed(7, "trial", i as u64)).unwrap();
        mechanism::release_subspace_with(&truth, &a, cfg)
            .unwrap()
            .error_frobenius
            .unwrap()
    };

    let mut group = c.benchmark_group("subspace_trials_200x8");
    group.sample_size(10);
    for trials in [64usize, 256] {
        group.bench_with_input(BenchmarkId::new("serial", trials), &trials, |b, &n| {
            b.iter(|| map_trials_serial(n, trial))
        });
        group.bench_with_input(BenchmarkId::new("parallel", trials), &trials, |b, &n| {
            b.iter(|| map_trials(n, trial))
        });
    }
    group.finish();
}

fn full_experiment(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        spec: MatrixSpec {
            m: 200,
            d: 8,
            profile: SigmaProfile::Exponential {
                sigma1: 16.0,
                ratio: 0.5,
            },
            rotation_seed: 1,
        },
        k: 2,
        t_values: vec![1e-4],
        trials: 128,
        seed: 7,
        mode: ExperimentMode::Subspace,
        sweep_points: Vec::new(),
        bounds_requested: BTreeSet::new(),
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut group = c.benchmark_group("subspace_experiment_128_trials");
    group.sample_size(10);
    group.bench_function("one_thread_pool", |b| {
        b.iter(|| single.install(|| run_subspace_experiment(&cfg).unwrap()))
    });
    group.bench_function("default_pool", |b| {
        b.iter(|| run_subspace_experiment(&cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, trial_kernel, full_experiment);
criterion_main!(benches);
