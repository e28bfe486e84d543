use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qmonitor_core::coefficients::{estimate_coefficients_mc_with, sample_interior_state, McOptions, Scenario};
use qmonitor_core::harness::{run_trajectory, TrajectoryConfig};
use qmonitor_core::parallel::{shard_rng, Execution};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn trajectories(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectories");
    group.sample_size(10);
    for qubits in [2usize, 4] {
        for (name, execution) in MODES {
            let cfg = TrajectoryConfig {
                qubits,
                epsilon: 0.1,
                lambdas: vec![0.1],
                steps: 20_000,
                trajectories: 8,
                execution,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, format!("q={qubits}")), &cfg, |b, cfg| {
                b.iter(|| black_box(run_trajectory(cfg).unwrap()))
            });
        }
    }
    group.finish();
}

fn coefficient_estimates(c: &mut Criterion) {
    let mut group = c.benchmark_group("coefficient_estimates");
    group.sample_size(10);
    let scenario = Scenario::MonitoredOneOfTwo { lambda: 1.0 };
    let state = sample_interior_state(&scenario, 0.5, &mut shard_rng(1, 0)).unwrap();
    for (name, execution) in MODES {
        let options = McOptions { execution, ..Default::default() };
        group.bench_function(name, |b| {
            b.iter(|| black_box(estimate_coefficients_mc_with(&scenario, &state, 0.02, 100_000, 7, options).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, trajectories, coefficient_estimates);
criterion_main!(benches);
