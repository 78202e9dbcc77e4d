use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use graph_kalman::experiment::{reconstruct, relative_error_metric, ExperimentConfig};
use graph_kalman::simulate;

fn trial(c: &mut Criterion) {
    let config = ExperimentConfig::default();
    let ctx = config.context().unwrap();
    let sys = config.system(ctx, 0.3, 0.5).unwrap();
    c.bench_function("simulate_c30_m100", |b| b.iter(|| simulate(&sys, black_box(7)).unwrap()));
    let traj = simulate(&sys, 7).unwrap();
    c.bench_function("reconstruct_c30_m100", |b| {
        b.iter(|| {
            let rec = reconstruct(&sys, black_box(&traj), config.pinv_tol).unwrap();
            relative_error_metric(&rec.kalman_estimates(), &traj.states[1..], config.clip).unwrap()
        })
    });
}

criterion_group!(benches, trial);
criterion_main!(benches);
