use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graph_kalman::dynamics::StepModel;
use graph_kalman::kalman::{matrix_riccati_step, spectral_error_update};
use graph_kalman::{
    cycle_graph, eigendecompose, eval_filter, FrequencyResponse, GraphShift, Polynomial, ShiftKind, SpectralContext,
};

fn step() -> StepModel {
    StepModel { a: Polynomial::new(vec![0.0, 0.25]), b: Polynomial::new(vec![1.0, -0.5]), sigma: 0.3, sigma_obs: 0.5 }
}

fn riccati(c: &mut Criterion) {
    let mut group = c.benchmark_group("riccati_step");
    for n in [30, 100, 300] {
        let shift = GraphShift::build(&cycle_graph(n).unwrap(), ShiftKind::Laplacian).unwrap();
        let ctx = Arc::new(SpectralContext::new(&shift).unwrap());
        let s = step();
        let p = FrequencyResponse::constant(ctx.spectrum(), 1.0);
        group.bench_with_input(BenchmarkId::new("spectral", n), &n, |bch, _| {
            bch.iter(|| spectral_error_update(black_box(&p), &s).unwrap())
        });
        let a = eval_filter(&s.a, ctx.decomposition()).into_matrix();
        let b = eval_filter(&s.b, ctx.decomposition()).into_matrix();
        let pm = p.matrix(&ctx);
        group.bench_with_input(BenchmarkId::new("matrix", n), &n, |bch, _| {
            bch.iter(|| matrix_riccati_step(black_box(&pm), &a, &b, s.sigma, s.sigma_obs).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose");
    for n in [30, 100] {
        let shift = GraphShift::build(&cycle_graph(n).unwrap(), ShiftKind::Laplacian).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &shift, |bch, shift| {
            bch.iter(|| eigendecompose(black_box(shift)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, riccati, eigen);
criterion_main!(benches);
