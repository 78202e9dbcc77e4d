use std::sync::Arc;

use graph_kalman::baselines::inverse_error_covariance;
use graph_kalman::experiment::{reconstruct, ExperimentConfig};
use graph_kalman::stationary::fit_covariance_response;
use graph_kalman::{
    cycle_graph, run_filter, sample, simulate, DynamicalSystem, FilterOptions, GraphShift, Polynomial, ShiftKind,
    SpectralContext, StationaryModel, StepModel,
};
use nalgebra::{DMatrix, DVector};

fn cycle(n: usize) -> Arc<SpectralContext> {
    let shift = GraphShift::build(&cycle_graph(n).unwrap(), ShiftKind::Laplacian).unwrap();
    Arc::new(SpectralContext::new(&shift).unwrap())
}

fn paper_step(sigma: f64, sigma_obs: f64) -> StepModel {
    StepModel { a: Polynomial::new(vec![0.0, 0.25]), b: Polynomial::new(vec![1.0, -0.5]), sigma, sigma_obs }
}

#[test]
fn filtered_stationary_signal_has_the_predicted_covariance() {
    // q(S) x is stationary with covariance (q² h)(S); the empirical covariance
    // is fit by a polynomial filter far better than by chance.
    let ctx = cycle(8);
    let h = Polynomial::new(vec![0.1, 0.25]);
    let q = Polynomial::new(vec![1.0, -0.3]);
    let model = StationaryModel::new(h.clone(), ctx.clone()).unwrap();
    let mut rng = graph_kalman::rng::seeded(9);
    let n = 200_000;
    let mut acc = DMatrix::<f64>::zeros(8, 8);
    for _ in 0..n {
        let x = sample(&model, &mut rng);
        let y = graph_kalman::apply_filter(&q, ctx.shift(), &x).unwrap();
        acc.ger(1.0, &y, &y, 1.0);
    }
    let emp = acc / n as f64;
    let (_, residual) = fit_covariance_response(&emp, ctx.decomposition(), ctx.spectrum()).unwrap();
    assert!(residual < 0.02, "{residual}");
    let want = graph_kalman::eval_filter(&(&q.square() * &h), ctx.decomposition()).into_matrix();
    assert!((&emp - &want).norm() < 0.02 * want.norm());
}

#[test]
fn matrix_check_agrees_on_the_cycle_experiment() {
    let ctx = cycle(30);
    let sys =
        DynamicalSystem::time_invariant(ctx.clone(), 100, paper_step(0.3, 0.5), Polynomial::constant(0.5)).unwrap();
    let traj = simulate(&sys, 5).unwrap();
    let states = run_filter(
        &sys,
        &traj.observations,
        DVector::zeros(30),
        &Polynomial::constant(0.5),
        FilterOptions { matrix_check: true },
    )
    .unwrap();
    assert_eq!(states.len(), 101);
    assert!(states.iter().skip(1).all(|s| s.matrix_gain.is_some()));
}

#[test]
fn kalman_error_is_below_inverse_filtering_in_expectation() {
    let ctx = cycle(30);
    let step = paper_step(0.3, 0.5);
    let sys = DynamicalSystem::time_invariant(ctx.clone(), 50, step.clone(), Polynomial::zero()).unwrap();
    let states = run_filter(
        &sys,
        &vec![DVector::zeros(30); 50],
        DVector::zeros(30),
        &Polynomial::zero(),
        FilterOptions::default(),
    )
    .unwrap();
    let inverse = inverse_error_covariance(&step.b, step.sigma_obs, ctx.spectrum(), None).unwrap();
    for s in &states[1..] {
        assert!(s.mean_squared_error(ctx.spectrum()) < inverse.trace(ctx.spectrum()));
    }
}

#[test]
fn noiseless_observations_are_tracked_after_one_step() {
    let ctx = cycle(10);
    let config = ExperimentConfig { n: 10, m: 10, ..ExperimentConfig::default() };
    let sys = config.system(ctx, 0.5, 0.0).unwrap();
    let traj = simulate(&sys, 3).unwrap();
    let rec = reconstruct(&sys, &traj, config.pinv_tol).unwrap();
    for k in 1..=10 {
        let err = (&rec.kalman[k].estimate - &traj.states[k]).norm();
        assert!(err <= 1e-9 * traj.states[k].norm().max(1.0), "step {k}: {err}");
    }
}

#[test]
fn errors_report_the_failing_step() {
    let ctx = cycle(6);
    let sys = DynamicalSystem::time_invariant(ctx, 3, paper_step(0.3, 0.5), Polynomial::zero()).unwrap();
    let mut obs = vec![DVector::zeros(6); 3];
    obs[1] = DVector::zeros(5);
    let err = run_filter(&sys, &obs, DVector::zeros(6), &Polynomial::zero(), FilterOptions::default()).unwrap_err();
    assert!(err.to_string().contains("step 2"), "{err}");
}
