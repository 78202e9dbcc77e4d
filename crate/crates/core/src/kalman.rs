//! Graph Kalman filter for polynomial state and observation filters.
//!
//! Because `A_k`, `B_k`, `K_k` and `P_k` are all polynomials of `S`, the
//! Riccati recursion splits into one scalar Kalman filter per distinct
//! eigenvalue `μ_j`:
//!
//! ```text
//! X_j = a(μ_j)² p_{k-1}(μ_j) + σ_k²                  prior error variance
//! γ_j = X_j b(μ_j) / (b(μ_j)² X_j + σ̃_k²)            gain
//! π_j = σ̃_k² X_j  / (b(μ_j)² X_j + σ̃_k²)             posterior error variance
//! ```
//!
//! That spectral recursion is the production path. The dense matrix Riccati
//! recursion is kept alongside for cross-checking and for non-polynomial
//! state or observation matrices.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{DynamicalSystem, StepModel};
use crate::error::{Error, Result};
use crate::filter::{apply_filter, eval_filter, FrequencyResponse};
use crate::poly::Polynomial;
use crate::spectral::{DistinctSpectrum, SpectralContext};
use crate::stationary::clamp_psd;

/// Condition number above which the innovation matrix counts as singular.
pub const MAX_INNOVATION_CONDITION: f64 = 1e14;

/// Relative tolerance for agreement between the spectral and matrix paths.
pub const DUAL_FORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KalmanState {
    pub step: usize,
    /// `x̂_k`
    pub estimate: DVector<f64>,
    /// `p_k` with `P_k = p_k(S) = cov(x_k − x̂_k)`.
    pub error_covariance: FrequencyResponse,
    /// `g_k` with `K_k = g_k(S)`; absent for the initial state.
    pub gain: Option<FrequencyResponse>,
    /// Dense `P_k`, present when the matrix cross-check ran.
    pub matrix_error_covariance: Option<DMatrix<f64>>,
    /// Dense `K_k`, present when the matrix cross-check ran.
    pub matrix_gain: Option<DMatrix<f64>>,
}

impl KalmanState {
    pub fn error_polynomial(&self) -> Polynomial {
        self.error_covariance.to_polynomial()
    }

    pub fn gain_polynomial(&self) -> Option<Polynomial> {
        self.gain.as_ref().map(FrequencyResponse::to_polynomial)
    }

    /// `E‖x̂_k − x_k‖² = trace P_k = Σ_n p_k(λ(n))`.
    pub fn mean_squared_error(&self, spectrum: &DistinctSpectrum) -> f64 {
        self.error_covariance.trace(spectrum)
    }
}

/// One scalar Riccati step at eigenvalue `mu`: returns `(γ, π)`.
pub fn scalar_riccati(p_prev: f64, a: f64, b: f64, sigma: f64, sigma_obs: f64, mu: f64) -> Result<(f64, f64)> {
    let prior = a * a * p_prev + sigma * sigma;
    let innovation = b * b * prior + sigma_obs * sigma_obs;
    let cross = prior * b;
    if innovation > 0.0 {
        Ok((cross / innovation, sigma_obs * sigma_obs * prior / innovation))
    } else if cross == 0.0 {
        // Nothing observed and nothing to correct.
        Ok((0.0, prior))
    } else {
        Err(Error::SingularGain { eigenvalue: mu })
    }
}

fn spectral_step(p_prev: &FrequencyResponse, step: &StepModel) -> Result<(FrequencyResponse, FrequencyResponse)> {
    let mut gains = Vec::with_capacity(p_prev.len());
    let mut errors = Vec::with_capacity(p_prev.len());
    for (&mu, &p) in p_prev.nodes().iter().zip(p_prev.values()) {
        let (g, e) = scalar_riccati(p, step.a.eval(mu), step.b.eval(mu), step.sigma, step.sigma_obs, mu)?;
        gains.push(g);
        errors.push(e);
    }
    let nodes = p_prev.nodes().to_vec();
    Ok((FrequencyResponse::from_values_at(nodes.clone(), gains), FrequencyResponse::from_values_at(nodes, errors)))
}

/// Kalman gain `g_k` at every distinct eigenvalue.
pub fn spectral_gain(p_prev: &FrequencyResponse, step: &StepModel) -> Result<FrequencyResponse> {
    Ok(spectral_step(p_prev, step)?.0)
}

/// Error covariance `p_k` at every distinct eigenvalue.
pub fn spectral_error_update(p_prev: &FrequencyResponse, step: &StepModel) -> Result<FrequencyResponse> {
    Ok(spectral_step(p_prev, step)?.1)
}

/// Dense Riccati step returning `(K_k, P_k)`:
///
/// ```text
/// M   = A P Aᵀ + σ² I
/// K   = M Bᵀ (B M Bᵀ + σ̃² I)⁻¹
/// P_k = (I − K B) M
/// ```
///
/// The innovation matrix is factored by Cholesky; no explicit inverse is formed.
pub fn matrix_riccati_step(
    p_prev: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: f64,
    sigma_obs: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = p_prev.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let prior = a * p_prev * a.transpose() + &id * (sigma * sigma);
    let prior = (&prior + prior.transpose()) * 0.5;
    let innovation = b * &prior * b.transpose() + &id * (sigma_obs * sigma_obs);
    let innovation = (&innovation + innovation.transpose()) * 0.5;

    let eig = innovation.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo.is_nan() || lo <= 0.0 || hi / lo > MAX_INNOVATION_CONDITION {
        return Err(Error::NumericalFailure(format!(
            "innovation matrix is numerically singular (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    let chol = innovation
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("innovation matrix is not positive definite".into()))?;
    // Kᵀ = (B M Bᵀ + σ̃² I)⁻¹ B M since M and the innovation are symmetric.
    let gain = chol.solve(&(b * &prior)).transpose();
    let post = (&id - &gain * b) * &prior;
    let post = (&post + post.transpose()) * 0.5;
    Ok((gain, post))
}

pub fn matrix_gain(
    p_prev: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: f64,
    sigma_obs: f64,
) -> Result<DMatrix<f64>> {
    Ok(matrix_riccati_step(p_prev, a, b, sigma, sigma_obs)?.0)
}

pub fn matrix_error_update(
    p_prev: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: f64,
    sigma_obs: f64,
) -> Result<DMatrix<f64>> {
    Ok(matrix_riccati_step(p_prev, a, b, sigma, sigma_obs)?.1)
}

/// Prediction `x̂_{k-1/2} = a_k(S) x̂_{k-1}`.
pub fn predict(state: &KalmanState, sys: &DynamicalSystem, k: usize) -> Result<DVector<f64>> {
    let step = sys.step(k)?;
    apply_filter(&step.a, sys.context().shift(), &state.estimate)
}

/// Correction `x̂_k = x̂_{k-1/2} + g_k(S) (z_k − b_k(S) x̂_{k-1/2})`.
pub fn update(
    ctx: &SpectralContext,
    predicted: &DVector<f64>,
    observation: &DVector<f64>,
    b: &Polynomial,
    gain: &FrequencyResponse,
) -> Result<DVector<f64>> {
    if observation.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "observation length {} does not match order {}",
            observation.len(),
            predicted.len()
        )));
    }
    let innovation = observation - apply_filter(b, ctx.shift(), predicted)?;
    Ok(predicted + gain.apply(ctx, &innovation))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FilterOptions {
    /// Also run the dense Riccati recursion and fail on disagreement beyond
    /// [`DUAL_FORM_TOLERANCE`].
    pub matrix_check: bool,
}

/// Runs the filter over `observations` (`z_1..z_M`) from `x̂_0` with initial
/// error covariance `p_0`. Returns the states for `k = 0..=M`.
pub fn run_filter(
    sys: &DynamicalSystem,
    observations: &[DVector<f64>],
    x0: DVector<f64>,
    p0: &Polynomial,
    options: FilterOptions,
) -> Result<Vec<KalmanState>> {
    let ctx = sys.context();
    if observations.len() != sys.horizon() {
        return Err(Error::InvalidArgument(format!(
            "expected {} observations, got {}",
            sys.horizon(),
            observations.len()
        )));
    }
    if x0.len() != ctx.order() {
        return Err(Error::InvalidArgument(format!("initial estimate has length {}", x0.len())));
    }
    let p0 = clamp_psd(&FrequencyResponse::from_polynomial(p0, ctx.spectrum()))?;
    let p0_matrix = options.matrix_check.then(|| p0.matrix(ctx));
    let mut states = Vec::with_capacity(observations.len() + 1);
    states.push(KalmanState {
        step: 0,
        estimate: x0,
        error_covariance: p0,
        gain: None,
        matrix_error_covariance: p0_matrix,
        matrix_gain: None,
    });

    for (idx, z) in observations.iter().enumerate() {
        let k = idx + 1;
        let next = filter_step(sys, states.last().unwrap(), z, k, options).map_err(|e| e.at_step(k))?;
        states.push(next);
    }
    Ok(states)
}

fn filter_step(
    sys: &DynamicalSystem,
    prev: &KalmanState,
    z: &DVector<f64>,
    k: usize,
    options: FilterOptions,
) -> Result<KalmanState> {
    let ctx = sys.context();
    let step = sys.step(k)?;
    let predicted = predict(prev, sys, k)?;
    let (gain, error) = spectral_step(&prev.error_covariance, step)?;
    let estimate = update(ctx, &predicted, z, &step.b, &gain)?;

    let (matrix_error_covariance, matrix_gain) = match (&prev.matrix_error_covariance, options.matrix_check) {
        (Some(p_prev), true) => {
            let a = eval_filter(&step.a, ctx.decomposition()).into_matrix();
            let b = eval_filter(&step.b, ctx.decomposition()).into_matrix();
            let (km, pm) = matrix_riccati_step(p_prev, &a, &b, step.sigma, step.sigma_obs)?;
            let p_dev = (&pm - error.matrix(ctx)).norm() / pm.norm().max(1.0);
            let k_dev = (&km - gain.matrix(ctx)).norm() / km.norm().max(1.0);
            if p_dev > DUAL_FORM_TOLERANCE || k_dev > DUAL_FORM_TOLERANCE {
                return Err(Error::NumericalFailure(format!(
                    "spectral and matrix recursions disagree (covariance {p_dev:e}, gain {k_dev:e})"
                )));
            }
            (Some(pm), Some(km))
        }
        _ => (None, None),
    };

    Ok(KalmanState {
        step: k,
        estimate,
        error_covariance: error,
        gain: Some(gain),
        matrix_error_covariance,
        matrix_gain,
    })
}

/// Per-frequency filter record: `k, eigenindex, lambda, p_k, g_k` with
/// 1-based eigen-indices and `g_k` empty at `k = 0`.
pub fn write_spectral_csv<W: Write>(states: &[KalmanState], ctx: &SpectralContext, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "eigenindex", "lambda", "p_k", "g_k"])?;
    let spectrum = ctx.spectrum();
    for s in states {
        let p = s.error_covariance.per_index(spectrum);
        let g = s.gain.as_ref().map(|g| g.per_index(spectrum));
        for (n, lam) in ctx.decomposition().eigenvalues().iter().enumerate() {
            let gk = g.as_ref().map(|g| g[n].to_string()).unwrap_or_default();
            w.write_record([s.step.to_string(), (n + 1).to_string(), lam.to_string(), p[n].to_string(), gk])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Estimates as `k, vertex, xhat` with 1-based vertices.
pub fn write_estimates_csv<W: Write>(states: &[KalmanState], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "vertex", "xhat"])?;
    for s in states {
        for (v, x) in s.estimate.iter().enumerate() {
            w.write_record([s.step.to_string(), (v + 1).to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
