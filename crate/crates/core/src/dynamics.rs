//! State-space model with polynomial-filter dynamics and observations:
//!
//! ```text
//! x_k = a_k(S) x_{k-1} + σ_k e_k
//! z_k = b_k(S) x_k     + σ̃_k ẽ_k
//! ```
//!
//! and the exact covariance recursion `h_k = a_k² h_{k-1} + σ_k²`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{apply_filter, FrequencyResponse};
use crate::poly::{reduce_mod_minimal, Polynomial};
use crate::rng::{seeded_stream, standard_normal};
use crate::spectral::SpectralContext;
use crate::stationary::{sample, StationaryModel};

/// Stream indices used by [`simulate`]; initial state, process noise and
/// observation noise never share random words.
pub const INITIAL_STREAM: u64 = 0;
pub const PROCESS_STREAM: u64 = 1;
pub const OBSERVATION_STREAM: u64 = 2;

/// Per-step model parameters `(a_k, b_k, σ_k, σ̃_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    pub a: Polynomial,
    pub b: Polynomial,
    pub sigma: f64,
    pub sigma_obs: f64,
}

#[derive(Debug, Clone)]
enum Schedule {
    Invariant(StepModel),
    Varying(Vec<StepModel>),
}

#[derive(Debug, Clone)]
pub struct DynamicalSystem {
    ctx: Arc<SpectralContext>,
    horizon: usize,
    schedule: Schedule,
    initial: StationaryModel,
    zero_noise: bool,
}

impl DynamicalSystem {
    /// Constant `(a, b, σ, σ̃)` for steps `1..=horizon`. Noise levels must be positive.
    pub fn time_invariant(
        ctx: Arc<SpectralContext>,
        horizon: usize,
        step: StepModel,
        initial: Polynomial,
    ) -> Result<Self> {
        Self::build(ctx, horizon, Schedule::Invariant(step), initial, false)
    }

    /// One [`StepModel`] per step; the horizon is `steps.len()`.
    pub fn time_varying(ctx: Arc<SpectralContext>, steps: Vec<StepModel>, initial: Polynomial) -> Result<Self> {
        let horizon = steps.len();
        Self::build(ctx, horizon, Schedule::Varying(steps), initial, false)
    }

    /// Time-invariant system in which `σ = 0` and `σ̃ = 0` are permitted
    /// (exact-zero noise).
    pub fn zero_noise_reference(
        ctx: Arc<SpectralContext>,
        horizon: usize,
        step: StepModel,
        initial: Polynomial,
    ) -> Result<Self> {
        Self::build(ctx, horizon, Schedule::Invariant(step), initial, true)
    }

    fn build(
        ctx: Arc<SpectralContext>,
        horizon: usize,
        schedule: Schedule,
        initial: Polynomial,
        zero_noise: bool,
    ) -> Result<Self> {
        let steps: &[StepModel] = match &schedule {
            Schedule::Invariant(s) => std::slice::from_ref(s),
            Schedule::Varying(v) => v,
        };
        for s in steps {
            let ok = |v: f64| v.is_finite() && if zero_noise { v >= 0.0 } else { v > 0.0 };
            if !ok(s.sigma) || !ok(s.sigma_obs) {
                return Err(Error::InvalidArgument(format!(
                    "noise levels must be {}: sigma={}, sigma_obs={}",
                    if zero_noise { "nonnegative" } else { "positive" },
                    s.sigma,
                    s.sigma_obs
                )));
            }
        }
        let initial = StationaryModel::new(initial, ctx.clone())?;
        Ok(Self { ctx, horizon, schedule, initial, zero_noise })
    }

    pub fn context(&self) -> &Arc<SpectralContext> {
        &self.ctx
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_time_invariant(&self) -> bool {
        matches!(self.schedule, Schedule::Invariant(_))
    }

    pub fn allows_zero_noise(&self) -> bool {
        self.zero_noise
    }

    /// Model of `x_0`, with covariance `h_0`.
    pub fn initial(&self) -> &StationaryModel {
        &self.initial
    }

    /// Parameters of step `k`, `1 ≤ k ≤ M`.
    pub fn step(&self, k: usize) -> Result<&StepModel> {
        if k == 0 || k > self.horizon {
            return Err(Error::InvalidArgument(format!("step {k} outside 1..={}", self.horizon)));
        }
        Ok(match &self.schedule {
            Schedule::Invariant(s) => s,
            Schedule::Varying(v) => &v[k - 1],
        })
    }

    /// Frequency responses of `h_0, …, h_M`.
    pub fn state_covariances(&self) -> Result<Vec<FrequencyResponse>> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(self.initial.variances().clone());
        for k in 1..=self.horizon {
            let s = self.step(k)?;
            let next = propagate_covariance_response(out.last().unwrap(), &s.a, s.sigma);
            out.push(next);
        }
        Ok(out)
    }
}

/// `x_k = a_k(S) x_{k-1} + σ_k e_k`.
pub fn step_state<R: Rng + ?Sized>(
    sys: &DynamicalSystem,
    x_prev: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let s = sys.step(k)?;
    let mut x = apply_filter(&s.a, sys.ctx.shift(), x_prev)?;
    x.axpy(s.sigma, &standard_normal(rng, x_prev.len()), 1.0);
    Ok(x)
}

/// `z_k = b_k(S) x_k + σ̃_k ẽ_k`.
pub fn observe<R: Rng + ?Sized>(
    sys: &DynamicalSystem,
    x: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let s = sys.step(k)?;
    let mut z = apply_filter(&s.b, sys.ctx.shift(), x)?;
    z.axpy(s.sigma_obs, &standard_normal(rng, x.len()), 1.0);
    Ok(z)
}

/// `h_k = (a_k² h_{k-1} + σ_k²) mod p_S`.
pub fn propagate_covariance(h_prev: &Polynomial, a: &Polynomial, sigma: f64, p_s: &Polynomial) -> Result<Polynomial> {
    let next = &(&a.square() * h_prev) + &Polynomial::constant(sigma * sigma);
    reduce_mod_minimal(&next, p_s)
}

/// The same recursion on frequency responses: `h_k(μ) = a(μ)² h_{k-1}(μ) + σ²`.
pub fn propagate_covariance_response(h_prev: &FrequencyResponse, a: &Polynomial, sigma: f64) -> FrequencyResponse {
    let values = h_prev
        .nodes()
        .iter()
        .zip(h_prev.values())
        .map(|(&mu, &h)| {
            let am = a.eval(mu);
            am * am * h + sigma * sigma
        })
        .collect();
    FrequencyResponse::from_values_at(h_prev.nodes().to_vec(), values)
}

/// States `x_0..x_M` and observations `z_1..z_M` of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }

    /// CSV with columns `k, vertex, x, z`; vertices are 1-based and `z` is
    /// empty at `k = 0`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "vertex", "x", "z"])?;
        for (k, x) in self.states.iter().enumerate() {
            for (v, xv) in x.iter().enumerate() {
                let z = if k == 0 { String::new() } else { self.observations[k - 1][v].to_string() };
                w.write_record([k.to_string(), (v + 1).to_string(), xv.to_string(), z])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the system for `M` steps. The initial state, process noise and
/// observation noise draw from separate streams of `seed`.
pub fn simulate(sys: &DynamicalSystem, seed: u64) -> Result<Trajectory> {
    let mut init_rng = seeded_stream(seed, INITIAL_STREAM);
    let mut proc_rng = seeded_stream(seed, PROCESS_STREAM);
    let mut obs_rng = seeded_stream(seed, OBSERVATION_STREAM);

    let x0 = if sys.initial.covariance().is_zero() {
        DVector::zeros(sys.ctx.order())
    } else {
        sample(&sys.initial, &mut init_rng)
    };
    let mut states = Vec::with_capacity(sys.horizon + 1);
    let mut observations = Vec::with_capacity(sys.horizon);
    states.push(x0);
    for k in 1..=sys.horizon {
        let x = step_state(sys, states.last().unwrap(), k, &mut proc_rng)?;
        observations.push(observe(sys, &x, k, &mut obs_rng)?);
        states.push(x);
    }
    Ok(Trajectory { states, observations, seed })
}
