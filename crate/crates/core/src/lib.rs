//! Graph signal processing with stationary graph signals and a Kalman filter
//! whose matrices are all polynomials of a graph shift.
//!
//! A symmetric shift `S = U diag(λ) Uᵀ` fixes the spectral domain. Polynomial
//! filters `h(S)` are stored as their values at the distinct eigenvalues
//! ([`FrequencyResponse`]), which keeps every recursion exact per frequency
//! and avoids evaluating high-degree monomials.
//!
//! ```
//! use std::sync::Arc;
//! use graph_kalman::{cycle_graph, DynamicalSystem, GraphShift, Polynomial, ShiftKind, SpectralContext, StepModel};
//!
//! let shift = GraphShift::build(&cycle_graph(10)?, ShiftKind::Laplacian)?;
//! let ctx = Arc::new(SpectralContext::new(&shift)?);
//! let step = StepModel {
//!     a: Polynomial::new(vec![0.0, 0.25]),
//!     b: Polynomial::new(vec![1.0, -0.5]),
//!     sigma: 0.3,
//!     sigma_obs: 0.5,
//! };
//! let sys = DynamicalSystem::time_invariant(ctx, 20, step, Polynomial::zero())?;
//! let traj = graph_kalman::simulate(&sys, 7)?;
//! let states = graph_kalman::run_filter(
//!     &sys,
//!     &traj.observations,
//!     nalgebra::DVector::zeros(10),
//!     &Polynomial::zero(),
//!     Default::default(),
//! )?;
//! assert_eq!(states.len(), 21);
//! # Ok::<(), graph_kalman::Error>(())
//! ```

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod graph;
pub mod kalman;
pub mod poly;
pub mod rng;
pub mod spectral;
pub mod stationary;
pub mod verify;

pub use baselines::{
    inverse_error_covariance, inverse_estimate, loewner_less, loewner_less_spectral, zero_estimate, LoewnerComparison,
    LoewnerVerdict,
};
pub use dynamics::{simulate, DynamicalSystem, StepModel, Trajectory};
pub use error::{Error, Result};
pub use experiment::{run_heatmap, run_trace, ExperimentConfig, HeatmapResult, TraceResult};
pub use filter::{apply_filter, eval_filter, is_polynomial_filter, FilterMatrix, FrequencyResponse, Membership};
pub use graph::{cycle_graph, validate_shift, Graph, GraphShift, ShiftKind};
pub use kalman::{run_filter, FilterOptions, KalmanState};
pub use poly::{lagrange_interpolate, Polynomial};
pub use spectral::{eigendecompose, DistinctSpectrum, SpectralContext, SpectralDecomposition};
pub use stationary::{fit_covariance_poly, sample, sqrt_filter, whiten, StationaryModel};
pub use verify::{run_verify, CheckResult};
