//! The cycle-graph experiment: Kalman versus inverse filtering over a grid
//! of process and observation noise levels, plus single-run traces.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::inverse_estimate;
use crate::dynamics::{simulate, DynamicalSystem, StepModel, Trajectory};
use crate::error::{Error, Result};
use crate::graph::{cycle_graph, GraphShift, ShiftKind};
use crate::kalman::{run_filter, FilterOptions, KalmanState};
use crate::poly::Polynomial;
use crate::rng::derive_seed;
use crate::spectral::SpectralContext;

/// States with `‖x_k‖² below this are left out of the relative error.
pub const ENERGY_GUARD: f64 = 1e-24;

/// `½ log₁₀ ENERGY_GUARD`, the value reported for perfect reconstruction.
pub const ERROR_FLOOR: f64 = -12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.step <= 0.0 || self.stop < self.start {
            return vec![self.start];
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sigma: f64,
    pub sigma_tilde: f64,
    /// 1-based vertex index.
    pub vertex: usize,
}

/// Experiment configuration, read from JSON. Polynomials are coefficient
/// arrays ascending in the Laplacian variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub a: Polynomial,
    pub b: Polynomial,
    pub sigma_grid: Grid,
    pub sigma_tilde_grid: Grid,
    pub seed: u64,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_trace")]
    pub trace: TracePoint,
    /// Covariance polynomial of `x_0`; zero means `x_0 = x̂_0 = 0`.
    #[serde(default)]
    pub h0: Polynomial,
    /// Relative pseudo-inverse cutoff for inverse filtering.
    #[serde(default = "default_pinv")]
    pub pinv_tol: f64,
    /// Absolute eigenvalue grouping tolerance; `1e−8 · max(1, ρ(S))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_tol: Option<f64>,
}

fn default_clip() -> f64 {
    0.5
}

fn default_trace() -> TracePoint {
    TracePoint { sigma: 0.3, sigma_tilde: 0.5, vertex: 8 }
}

fn default_pinv() -> f64 {
    crate::baselines::DEFAULT_PINV_RELATIVE
}

impl Default for ExperimentConfig {
    /// Cycle graph with 30 vertices, 100 steps, `A = L/4`, `B = W/2 = I − L/2`,
    /// 30 trials, both noise grids `0, 0.05, …, 1`.
    fn default() -> Self {
        let grid = Grid { start: 0.0, stop: 1.0, step: 0.05 };
        Self {
            n: 30,
            m: 100,
            trials: 30,
            a: Polynomial::new(vec![0.0, 0.25]),
            b: Polynomial::new(vec![1.0, -0.5]),
            sigma_grid: grid,
            sigma_tilde_grid: grid,
            seed: 12345,
            clip: default_clip(),
            trace: default_trace(),
            h0: Polynomial::zero(),
            pinv_tol: default_pinv(),
            eigen_tol: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, g) in [("sigma_grid", &self.sigma_grid), ("sigma_tilde_grid", &self.sigma_tilde_grid)] {
            let vals = g.values();
            if vals.is_empty() || vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad(format!("{name} must hold nonnegative values"));
            }
        }
        if self.trace.vertex == 0 || self.trace.vertex > self.n {
            return bad(format!("trace vertex {} outside 1..={}", self.trace.vertex, self.n));
        }
        if self.trace.sigma < 0.0 || self.trace.sigma_tilde < 0.0 {
            return bad("trace noise levels must be nonnegative".into());
        }
        Ok(())
    }

    /// Laplacian of the cycle graph `C_n` with its spectral data.
    pub fn context(&self) -> Result<Arc<SpectralContext>> {
        let shift = GraphShift::build(&cycle_graph(self.n)?, ShiftKind::Laplacian)?;
        let ctx = match self.eigen_tol {
            Some(tol) => SpectralContext::with_tolerance(&shift, tol)?,
            None => SpectralContext::new(&shift)?,
        };
        Ok(Arc::new(ctx))
    }

    /// Time-invariant system at the given noise levels; zero levels use exact-zero noise.
    pub fn system(&self, ctx: Arc<SpectralContext>, sigma: f64, sigma_tilde: f64) -> Result<DynamicalSystem> {
        let step = StepModel { a: self.a.clone(), b: self.b.clone(), sigma, sigma_obs: sigma_tilde };
        DynamicalSystem::zero_noise_reference(ctx, self.m, step, self.h0.clone())
    }
}

/// `min(½ log₁₀ ((1/M) Σ_k ‖est_k − x_k‖² / ‖x_k‖²), clip)`, skipping steps
/// with `‖x_k‖² < 1e−24` and flooring the result at `−12`.
pub fn relative_error_metric(estimates: &[DVector<f64>], truth: &[DVector<f64>], clip: f64) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("{} estimates for {} states", estimates.len(), truth.len())));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (est, x) in estimates.iter().zip(truth) {
        let energy = x.norm_squared();
        if energy < ENERGY_GUARD {
            continue;
        }
        sum += (est - x).norm_squared() / energy;
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateTrajectory);
    }
    let mean = (sum / used as f64).max(ENERGY_GUARD);
    Ok((0.5 * mean.log10()).min(clip))
}

/// Kalman estimates `x̂_1..x̂_M` and inverse-filtering estimates `x̃_1..x̃_M`
/// for one trajectory.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub kalman: Vec<KalmanState>,
    pub inverse: Vec<DVector<f64>>,
}

impl Reconstruction {
    pub fn kalman_estimates(&self) -> Vec<DVector<f64>> {
        self.kalman[1..].iter().map(|s| s.estimate.clone()).collect()
    }
}

/// Runs both estimators on a trajectory. The Kalman filter starts from
/// `x̂_0 = 0` with `p_0 = h_0`.
pub fn reconstruct(sys: &DynamicalSystem, traj: &Trajectory, pinv_tol: f64) -> Result<Reconstruction> {
    let ctx = sys.context();
    let x0 = DVector::zeros(ctx.order());
    let kalman = run_filter(sys, &traj.observations, x0, sys.initial().covariance(), FilterOptions::default())?;
    let decomp = ctx.decomposition();
    let inverse = traj
        .observations
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let b = &sys.step(i + 1)?.b;
            let max_b = decomp.eigenvalues().iter().fold(0.0_f64, |m, &l| m.max(b.eval(l).abs()));
            inverse_estimate(b, z, decomp, Some(pinv_tol * max_b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction { kalman, inverse })
}

/// Mean and standard error of the per-trial metric in one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStat {
    /// `NaN` when no trial produced a defined metric.
    pub value: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

impl CellStat {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { value: f64::NAN, stderr: f64::NAN, n_trials: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { value: mean, stderr, n_trials: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapCell {
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub kalman: CellStat,
    pub inverse: CellStat,
    /// Zero-noise cell, or some trial had an all-zero state trajectory.
    pub flagged: bool,
}

/// Cells in row-major order: σ outer, σ̃ inner.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapResult {
    pub sigmas: Vec<f64>,
    pub sigma_tildes: Vec<f64>,
    pub cells: Vec<HeatmapCell>,
}

impl HeatmapResult {
    pub fn cell(&self, i: usize, j: usize) -> &HeatmapCell {
        &self.cells[i * self.sigma_tildes.len() + j]
    }

    /// Columns `sigma, sigma_tilde, value, n_trials, flagged`.
    pub fn write_csv<W: Write>(&self, writer: W, kalman: bool) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sigma", "sigma_tilde", "value", "n_trials", "flagged"])?;
        for c in &self.cells {
            let stat = if kalman { c.kalman } else { c.inverse };
            w.write_record([
                c.sigma.to_string(),
                c.sigma_tilde.to_string(),
                stat.value.to_string(),
                stat.n_trials.to_string(),
                u8::from(c.flagged).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-trial seed: `hash(master, σ index, σ̃ index, trial)`.
pub fn trial_seed(master: u64, sigma_index: usize, sigma_tilde_index: usize, trial: usize) -> u64 {
    derive_seed(master, &[sigma_index as u64, sigma_tilde_index as u64, trial as u64])
}

fn run_cell(
    config: &ExperimentConfig,
    ctx: &Arc<SpectralContext>,
    (i, sigma): (usize, f64),
    (j, sigma_tilde): (usize, f64),
) -> Result<HeatmapCell> {
    let sys = config.system(ctx.clone(), sigma, sigma_tilde)?;
    let mut kalman = Vec::with_capacity(config.trials);
    let mut inverse = Vec::with_capacity(config.trials);
    let mut flagged = sigma == 0.0 || sigma_tilde == 0.0;
    for t in 0..config.trials {
        let traj = simulate(&sys, trial_seed(config.seed, i, j, t))?;
        let rec = reconstruct(&sys, &traj, config.pinv_tol)?;
        let truth = &traj.states[1..];
        match (
            relative_error_metric(&rec.kalman_estimates(), truth, config.clip),
            relative_error_metric(&rec.inverse, truth, config.clip),
        ) {
            (Ok(k), Ok(v)) => {
                kalman.push(k);
                inverse.push(v);
            }
            (Err(Error::DegenerateTrajectory), _) | (_, Err(Error::DegenerateTrajectory)) => flagged = true,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(HeatmapCell {
        sigma,
        sigma_tilde,
        kalman: CellStat::from_samples(&kalman),
        inverse: CellStat::from_samples(&inverse),
        flagged,
    })
}

/// Runs every grid cell. Cells are independent and may run in parallel on the
/// current rayon pool; results are assembled in grid order, so the output does
/// not depend on scheduling.
pub fn run_heatmap(config: &ExperimentConfig) -> Result<HeatmapResult> {
    config.validate()?;
    let ctx = config.context()?;
    let sigmas = config.sigma_grid.values();
    let sigma_tildes = config.sigma_tilde_grid.values();
    let jobs: Vec<(usize, usize)> =
        (0..sigmas.len()).flat_map(|i| (0..sigma_tildes.len()).map(move |j| (i, j))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, j)| run_cell(config, &ctx, (i, sigmas[i]), (j, sigma_tildes[j])))
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatmapResult { sigmas, sigma_tildes, cells })
}

/// One row per step `k = 1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub energy_true: f64,
    pub energy_kalman: f64,
    pub energy_inverse: f64,
    pub vertex_true: f64,
    pub vertex_kalman: f64,
    pub vertex_inverse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub vertex: usize,
    pub rows: Vec<TraceRow>,
}

impl TraceResult {
    /// `k, e_true, e_kalman, e_inverse`
    pub fn write_energy_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "e_true", "e_kalman", "e_inverse"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.energy_true.to_string(),
                r.energy_kalman.to_string(),
                r.energy_inverse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `k, x_true, x_kalman, x_inverse` at the trace vertex.
    pub fn write_vertex_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "x_true", "x_kalman", "x_inverse"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.vertex_true.to_string(),
                r.vertex_kalman.to_string(),
                r.vertex_inverse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean squared deviation from the truth at the trace vertex, as
    /// `(kalman, inverse)`.
    pub fn vertex_msd(&self) -> (f64, f64) {
        let m = self.rows.len().max(1) as f64;
        let k = self.rows.iter().map(|r| (r.vertex_kalman - r.vertex_true).powi(2)).sum::<f64>() / m;
        let i = self.rows.iter().map(|r| (r.vertex_inverse - r.vertex_true).powi(2)).sum::<f64>() / m;
        (k, i)
    }
}

/// Simulation at the trace point, with the trajectory it produced.
pub fn simulate_trace_point(config: &ExperimentConfig, seed: u64) -> Result<(DynamicalSystem, Trajectory)> {
    config.validate()?;
    let sys = config.system(config.context()?, config.trace.sigma, config.trace.sigma_tilde)?;
    let traj = simulate(&sys, seed)?;
    Ok((sys, traj))
}

/// Energy profiles and the trace-vertex trajectory for one run at the trace point.
pub fn run_trace(config: &ExperimentConfig) -> Result<TraceResult> {
    run_trace_with_seed(config, config.seed)
}

pub fn run_trace_with_seed(config: &ExperimentConfig, seed: u64) -> Result<TraceResult> {
    let (sys, traj) = simulate_trace_point(config, seed)?;
    let rec = reconstruct(&sys, &traj, config.pinv_tol)?;
    let v = config.trace.vertex - 1;
    let rows = (1..=config.m)
        .map(|k| {
            let x = &traj.states[k];
            let xh = &rec.kalman[k].estimate;
            let xt = &rec.inverse[k - 1];
            TraceRow {
                k,
                energy_true: x.norm(),
                energy_kalman: xh.norm(),
                energy_inverse: xt.norm(),
                vertex_true: x[v],
                vertex_kalman: xh[v],
                vertex_inverse: xt[v],
            }
        })
        .collect();
    Ok(TraceResult { vertex: config.trace.vertex, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(vals: &[&[f64]]) -> Vec<DVector<f64>> {
        vals.iter().map(|v| DVector::from_row_slice(v)).collect()
    }

    #[test]
    fn metric_examples() {
        let truth = vecs(&[&[1.0, 2.0], &[0.5, -1.0]]);
        assert_eq!(relative_error_metric(&truth, &truth, 0.5).unwrap(), ERROR_FLOOR);

        let zeros = vecs(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(relative_error_metric(&zeros, &truth, 0.5).unwrap(), 0.0);

        // Ratio 10² at every step: ½ log₁₀ 100 = 1, clipped to ½.
        let far: Vec<DVector<f64>> = truth.iter().map(|x| x * 11.0).collect();
        assert_eq!(relative_error_metric(&far, &truth, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn metric_skips_zero_states() {
        let truth = vecs(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let est = vecs(&[&[5.0, 5.0], &[0.0, 0.0]]);
        assert_eq!(relative_error_metric(&est, &truth, 0.5).unwrap(), 0.0);
        assert!(matches!(relative_error_metric(&est[..1], &truth[..1], 0.5), Err(Error::DegenerateTrajectory)));
        assert!(relative_error_metric(&est, &truth[..1], 0.5).is_err());
    }

    #[test]
    fn default_grid_has_21_points() {
        let g = Grid { start: 0.0, stop: 1.0, step: 0.05 };
        let v = g.values();
        assert_eq!(v.len(), 21);
        assert!((v[20] - 1.0).abs() < 1e-12);
        assert!((v[6] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn config_json_roundtrip() {
        let json = r#"{"n":30,"m":100,"trials":30,"a":[0,0.25],"b":[1,-0.5],
            "sigma_grid":{"start":0,"stop":1,"step":0.05},
            "sigma_tilde_grid":{"start":0,"stop":1,"step":0.05},
            "seed":12345,"clip":0.5,"trace":{"sigma":0.3,"sigma_tilde":0.5,"vertex":8}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.trace.vertex = 31;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { trials: 0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.sigma_grid.start = -0.1;
        assert!(cfg.validate().is_err());
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            // b(μ) = 1 − μ/2 has no zero on the spectrum of C_10.
            n: 10,
            m: 20,
            trials: 2,
            sigma_grid: Grid { start: 0.0, stop: 0.5, step: 0.25 },
            sigma_tilde_grid: Grid { start: 0.0, stop: 1.0, step: 0.5 },
            trace: TracePoint { sigma: 0.3, sigma_tilde: 0.5, vertex: 3 },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn heatmap_flags_and_floor() {
        let res = run_heatmap(&small_config()).unwrap();
        assert_eq!(res.cells.len(), 9);
        for j in 0..3 {
            let c = res.cell(0, j);
            assert!(c.flagged && c.kalman.n_trials == 0 && c.kalman.value.is_nan());
        }
        // Exact observations through an all-pass filter: inverse filtering is exact.
        let exact = res.cell(2, 0);
        assert!(exact.flagged);
        assert_eq!(exact.inverse.value, ERROR_FLOOR);
        for c in &res.cells {
            if c.kalman.n_trials > 0 {
                assert!(c.kalman.value <= 0.5 && c.inverse.value <= 0.5);
            }
        }
        assert!(!res.cell(1, 1).flagged);
    }

    #[test]
    fn heatmap_is_deterministic() {
        let cfg = ExperimentConfig { sigma_grid: Grid { start: 0.3, stop: 0.3, step: 0.0 }, ..small_config() };
        let a = run_heatmap(&cfg).unwrap();
        let b = run_heatmap(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca, true).unwrap();
        b.write_csv(&mut cb, true).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(String::from_utf8(ca).unwrap().lines().next().unwrap(), "sigma,sigma_tilde,value,n_trials,flagged");
    }

    #[test]
    fn silent_trace_is_zero() {
        let cfg = ExperimentConfig { trace: TracePoint { sigma: 0.0, sigma_tilde: 0.0, vertex: 2 }, ..small_config() };
        let t = run_trace(&cfg).unwrap();
        assert_eq!(t.rows.len(), 20);
        assert!(t.rows.iter().all(|r| {
            [r.energy_true, r.energy_kalman, r.energy_inverse, r.vertex_true, r.vertex_kalman, r.vertex_inverse]
                .iter()
                .all(|&v| v == 0.0)
        }));
    }

    #[test]
    fn trace_layout() {
        let t = run_trace(&ExperimentConfig::default()).unwrap();
        assert_eq!(t.vertex, 8);
        assert_eq!(t.rows.len(), 100);
        let mut buf = Vec::new();
        t.write_vertex_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "k,x_true,x_kalman,x_inverse");
        assert_eq!(text.lines().count(), 101);
        let (k, i) = t.vertex_msd();
        assert!(k < i);
    }
}
