//! Stationary graph signals: zero-mean random signals whose covariance is a
//! polynomial filter `h(S)`. Coloring white noise through the square-root
//! filter generates them; whitening inverts the coloring.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::FrequencyResponse;
use crate::poly::Polynomial;
use crate::rng::standard_normal;
use crate::spectral::{DistinctSpectrum, SpectralContext, SpectralDecomposition};

/// Relative band around zero inside which a frequency variance counts as zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A stationary model with covariance polynomial `h`.
#[derive(Debug, Clone)]
pub struct StationaryModel {
    covariance: Polynomial,
    ctx: Arc<SpectralContext>,
    /// Clamped `μ_j = h(μ_j-representative)` per distinct eigenvalue.
    variances: FrequencyResponse,
}

impl StationaryModel {
    /// Fails with not-positive-semidefinite when some `h(λ)` falls below
    /// `−1e−10 · max μ`. Values within that band of zero are set to zero.
    pub fn new(covariance: Polynomial, ctx: Arc<SpectralContext>) -> Result<Self> {
        let raw = FrequencyResponse::from_polynomial(&covariance, ctx.spectrum());
        let variances = clamp_psd(&raw)?;
        Ok(Self { covariance, ctx, variances })
    }

    pub fn covariance(&self) -> &Polynomial {
        &self.covariance
    }

    pub fn context(&self) -> &Arc<SpectralContext> {
        &self.ctx
    }

    pub fn variances(&self) -> &FrequencyResponse {
        &self.variances
    }

    /// `μ(n)` per eigen-index.
    pub fn frequency_variances(&self) -> DVector<f64> {
        self.variances.per_index(self.ctx.spectrum())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        self.variances.matrix(&self.ctx)
    }

    /// Square-root frequency responses `√μ_j`.
    pub fn sqrt_response(&self) -> FrequencyResponse {
        self.variances.map(f64::sqrt)
    }
}

pub(crate) fn clamp_psd(raw: &FrequencyResponse) -> Result<FrequencyResponse> {
    let max = raw.values().iter().copied().fold(0.0_f64, f64::max);
    let tolerance = PSD_TOLERANCE * max;
    if let Some(&bad) = raw.values().iter().find(|&&v| v < -tolerance || v.is_nan()) {
        return Err(Error::NotPositiveSemidefinite { value: bad, tolerance: -tolerance });
    }
    Ok(raw.map(|v| if v <= tolerance { 0.0 } else { v }))
}

/// The polynomial `g` with `g(μ_j) = √μ_j` at every distinct eigenvalue, so
/// that `g(S)² = h(S)`.
pub fn sqrt_filter(model: &StationaryModel) -> Polynomial {
    model.sqrt_response().to_polynomial()
}

/// Draws `x = g(S) e` with `e ~ N(0, I)`; its covariance is exactly `h(S)`.
pub fn sample<R: Rng + ?Sized>(model: &StationaryModel, rng: &mut R) -> DVector<f64> {
    let e = standard_normal(rng, model.ctx.order());
    model.sqrt_response().apply(&model.ctx, &e)
}

/// Maps a stationary signal back to standard white noise:
/// `e = Σ_{μ≠0} μ^{-1/2} u_n (u_nᵀ x) + Σ_{μ=0} x̃_n u_n` with fresh `x̃_n ~ N(0,1)`.
pub fn whiten<R: Rng + ?Sized>(x: &DVector<f64>, model: &StationaryModel, rng: &mut R) -> Result<DVector<f64>> {
    let n = model.ctx.order();
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("signal length {} does not match order {n}", x.len())));
    }
    let decomp = model.ctx.decomposition();
    let mu = model.frequency_variances();
    let coeffs = decomp.analyze(x);
    let fresh = standard_normal(rng, n);
    let white = DVector::from_fn(n, |k, _| if mu[k] > 0.0 { coeffs[k] / mu[k].sqrt() } else { fresh[k] });
    Ok(decomp.synthesize(&white))
}

/// Least-squares fit of `C` by a polynomial filter of `S`.
///
/// The best approximation in Frobenius norm averages the spectral diagonal
/// `u_nᵀ C u_n` over each group of repeated eigenvalues. Returns the fitted
/// polynomial (degree `< d`) and `‖C − fit(S)‖_F / max(1, ‖C‖_F)`.
pub fn fit_covariance_poly(
    c: &DMatrix<f64>,
    decomp: &SpectralDecomposition,
    spectrum: &DistinctSpectrum,
) -> Result<(Polynomial, f64)> {
    let (response, residual) = fit_covariance_response(c, decomp, spectrum)?;
    Ok((response.to_polynomial(), residual))
}

/// As [`fit_covariance_poly`], returning the fitted frequency response.
pub fn fit_covariance_response(
    c: &DMatrix<f64>,
    decomp: &SpectralDecomposition,
    spectrum: &DistinctSpectrum,
) -> Result<(FrequencyResponse, f64)> {
    let n = decomp.order();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}, shift order {n}", c.nrows(), c.ncols())));
    }
    let u = decomp.eigenvectors();
    let coeffs = u.transpose() * c * u;
    let means: Vec<f64> = (0..spectrum.len())
        .map(|g| {
            let idx = spectrum.members(g);
            idx.iter().map(|&k| coeffs[(k, k)]).sum::<f64>() / idx.len() as f64
        })
        .collect();
    let response = FrequencyResponse::from_values(spectrum, means);
    let fit = decomp.assemble(&response.per_index(spectrum));
    let residual = (c - fit).norm() / c.norm().max(1.0);
    Ok((response, residual))
}
