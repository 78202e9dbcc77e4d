//! Comparison estimators and the Loewner order used to rank them.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::DynamicalSystem;
use crate::error::{Error, Result};
use crate::filter::FrequencyResponse;
use crate::poly::Polynomial;
use crate::spectral::{DistinctSpectrum, SpectralDecomposition};

/// Default relative pseudo-inverse cutoff: responses with
/// `|b(λ)| ≤ 1e−10 · max |b|` are treated as zero.
pub const DEFAULT_PINV_RELATIVE: f64 = 1e-10;

fn pinv_cutoff(responses: impl Iterator<Item = f64>, pinv_tol: Option<f64>) -> f64 {
    pinv_tol.unwrap_or_else(|| DEFAULT_PINV_RELATIVE * responses.fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Static inverse filtering `x̃_k = b(S)⁺ z_k`, using the spectral
/// Moore–Penrose pseudo-inverse when `b(S)` is singular.
pub fn inverse_estimate(
    b: &Polynomial,
    z: &DVector<f64>,
    decomp: &SpectralDecomposition,
    pinv_tol: Option<f64>,
) -> Result<DVector<f64>> {
    if z.len() != decomp.order() {
        return Err(Error::InvalidArgument(format!(
            "signal length {} does not match order {}",
            z.len(),
            decomp.order()
        )));
    }
    let responses = decomp.eigenvalues().map(|l| b.eval(l));
    let cutoff = pinv_cutoff(responses.iter().copied(), pinv_tol);
    let inverse = responses.map(|r| if r.abs() > cutoff { 1.0 / r } else { 0.0 });
    Ok(decomp.apply_diagonal(&inverse, z))
}

/// `cov(x̃_k − x_k) = σ̃² b(S)⁻²`, defined only for all-pass `b`.
pub fn inverse_error_covariance(
    b: &Polynomial,
    sigma_obs: f64,
    spectrum: &DistinctSpectrum,
    pinv_tol: Option<f64>,
) -> Result<FrequencyResponse> {
    let responses = FrequencyResponse::from_polynomial(b, spectrum);
    let cutoff = pinv_cutoff(responses.values().iter().copied(), pinv_tol);
    for (&mu, &r) in responses.nodes().iter().zip(responses.values()) {
        if r.abs() <= cutoff {
            return Err(Error::NotAllPass { eigenvalue: mu, response: r });
        }
    }
    Ok(responses.map(|r| sigma_obs * sigma_obs / (r * r)))
}

/// The zero estimator `x̄_k = 0` and its error covariance `h_k = cov(x_k)`.
pub fn zero_estimate(sys: &DynamicalSystem, k: usize) -> Result<(DVector<f64>, FrequencyResponse)> {
    if k > sys.horizon() {
        return Err(Error::InvalidArgument(format!("step {k} beyond horizon {}", sys.horizon())));
    }
    let mut covs = sys.state_covariances()?;
    Ok((DVector::zeros(sys.context().order()), covs.swap_remove(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoewnerVerdict {
    /// `right − left` is positive definite beyond the tolerance.
    Strict,
    /// `right − left` is positive semidefinite within the tolerance.
    NonStrict,
    Fails,
}

/// Result of comparing `left ≺ right`.
#[derive(Debug, Clone)]
pub struct LoewnerComparison {
    /// Smallest eigenvalue of `right − left`.
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub verdict: LoewnerVerdict,
}

impl LoewnerComparison {
    fn new(min_eigenvalue: f64, tolerance: f64) -> Self {
        let verdict = if min_eigenvalue > tolerance {
            LoewnerVerdict::Strict
        } else if min_eigenvalue >= -tolerance {
            LoewnerVerdict::NonStrict
        } else {
            LoewnerVerdict::Fails
        };
        Self { min_eigenvalue, tolerance, verdict }
    }

    pub fn is_strict(&self) -> bool {
        self.verdict == LoewnerVerdict::Strict
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
}

/// `left ≺ right` for symmetric matrices: strict iff `λ_min(right − left) > tol`
/// (default `1e−12 · ‖right‖_F`).
pub fn loewner_less(left: &DMatrix<f64>, right: &DMatrix<f64>, tol: Option<f64>) -> Result<LoewnerComparison> {
    if left.shape() != right.shape() || !left.is_square() {
        return Err(Error::InvalidArgument("Loewner comparison needs square matrices of equal size".into()));
    }
    if !is_symmetric(left) || !is_symmetric(right) {
        return Err(Error::InvalidArgument("Loewner comparison needs symmetric matrices".into()));
    }
    let tol = tol.unwrap_or(1e-12 * right.norm());
    let diff = right - left;
    let diff = (&diff + diff.transpose()) * 0.5;
    let min = diff.symmetric_eigenvalues().min();
    Ok(LoewnerComparison::new(min, tol))
}

/// Loewner comparison of two polynomial filters, done exactly per distinct
/// eigenvalue. The default tolerance matches [`loewner_less`] on the
/// assembled matrices.
pub fn loewner_less_spectral(
    left: &FrequencyResponse,
    right: &FrequencyResponse,
    spectrum: &DistinctSpectrum,
    tol: Option<f64>,
) -> LoewnerComparison {
    let right_norm =
        right.values().iter().zip(spectrum.multiplicities()).map(|(v, m)| v * v * m as f64).sum::<f64>().sqrt();
    let tol = tol.unwrap_or(1e-12 * right_norm);
    let min = left.values().iter().zip(right.values()).map(|(l, r)| r - l).fold(f64::INFINITY, f64::min);
    LoewnerComparison::new(min, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle_graph, GraphShift, ShiftKind};
    use crate::spectral::SpectralContext;

    fn ctx(n: usize) -> SpectralContext {
        let s = GraphShift::build(&cycle_graph(n).unwrap(), ShiftKind::Laplacian).unwrap();
        SpectralContext::new(&s).unwrap()
    }

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    #[test]
    fn trivial_inverses() {
        let c = ctx(6);
        let z = DVector::from_fn(6, |i, _| i as f64 - 1.0);
        let x = inverse_estimate(&p(&[1.0]), &z, c.decomposition(), None).unwrap();
        assert!((x - &z).norm() < 1e-13);
        let zero = inverse_estimate(&Polynomial::zero(), &z, c.decomposition(), None).unwrap();
        assert_eq!(zero, DVector::zeros(6));
    }

    #[test]
    fn pseudo_inverse_zeroes_null_eigenplane() {
        // b(t) = 1 − t/2 vanishes at λ = 2, a double eigenvalue of L(C_4).
        let c = ctx(4);
        let d = c.decomposition();
        let b = p(&[1.0, -0.5]);
        let z = DVector::from_vec(vec![1.0, 2.0, -0.5, 0.25]);
        let x = inverse_estimate(&b, &z, d, None).unwrap();
        let coeffs = d.analyze(&z);
        let xc = d.analyze(&x);
        for (n, &lam) in d.eigenvalues().iter().enumerate() {
            if (lam - 2.0).abs() < 1e-9 {
                assert!(xc[n].abs() < 1e-12);
            } else {
                assert!((xc[n] - coeffs[n] / (1.0 - lam / 2.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_error_examples() {
        let c = ctx(30);
        let one = inverse_error_covariance(&p(&[1.0]), 0.7, c.spectrum(), None).unwrap();
        assert!(one.values().iter().all(|&v| (v - 0.49).abs() < 1e-15));
        let two = inverse_error_covariance(&p(&[2.0]), 1.0, c.spectrum(), None).unwrap();
        assert!(two.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let b = p(&[1.0, -0.5]);
        let r = inverse_error_covariance(&b, 0.5, c.spectrum(), None).unwrap();
        for (&lam, &v) in r.nodes().iter().zip(r.values()) {
            let want = 0.25 / (1.0 - lam / 2.0).powi(2);
            assert!((v - want).abs() <= 1e-12 * want);
        }

        let c4 = ctx(4);
        assert!(matches!(inverse_error_covariance(&b, 0.5, c4.spectrum(), None), Err(Error::NotAllPass { .. })));
    }

    #[test]
    fn loewner_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let r = loewner_less(&id, &(&id * 2.0), None).unwrap();
        assert_eq!(r.verdict, LoewnerVerdict::Strict);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-14);
        assert_eq!(loewner_less(&id, &id, None).unwrap().verdict, LoewnerVerdict::NonStrict);
        assert_eq!(loewner_less(&(&id * 2.0), &id, None).unwrap().verdict, LoewnerVerdict::Fails);

        let mut asym = id.clone();
        asym[(0, 1)] = 1.0;
        assert!(matches!(loewner_less(&asym, &id, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spectral_and_matrix_verdicts_agree() {
        let c = ctx(9);
        let left = FrequencyResponse::from_polynomial(&p(&[0.5, 0.1]), c.spectrum());
        for shift in [0.3, 0.0, -0.3] {
            let right = left.map(|v| v + shift + 0.05 * v);
            let spectral = loewner_less_spectral(&left, &right, c.spectrum(), None);
            let matrix = loewner_less(&left.matrix(&c), &right.matrix(&c), None).unwrap();
            assert_eq!(spectral.verdict, matrix.verdict, "shift {shift}");
        }
    }
}
