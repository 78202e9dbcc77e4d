//! Polynomial graph filters: spectral evaluation, spatial application and
//! the membership test that separates polynomial filters from merely
//! shift-invariant matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::GraphShift;
use crate::poly::{lagrange_interpolate, Polynomial};
use crate::spectral::{DistinctSpectrum, SpectralContext, SpectralDecomposition};

/// The matrix `h(S) = Σ_n h(λ(n)) u_n u_nᵀ` with its source polynomial.
#[derive(Debug, Clone)]
pub struct FilterMatrix {
    matrix: DMatrix<f64>,
    poly: Polynomial,
    responses: DVector<f64>,
}

impl FilterMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    /// Frequency responses `h(λ(n))` per eigen-index.
    pub fn responses(&self) -> &DVector<f64> {
        &self.responses
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// Evaluates `h(S)` as `U diag(h(λ(n))) Uᵀ`.
pub fn eval_filter(poly: &Polynomial, decomp: &SpectralDecomposition) -> FilterMatrix {
    let responses = decomp.eigenvalues().map(|l| poly.eval(l));
    FilterMatrix { matrix: decomp.assemble(&responses), poly: poly.clone(), responses }
}

/// Computes `h(S) x` with `deg h` shift-vector products (Horner over vectors),
/// without forming `h(S)`.
pub fn apply_filter(poly: &Polynomial, shift: &GraphShift, x: &DVector<f64>) -> Result<DVector<f64>> {
    let s = shift.matrix();
    if x.len() != s.nrows() {
        return Err(Error::InvalidArgument(format!(
            "signal length {} does not match shift order {}",
            x.len(),
            s.nrows()
        )));
    }
    let mut coeffs = poly.coeffs().iter().rev();
    let Some(&lead) = coeffs.next() else {
        return Ok(DVector::zeros(x.len()));
    };
    let mut y = x * lead;
    for &c in coeffs {
        y = s * y;
        y.axpy(c, x, 1.0);
    }
    Ok(y)
}

/// A polynomial modulo the minimal polynomial of the shift, held by its values
/// at the distinct eigenvalues.
///
/// Every polynomial filter of `S` is determined by these `d` numbers, and the
/// remainder of degree `< d` is their interpolant. Working on the values keeps
/// the Riccati recursions exact per frequency; [`FrequencyResponse::to_polynomial`]
/// recovers the monomial coefficients on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl FrequencyResponse {
    pub fn from_values(spectrum: &DistinctSpectrum, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), spectrum.len(), "one value per distinct eigenvalue");
        Self { nodes: spectrum.representatives().to_vec(), values }
    }

    pub fn from_polynomial(poly: &Polynomial, spectrum: &DistinctSpectrum) -> Self {
        let values = spectrum.representatives().iter().map(|&mu| poly.eval(mu)).collect();
        Self { nodes: spectrum.representatives().to_vec(), values }
    }

    /// Values attached to explicit, pairwise-distinct nodes.
    pub fn from_values_at(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), values.len(), "one value per node");
        Self { nodes, values }
    }

    pub fn constant(spectrum: &DistinctSpectrum, c: f64) -> Self {
        Self::from_values(spectrum, vec![c; spectrum.len()])
    }

    /// Distinct eigenvalues the values are attached to.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Canonical representative of degree `< d`.
    pub fn to_polynomial(&self) -> Polynomial {
        let pts: Vec<(f64, f64)> = self.nodes.iter().copied().zip(self.values.iter().copied()).collect();
        lagrange_interpolate(&pts).expect("distinct spectrum nodes are pairwise distinct")
    }

    /// Values spread over eigen-indices.
    pub fn per_index(&self, spectrum: &DistinctSpectrum) -> DVector<f64> {
        spectrum.expand(&self.values)
    }

    pub fn matrix(&self, ctx: &SpectralContext) -> DMatrix<f64> {
        ctx.decomposition().assemble(&self.per_index(ctx.spectrum()))
    }

    pub fn apply(&self, ctx: &SpectralContext, x: &DVector<f64>) -> DVector<f64> {
        ctx.decomposition().apply_diagonal(&self.per_index(ctx.spectrum()), x)
    }

    /// `Σ_n value(group(n))`, the trace of the filter matrix.
    pub fn trace(&self, spectrum: &DistinctSpectrum) -> f64 {
        self.values.iter().zip(spectrum.multiplicities()).map(|(v, m)| v * m as f64).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { nodes: self.nodes.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Outcome of [`is_polynomial_filter`].
#[derive(Debug, Clone)]
pub struct Membership {
    pub is_member: bool,
    /// Largest off-diagonal magnitude of `UᵀMU`.
    pub off_diagonal: f64,
    /// Largest deviation of `u_nᵀMu_n` from its eigenvalue-group mean.
    pub group_spread: f64,
    /// Group means of the spectral coefficients, when `M` is a member.
    pub response: Option<FrequencyResponse>,
    /// Interpolating polynomial through the group means, when `M` is a member.
    pub witness: Option<Polynomial>,
}

/// Default membership tolerance `1e-6 · ‖M‖_F`.
pub fn default_membership_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-6 * m.norm()
}

/// Decides whether `M = h(S)` for some polynomial `h`.
///
/// `UᵀMU` must be diagonal and constant on every repeated-eigenvalue group.
/// Commuting with `S` only forces block-diagonal structure, so shift-invariant
/// matrices that act non-scalarly on an eigenspace are rejected.
pub fn is_polynomial_filter(
    m: &DMatrix<f64>,
    decomp: &SpectralDecomposition,
    spectrum: &DistinctSpectrum,
    tolerance: Option<f64>,
) -> Result<Membership> {
    let n = decomp.order();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}, shift order {n}", m.nrows(), m.ncols())));
    }
    let tol = tolerance.unwrap_or_else(|| default_membership_tolerance(m));
    let u = decomp.eigenvectors();
    let coeffs = u.transpose() * m * u;

    let mut off_diagonal = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off_diagonal = off_diagonal.max(coeffs[(i, j)].abs());
            }
        }
    }
    let means: Vec<f64> = (0..spectrum.len())
        .map(|g| {
            let idx = spectrum.members(g);
            idx.iter().map(|&k| coeffs[(k, k)]).sum::<f64>() / idx.len() as f64
        })
        .collect();
    let group_spread = (0..n).map(|k| (coeffs[(k, k)] - means[spectrum.group_of(k)]).abs()).fold(0.0, f64::max);

    let is_member = off_diagonal <= tol && group_spread <= tol;
    let (response, witness) = if is_member {
        let r = FrequencyResponse::from_values(spectrum, means);
        let w = r.to_polynomial();
        (Some(r), Some(w))
    } else {
        (None, None)
    };
    Ok(Membership { is_member, off_diagonal, group_spread, response, witness })
}
