//! Symmetric eigendecomposition of a graph shift, grouping of repeated
//! eigenvalues, and the minimal polynomial.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::GraphShift;
use crate::poly::Polynomial;

/// `S = U Λ Uᵀ` with eigenvalues ascending and sign-fixed eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    shift: GraphShift,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn shift(&self) -> &GraphShift {
        &self.shift
    }

    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthogonal matrix whose columns are the eigenvectors `u_n`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Graph Fourier transform `Uᵀ x`.
    pub fn analyze(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(x)
    }

    /// Inverse transform `U c`.
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * coeffs
    }

    /// `U diag(d) Uᵀ`, symmetrized.
    pub fn assemble(&self, diag: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &d) in scaled.column_iter_mut().zip(diag.iter()) {
            col *= d;
        }
        let m = scaled * self.eigenvectors.transpose();
        (&m + m.transpose()) * 0.5
    }

    /// Applies `U diag(d) Uᵀ` to a vector without forming the matrix.
    pub fn apply_diagonal(&self, diag: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.analyze(x).component_mul(diag);
        self.synthesize(&coeffs)
    }
}

/// Eigendecomposition of a symmetric shift.
///
/// Eigenvalues come back ascending; each eigenvector has its first
/// non-negligible component positive so results are reproducible.
pub fn eigendecompose(shift: &GraphShift) -> Result<SpectralDecomposition> {
    let m = shift.matrix();
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("shift has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-10) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(SpectralDecomposition { shift: shift.clone(), eigenvalues, eigenvectors })
}

/// Distinct eigenvalues after single-linkage grouping at tolerance `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctSpectrum {
    representatives: Vec<f64>,
    group_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    tolerance: f64,
}

impl DistinctSpectrum {
    /// Ascending group representatives `μ_1 < … < μ_d`.
    pub fn representatives(&self) -> &[f64] {
        &self.representatives
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// Group index of eigen-index `n`.
    pub fn group_of(&self, n: usize) -> usize {
        self.group_of[n]
    }

    /// Eigen-indices belonging to group `j`.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Spreads per-group values over the eigen-indices.
    pub fn expand(&self, group_values: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.group_of.len(), self.group_of.iter().map(|&j| group_values[j]))
    }
}

/// Default grouping tolerance `1e-8 · max(1, ρ(S))`.
pub fn default_tolerance(decomp: &SpectralDecomposition) -> f64 {
    1e-8 * decomp.spectral_radius().max(1.0)
}

/// Groups ascending eigenvalues, opening a new group whenever the gap exceeds `τ`.
/// Each representative is its group's mean.
pub fn distinct_eigenvalues(decomp: &SpectralDecomposition, tolerance: f64) -> DistinctSpectrum {
    group_values(decomp.eigenvalues().as_slice(), tolerance)
}

pub(crate) fn group_values(sorted: &[f64], tolerance: f64) -> DistinctSpectrum {
    let tolerance = tolerance.max(0.0);
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut group_of = Vec::with_capacity(sorted.len());
    for (n, &v) in sorted.iter().enumerate() {
        let new_group = match members.last() {
            Some(last) => v - sorted[*last.last().unwrap()] > tolerance,
            None => true,
        };
        if new_group {
            members.push(Vec::new());
        }
        members.last_mut().unwrap().push(n);
        group_of.push(members.len() - 1);
    }
    let representatives =
        members.iter().map(|idx| idx.iter().map(|&n| sorted[n]).sum::<f64>() / idx.len() as f64).collect();
    DistinctSpectrum { representatives, group_of, members, tolerance }
}

/// `p_S(t) = ∏_j (t − μ_j)` over the distinct eigenvalues.
pub fn minimal_polynomial(spectrum: &DistinctSpectrum) -> Polynomial {
    Polynomial::from_roots(spectrum.representatives())
}

/// A shift together with its eigendecomposition, distinct spectrum and
/// minimal polynomial: everything the filter algebra needs.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    decomp: SpectralDecomposition,
    spectrum: DistinctSpectrum,
    minimal: Polynomial,
}

impl SpectralContext {
    pub fn new(shift: &GraphShift) -> Result<Self> {
        let decomp = eigendecompose(shift)?;
        let tol = default_tolerance(&decomp);
        Ok(Self::from_decomposition(decomp, tol))
    }

    pub fn with_tolerance(shift: &GraphShift, tolerance: f64) -> Result<Self> {
        Ok(Self::from_decomposition(eigendecompose(shift)?, tolerance))
    }

    pub fn from_decomposition(decomp: SpectralDecomposition, tolerance: f64) -> Self {
        let spectrum = distinct_eigenvalues(&decomp, tolerance);
        let minimal = minimal_polynomial(&spectrum);
        Self { decomp, spectrum, minimal }
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    pub fn spectrum(&self) -> &DistinctSpectrum {
        &self.spectrum
    }

    pub fn minimal_polynomial(&self) -> &Polynomial {
        &self.minimal
    }

    pub fn shift(&self) -> &GraphShift {
        self.decomp.shift()
    }

    pub fn order(&self) -> usize {
        self.decomp.order()
    }
}
