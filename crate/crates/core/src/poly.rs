//! Real polynomials in the shift variable, stored by ascending monomial coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `h(t) = h_0 + h_1 t + … + h_L t^L`, trailing zero coefficients trimmed.
///
/// One type serves every role a polynomial plays here: filter, covariance,
/// gain, error covariance. Serializes as a JSON array in ascending degree.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `t`.
    pub fn t() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given roots, `∏ (t − r)`.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut coeffs = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|&v| v * c).collect())
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::InvalidArgument("division by the zero polynomial".into()));
        }
        let dd = divisor.degree();
        if self.is_zero() || self.degree() < dd {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for shift in (0..quot.len()).rev() {
            let c = rem[shift + dd] / lead;
            quot[shift] = c;
            for (i, &d) in divisor.coeffs.iter().enumerate() {
                rem[shift + i] -= c * d;
            }
            rem[shift + dd] = 0.0;
        }
        rem.truncate(dd);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// Remainder modulo `modulus` (typically the minimal polynomial of the shift).
    pub fn reduce_mod(&self, modulus: &Polynomial) -> Result<Polynomial> {
        Ok(self.div_rem(modulus)?.1)
    }
}

/// Remainder of `poly` modulo the minimal polynomial `p_s`: the canonical
/// representative of the filter `poly(S)` with degree below `deg p_s`.
pub fn reduce_mod_minimal(poly: &Polynomial, p_s: &Polynomial) -> Result<Polynomial> {
    poly.reduce_mod(p_s)
}

/// The unique polynomial of degree `< d` through `d` nodes with distinct abscissae.
///
/// Newton divided differences over the nodes in descending order, expanded
/// to monomial form by nested multiplication. On clustered spectra this
/// keeps the nodal residual at the rounding level of monomial evaluation.
pub fn lagrange_interpolate(nodes: &[(f64, f64)]) -> Result<Polynomial> {
    if nodes.is_empty() {
        return Ok(Polynomial::zero());
    }
    for (i, &(x, y)) in nodes.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite interpolation node ({x}, {y})")));
        }
        if nodes[..i].iter().any(|&(other, _)| other == x) {
            return Err(Error::InvalidArgument(format!("duplicate interpolation node {x}")));
        }
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let xs: Vec<f64> = sorted.iter().map(|n| n.0).collect();
    let mut c: Vec<f64> = sorted.iter().map(|n| n.1).collect();
    let d = xs.len();
    for j in 1..d {
        for i in (j..d).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - j]);
        }
    }
    // p = c_0 + (t − x_0)(c_1 + (t − x_1)(c_2 + …))
    let mut coeffs = vec![c[d - 1]];
    for i in (0..d - 1).rev() {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= xs[i] * a;
        }
        next[0] += c[i];
        coeffs = next;
    }
    Ok(Polynomial::new(coeffs))
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let at = |p: &Polynomial, i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
        Polynomial::new((0..len).map(|i| at(self, i) + at(rhs, i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let mag = c.abs();
            match i {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}·t")?,
                _ => write!(f, "{mag}·t^{i}")?,
            }
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    #[test]
    fn canonical_form_trims() {
        assert_eq!(p(&[1.0, 2.0, 0.0, 0.0]).coeffs(), &[1.0, 2.0]);
        assert!(p(&[0.0, 0.0]).is_zero());
        assert_eq!(p(&[0.0, 0.0]).degree(), 0);
    }

    #[test]
    fn products_and_sums() {
        assert_eq!(&Polynomial::t() * &Polynomial::t(), p(&[0.0, 0.0, 1.0]));
        assert_eq!(&p(&[3.0, 1.0]) + &Polynomial::zero(), p(&[3.0, 1.0]));
        assert_eq!(p(&[1.0, 1.0]) * p(&[-1.0, 1.0]), p(&[-1.0, 0.0, 1.0]));
        assert_eq!(p(&[1.0, 1.0]) - p(&[1.0, 1.0]), Polynomial::zero());
    }

    #[test]
    fn long_division_examples() {
        let p_s = Polynomial::from_roots(&[0.0, 2.0, 4.0]);
        assert_eq!(p_s, p(&[0.0, 8.0, -6.0, 1.0]));
        let cube = p(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(reduce_mod_minimal(&cube, &p_s).unwrap(), p(&[0.0, -8.0, 6.0]));
        let low = p(&[1.0, 2.0]);
        assert_eq!(reduce_mod_minimal(&low, &p_s).unwrap(), low);
        assert!(reduce_mod_minimal(&p_s, &p_s).unwrap().is_zero());
        assert!(matches!(reduce_mod_minimal(&cube, &Polynomial::zero()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn division_identity() {
        let f = p(&[1.5, -2.0, 0.25, 3.0, -1.0, 0.5]);
        let g = p(&[-1.0, 0.0, 2.0]);
        let (q, r) = f.div_rem(&g).unwrap();
        let back = &(&q * &g) + &r;
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.degree() < g.degree());
    }

    #[test]
    fn interpolation_examples() {
        let line = lagrange_interpolate(&[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(line, p(&[1.0, 1.0]));
        assert_eq!(lagrange_interpolate(&[(3.0, 7.5)]).unwrap(), Polynomial::constant(7.5));
        let id = lagrange_interpolate(&[(0.0, 0.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
        assert!((id.coeffs()[1] - 1.0).abs() < 1e-14);
        assert!(id.coeffs().iter().enumerate().all(|(i, c)| i == 1 || c.abs() < 1e-14));
        assert!(matches!(lagrange_interpolate(&[(1.0, 0.0), (1.0, 2.0)]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn interpolation_residual_on_cycle_spectrum() {
        // Distinct Laplacian eigenvalues of C_30 with square-root data.
        let nodes: Vec<(f64, f64)> = (0..=15)
            .map(|k| {
                let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 30.0).cos();
                (lam, (1.0 - lam / 2.0).abs() + 0.1)
            })
            .collect();
        let g = lagrange_interpolate(&nodes).unwrap();
        let max_y = nodes.iter().map(|n| n.1.abs()).fold(0.0, f64::max);
        let resid = nodes.iter().map(|&(x, y)| (g.eval(x) - y).abs()).fold(0.0, f64::max);
        assert!(resid <= 1e-7 * max_y, "residual {resid}");
    }

    #[test]
    fn json_is_coefficient_array() {
        let a = p(&[0.0, 0.25]);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[0.0,0.25]");
        let b: Polynomial = serde_json::from_str("[1,-0.5,0]").unwrap();
        assert_eq!(b, p(&[1.0, -0.5]));
    }

    #[test]
    fn display() {
        assert_eq!(p(&[1.0, -0.5]).to_string(), "1 - 0.5·t");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }
}
