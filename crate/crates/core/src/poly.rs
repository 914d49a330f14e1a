//! Real polynomials in the backward shift operator `q^-1`.
//!
//! Coefficient `k` multiplies `q^-k`. Roots are reported in the `z` domain,
//! i.e. as roots of `z^n P(1/z)`, so that "inside the unit circle" has the
//! usual stability meaning.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::{Float, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, dropping trailing exact zeros.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last nonzero coefficient; `-1` for the zero polynomial.
    pub fn degree(&self) -> isize {
        self.coeffs.len() as isize - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Evaluates `sum_k c_k x^k` by Horner's rule.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::zero(), |acc, &c| acc * x + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value on the unit circle at radian frequency `omega` (`q^-1 = e^{-i omega}`).
    pub fn eval_freq(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, -omega))
    }

    pub fn scale(&self, s: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect::<Vec<_>>())
    }

    /// Multiplies by `q^-k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![0.0; k];
        coeffs.extend_from_slice(&self.coeffs);
        Polynomial { coeffs }
    }

    /// Number of leading zero coefficients (a pure delay factor).
    pub fn leading_zeros(&self) -> usize {
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Removes `k` leading coefficients, which must be zero.
    pub(crate) fn unshift(&self, k: usize) -> Self {
        debug_assert!(self.coeffs.iter().take(k).all(|&c| c == 0.0));
        Polynomial::new(self.coeffs[k.min(self.coeffs.len())..].to_vec())
    }

    /// Roots in the `z` domain. Leading zero coefficients correspond to roots at
    /// infinity and are skipped.
    pub fn z_roots(&self) -> Result<Vec<Complex64>> {
        let lead = self.leading_zeros();
        let c = &self.coeffs[lead.min(self.coeffs.len())..];
        if c.len() <= 1 {
            return Ok(Vec::new());
        }
        let m = c.len() - 1;
        let a: Vec<f64> = c[1..].iter().map(|v| v / c[0]).collect();
        if m == 1 {
            return Ok(vec![Complex64::new(-a[0], 0.0)]);
        }
        if m == 2 {
            return Ok(quadratic_roots(a[0], a[1]));
        }
        // Companion matrix of z^m + a_1 z^{m-1} + ... + a_m.
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            comp[(0, j)] = -a[j];
        }
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        let schur = nalgebra::linalg::Schur::try_new(comp, f64::EPSILON, 10_000).ok_or_else(|| {
            Error::InvalidTransfer(alloc::string::String::from("root finding did not converge"))
        })?;
        Ok(schur.complex_eigenvalues().iter().copied().collect())
    }

    /// `lead * prod_i (1 - r_i q^-1)`. Complex roots must come in conjugate pairs.
    pub fn from_z_roots(roots: &[Complex64], lead: f64) -> Self {
        let mut acc = vec![Complex64::new(lead, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::zero(); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k] += c;
                next[k + 1] -= c * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect::<Vec<_>>())
    }

    /// Largest root magnitude, `0` for polynomials without finite roots.
    pub fn max_root_magnitude(&self) -> Result<f64> {
        Ok(self
            .z_roots()?
            .iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max))
    }
}

fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation: compute the larger root first.
        let q = -0.5 * (b + b.signum() * s);
        if q == 0.0 {
            return vec![Complex64::zero(), Complex64::zero()];
        }
        vec![Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect::<Vec<_>>())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect::<Vec<_>>())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(Polynomial::new(vec![0.0, 0.0]).degree(), -1);
    }

    #[test]
    fn roots_of_first_order_den() {
        let p = Polynomial::new(vec![1.0, -0.5]);
        let r = p.z_roots().unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn companion_roots_match_construction() {
        let roots = [
            Complex64::new(0.5, 0.3),
            Complex64::new(0.5, -0.3),
            Complex64::new(-0.7, 0.0),
            Complex64::new(0.2, 0.0),
        ];
        let p = Polynomial::from_z_roots(&roots, 2.0);
        let mut got = p.z_roots().unwrap();
        got.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let mut want = roots.to_vec();
        want.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn product_evaluates_pointwise() {
        let a = Polynomial::new(vec![1.0, -0.3, 0.2]);
        let b = Polynomial::new(vec![0.5, 0.1]);
        let x = Complex64::from_polar(1.0, -0.7);
        assert!(((&a * &b).eval(x) - a.eval(x) * b.eval(x)).norm() < 1e-14);
        assert!(((&a + &b).eval(x) - (a.eval(x) + b.eval(x))).norm() < 1e-14);
    }
}
