//! Proper rational transfer functions in `q^-1` and monic noise shapers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Relative root distance under which a pole and a zero are cancelled.
pub const CANCELLATION_TOL: f64 = 1e-9;
/// Margin on root magnitudes for the stable / minimum-phase verdicts.
pub const STABILITY_MARGIN: f64 = 1e-8;

/// `q^-delay * num(q^-1) / den(q^-1)` with `den[0] == 1` in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransfer {
    num: Polynomial,
    den: Polynomial,
    delay: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    pub verdict: StabilityVerdict,
    pub pole_magnitudes: Vec<f64>,
}

/// Initial conditions for [`RationalTransfer::filter`]. Histories are listed
/// most recent first: `inputs[0] = u(-1)`, `outputs[0] = y(-1)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum InitialState {
    #[default]
    Zero,
    Given { inputs: Vec<f64>, outputs: Vec<f64> },
}

impl RationalTransfer {
    pub fn new(num: impl Into<Vec<f64>>, den: impl Into<Vec<f64>>, delay: usize) -> Result<Self> {
        Self::from_polys(Polynomial::new(num), Polynomial::new(den), delay)
    }

    pub fn from_polys(num: Polynomial, den: Polynomial, delay: usize) -> Result<Self> {
        RationalTransfer { num, den, delay }.canonicalize_with(CANCELLATION_TOL)
    }

    /// Builds without normalization; callers guarantee canonical form.
    fn raw(num: Polynomial, den: Polynomial, delay: usize) -> Self {
        RationalTransfer { num, den, delay }
    }

    pub fn zero() -> Self {
        Self::raw(Polynomial::zero(), Polynomial::one(), 0)
    }

    pub fn gain(g: f64) -> Self {
        if g == 0.0 {
            return Self::zero();
        }
        Self::raw(Polynomial::constant(g), Polynomial::one(), 0)
    }

    /// `g * q^-delay`.
    pub fn delayed_gain(g: f64, delay: usize) -> Self {
        if g == 0.0 {
            return Self::zero();
        }
        Self::raw(Polynomial::constant(g), Polynomial::one(), delay)
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// True when the output at time `t` depends on the input at time `t`.
    pub fn has_feedthrough(&self) -> bool {
        self.delay == 0 && self.num.coeff(0) != 0.0
    }

    /// Number of coefficients a recursion needs to remember.
    pub fn order(&self) -> usize {
        (self.num.coeffs().len() + self.delay).max(self.den.coeffs().len())
    }

    /// Canonical form: `den[0] = 1`, leading numerator zeros folded into the
    /// delay, common pole/zero pairs within `tol` (relative) removed.
    pub fn canonicalize_with(self, tol: f64) -> Result<Self> {
        let d0 = self.den.coeff(0);
        if self.den.is_zero() || d0 == 0.0 {
            return Err(Error::InvalidTransfer(
                "denominator constant term must be nonzero".to_string(),
            ));
        }
        if !d0.is_finite() || self.num.coeffs().iter().chain(self.den.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransfer("non-finite coefficient".to_string()));
        }
        if self.num.is_zero() {
            return Ok(Self::zero());
        }
        let mut num = self.num.scale(1.0 / d0);
        let mut den = self.den.scale(1.0 / d0);
        let lead = num.leading_zeros();
        let delay = self.delay + lead;
        num = num.unshift(lead);

        if num.degree() >= 1 && den.degree() >= 1 {
            let zeros = num.z_roots()?;
            let poles = den.z_roots()?;
            let (zeros_left, poles_left, cancelled) = cancel_pairs(zeros, poles, tol);
            if cancelled {
                num = Polynomial::from_z_roots(&zeros_left, num.coeff(0));
                den = Polynomial::from_z_roots(&poles_left, 1.0);
            }
        }
        Ok(Self::raw(num, den, delay))
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let x = Complex64::from_polar(1.0, -omega);
        let d = self.den.eval(x);
        let scale = self.den.coeffs().iter().map(|c| c.abs()).sum::<f64>();
        if d.norm() <= 1e-12 * scale {
            return Err(Error::PoleOnUnitCircle { omega });
        }
        Ok(x.powu(self.delay as u32) * self.num.eval(x) / d)
    }

    pub fn freq_response(&self, omegas: &[f64]) -> Result<Vec<Complex64>> {
        omegas.iter().map(|&w| self.eval(w)).collect()
    }

    /// Pole magnitudes and verdict against `1 - STABILITY_MARGIN`.
    pub fn stability(&self) -> Result<Stability> {
        let pole_magnitudes: Vec<f64> = self.den.z_roots()?.iter().map(|r| r.norm()).collect();
        let max = pole_magnitudes.iter().copied().fold(0.0, f64::max);
        let verdict = if max < 1.0 - STABILITY_MARGIN {
            StabilityVerdict::Stable
        } else if max <= 1.0 + STABILITY_MARGIN {
            StabilityVerdict::Marginal
        } else {
            StabilityVerdict::Unstable
        };
        Ok(Stability { verdict, pole_magnitudes })
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.stability()?.verdict == StabilityVerdict::Stable)
    }

    /// Leading numerator and denominator coefficients equal to one, no delay.
    pub fn is_monic(&self) -> bool {
        self.delay == 0 && self.num.coeff(0) == 1.0 && self.den.coeff(0) == 1.0
    }

    /// All zeros strictly inside the unit circle (with margin).
    pub fn is_minimum_phase(&self) -> Result<bool> {
        if self.num.is_zero() {
            return Ok(false);
        }
        Ok(self.num.max_root_magnitude()? < 1.0 - STABILITY_MARGIN)
    }

    /// Direct-form recursion `den(q^-1) y(t) = num(q^-1) u(t - delay)`.
    ///
    /// With `require_stable` set, unstable or marginal transfers are rejected.
    pub fn filter(&self, input: &[f64], init: &InitialState, require_stable: bool) -> Result<Vec<f64>> {
        if require_stable {
            let s = self.stability()?;
            if s.verdict != StabilityVerdict::Stable {
                let max_pole = s.pole_magnitudes.iter().copied().fold(0.0, f64::max);
                return Err(Error::UnstableFilter { max_pole });
            }
        }
        let b = self.num.coeffs();
        let a = self.den.coeffs();
        let d = self.delay;
        let (past_u, past_y): (&[f64], &[f64]) = match init {
            InitialState::Zero => (&[], &[]),
            InitialState::Given { inputs, outputs } => (inputs, outputs),
        };
        let u_at = |t: isize| -> f64 {
            if t >= 0 {
                input[t as usize]
            } else {
                past_u.get((-t - 1) as usize).copied().unwrap_or(0.0)
            }
        };
        let mut y = vec![0.0; input.len()];
        for t in 0..input.len() {
            let ti = t as isize;
            let mut acc = 0.0;
            for (i, bi) in b.iter().enumerate() {
                acc += bi * u_at(ti - (d + i) as isize);
            }
            for (i, ai) in a.iter().enumerate().skip(1) {
                let past = ti - i as isize;
                let yv = if past >= 0 {
                    y[past as usize]
                } else {
                    past_y.get((-past - 1) as usize).copied().unwrap_or(0.0)
                };
                acc -= ai * yv;
            }
            y[t] = acc;
        }
        Ok(y)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let base = self.delay.min(other.delay);
        let a_num = self.num.shift(self.delay - base);
        let b_num = other.num.shift(other.delay - base);
        if self.den == other.den {
            return Self::from_polys(&a_num + &b_num, self.den.clone(), base);
        }
        let num = &(&a_num * &other.den) + &(&b_num * &self.den);
        Self::from_polys(num, &self.den * &other.den, base)
    }

    pub fn neg(&self) -> Self {
        Self::raw(-&self.num, self.den.clone(), self.delay)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        Self::from_polys(&self.num * &other.num, &self.den * &other.den, self.delay + other.delay)
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self::raw(self.num.scale(s), self.den.clone(), self.delay)
    }

    /// `self / other`; fails when the quotient would not be proper.
    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.is_zero() {
            return Err(Error::InvalidTransfer("division by zero transfer".to_string()));
        }
        if other.delay > self.delay {
            return Err(Error::InvalidTransfer("quotient is not proper".to_string()));
        }
        Self::from_polys(&self.num * &other.den, &self.den * &other.num, self.delay - other.delay)
    }

    /// Rational equality up to `tol` on the cross-multiplied coefficients.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let base = self.delay.min(other.delay);
        let lhs = &self.num.shift(self.delay - base) * &other.den;
        let rhs = &other.num.shift(other.delay - base) * &self.den;
        let n = lhs.coeffs().len().max(rhs.coeffs().len());
        (0..n).all(|k| (lhs.coeff(k) - rhs.coeff(k)).abs() <= tol)
    }

    /// Static (DC) gain `G(1)`.
    pub fn dc_gain(&self) -> Result<f64> {
        let d = self.den.eval_real(1.0);
        if d.abs() < 1e-14 {
            return Err(Error::PoleOnUnitCircle { omega: 0.0 });
        }
        Ok(self.num.eval_real(1.0) / d)
    }
}

/// Greedy nearest-pair cancellation of zeros against poles.
fn cancel_pairs(
    mut zeros: Vec<Complex64>,
    mut poles: Vec<Complex64>,
    tol: f64,
) -> (Vec<Complex64>, Vec<Complex64>, bool) {
    let mut cancelled = false;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, z) in zeros.iter().enumerate() {
            for (j, p) in poles.iter().enumerate() {
                let dist = (z - p).norm() / p.norm().max(1.0);
                if dist <= tol && best.is_none_or(|(_, _, bd)| dist < bd) {
                    best = Some((i, j, dist));
                }
            }
        }
        match best {
            Some((i, j, _)) => {
                let z = zeros.remove(i);
                let p = poles.remove(j);
                // Keep conjugate symmetry: drop the partners of complex pairs too.
                if z.im.abs() > 0.0 {
                    if let Some(k) = nearest(&zeros, z.conj()) {
                        zeros.remove(k);
                    }
                    if let Some(k) = nearest(&poles, p.conj()) {
                        poles.remove(k);
                    }
                }
                cancelled = true;
            }
            None => return (zeros, poles, cancelled),
        }
    }
}

fn nearest(set: &[Complex64], target: Complex64) -> Option<usize> {
    set.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).norm().partial_cmp(&(b.1 - target).norm()).unwrap())
        .map(|(i, _)| i)
}

fn write_list(f: &mut fmt::Formatter<'_>, c: &[f64]) -> fmt::Result {
    f.write_str("[")?;
    for (i, v) in c.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    f.write_str("]")
}

impl fmt::Display for RationalTransfer {
    /// `num=[b0,b1,...] den=[1,a1,...] delay=k`; the zero transfer prints `num=[0]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("num=")?;
        if self.num.is_zero() {
            f.write_str("[0]")?;
        } else {
            write_list(f, self.num.coeffs())?;
        }
        f.write_str(" den=")?;
        write_list(f, self.den.coeffs())?;
        write!(f, " delay={}", self.delay)
    }
}

/// Parses a bracketed, comma separated list of decimal reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected [..] list, got `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{}`", v.trim())))
        })
        .collect()
}

/// Splits `key=value` tokens on whitespace, keeping bracketed lists intact.
pub fn key_values(s: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut token = String::new();
    let mut flush = |token: &mut String| -> Result<()> {
        if token.is_empty() {
            return Ok(());
        }
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{token}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
        token.clear();
        Ok(())
    };
    for ch in s.chars() {
        match ch {
            '[' => {
                depth += 1;
                token.push(ch);
            }
            ']' => {
                depth = depth.saturating_sub(1);
                token.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => flush(&mut token)?,
            c if c.is_whitespace() => {}
            c => token.push(c),
        }
    }
    flush(&mut token)?;
    Ok(out)
}

impl FromStr for RationalTransfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut num = None;
        let mut den = None;
        let mut delay = 0usize;
        for (k, v) in key_values(s)? {
            match k.as_str() {
                "num" => num = Some(parse_list(&v)?),
                "den" => den = Some(parse_list(&v)?),
                "delay" => {
                    delay = v.parse().map_err(|_| Error::Parse(format!("bad delay `{v}`")))?
                }
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        let num = num.ok_or_else(|| Error::Parse("missing num".to_string()))?;
        let den = den.unwrap_or_else(|| vec![1.0]);
        RationalTransfer::new(num, den, delay)
    }
}

/// Monic, stable, minimum-phase shaper driven by white noise of given variance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseShape {
    shaper: RationalTransfer,
    variance: f64,
}

impl NoiseShape {
    pub fn new(shaper: RationalTransfer, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::InvalidTransfer(format!("noise variance {variance} must be finite and >= 0")));
        }
        if !shaper.is_monic() {
            return Err(Error::InvalidTransfer("noise shaper must be monic".to_string()));
        }
        if !shaper.is_stable()? {
            return Err(Error::InvalidTransfer("noise shaper must be stable".to_string()));
        }
        if !shaper.is_minimum_phase()? {
            return Err(Error::InvalidTransfer("noise shaper must be minimum phase".to_string()));
        }
        Ok(NoiseShape { shaper, variance })
    }

    pub fn white(variance: f64) -> Result<Self> {
        Self::new(RationalTransfer::gain(1.0), variance)
    }

    pub fn shaper(&self) -> &RationalTransfer {
        &self.shaper
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `lambda * |H(e^{i omega})|^2` on the grid.
    pub fn spectrum(&self, omegas: &[f64]) -> Result<Vec<f64>> {
        omegas
            .iter()
            .map(|&w| Ok(self.variance * self.shaper.eval(w)?.norm_sqr()))
            .collect()
    }
}
