//! Direct-method prediction-error identification of one node equation with a
//! Box-Jenkins structure
//! `y = sum_k q^-d_k B_k/F_k u_k + C/D e`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::spd_inverse;
use crate::poly::Polynomial;
use crate::transfer::{RationalTransfer, STABILITY_MARGIN};
use crate::variance::{CovarianceCurve, CurveLabel};

/// Largest root magnitude a projected polynomial may keep.
pub const PROJECTION_RADIUS: f64 = 0.99;
/// Data length must be at least this multiple of the parameter count.
pub const MIN_SAMPLES_PER_PARAM: usize = 20;
const SINGULAR_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InputOrders {
    /// Numerator coefficients `b_0 .. b_{nb-1}`.
    pub nb: usize,
    /// Denominator coefficients `f_1 .. f_nf`.
    pub nf: usize,
    pub delay: usize,
}

impl InputOrders {
    pub fn new(nb: usize, nf: usize, delay: usize) -> Self {
        InputOrders { nb, nf, delay }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BJStructure {
    pub inputs: Vec<InputOrders>,
    pub nc: usize,
    pub nd: usize,
}

impl BJStructure {
    pub fn new(inputs: Vec<InputOrders>, nc: usize, nd: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::DimensionMismatch("a Box-Jenkins structure needs at least one input".into()));
        }
        Ok(BJStructure { inputs, nc, nd })
    }

    /// Total parameter count `n`.
    pub fn n_params(&self) -> usize {
        self.inputs.iter().map(|o| o.nb + o.nf).sum::<usize>() + self.nc + self.nd
    }

    /// Index of `b_0` of input `k` (0-based input index).
    pub fn input_offset(&self, k: usize) -> usize {
        self.inputs[..k].iter().map(|o| o.nb + o.nf).sum()
    }

    pub fn noise_offset(&self) -> usize {
        self.input_offset(self.inputs.len())
    }

    /// Parameter range of input `k`'s `B` and `F` blocks.
    pub fn input_range(&self, k: usize) -> core::ops::Range<usize> {
        let o = self.input_offset(k);
        o..o + self.inputs[k].nb + self.inputs[k].nf
    }
}

/// Parameters laid out input by input (`B` then `F`), then `C`, then `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

struct Polys {
    b: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    fn check(&self, s: &BJStructure) -> Result<()> {
        if self.values.len() != s.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a structure with {}",
                self.values.len(),
                s.n_params()
            )));
        }
        Ok(())
    }

    fn monic(tail: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(tail.len() + 1);
        v.push(1.0);
        v.extend_from_slice(tail);
        v
    }

    fn unpack(&self, s: &BJStructure) -> Polys {
        let mut b = Vec::new();
        let mut f = Vec::new();
        for (k, o) in s.inputs.iter().enumerate() {
            let off = s.input_offset(k);
            b.push(self.values[off..off + o.nb].to_vec());
            f.push(Self::monic(&self.values[off + o.nb..off + o.nb + o.nf]));
        }
        let off = s.noise_offset();
        Polys {
            b,
            f,
            c: Self::monic(&self.values[off..off + s.nc]),
            d: Self::monic(&self.values[off + s.nc..off + s.nc + s.nd]),
        }
    }

    /// `q^-d B_k / F_k` of input `k` (0-based).
    pub fn module(&self, s: &BJStructure, k: usize) -> Result<RationalTransfer> {
        self.check(s)?;
        let p = self.unpack(s);
        if p.b[k].is_empty() {
            return Ok(RationalTransfer::zero());
        }
        RationalTransfer::new(p.b[k].clone(), p.f[k].clone(), s.inputs[k].delay)
    }

    /// Noise model `C / D`.
    pub fn noise_model(&self, s: &BJStructure) -> Result<RationalTransfer> {
        self.check(s)?;
        let p = self.unpack(s);
        RationalTransfer::new(p.c, p.d, 0)
    }
}

/// Output and input signals of one node equation.
#[derive(Debug, Clone, Copy)]
pub struct MisoData<'a> {
    pub output: &'a [f64],
    pub inputs: &'a [&'a [f64]],
}

impl<'a> MisoData<'a> {
    pub fn new(output: &'a [f64], inputs: &'a [&'a [f64]]) -> Result<Self> {
        if inputs.iter().any(|u| u.len() != output.len()) {
            return Err(Error::DimensionMismatch("input and output lengths differ".into()));
        }
        Ok(MisoData { output, inputs })
    }

    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output.is_empty()
    }
}

/// `den(q^-1) y(t) = num(q^-1) x(t - delay)` with `den[0] = 1`, zero state.
fn filt(num: &[f64], den: &[f64], delay: usize, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    for t in 0..n {
        let mut acc = 0.0;
        for (i, b) in num.iter().enumerate() {
            let lag = delay + i;
            if lag > t {
                break;
            }
            acc += b * x[t - lag];
        }
        for (i, a) in den.iter().enumerate().skip(1) {
            if i > t {
                break;
            }
            acc -= a * y[t - i];
        }
        y[t] = acc;
    }
    y
}

fn shifted(x: &[f64], lag: usize) -> impl Iterator<Item = f64> + '_ {
    let n = x.len();
    (0..n).map(move |t| if t >= lag { x[t - lag] } else { 0.0 })
}

fn is_stable_poly(p: &[f64]) -> Result<bool> {
    if p.len() <= 1 {
        return Ok(true);
    }
    Ok(Polynomial::new(p.to_vec()).max_root_magnitude()? < 1.0 - STABILITY_MARGIN)
}

struct Residuals {
    x: Vec<Vec<f64>>,
    z: Vec<f64>,
    eps: Vec<f64>,
}

fn check_data(s: &BJStructure, data: &MisoData<'_>) -> Result<()> {
    if data.inputs.len() != s.inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} input signals for a structure with {} inputs",
            data.inputs.len(),
            s.inputs.len()
        )));
    }
    Ok(())
}

fn residuals(s: &BJStructure, p: &Polys, data: &MisoData<'_>) -> Result<Residuals> {
    if !is_stable_poly(&p.c)? || p.f.iter().map(|f| is_stable_poly(f)).collect::<Result<Vec<_>>>()?.contains(&false) {
        return Err(Error::PredictorUnstable);
    }
    let mut z = data.output.to_vec();
    let mut x = Vec::with_capacity(s.inputs.len());
    for (k, o) in s.inputs.iter().enumerate() {
        let xk = filt(&p.b[k], &p.f[k], o.delay, data.inputs[k]);
        for (zt, xt) in z.iter_mut().zip(&xk) {
            *zt -= xt;
        }
        x.push(xk);
    }
    let eps = if s.nc + s.nd == 0 { z.clone() } else { filt(&p.d, &p.c, 0, &z) };
    Ok(Residuals { x, z, eps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub yhat: Vec<f64>,
    pub eps: Vec<f64>,
}

/// One-step-ahead prediction `yhat(t|t-1)` and residuals `eps = y - yhat`.
pub fn predict(s: &BJStructure, theta: &ParamVector, data: &MisoData<'_>) -> Result<Prediction> {
    theta.check(s)?;
    check_data(s, data)?;
    let r = residuals(s, &theta.unpack(s), data)?;
    let yhat = data.output.iter().zip(&r.eps).map(|(y, e)| y - e).collect();
    Ok(Prediction { yhat, eps: r.eps })
}

fn gradient_from(s: &BJStructure, p: &Polys, data: &MisoData<'_>, r: &Residuals) -> DMatrix<f64> {
    let n = data.len();
    let mut cols: Vec<f64> = Vec::with_capacity(n * s.n_params());
    let noise = s.nc + s.nd > 0;
    let dc = |v: Vec<f64>| if noise { filt(&p.d, &p.c, 0, &v) } else { v };
    for (k, o) in s.inputs.iter().enumerate() {
        if o.nb > 0 {
            let g = dc(filt(&[1.0], &p.f[k], 0, data.inputs[k]));
            for i in 0..o.nb {
                cols.extend(shifted(&g, o.delay + i).map(|v| -v));
            }
        }
        if o.nf > 0 {
            let h = dc(filt(&[1.0], &p.f[k], 0, &r.x[k]));
            for i in 1..=o.nf {
                cols.extend(shifted(&h, i));
            }
        }
    }
    if s.nc > 0 {
        let ec = filt(&[1.0], &p.c, 0, &r.eps);
        for i in 1..=s.nc {
            cols.extend(shifted(&ec, i).map(|v| -v));
        }
    }
    if s.nd > 0 {
        let zc = filt(&[1.0], &p.c, 0, &r.z);
        for i in 1..=s.nd {
            cols.extend(shifted(&zc, i));
        }
    }
    DMatrix::from_vec(n, s.n_params(), cols)
}

/// `psi(t) = d eps(t) / d theta`, one row per sample.
pub fn gradient(s: &BJStructure, theta: &ParamVector, data: &MisoData<'_>) -> Result<DMatrix<f64>> {
    theta.check(s)?;
    check_data(s, data)?;
    let p = theta.unpack(s);
    let r = residuals(s, &p, data)?;
    Ok(gradient_from(s, &p, data, &r))
}

/// Reflects roots outside the unit circle to `min(1/|z|, 0.99)`.
fn project_poly(tail: &mut [f64]) {
    if tail.is_empty() {
        return;
    }
    let p = Polynomial::new(ParamVector::monic(tail));
    let Ok(roots) = p.z_roots() else { return };
    if roots.iter().all(|r| r.norm() < 1.0 - STABILITY_MARGIN) {
        return;
    }
    let moved: Vec<Complex64> = roots
        .iter()
        .map(|r| {
            let m = r.norm();
            if m < 1.0 - STABILITY_MARGIN {
                *r
            } else {
                r * ((1.0 / m).min(PROJECTION_RADIUS) / m)
            }
        })
        .collect();
    let q = Polynomial::from_z_roots(&moved, 1.0);
    for (i, v) in tail.iter_mut().enumerate() {
        *v = q.coeff(i + 1);
    }
}

/// Makes every `F_k`, `C` and `D` stable.
pub fn project_stable(s: &BJStructure, theta: &mut ParamVector) {
    for (k, o) in s.inputs.iter().enumerate() {
        let off = s.input_offset(k) + o.nb;
        project_poly(&mut theta.values[off..off + o.nf]);
    }
    let off = s.noise_offset();
    project_poly(&mut theta.values[off..off + s.nc]);
    project_poly(&mut theta.values[off + s.nc..off + s.nc + s.nd]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Perturbed restarts in addition to the initial estimate.
    pub restarts: usize,
    pub seed: u64,
    /// Relative size of restart perturbations.
    pub perturbation: f64,
    pub arx_order: usize,
    pub cost_tol: f64,
    pub gradient_tol: f64,
    /// Skip the ARX initialization and start here.
    pub initial: Option<ParamVector>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            restarts: 5,
            seed: 0,
            perturbation: 0.1,
            arx_order: 10,
            cost_tol: 1e-9,
            gradient_tol: 1e-8,
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub structure: BJStructure,
    pub theta: ParamVector,
    /// `(1/N) sum eps^2` at the estimate.
    pub sigma2: f64,
    /// `sigma2 [ (1/N) sum psi psi^T ]^-1 / N`.
    pub p_theta: DMatrix<f64>,
    /// `(1/N) sum psi psi^T`.
    pub information: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted step of the winning start.
    pub trace: Vec<f64>,
    pub n_samples: usize,
    /// One line per start.
    pub starts: Vec<String>,
}

impl FitResult {
    pub fn module(&self, k: usize) -> Result<RationalTransfer> {
        self.theta.module(&self.structure, k)
    }

    pub fn module_response(&self, k: usize, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        self.module(k)?.freq_response(grid.points())
    }

    pub fn noise_model(&self) -> Result<RationalTransfer> {
        self.theta.noise_model(&self.structure)
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# covariance convention: P = sigma2 * inv((1/N) sum psi psi^T) / N")?;
        writeln!(f, "N = {}", self.n_samples)?;
        writeln!(f, "n = {}", self.structure.n_params())?;
        write!(f, "theta =")?;
        for v in &self.theta.values {
            write!(f, " {v:.10e}")?;
        }
        writeln!(f)?;
        writeln!(f, "sigma2 = {:.10e}", self.sigma2)?;
        writeln!(f, "P_theta (lower triangle):")?;
        for i in 0..self.p_theta.nrows() {
            for j in 0..=i {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:.6e}", self.p_theta[(i, j)])?;
            }
            writeln!(f)?;
        }
        writeln!(f, "iterations = {} converged = {}", self.iterations, self.converged)?;
        write!(f, "trace =")?;
        for c in &self.trace {
            write!(f, " {c:.10e}")?;
        }
        writeln!(f)?;
        for s in &self.starts {
            writeln!(f, "start: {s}")?;
        }
        Ok(())
    }
}

fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Least squares via SVD; rank-deficient problems get the minimum-norm answer.
fn least_squares(cols: &[Vec<f64>], y: &[f64], start: usize) -> Vec<f64> {
    let rows = y.len() - start;
    if cols.is_empty() {
        return Vec::new();
    }
    let a = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][start + r]);
    let b = DVector::from_column_slice(&y[start..]);
    let ata = a.tr_mul(&a);
    let atb = a.tr_mul(&b);
    let svd = ata.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    match svd.solve(&atb, tol) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; cols.len()],
    }
}

fn lagged(x: &[f64], lag: usize) -> Vec<f64> {
    shifted(x, lag).collect()
}

/// High-order ARX, per-input reduction, then a Hannan-Rissanen noise model.
pub fn initial_estimate(s: &BJStructure, data: &MisoData<'_>, arx_order: usize) -> Result<ParamVector> {
    check_data(s, data)?;
    let y = data.output;
    let na = arx_order;
    let mut cols = Vec::new();
    for i in 1..=na {
        cols.push(lagged(y, i).into_iter().map(|v| -v).collect::<Vec<_>>());
    }
    for (k, o) in s.inputs.iter().enumerate() {
        if o.nb == 0 {
            continue;
        }
        for i in 0..arx_order.max(o.nb) {
            cols.push(lagged(data.inputs[k], o.delay + i));
        }
    }
    let start = na + s.inputs.iter().map(|o| o.delay).max().unwrap_or(0) + arx_order;
    if y.len() <= start + cols.len() {
        return Err(Error::TooFewSamples { n: y.len(), required: start + cols.len() + 1 });
    }
    let est = least_squares(&cols, y, start);
    let a = ParamVector::monic(&est[..na]);
    let mut theta = vec![0.0; s.n_params()];
    let mut pos = na;
    let mut z = y.to_vec();
    for (k, o) in s.inputs.iter().enumerate() {
        if o.nb == 0 {
            continue;
        }
        let nbk = arx_order.max(o.nb);
        let b = &est[pos..pos + nbk];
        pos += nbk;
        let u = data.inputs[k];
        let xk = filt(b, &a, o.delay, u);
        let mut rc = Vec::new();
        for i in 0..o.nb {
            rc.push(lagged(u, o.delay + i));
        }
        for i in 1..=o.nf {
            rc.push(lagged(&xk, i).into_iter().map(|v| -v).collect());
        }
        let red = least_squares(&rc, &xk, o.delay + o.nb + o.nf);
        let off = s.input_offset(k);
        theta[off..off + o.nb + o.nf].copy_from_slice(&red);
        project_poly(&mut theta[off + o.nb..off + o.nb + o.nf]);
        let fk = ParamVector::monic(&theta[off + o.nb..off + o.nb + o.nf]);
        let xk = filt(&theta[off..off + o.nb], &fk, o.delay, u);
        for (zt, xt) in z.iter_mut().zip(xk) {
            *zt -= xt;
        }
    }
    if s.nc + s.nd > 0 {
        let ar = (2 * arx_order).max(s.nc + s.nd + 1);
        let cols: Vec<Vec<f64>> = (1..=ar).map(|i| lagged(&z, i).into_iter().map(|v| -v).collect()).collect();
        let a_z = ParamVector::monic(&least_squares(&cols, &z, ar));
        let e_hat = filt(&a_z, &[1.0], 0, &z);
        let mut hc = Vec::new();
        for i in 1..=s.nc {
            hc.push(lagged(&e_hat, i));
        }
        for i in 1..=s.nd {
            hc.push(lagged(&z, i).into_iter().map(|v| -v).collect());
        }
        let est = least_squares(&hc, &z, ar + s.nc.max(s.nd));
        let off = s.noise_offset();
        theta[off..off + s.nc + s.nd].copy_from_slice(&est);
        project_poly(&mut theta[off..off + s.nc]);
        project_poly(&mut theta[off + s.nc..off + s.nc + s.nd]);
    }
    Ok(ParamVector::new(theta))
}

struct LmOutcome {
    theta: ParamVector,
    cost: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn cost_of(s: &BJStructure, theta: &ParamVector, data: &MisoData<'_>) -> Option<(f64, Polys, Residuals)> {
    let p = theta.unpack(s);
    let r = residuals(s, &p, data).ok()?;
    let c = mean_square(&r.eps);
    c.is_finite().then_some((c, p, r))
}

fn levenberg_marquardt(s: &BJStructure, start: ParamVector, data: &MisoData<'_>, opts: &FitOptions) -> core::result::Result<LmOutcome, String> {
    let mut theta = start;
    project_stable(s, &mut theta);
    let (mut cost, mut p, mut r) = cost_of(s, &theta, data).ok_or_else(|| String::from("initial point not evaluable"))?;
    let n = data.len() as f64;
    let np = s.n_params();
    let mut mu = 1e-3;
    let mut trace = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let j = gradient_from(s, &p, data, &r);
        let eps = DVector::from_column_slice(&r.eps);
        let g = j.tr_mul(&eps) / n;
        if g.norm() < opts.gradient_tol {
            converged = true;
            break;
        }
        let a = j.tr_mul(&j) / n;
        let floor = a.diagonal().max() * 1e-12;
        let mut accepted = false;
        while mu < 1e12 {
            let mut m = a.clone();
            for i in 0..np {
                m[(i, i)] += mu * a[(i, i)].max(floor);
            }
            let step = match m.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let mut cand = ParamVector::new(theta.values.iter().zip(step.iter()).map(|(t, d)| t + d).collect());
            project_stable(s, &mut cand);
            match cost_of(s, &cand, data) {
                Some((c, pc, rc)) if c < cost => {
                    let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    theta = cand;
                    cost = c;
                    p = pc;
                    r = rc;
                    mu = (mu / 10.0).max(1e-12);
                    trace.push(cost);
                    accepted = true;
                    if rel < opts.cost_tol {
                        converged = true;
                    }
                    break;
                }
                _ => mu *= 10.0,
            }
        }
        if !accepted {
            // no descent direction left at numerical precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    if !cost.is_finite() {
        return Err(String::from("cost diverged"));
    }
    Ok(LmOutcome { theta, cost, iterations, converged, trace })
}

/// Prediction-error fit with Levenberg-Marquardt refinement and restarts.
pub fn fit_pem(s: &BJStructure, data: &MisoData<'_>, opts: &FitOptions) -> Result<FitResult> {
    check_data(s, data)?;
    let np = s.n_params();
    let required = MIN_SAMPLES_PER_PARAM * np.max(1);
    if data.len() < required {
        return Err(Error::TooFewSamples { n: data.len(), required });
    }
    let base = match &opts.initial {
        Some(t) => {
            t.check(s)?;
            t.clone()
        }
        None => initial_estimate(s, data, opts.arx_order)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<LmOutcome> = None;
    let mut starts = Vec::new();
    for attempt in 0..=opts.restarts {
        let start = if attempt == 0 {
            base.clone()
        } else {
            ParamVector::new(
                base.values
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + opts.perturbation * (v.abs() + 0.1) * z
                    })
                    .collect(),
            )
        };
        match levenberg_marquardt(s, start, data, opts) {
            Ok(out) => {
                starts.push(format!(
                    "#{attempt} cost={:.10e} iterations={} converged={}",
                    out.cost, out.iterations, out.converged
                ));
                if best.as_ref().is_none_or(|b| out.cost < b.cost) {
                    best = Some(out);
                }
            }
            Err(msg) => starts.push(format!("#{attempt} failed: {msg}")),
        }
    }
    let best = best.ok_or_else(|| Error::OptimizationFailed(starts.clone()))?;
    let (information, p_theta, sigma2) = covariance_at(s, &best.theta, data)?;
    Ok(FitResult {
        structure: s.clone(),
        theta: best.theta,
        sigma2,
        p_theta,
        information,
        iterations: best.iterations,
        converged: best.converged,
        trace: best.trace,
        n_samples: data.len(),
        starts,
    })
}

fn covariance_at(s: &BJStructure, theta: &ParamVector, data: &MisoData<'_>) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let p = theta.unpack(s);
    let r = residuals(s, &p, data)?;
    let n = data.len() as f64;
    let sigma2 = mean_square(&r.eps);
    let j = gradient_from(s, &p, data, &r);
    let info = j.tr_mul(&j) / n;
    let inv = spd_inverse(&info, SINGULAR_REL_TOL).map_err(|direction| Error::Unidentifiable { direction })?;
    Ok((info, inv * (sigma2 / n), sigma2))
}

/// Parameter covariance of the estimate, recomputed from the data.
pub fn param_covariance(fit: &FitResult, data: &MisoData<'_>) -> Result<DMatrix<f64>> {
    check_data(&fit.structure, data)?;
    Ok(covariance_at(&fit.structure, &fit.theta, data)?.1)
}

/// Delta-method variance of `G_k(e^{i omega})` from `P_theta`.
pub fn module_response_covariance(fit: &FitResult, k: usize, grid: &FrequencyGrid) -> Result<CovarianceCurve> {
    let s = &fit.structure;
    if k >= s.inputs.len() {
        return Err(Error::DimensionMismatch(format!("input {k} out of range")));
    }
    let o = s.inputs[k];
    let range = s.input_range(k);
    let p = fit.p_theta.view((range.start, range.start), (range.len(), range.len())).into_owned();
    let polys = fit.theta.unpack(s);
    let b = Polynomial::new(polys.b[k].clone());
    let f = Polynomial::new(polys.f[k].clone());
    let mut values = Vec::with_capacity(grid.len());
    for &w in grid.points() {
        let fw = f.eval_freq(w);
        let gw = Complex64::from_polar(1.0, -w * o.delay as f64) * b.eval_freq(w) / fw;
        let mut jac = Vec::with_capacity(range.len());
        for i in 0..o.nb {
            jac.push(Complex64::from_polar(1.0, -w * (o.delay + i) as f64) / fw);
        }
        for i in 1..=o.nf {
            jac.push(-Complex64::from_polar(1.0, -w * i as f64) * gw / fw);
        }
        let mut v = 0.0;
        for a in 0..jac.len() {
            for c in 0..jac.len() {
                v += (jac[a] * p[(a, c)] * jac[c].conj()).re;
            }
        }
        values.push(v.max(0.0));
    }
    CovarianceCurve::new(grid.clone(), values, CurveLabel::DeltaMethod, s.n_params(), fit.n_samples)
}
