//! Per-frequency asymptotic covariance of the target module estimate under a
//! given predictor selection, Monte-Carlo sample covariance, Welch spectra and
//! D/E-optimality comparisons.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::{dft_at, dft_uniform_half};
use crate::grid::FrequencyGrid;
use crate::immersion::{innovation_variance, ImmersedNetwork};
use crate::linalg::{self, CMatrix, CVector};
use crate::network::{LinearSignal, NetworkModel, SignalTag, SourceSpectra};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    FullMiso,
    Immersed,
    Sample,
    DeltaMethod,
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveLabel::FullMiso => "full-MISO",
            CurveLabel::Immersed => "immersed",
            CurveLabel::Sample => "sample",
            CurveLabel::DeltaMethod => "delta-method",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCurve {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub label: CurveLabel,
    pub n_params: usize,
    pub n_samples: usize,
}

impl CovarianceCurve {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>, label: CurveLabel, n_params: usize, n_samples: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonpositiveSpectrum { index, value });
        }
        Ok(CovarianceCurve { grid, values, label, n_params, n_samples })
    }

    /// CSV with header `omega,value,label,n_params,N`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega,value,label,n_params,N\n");
        for (w, v) in self.grid.points().iter().zip(&self.values) {
            let _ = writeln!(s, "{w},{v},{},{},{}", self.label, self.n_params, self.n_samples);
        }
        s
    }
}

/// Cross spectra of `x = [w_first, noise, others...]` in the layout
/// `[phi_w1, Gamma; Gamma^H, Upsilon]`, with the noise channel first in `Upsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub grid: FrequencyGrid,
    pub ordering: Vec<String>,
    pub phi_w1: Vec<f64>,
    pub gamma: Vec<CVector>,
    pub upsilon: Vec<CMatrix>,
}

impl SpectralBlock {
    /// Assembles a block from full spectral matrices ordered as `ordering`.
    pub fn from_matrices(grid: FrequencyGrid, ordering: Vec<String>, matrices: &[CMatrix]) -> Result<Self> {
        let m = ordering.len();
        if m < 2 || matrices.len() != grid.len() || matrices.iter().any(|a| a.nrows() != m || a.ncols() != m) {
            return Err(Error::DimensionMismatch("spectral matrices do not match the ordering".into()));
        }
        let phi_w1 = matrices.iter().map(|a| a[(0, 0)].re).collect();
        let gamma = matrices.iter().map(|a| CVector::from_fn(m - 1, |i, _| a[(0, i + 1)])).collect();
        let upsilon = matrices.iter().map(|a| a.view((1, 1), (m - 1, m - 1)).into_owned()).collect();
        Ok(SpectralBlock { grid, ordering, phi_w1, gamma, upsilon })
    }

    pub fn dim(&self) -> usize {
        self.ordering.len()
    }

    /// `[phi_w1, Gamma; Gamma^H, Upsilon]` at grid index `idx`.
    pub fn full_matrix(&self, idx: usize) -> CMatrix {
        let m = self.dim();
        let mut a = CMatrix::zeros(m, m);
        a[(0, 0)] = Complex64::new(self.phi_w1[idx], 0.0);
        for c in 1..m {
            a[(0, c)] = self.gamma[idx][c - 1];
            a[(c, 0)] = self.gamma[idx][c - 1].conj();
            for r in 1..m {
                a[(r, c)] = self.upsilon[idx][(r - 1, c - 1)];
            }
        }
        a
    }

    /// `phi_w1 - Gamma Upsilon^-1 Gamma^H` at grid index `idx`.
    pub fn schur(&self, idx: usize) -> Result<f64> {
        let u = &self.upsilon[idx];
        let g = &self.gamma[idx];
        let inv = linalg::invert(u).ok_or_else(|| Error::Singular(format!("Upsilon at omega = {}", self.grid.points()[idx])))?;
        let q = (g.transpose() * inv * g.map(|c| c.conj()))[(0, 0)];
        Ok(self.phi_w1[idx] - q.re)
    }

    pub fn schur_complements(&self) -> Result<Vec<f64>> {
        (0..self.grid.len()).map(|i| self.schur(i)).collect()
    }

    /// Drops channel `pos` of `Upsilon` (0 is the noise channel).
    pub fn without_channel(&self, pos: usize) -> Result<SpectralBlock> {
        let m = self.dim() - 1;
        if pos >= m || m < 2 {
            return Err(Error::DimensionMismatch(format!("cannot drop channel {pos}")));
        }
        let keep: Vec<usize> = (0..m).filter(|&c| c != pos).collect();
        let mut ordering = self.ordering.clone();
        ordering.remove(pos + 1);
        Ok(SpectralBlock {
            grid: self.grid.clone(),
            ordering,
            phi_w1: self.phi_w1.clone(),
            gamma: self.gamma.iter().map(|g| CVector::from_fn(keep.len(), |i, _| g[keep[i]])).collect(),
            upsilon: self
                .upsilon
                .iter()
                .map(|u| CMatrix::from_fn(keep.len(), keep.len(), |r, c| u[(keep[r], keep[c])]))
                .collect(),
        })
    }

    /// Element-wise average of blocks with the same layout.
    pub fn average(blocks: &[SpectralBlock]) -> Result<SpectralBlock> {
        let first = blocks.first().ok_or(Error::TooFewRuns { required: 1, got: 0 })?;
        if blocks.iter().any(|b| b.grid != first.grid || b.ordering != first.ordering) {
            return Err(Error::GridMismatch);
        }
        let k = blocks.len() as f64;
        let mats: Vec<CMatrix> = (0..first.grid.len())
            .map(|i| {
                let mut acc = CMatrix::zeros(first.dim(), first.dim());
                for b in blocks {
                    acc += b.full_matrix(i);
                }
                acc / Complex64::new(k, 0.0)
            })
            .collect();
        SpectralBlock::from_matrices(first.grid.clone(), first.ordering.clone(), &mats)
    }
}

/// Signals for an estimated spectral block.
#[derive(Debug, Clone)]
pub struct EstimatedSignals<'a> {
    /// White noise channel of the node equation (oracle `e_j` or an innovation estimate).
    pub noise: &'a [f64],
    pub nodes: BTreeMap<usize, &'a [f64]>,
    pub welch: WelchOptions,
}

#[derive(Debug, Clone, Copy)]
pub enum SpectralSource<'a> {
    /// True system; noise channel `e_j`.
    Analytic(&'a NetworkModel),
    /// True system after immersion; noise channel `breve e`.
    Immersed(&'a NetworkModel, &'a ImmersedNetwork),
    Estimated(&'a EstimatedSignals<'a>),
}

fn predictor_ids(j: usize, predictors: &[SignalTag]) -> Result<Vec<usize>> {
    if predictors.is_empty() {
        return Err(Error::UnknownTag("no predictor tags".into()));
    }
    predictors
        .iter()
        .map(|t| match *t {
            SignalTag::W(k) if k != j => Ok(k),
            other => Err(Error::UnknownTag(format!("{other} is not a predictor of w{j}"))),
        })
        .collect()
}

/// Builds the block for node `j` with predictors in the given order; the first
/// predictor is the target input.
pub fn build_spectral_block(
    source: SpectralSource<'_>,
    j: usize,
    predictors: &[SignalTag],
    grid: &FrequencyGrid,
) -> Result<SpectralBlock> {
    let ids = predictor_ids(j, predictors)?;
    let mut ordering = vec![format!("w{}", ids[0])];
    match source {
        SpectralSource::Analytic(model) => {
            ordering.push(format!("e{j}"));
            ordering.extend(ids[1..].iter().map(|k| format!("w{k}")));
            let s = SourceSpectra::new(model, grid)?;
            let mut sigs = vec![s.signal(SignalTag::W(ids[0]))?, s.signal(SignalTag::E(j))?];
            for &k in &ids[1..] {
                sigs.push(s.signal(SignalTag::W(k))?);
            }
            block_from_signals(&s, grid, ordering, &sigs)
        }
        SpectralSource::Immersed(model, imm) => {
            let ps = &imm.predictor_set;
            let mut expected = ps.ordered();
            let mut given = ids.clone();
            if ps.output() != j || given[0] != expected[0] {
                return Err(Error::UnknownTag("predictor order does not match the immersed network".into()));
            }
            expected.sort_unstable();
            given.sort_unstable();
            if expected != given || imm.grid != *grid {
                return Err(Error::UnknownTag("predictor tags do not match the immersed network".into()));
            }
            ordering.push(format!("breve_e{j}"));
            ordering.extend(ids[1..].iter().map(|k| format!("w{k}")));
            let s = SourceSpectra::new(model, grid)?;
            // breve e = breve v / breve H with |breve H|^2 = phi_breve_v / breve lambda;
            // the phase of breve H does not affect the Schur complement
            let lambda = innovation_variance(&imm.phi_breve_v, grid)?;
            let scale: Vec<Complex64> = imm
                .phi_breve_v
                .iter()
                .map(|p| Complex64::new((lambda / p).sqrt(), 0.0))
                .collect();
            let breve_e = imm.noise_contributions.scaled(&scale);
            let mut sigs = vec![s.signal(SignalTag::W(ids[0]))?, breve_e];
            for &k in &ids[1..] {
                sigs.push(s.signal(SignalTag::W(k))?);
            }
            block_from_signals(&s, grid, ordering, &sigs)
        }
        SpectralSource::Estimated(est) => {
            ordering.push(format!("e{j}"));
            ordering.extend(ids[1..].iter().map(|k| format!("w{k}")));
            let mut chans: Vec<&[f64]> = Vec::with_capacity(ids.len() + 1);
            let node = |k: usize| est.nodes.get(&k).copied().ok_or(Error::UnknownTag(format!("w{k}")));
            chans.push(node(ids[0])?);
            chans.push(est.noise);
            for &k in &ids[1..] {
                chans.push(node(k)?);
            }
            let m = chans.len();
            let mut spectra = vec![vec![Vec::new(); m]; m];
            for a in 0..m {
                for b in a..m {
                    spectra[a][b] = welch_cross_spectrum(chans[a], chans[b], grid, &est.welch)?;
                }
            }
            let mats: Vec<CMatrix> = (0..grid.len())
                .map(|i| {
                    CMatrix::from_fn(m, m, |a, b| {
                        if a <= b {
                            spectra[a][b][i]
                        } else {
                            spectra[b][a][i].conj()
                        }
                    })
                })
                .collect();
            SpectralBlock::from_matrices(grid.clone(), ordering, &mats)
        }
    }
}

fn block_from_signals(s: &SourceSpectra, grid: &FrequencyGrid, ordering: Vec<String>, sigs: &[LinearSignal]) -> Result<SpectralBlock> {
    let refs: Vec<&LinearSignal> = sigs.iter().collect();
    let mats: Vec<CMatrix> = (0..grid.len()).map(|i| s.spectral_matrix(&refs, i)).collect();
    SpectralBlock::from_matrices(grid.clone(), ordering, &mats)
}

fn asymptotic(block: &SpectralBlock, n_params: usize, n_samples: usize, phi_v: &[f64], label: CurveLabel) -> Result<CovarianceCurve> {
    if phi_v.len() != block.grid.len() {
        return Err(Error::GridMismatch);
    }
    let scale = n_params as f64 / n_samples as f64;
    let mut values = Vec::with_capacity(phi_v.len());
    for (i, &pv) in phi_v.iter().enumerate() {
        let s = block.schur(i)?;
        if !(s > 0.0) {
            return Err(Error::NoExcitationMargin { omega: block.grid.points()[i], schur: s });
        }
        values.push(scale * pv / s);
    }
    CovarianceCurve::new(block.grid.clone(), values, label, n_params, n_samples)
}

/// `(n/N) phi_v / (phi_w1 - Gamma Upsilon^-1 Gamma^H)` for the full predictor set.
pub fn asymptotic_cov_full(block: &SpectralBlock, n_params: usize, n_samples: usize, phi_v: &[f64]) -> Result<CovarianceCurve> {
    asymptotic(block, n_params, n_samples, phi_v, CurveLabel::FullMiso)
}

/// Same expression with immersed quantities.
pub fn asymptotic_cov_immersed(
    block: &SpectralBlock,
    n_params: usize,
    n_samples: usize,
    phi_breve_v: &[f64],
) -> Result<CovarianceCurve> {
    asymptotic(block, n_params, n_samples, phi_breve_v, CurveLabel::Immersed)
}

/// `(n/N) phi_v [M^-1]_{11}` with `M` the full block matrix.
pub fn asymptotic_cov_direct(block: &SpectralBlock, n_params: usize, n_samples: usize, phi_v: &[f64]) -> Result<Vec<f64>> {
    let scale = n_params as f64 / n_samples as f64;
    (0..block.grid.len())
        .map(|i| {
            let inv = linalg::invert(&block.full_matrix(i)).ok_or_else(|| Error::Singular("spectral block".into()))?;
            Ok(scale * phi_v[i] * inv[(0, 0)].re)
        })
        .collect()
}

/// Signed condition values; positive means the immersed covariance is larger.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCurve {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
}

impl ConditionCurve {
    /// CSV with header `omega,condition_value,sign`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega,condition_value,sign\n");
        for (w, v) in self.grid.points().iter().zip(&self.values) {
            let sign = if *v > 0.0 {
                1
            } else if *v < 0.0 {
                -1
            } else {
                0
            };
            let _ = writeln!(s, "{w},{v},{sign}");
        }
        s
    }
}

/// `phi_breve_v/phi_v - n_full S_immersed / (n_immersed S_full)` per frequency.
pub fn theorem1_condition(
    full: &SpectralBlock,
    n_full: usize,
    immersed: &SpectralBlock,
    n_immersed: usize,
    phi_v: &[f64],
    phi_breve_v: &[f64],
) -> Result<ConditionCurve> {
    if full.grid != immersed.grid || phi_v.len() != full.grid.len() || phi_breve_v.len() != full.grid.len() {
        return Err(Error::GridMismatch);
    }
    let mut values = Vec::with_capacity(phi_v.len());
    for i in 0..phi_v.len() {
        let omega = full.grid.points()[i];
        let sf = full.schur(i)?;
        let si = immersed.schur(i)?;
        for s in [sf, si] {
            if !(s > 0.0) {
                return Err(Error::NoExcitationMargin { omega, schur: s });
            }
        }
        values.push(phi_breve_v[i] / phi_v[i] - (n_full as f64 * si) / (n_immersed as f64 * sf));
    }
    Ok(ConditionCurve { grid: full.grid.clone(), values })
}

/// Mean-removed average squared modulus of the deviations across runs.
pub fn sample_covariance(responses: &[Vec<Complex64>], grid: &FrequencyGrid) -> Result<CovarianceCurve> {
    if responses.len() < 2 {
        return Err(Error::TooFewRuns { required: 2, got: responses.len() });
    }
    if responses.iter().any(|r| r.len() != grid.len()) {
        return Err(Error::GridMismatch);
    }
    let runs = responses.len() as f64;
    let values = (0..grid.len())
        .map(|i| {
            let mean = responses.iter().map(|r| r[i]).sum::<Complex64>() / runs;
            responses.iter().map(|r| (r[i] - mean).norm_sqr()).sum::<f64>() / runs
        })
        .collect();
    CovarianceCurve::new(grid.clone(), values, CurveLabel::Sample, 0, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOptions {
    /// Defaults to `N / 8` when `None`.
    pub segment: Option<usize>,
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchOptions {
    fn default() -> Self {
        WelchOptions { segment: None, overlap: 0.5, window: Window::Hann }
    }
}

/// Averaged modified periodogram `Phi_xy = E[X conj(Y)]`, scaled so white
/// noise of variance `v` has level `v`.
pub fn welch_cross_spectrum(x: &[f64], y: &[f64], grid: &FrequencyGrid, opts: &WelchOptions) -> Result<Vec<Complex64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch("signals differ in length".into()));
    }
    let n = x.len();
    let seg = opts.segment.unwrap_or(n / 8);
    if seg < 2 || n < 2 * seg {
        return Err(Error::SignalTooShort { len: n, required: 2 * seg.max(2) });
    }
    let step = ((seg as f64) * (1.0 - opts.overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = match opts.window {
        Window::Hann => (0..seg)
            .map(|t| 0.5 - 0.5 * (2.0 * core::f64::consts::PI * t as f64 / seg as f64).cos())
            .collect(),
        Window::Rectangular => vec![1.0; seg],
    };
    let power: f64 = window.iter().map(|w| w * w).sum();
    let uniform = grid.uniform_count().filter(|c| c.is_power_of_two());
    let transform = |s: &[f64]| -> Vec<Complex64> {
        match uniform {
            Some(count) => dft_uniform_half(s, count),
            None => dft_at(s, grid.points()),
        }
    };
    let same = core::ptr::eq(x, y);
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut segments = 0usize;
    let mut start = 0;
    let mut bx = vec![0.0; seg];
    let mut by = vec![0.0; seg];
    while start + seg <= n {
        for t in 0..seg {
            bx[t] = window[t] * x[start + t];
            by[t] = window[t] * y[start + t];
        }
        let fx = transform(&bx);
        if same {
            for (a, v) in acc.iter_mut().zip(&fx) {
                *a += Complex64::new(v.norm_sqr(), 0.0);
            }
        } else {
            let fy = transform(&by);
            for ((a, u), v) in acc.iter_mut().zip(&fx).zip(&fy) {
                *a += u * v.conj();
            }
        }
        segments += 1;
        start += step;
    }
    let norm = 1.0 / (segments as f64 * power);
    Ok(acc.into_iter().map(|a| a * norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DVerdict {
    ABetter,
    BBetter,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DComparison {
    pub verdict: DVerdict,
    pub det_inv_a: f64,
    pub det_inv_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EVerdict {
    ADominates,
    BDominates,
    Incomparable,
    Equal,
}

fn inverse_checked(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::spd_inverse(p, 1e-14).map_err(|_| Error::Singular("covariance block".to_string()))
}

fn same_dims(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Larger `det(P^-1)` (smaller confidence ellipsoid) wins.
pub fn d_optimality_compare(pa: &DMatrix<f64>, pb: &DMatrix<f64>) -> Result<DComparison> {
    same_dims(pa, pb)?;
    let da = inverse_checked(pa)?.determinant();
    let db = inverse_checked(pb)?.determinant();
    let verdict = if (da - db).abs() <= 1e-12 * da.abs().max(db.abs()) {
        DVerdict::Equal
    } else if da > db {
        DVerdict::ABetter
    } else {
        DVerdict::BBetter
    };
    Ok(DComparison { verdict, det_inv_a: da, det_inv_b: db })
}

/// Loewner comparison of `P_a^-1` and `P_b^-1`.
pub fn e_optimality_compare(pa: &DMatrix<f64>, pb: &DMatrix<f64>) -> Result<EVerdict> {
    same_dims(pa, pb)?;
    let diff = inverse_checked(pa)? - inverse_checked(pb)?;
    let eig = linalg::real_symmetric_eigenvalues(&diff);
    let tol = 1e-10;
    let pos = eig.iter().any(|&e| e > tol);
    let neg = eig.iter().any(|&e| e < -tol);
    Ok(match (pos, neg) {
        (false, false) => EVerdict::Equal,
        (true, false) => EVerdict::ADominates,
        (false, true) => EVerdict::BDominates,
        (true, true) => EVerdict::Incomparable,
    })
}

/// Covariance of a parameter subset (the marginal block of `P`).
pub fn marginal_block(p: &DMatrix<f64>, range: core::ops::Range<usize>) -> DMatrix<f64> {
    p.view((range.start, range.start), (range.len(), range.len())).into_owned()
}
