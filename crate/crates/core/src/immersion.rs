//! Predictor-set validation and the immersed network obtained by eliminating
//! every node outside `D_j ∪ {j}`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::fft_in_place;
use crate::grid::FrequencyGrid;
use crate::linalg::{self, CMatrix, CVector};
use crate::network::{LinearSignal, NetworkModel, SignalTag, SourceSpectra};
use crate::transfer::RationalTransfer;

/// Largest eliminated set for which lumped transfers are also formed exactly.
pub const MAX_EXACT_ELIMINATION: usize = 3;
const ILL_POSED_TOL: f64 = 1e-10;

/// Target module `G_jk` and the predictor inputs `D_j` used to estimate it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredictorSet {
    output: usize,
    input: usize,
    predictors: BTreeSet<usize>,
}

impl PredictorSet {
    /// `j` may not be a predictor of itself. Leaving `k` out is allowed here
    /// and reported by [`check_consistency_conditions`].
    pub fn new(output: usize, input: usize, predictors: impl IntoIterator<Item = usize>) -> Result<Self> {
        let predictors: BTreeSet<usize> = predictors.into_iter().collect();
        if predictors.contains(&output) {
            return Err(Error::ConsistencyViolated(format!("output node {output} listed as its own predictor")));
        }
        if output == 0 || input == 0 || predictors.contains(&0) {
            return Err(Error::ConsistencyViolated("node ids are 1-based".into()));
        }
        Ok(PredictorSet { output, input, predictors })
    }

    /// The full-MISO set `D_j = N_j`.
    pub fn full(model: &NetworkModel, output: usize, input: usize) -> Result<Self> {
        Self::new(output, input, model.in_neighbors(output))
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn predictors(&self) -> &BTreeSet<usize> {
        &self.predictors
    }

    /// Predictors in ascending order with the target input first.
    pub fn ordered(&self) -> Vec<usize> {
        let mut v = vec![self.input];
        v.extend(self.predictors.iter().copied().filter(|&p| p != self.input));
        v
    }

    /// In-neighbours of `j` left out of `D_j` (the `M` removed inputs).
    pub fn removed_inputs(&self, model: &NetworkModel) -> Vec<usize> {
        model
            .in_neighbors(self.output)
            .into_iter()
            .filter(|k| !self.predictors.contains(k))
            .collect()
    }

    /// Nodes eliminated by immersion: everything outside `D_j ∪ {j}`.
    pub fn eliminated(&self, model: &NetworkModel) -> Vec<usize> {
        (1..=model.node_count())
            .filter(|n| *n != self.output && !self.predictors.contains(n))
            .collect()
    }
}

impl fmt::Display for PredictorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j={} k={} D={{", self.output, self.input)?;
        for (i, p) in self.predictors.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `k` is not among the predictors.
    TargetInputMissing,
    /// A `k -> j` path avoiding `D_j \ {k}` other than the direct module.
    ParallelPath(Vec<usize>),
    /// A cycle through `j` avoiding `D_j`.
    Loop(Vec<usize>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |f: &mut fmt::Formatter<'_>, p: &[usize]| {
            for (i, n) in p.iter().enumerate() {
                if i > 0 {
                    write!(f, "->")?;
                }
                write!(f, "{n}")?;
            }
            Ok(())
        };
        match self {
            Violation::TargetInputMissing => write!(f, "target input is not a predictor"),
            Violation::ParallelPath(p) => {
                write!(f, "parallel path ")?;
                path(f, p)
            }
            Violation::Loop(p) => {
                write!(f, "loop ")?;
                path(f, p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyVerdict {
    pub violations: Vec<Violation>,
    /// Always false: absence of confounding variables is not checked.
    pub confounding_verified: bool,
}

impl ConsistencyVerdict {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConsistencyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_satisfied() {
            write!(f, "path and loop conditions satisfied")?;
        } else {
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, " (absence of confounding variables NOT verified)")
    }
}

/// Shortest path `start -> ... -> target` whose first hop is not `target` and
/// whose interior avoids `blocked`, `start` and `target`.
fn indirect_path(model: &NetworkModel, start: usize, target: usize, blocked: &BTreeSet<usize>) -> Option<Vec<usize>> {
    let allowed = |n: usize| n != start && n != target && !blocked.contains(&n);
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for m in model.out_neighbors(start) {
        if allowed(m) && !parent.contains_key(&m) {
            parent.insert(m, start);
            queue.push_back(m);
        }
    }
    while let Some(n) = queue.pop_front() {
        let outs = model.out_neighbors(n);
        if outs.contains(&target) {
            let mut path = vec![target, n];
            let mut cur = n;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                if p == start {
                    break;
                }
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for m in outs {
            if allowed(m) && !parent.contains_key(&m) {
                parent.insert(m, n);
                queue.push_back(m);
            }
        }
    }
    None
}

/// Path and loop conditions for consistent estimation of `G_jk` from `D_j`.
pub fn check_consistency_conditions(model: &NetworkModel, ps: &PredictorSet) -> Result<ConsistencyVerdict> {
    let (j, k) = (ps.output, ps.input);
    if model.module(j, k).is_none() {
        return Err(Error::NoSuchModule { output: j, input: k });
    }
    if let Some(&bad) = ps.predictors.iter().find(|&&p| p > model.node_count()) {
        return Err(Error::ConsistencyViolated(format!("predictor {bad} is not a node")));
    }
    let mut violations = Vec::new();
    if !ps.predictors.contains(&k) {
        violations.push(Violation::TargetInputMissing);
    }
    let others: BTreeSet<usize> = ps.predictors.iter().copied().filter(|&p| p != k).collect();
    if let Some(p) = indirect_path(model, k, j, &others) {
        violations.push(Violation::ParallelPath(p));
    }
    if let Some(p) = indirect_path(model, j, j, &ps.predictors) {
        violations.push(Violation::Loop(p));
    }
    Ok(ConsistencyVerdict { violations, confounding_verified: false })
}

/// All valid predictor sets for `G_jk`, smallest first, at most `max_sets`.
/// The full in-neighbour set is always included when it is valid.
pub fn enumerate_valid_predictor_sets(
    model: &NetworkModel,
    output: usize,
    input: usize,
    max_sets: usize,
) -> Result<Vec<PredictorSet>> {
    if model.module(output, input).is_none() {
        return Err(Error::NoSuchModule { output, input });
    }
    let candidates: Vec<usize> = (1..=model.node_count()).filter(|&n| n != output && n != input).collect();
    if candidates.len() > 20 {
        return Err(Error::DimensionMismatch("too many nodes for exhaustive predictor search".into()));
    }
    let mut subsets: Vec<Vec<usize>> = (0u32..(1u32 << candidates.len()))
        .map(|mask| {
            let mut s = vec![input];
            s.extend(candidates.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &n)| n));
            s.sort_unstable();
            s
        })
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let full = PredictorSet::full(model, output, input)?;
    let mut out = Vec::new();
    for s in subsets {
        let ps = PredictorSet::new(output, input, s)?;
        if check_consistency_conditions(model, &ps)?.is_satisfied() {
            out.push(ps);
        }
    }
    let full_valid = out.contains(&full);
    out.truncate(max_sets);
    if full_valid && max_sets > 0 && !out.contains(&full) {
        out.pop();
        out.push(full);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LumpedTransfer {
    /// Exact rational form when at most [`MAX_EXACT_ELIMINATION`] nodes are eliminated.
    pub exact: Option<RationalTransfer>,
    pub response: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ImmerseOptions {
    /// Proceed (with a warning) when the path or loop conditions fail.
    pub allow_inconsistent: bool,
}

#[derive(Debug, Clone)]
pub struct ImmersedNetwork {
    pub predictor_set: PredictorSet,
    pub grid: FrequencyGrid,
    pub eliminated: Vec<usize>,
    pub lumped: BTreeMap<usize, LumpedTransfer>,
    /// Transfer from each white source `[e_1..e_L, r_1..r_L]` into `breve v_j`.
    pub noise_contributions: LinearSignal,
    pub phi_breve_v: Vec<f64>,
    /// `lambda_j |H_j|^2` of the original node equation.
    pub phi_v: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ImmersedNetwork {
    pub fn lumped_response(&self, k: usize) -> Option<&[Complex64]> {
        self.lumped.get(&k).map(|l| l.response.as_slice())
    }

    pub fn lumped_exact(&self, k: usize) -> Option<&RationalTransfer> {
        self.lumped.get(&k).and_then(|l| l.exact.as_ref())
    }
}

fn gauss_jordan_rational(mut a: Vec<Vec<RationalTransfer>>, mut rhs: Vec<Vec<RationalTransfer>>) -> Result<Vec<Vec<RationalTransfer>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| a[r][col].has_feedthrough())
            .ok_or(Error::EliminatedIllPosed { omega: 0.0 })?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = a[col][col].clone();
        for c in 0..n {
            a[col][c] = a[col][c].div(&p)?;
        }
        for c in 0..rhs[col].len() {
            rhs[col][c] = rhs[col][c].div(&p)?;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let t = f.mul(&a[col][c])?;
                a[r][c] = a[r][c].sub(&t)?;
            }
            for c in 0..rhs[r].len() {
                let t = f.mul(&rhs[col][c])?;
                rhs[r][c] = rhs[r][c].sub(&t)?;
            }
        }
    }
    Ok(rhs)
}

fn exact_lumped(model: &NetworkModel, ps: &PredictorSet, z: &[usize]) -> Result<BTreeMap<usize, RationalTransfer>> {
    let j = ps.output;
    let g = |a: usize, b: usize| model.module(a, b).cloned().unwrap_or_else(RationalTransfer::zero);
    let preds: Vec<usize> = ps.predictors.iter().copied().collect();
    let mut out = BTreeMap::new();
    if z.is_empty() {
        for &d in &preds {
            out.insert(d, g(j, d));
        }
        return Ok(out);
    }
    let m: Vec<Vec<RationalTransfer>> = z
        .iter()
        .map(|&a| {
            z.iter()
                .map(|&b| if a == b { RationalTransfer::gain(1.0) } else { g(a, b).neg() })
                .collect()
        })
        .collect();
    // columns: one per predictor, then the w_j column
    let rhs: Vec<Vec<RationalTransfer>> = z
        .iter()
        .map(|&a| preds.iter().map(|&d| g(a, d)).chain(core::iter::once(g(a, j))).collect())
        .collect();
    let x = gauss_jordan_rational(m, rhs)?;
    let through = |col: usize| -> Result<RationalTransfer> {
        let mut acc = RationalTransfer::zero();
        for (zi, &a) in z.iter().enumerate() {
            acc = acc.add(&g(j, a).mul(&x[zi][col])?)?;
        }
        Ok(acc)
    };
    let s = through(preds.len())?;
    let denom = RationalTransfer::gain(1.0).sub(&s)?;
    for (ci, &d) in preds.iter().enumerate() {
        let num = g(j, d).add(&through(ci)?)?;
        out.insert(d, num.div(&denom)?);
    }
    Ok(out)
}

/// Eliminates all nodes outside `D_j ∪ {j}` and forms `breve v_j`.
pub fn immerse(model: &NetworkModel, ps: &PredictorSet, grid: &FrequencyGrid, opts: ImmerseOptions) -> Result<ImmersedNetwork> {
    let verdict = check_consistency_conditions(model, ps)?;
    let mut warnings = Vec::new();
    if !verdict.is_satisfied() {
        if opts.allow_inconsistent {
            warnings.push(format!("immersing despite violated conditions: {verdict}"));
        } else {
            return Err(Error::ConsistencyViolated(format!("{verdict}")));
        }
    }
    let spectra = SourceSpectra::new(model, grid)?;
    let l = model.node_count();
    let j = ps.output;
    let z = ps.eliminated(model);
    let preds: Vec<usize> = ps.predictors.iter().copied().collect();
    let nz = z.len();

    let mut responses: Vec<Vec<Complex64>> = vec![Vec::with_capacity(grid.len()); preds.len()];
    let mut contrib_rows = Vec::with_capacity(grid.len());
    for &w in grid.points() {
        let gm = model.g_matrix(w)?;
        let shapers: Vec<Complex64> = (1..=l)
            .map(|n| model.noise(n).shaper().eval(w))
            .collect::<Result<_>>()?;
        // x = (I - G_ZZ)^-1 [G_ZD | G_Zj | I]
        let mut row_jz = CVector::zeros(nz);
        let mut s = Complex64::new(0.0, 0.0);
        let mut through = vec![Complex64::new(0.0, 0.0); preds.len()];
        let mut via_z = vec![Complex64::new(0.0, 0.0); nz];
        if nz > 0 {
            let mut m = CMatrix::identity(nz, nz);
            for (a, &za) in z.iter().enumerate() {
                for (b, &zb) in z.iter().enumerate() {
                    m[(a, b)] -= gm[(za - 1, zb - 1)];
                }
                row_jz[a] = gm[(j - 1, za - 1)];
            }
            if m.determinant().norm() < ILL_POSED_TOL {
                return Err(Error::EliminatedIllPosed { omega: w });
            }
            let inv = linalg::invert(&m).ok_or(Error::EliminatedIllPosed { omega: w })?;
            let left = row_jz.transpose() * &inv;
            for (b, v) in via_z.iter_mut().enumerate() {
                *v = left[b];
            }
            for (ci, &d) in preds.iter().enumerate() {
                through[ci] = z.iter().enumerate().map(|(a, &za)| left[a] * gm[(za - 1, d - 1)]).sum();
            }
            s = z.iter().enumerate().map(|(a, &za)| left[a] * gm[(za - 1, j - 1)]).sum();
        }
        let one_minus_s = Complex64::new(1.0, 0.0) - s;
        if one_minus_s.norm() < ILL_POSED_TOL {
            return Err(Error::EliminatedIllPosed { omega: w });
        }
        for (ci, &d) in preds.iter().enumerate() {
            responses[ci].push((gm[(j - 1, d - 1)] + through[ci]) / one_minus_s);
        }
        // sources: e_n at index n-1, r_n at index l+n-1
        let mut row = CVector::zeros(2 * l);
        row[j - 1] = shapers[j - 1] / one_minus_s;
        row[l + j - 1] = s / one_minus_s;
        for (b, &zb) in z.iter().enumerate() {
            row[zb - 1] = via_z[b] * shapers[zb - 1] / one_minus_s;
            row[l + zb - 1] = via_z[b] / one_minus_s;
        }
        contrib_rows.push(row);
    }
    let noise_contributions = LinearSignal { rows: contrib_rows };
    let phi_breve_v: Vec<f64> = spectra
        .cross(&noise_contributions, &noise_contributions)
        .into_iter()
        .map(|c| c.re)
        .collect();
    let phi_v = model.noise(j).spectrum(grid.points())?;

    let exact = if nz <= MAX_EXACT_ELIMINATION {
        Some(exact_lumped(model, ps, &z)?)
    } else {
        None
    };
    let lumped = preds
        .iter()
        .zip(responses)
        .map(|(&d, response)| {
            let exact = exact.as_ref().and_then(|m| m.get(&d).cloned());
            (d, LumpedTransfer { exact, response })
        })
        .collect();
    Ok(ImmersedNetwork {
        predictor_set: ps.clone(),
        grid: grid.clone(),
        eliminated: z,
        lumped,
        noise_contributions,
        phi_breve_v,
        phi_v,
        warnings,
    })
}

pub fn immersed_noise_spectrum(model: &NetworkModel, ps: &PredictorSet, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    Ok(immerse(model, ps, grid, ImmerseOptions::default())?.phi_breve_v)
}

/// Signals of the immersed node equation as linear maps of the white sources.
pub fn immersed_signals(spectra: &SourceSpectra, imm: &ImmersedNetwork) -> Result<(LinearSignal, Vec<LinearSignal>)> {
    let preds = imm
        .predictor_set
        .ordered()
        .into_iter()
        .map(|k| spectra.signal(SignalTag::W(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok((imm.noise_contributions.clone(), preds))
}

/// Innovation variance `exp((1/pi) ∫ log Phi)` of a spectrum on `[0, pi)`,
/// by trapezoidal integration over the grid.
pub fn innovation_variance(spectrum: &[f64], grid: &FrequencyGrid) -> Result<f64> {
    if spectrum.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if let Some((index, &value)) = spectrum.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonpositiveSpectrum { index, value });
    }
    if let Some(count) = grid.uniform_count() {
        let mean = spectrum.iter().map(|v| v.ln()).sum::<f64>() / count as f64;
        return Ok(mean.exp());
    }
    let pts = grid.points();
    let logs: Vec<f64> = spectrum.iter().map(|v| v.ln()).collect();
    let mut area = logs[0] * pts[0] + logs[logs.len() - 1] * (PI - pts[pts.len() - 1]);
    for i in 1..pts.len() {
        area += 0.5 * (logs[i] + logs[i - 1]) * (pts[i] - pts[i - 1]);
    }
    Ok((area / PI).exp())
}

/// Minimum-phase monic factor of a spectrum sampled on a uniform grid from DC.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpectralFactor {
    pub factor: Vec<Complex64>,
    pub variance: f64,
}

/// Cepstral spectral factorization on the grid (diagnostic only).
pub fn grid_spectral_factor(spectrum: &[f64], grid: &FrequencyGrid) -> Result<GridSpectralFactor> {
    let count = grid.uniform_count().ok_or(Error::GridMismatch)?;
    if spectrum.len() != count {
        return Err(Error::GridMismatch);
    }
    if let Some((index, &value)) = spectrum.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonpositiveSpectrum { index, value });
    }
    let m = 2 * count;
    if !m.is_power_of_two() {
        return Err(Error::GridMismatch);
    }
    // even extension of log Phi over the full circle; the missing point at pi
    // is extrapolated from its neighbour
    let mut buf: Vec<Complex64> = (0..m)
        .map(|i| {
            let idx = if i < count {
                i
            } else if i == count {
                count - 1
            } else {
                m - i
            };
            Complex64::new(spectrum[idx].ln(), 0.0)
        })
        .collect();
    fft_in_place(&mut buf);
    let cep: Vec<f64> = buf.iter().map(|c| c.re / m as f64).collect();
    let variance = cep[0].exp();
    let mut half: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); m];
    for n in 1..count {
        half[n] = Complex64::new(cep[n], 0.0);
    }
    half[count] = Complex64::new(0.5 * cep[count], 0.0);
    fft_in_place(&mut half);
    let factor = half[..count].iter().map(|c| c.exp()).collect();
    Ok(GridSpectralFactor { factor, variance })
}
