//! Dynamic network model `w = G w + r + v`, simulation, and exact spectra.
//!
//! Node ids are 1-based throughout the public API (`w_1 .. w_L`), matching
//! the usual `G_jk` notation: `module(j, k)` maps `w_k` into `w_j`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::{Float, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{self, CMatrix, CVector};
use crate::poly::Polynomial;
use crate::transfer::{InitialState, NoiseShape, RationalTransfer, STABILITY_MARGIN};

/// Smallest `|det(I - G(e^{i omega}))|` accepted as well-posed.
pub const WELL_POSED_TOL: f64 = 1e-8;
pub const DEFAULT_BURN_IN: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Excitation {
    #[default]
    None,
    White {
        power: f64,
    },
    /// Externally supplied samples for the recorded window.
    External(Vec<f64>),
}

impl Excitation {
    /// Flat power for analytic spectra; `None` for external signals.
    pub fn white_power(&self) -> Option<f64> {
        match self {
            Excitation::None => Some(0.0),
            Excitation::White { power } => Some(*power),
            Excitation::External(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    node_count: usize,
    modules: BTreeMap<(usize, usize), RationalTransfer>,
    noise: Vec<NoiseShape>,
    excitations: Vec<Excitation>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl NetworkModel {
    /// `node_count` nodes with zero noise, no modules and no excitation.
    pub fn new(node_count: usize) -> Self {
        NetworkModel {
            node_count,
            modules: BTreeMap::new(),
            noise: (0..node_count)
                .map(|_| NoiseShape::white(0.0).expect("unit shaper is valid"))
                .collect(),
            excitations: vec![Excitation::None; node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    fn check_node(&self, id: usize) -> Result<()> {
        if id == 0 || id > self.node_count {
            return Err(Error::InvalidModel(vec![format!("node {id} out of range 1..={}", self.node_count)]));
        }
        Ok(())
    }

    /// Sets `G_{output,input}`; a zero transfer removes the module.
    pub fn set_module(&mut self, output: usize, input: usize, tf: RationalTransfer) -> Result<()> {
        self.check_node(output)?;
        self.check_node(input)?;
        if output == input {
            return Err(Error::InvalidModel(vec![format!("diagonal module G_{output}{input} not allowed")]));
        }
        if tf.is_zero() {
            self.modules.remove(&(output, input));
        } else {
            self.modules.insert((output, input), tf);
        }
        Ok(())
    }

    pub fn with_module(mut self, output: usize, input: usize, tf: RationalTransfer) -> Result<Self> {
        self.set_module(output, input, tf)?;
        Ok(self)
    }

    pub fn set_noise(&mut self, node: usize, noise: NoiseShape) -> Result<()> {
        self.check_node(node)?;
        self.noise[node - 1] = noise;
        Ok(())
    }

    pub fn set_excitation(&mut self, node: usize, excitation: Excitation) -> Result<()> {
        self.check_node(node)?;
        self.excitations[node - 1] = excitation;
        Ok(())
    }

    pub fn module(&self, output: usize, input: usize) -> Option<&RationalTransfer> {
        self.modules.get(&(output, input))
    }

    pub fn modules(&self) -> impl Iterator<Item = (&(usize, usize), &RationalTransfer)> {
        self.modules.iter()
    }

    pub fn noise(&self, node: usize) -> &NoiseShape {
        &self.noise[node - 1]
    }

    pub fn excitation(&self, node: usize) -> &Excitation {
        &self.excitations[node - 1]
    }

    /// In-neighbours `N_j`: nodes `k` with `G_jk != 0`.
    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        self.modules.keys().filter(|(o, _)| *o == j).map(|(_, i)| *i).collect()
    }

    pub fn out_neighbors(&self, k: usize) -> Vec<usize> {
        self.modules.keys().filter(|(_, i)| *i == k).map(|(o, _)| *o).collect()
    }

    /// `G(e^{i omega})` as an `L x L` matrix.
    pub fn g_matrix(&self, omega: f64) -> Result<CMatrix> {
        let l = self.node_count;
        let mut g = CMatrix::zeros(l, l);
        for (&(j, k), tf) in &self.modules {
            g[(j - 1, k - 1)] = tf.eval(omega)?;
        }
        Ok(g)
    }

    /// A cycle made of delay-free modules, if any.
    pub fn algebraic_loop(&self) -> Option<Vec<usize>> {
        self.feedthrough_order().err()
    }

    /// Topological order of nodes over the direct-feedthrough subgraph, or the
    /// nodes of a delay-free cycle.
    fn feedthrough_order(&self) -> core::result::Result<Vec<usize>, Vec<usize>> {
        let l = self.node_count;
        // adjacency: input -> outputs for feedthrough edges
        let mut adj = vec![Vec::new(); l + 1];
        for (&(j, k), tf) in &self.modules {
            if tf.has_feedthrough() {
                adj[k].push(j);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; l + 1];
        let mut order = Vec::with_capacity(l);
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            n: usize,
            adj: &[Vec<usize>],
            state: &mut [u8],
            order: &mut Vec<usize>,
            stack: &mut Vec<usize>,
        ) -> core::result::Result<(), Vec<usize>> {
            state[n] = 1;
            stack.push(n);
            for &m in &adj[n] {
                if state[m] == 1 {
                    let pos = stack.iter().position(|&s| s == m).unwrap_or(0);
                    return Err(stack[pos..].to_vec());
                }
                if state[m] == 0 {
                    visit(m, adj, state, order, stack)?;
                }
            }
            stack.pop();
            state[n] = 2;
            order.push(n);
            Ok(())
        }
        for n in 1..=l {
            if state[n] == 0 {
                visit(n, &adj, &mut state, &mut order, &mut stack)?;
            }
        }
        order.reverse();
        Ok(order)
    }

    /// Closed-loop characteristic polynomial `det(A(q^-1))`, where row `j` of
    /// `I - G` has been multiplied by the product of its module denominators.
    pub fn characteristic_polynomial(&self) -> Result<Polynomial> {
        let l = self.node_count;
        let mut row_den = vec![Polynomial::one(); l];
        for (&(j, _), tf) in &self.modules {
            row_den[j - 1] = &row_den[j - 1] * tf.den();
        }
        // entry (j,k) = -x^d num_jk * row_den_j / den_jk
        let mut entries: BTreeMap<(usize, usize), Polynomial> = BTreeMap::new();
        let mut row_degree = vec![0usize; l];
        for j in 0..l {
            row_degree[j] = row_den[j].degree().max(0) as usize;
        }
        for (&(j, k), tf) in &self.modules {
            let mut others = Polynomial::one();
            for (&(j2, k2), tf2) in &self.modules {
                if j2 == j && k2 != k {
                    others = &others * tf2.den();
                }
            }
            let p = -&(&tf.num().shift(tf.delay()) * &others);
            row_degree[j - 1] = row_degree[j - 1].max(p.degree().max(0) as usize);
            entries.insert((j - 1, k - 1), p);
        }
        let total: usize = row_degree.iter().sum();
        let m = (total + 1).next_power_of_two().max(4);
        let mut values = Vec::with_capacity(m);
        for s in 0..m {
            let x = Complex64::from_polar(1.0, 2.0 * PI * s as f64 / m as f64);
            let mut a = CMatrix::zeros(l, l);
            for j in 0..l {
                a[(j, j)] = row_den[j].eval(x);
            }
            for (&(j, k), p) in &entries {
                a[(j, k)] = p.eval(x);
            }
            values.push(a.determinant());
        }
        let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let coeffs: Vec<f64> = (0..=total)
            .map(|n| {
                let mut acc = Complex64::zero();
                for (s, v) in values.iter().enumerate() {
                    acc += v * Complex64::from_polar(1.0, -2.0 * PI * (s * n) as f64 / m as f64);
                }
                let c = acc.re / m as f64;
                if c.abs() < 1e-13 * scale { 0.0 } else { c }
            })
            .collect();
        Ok(Polynomial::new(coeffs))
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_on(&FrequencyGrid::default())
    }

    /// Lists every violated invariant; empty report means simulatable.
    pub fn validate_on(&self, grid: &FrequencyGrid) -> ValidationReport {
        let mut issues = Vec::new();
        for (&(j, k), tf) in &self.modules {
            match tf.is_stable() {
                Ok(true) => {}
                Ok(false) => issues.push(format!("module G_{j}{k} unstable")),
                Err(e) => issues.push(format!("module G_{j}{k}: {e}")),
            }
        }
        for (i, ex) in self.excitations.iter().enumerate() {
            if let Excitation::White { power } = ex {
                if !(*power >= 0.0) {
                    issues.push(format!("excitation power at node {} negative", i + 1));
                }
            }
        }
        if let Some(cycle) = self.algebraic_loop() {
            issues.push(format!("algebraic loop through nodes {cycle:?}"));
        }
        for &w in grid.points() {
            match self.g_matrix(w) {
                Ok(g) => {
                    let det = (CMatrix::identity(self.node_count, self.node_count) - g).determinant();
                    if det.norm() < WELL_POSED_TOL {
                        issues.push(format!("I - G near-singular at omega = {w}"));
                        break;
                    }
                }
                Err(e) => {
                    issues.push(format!("{e}"));
                    break;
                }
            }
        }
        match self.characteristic_polynomial() {
            Ok(p) => {
                if p.coeff(0).abs() < 1e-12 {
                    issues.push("closed loop ill-posed (characteristic polynomial vanishes at q^-1 = 0)".to_string());
                } else {
                    match p.max_root_magnitude() {
                        Ok(r) if r < 1.0 - STABILITY_MARGIN => {}
                        Ok(r) => issues.push(format!("closed loop unstable (largest pole magnitude {r:.6})")),
                        Err(e) => issues.push(format!("closed loop: {e}")),
                    }
                }
            }
            Err(e) => issues.push(format!("closed loop: {e}")),
        }
        ValidationReport { issues }
    }

    fn ensure_valid(&self) -> Result<()> {
        if let Some(cycle) = self.algebraic_loop() {
            return Err(Error::AlgebraicLoop { cycle });
        }
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidModel(report.issues))
        }
    }
}

/// Simulation output. Sequences are indexed by node id minus one.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub sample_time: f64,
    pub w: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// White noises driving `v_j = H_j e_j`; kept for oracles.
    pub e: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, id: usize) -> &[f64] {
        &self.w[id - 1]
    }

    pub fn excitation(&self, id: usize) -> &[f64] {
        &self.r[id - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub sample_time: f64,
    pub burn_in: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { sample_time: 1.0, burn_in: DEFAULT_BURN_IN }
    }
}

/// Seeded white Gaussian stream; each `(seed, stream)` pair is independent.
pub fn white_noise(seed: u64, stream: u64, variance: f64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sd = variance.sqrt();
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

/// Simulates `n` recorded samples after `burn_in` discarded ones, with zero
/// initial conditions. Node `j` draws `e_j` from stream `2(j-1)` and a white
/// `r_j` from stream `2(j-1)+1` of `seed`.
pub fn simulate(model: &NetworkModel, n: usize, seed: u64, opts: SimulationOptions) -> Result<SignalRecord> {
    model.ensure_valid()?;
    let total = n + opts.burn_in;
    let l = model.node_count();
    let mut e = Vec::with_capacity(l);
    let mut r = Vec::with_capacity(l);
    for j in 0..l {
        e.push(white_noise(seed, 2 * j as u64, model.noise[j].variance(), total));
        let rj = match &model.excitations[j] {
            Excitation::None => vec![0.0; total],
            Excitation::White { power } => white_noise(seed, 2 * j as u64 + 1, *power, total),
            Excitation::External(sig) => {
                if sig.len() < n {
                    return Err(Error::SignalTooShort { len: sig.len(), required: n });
                }
                let mut v = vec![0.0; opts.burn_in];
                v.extend_from_slice(&sig[..n]);
                v
            }
        };
        r.push(rj);
    }
    let w = propagate(model, &e, &r)?;
    let cut = |v: Vec<Vec<f64>>| v.into_iter().map(|s| s[opts.burn_in..].to_vec()).collect::<Vec<_>>();
    Ok(SignalRecord { sample_time: opts.sample_time, w: cut(w), r: cut(r), e: cut(e), seed })
}

/// Runs the network recursion for given white noises `e` and excitations `r`
/// (zero initial conditions, no burn-in). Returns the node signals.
pub fn propagate(model: &NetworkModel, e: &[Vec<f64>], r: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let order = model
        .feedthrough_order()
        .map_err(|cycle| Error::AlgebraicLoop { cycle })?;
    let l = model.node_count();
    if e.len() != l || r.len() != l {
        return Err(Error::DimensionMismatch(format!("expected {l} noise and excitation sequences")));
    }
    let n = e[0].len();
    if e.iter().chain(r).any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("source sequences differ in length".into()));
    }
    let mut w: Vec<Vec<f64>> = (0..l)
        .map(|j| {
            let v = model.noise[j].shaper().filter(&e[j], &InitialState::Zero, true)?;
            Ok(v.iter().zip(&r[j]).map(|(a, b)| a + b).collect())
        })
        .collect::<Result<_>>()?;

    struct Edge<'a> {
        out: usize,
        inp: usize,
        b: &'a [f64],
        a: &'a [f64],
        delay: usize,
        y: Vec<f64>,
    }
    let mut edges: Vec<Edge<'_>> = model
        .modules
        .iter()
        .map(|(&(j, k), tf)| Edge {
            out: j - 1,
            inp: k - 1,
            b: tf.num().coeffs(),
            a: tf.den().coeffs(),
            delay: tf.delay(),
            y: vec![0.0; n],
        })
        .collect();
    let mut by_output: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (idx, edge) in edges.iter().enumerate() {
        by_output[edge.out].push(idx);
    }
    for t in 0..n {
        for &node in &order {
            let j = node - 1;
            let mut acc = 0.0;
            for &idx in &by_output[j] {
                let edge = &mut edges[idx];
                let mut y = 0.0;
                let input = &w[edge.inp];
                for (i, bi) in edge.b.iter().enumerate() {
                    let lag = edge.delay + i;
                    if lag <= t {
                        y += bi * input[t - lag];
                    }
                }
                for (i, ai) in edge.a.iter().enumerate().skip(1) {
                    if i <= t {
                        y -= ai * edge.y[t - i];
                    }
                }
                edge.y[t] = y;
                acc += y;
            }
            w[j][t] += acc;
        }
    }
    Ok(w)
}

/// Identifies a signal whose spectrum can be computed from the true system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalTag {
    /// Node signal `w_k`.
    W(usize),
    /// White noise `e_k`.
    E(usize),
    /// Excitation `r_k`.
    R(usize),
}

impl fmt::Display for SignalTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalTag::W(k) => write!(f, "w{k}"),
            SignalTag::E(k) => write!(f, "e{k}"),
            SignalTag::R(k) => write!(f, "r{k}"),
        }
    }
}

impl FromStr for SignalTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::UnknownTag(s.to_string());
        let (head, rest) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let id: usize = rest.parse().map_err(|_| bad())?;
        match head {
            "w" => Ok(SignalTag::W(id)),
            "e" => Ok(SignalTag::E(id)),
            "r" => Ok(SignalTag::R(id)),
            _ => Err(bad()),
        }
    }
}

/// `T(omega) = (I - G)^-1` on a grid, together with the noise shapers, so
/// every node signal is a known linear map of the independent white sources
/// `[e_1..e_L, r_1..r_L]`.
#[derive(Debug, Clone)]
pub struct ClosedLoopResponse {
    grid: FrequencyGrid,
    node_count: usize,
    /// `(I - G)^-1` per grid point.
    inverse: Vec<CMatrix>,
    /// `H_k(e^{i omega})` per grid point and node.
    shapers: Vec<Vec<Complex64>>,
}

impl ClosedLoopResponse {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn inverse(&self, idx: usize) -> &CMatrix {
        &self.inverse[idx]
    }

    /// `L x 2L` map from `[e_1..e_L, r_1..r_L]` to `w` at grid index `idx`.
    pub fn channel_matrix(&self, idx: usize) -> CMatrix {
        let l = self.node_count;
        let t = &self.inverse[idx];
        let mut m = CMatrix::zeros(l, 2 * l);
        for k in 0..l {
            for j in 0..l {
                m[(j, k)] = t[(j, k)] * self.shapers[idx][k];
                m[(j, l + k)] = t[(j, k)];
            }
        }
        m
    }
}

pub fn closed_loop_response(model: &NetworkModel, grid: &FrequencyGrid) -> Result<ClosedLoopResponse> {
    let l = model.node_count();
    let eye = CMatrix::identity(l, l);
    let mut inverse = Vec::with_capacity(grid.len());
    let mut shapers = Vec::with_capacity(grid.len());
    for &w in grid.points() {
        let a = &eye - model.g_matrix(w)?;
        if a.determinant().norm() < WELL_POSED_TOL {
            return Err(Error::NearSingular { omega: w });
        }
        let inv = linalg::invert(&a).ok_or(Error::NearSingular { omega: w })?;
        inverse.push(inv);
        shapers.push(
            (1..=l)
                .map(|k| model.noise(k).shaper().eval(w))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(ClosedLoopResponse { grid: grid.clone(), node_count: l, inverse, shapers })
}

/// A signal given by its transfer from each independent white source, per
/// grid point. Sources are ordered `[e_1..e_L, r_1..r_L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSignal {
    pub rows: Vec<CVector>,
}

impl LinearSignal {
    pub fn scaled(&self, factors: &[Complex64]) -> LinearSignal {
        LinearSignal {
            rows: self.rows.iter().zip(factors).map(|(r, f)| r * *f).collect(),
        }
    }

    pub fn add(&self, other: &LinearSignal) -> LinearSignal {
        LinearSignal {
            rows: self.rows.iter().zip(&other.rows).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &LinearSignal) -> LinearSignal {
        LinearSignal {
            rows: self.rows.iter().zip(&other.rows).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Exact second-order description of all network signals.
#[derive(Debug, Clone)]
pub struct SourceSpectra {
    response: ClosedLoopResponse,
    powers: Vec<f64>,
}

impl SourceSpectra {
    /// Fails for external excitations, whose spectrum is unknown.
    pub fn new(model: &NetworkModel, grid: &FrequencyGrid) -> Result<Self> {
        let l = model.node_count();
        let mut powers = Vec::with_capacity(2 * l);
        for k in 1..=l {
            powers.push(model.noise(k).variance());
        }
        for k in 1..=l {
            powers.push(model.excitation(k).white_power().ok_or_else(|| {
                Error::UnknownTag(format!("r{k}: external excitation has no analytic spectrum"))
            })?);
        }
        Ok(SourceSpectra { response: closed_loop_response(model, grid)?, powers })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.response.grid
    }

    pub fn response(&self) -> &ClosedLoopResponse {
        &self.response
    }

    pub fn node_count(&self) -> usize {
        self.response.node_count
    }

    pub fn source_powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn signal(&self, tag: SignalTag) -> Result<LinearSignal> {
        let l = self.node_count();
        let check = |k: usize| {
            if k == 0 || k > l {
                Err(Error::UnknownTag(format!("{tag}")))
            } else {
                Ok(k - 1)
            }
        };
        let n = self.grid().len();
        let rows = match tag {
            SignalTag::W(k) => {
                let k = check(k)?;
                (0..n)
                    .map(|i| self.response.channel_matrix(i).row(k).transpose())
                    .collect()
            }
            SignalTag::E(k) => {
                let k = check(k)?;
                (0..n).map(|_| unit(2 * l, k)).collect()
            }
            SignalTag::R(k) => {
                let k = check(k)?;
                (0..n).map(|_| unit(2 * l, l + k)).collect()
            }
        };
        Ok(LinearSignal { rows })
    }

    /// `Phi_ab(omega) = sum_s A_s conj(B_s) P_s`.
    pub fn cross(&self, a: &LinearSignal, b: &LinearSignal) -> Vec<Complex64> {
        a.rows
            .iter()
            .zip(&b.rows)
            .map(|(ra, rb)| {
                ra.iter()
                    .zip(rb.iter())
                    .zip(&self.powers)
                    .map(|((x, y), p)| x * y.conj() * *p)
                    .sum()
            })
            .collect()
    }

    /// Hermitian spectral matrix of several signals at grid index `idx`.
    pub fn spectral_matrix(&self, signals: &[&LinearSignal], idx: usize) -> CMatrix {
        let m = signals.len();
        let mut out = CMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let ra = &signals[a].rows[idx];
                let rb = &signals[b].rows[idx];
                out[(a, b)] = ra
                    .iter()
                    .zip(rb.iter())
                    .zip(&self.powers)
                    .map(|((x, y), p)| x * y.conj() * *p)
                    .sum();
            }
        }
        out
    }
}

fn unit(n: usize, k: usize) -> CVector {
    let mut v = DVector::zeros(n);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

pub fn analytic_cross_spectrum(
    model: &NetworkModel,
    grid: &FrequencyGrid,
    a: SignalTag,
    b: SignalTag,
) -> Result<Vec<Complex64>> {
    let s = SourceSpectra::new(model, grid)?;
    Ok(s.cross(&s.signal(a)?, &s.signal(b)?))
}

/// Impulse response of `(I - G)^-1` column `k` by frequency-domain inversion
/// on `m` points (oracle helper; `m` must exceed the effective response length).
pub fn impulse_response_oracle(model: &NetworkModel, k: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    let l = model.node_count();
    let eye = CMatrix::identity(l, l);
    let mut cols = Vec::with_capacity(m);
    for s in 0..m {
        let w = 2.0 * PI * s as f64 / m as f64;
        let mut g = CMatrix::zeros(l, l);
        for (&(j, kk), tf) in model.modules() {
            g[(j - 1, kk - 1)] = tf.eval(w)?;
        }
        let inv = linalg::invert(&(&eye - g)).ok_or(Error::NearSingular { omega: w })?;
        cols.push(inv.column(k - 1).into_owned());
    }
    let mut out = vec![vec![0.0; m]; l];
    for (j, row) in out.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            let mut acc = Complex64::zero();
            for (s, c) in cols.iter().enumerate() {
                acc += c[j] * Complex64::from_polar(1.0, 2.0 * PI * (s * t) as f64 / m as f64);
            }
            *v = acc.re / m as f64;
        }
    }
    Ok(out)
}
