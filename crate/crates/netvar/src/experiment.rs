//! Seeded Monte-Carlo campaigns comparing predictor sets for one module.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use netvar_core::immersion::ImmerseOptions;
use netvar_core::variance::{marginal_block, ConditionCurve, DComparison, EVerdict};
use netvar_core::{
    asymptotic_cov_full, asymptotic_cov_immersed, build_spectral_block, d_optimality_compare,
    e_optimality_compare, enumerate_valid_predictor_sets, fit_pem, immerse, module_response_covariance, predict,
    sample_covariance, simulate, theorem1_condition, BJStructure, CovarianceCurve, CurveLabel, FitOptions,
    FitResult, FrequencyGrid, ImmersedNetwork, InputOrders, MisoData, NetworkModel, PredictorSet, SignalRecord,
    SignalTag, SimulationOptions, SpectralBlock, SpectralSource,
};

use crate::config::{ExperimentConfig, SetupConfig};
use crate::error::{Error, Result};

/// A sweep point is abandoned when more than this fraction of runs fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// Residual autocorrelation lags in the whiteness check.
pub const WHITENESS_LAGS: usize = 20;
/// 95% quantile of chi-squared with [`WHITENESS_LAGS`] degrees of freedom.
const LJUNG_BOX_LIMIT: f64 = 31.410;

/// One modelling setup resolved against a concrete network.
#[derive(Debug, Clone)]
pub struct SetupPlan {
    pub name: String,
    pub predictor_set: PredictorSet,
    /// Node ids in model input order; the target input comes first.
    pub inputs: Vec<usize>,
    pub structure: BJStructure,
}

impl SetupPlan {
    pub fn is_full(&self, model: &NetworkModel) -> bool {
        self.predictor_set.eliminated(model).is_empty()
    }

    fn tags(&self) -> Vec<SignalTag> {
        self.inputs.iter().map(|&k| SignalTag::W(k)).collect()
    }
}

/// Resolves the configured setups; without any, compares the full set with
/// the smallest valid immersed set.
pub fn plan_setups(cfg: &ExperimentConfig, model: &NetworkModel) -> Result<Vec<SetupPlan>> {
    let (j, k) = cfg
        .target
        .ok_or_else(|| Error::Invalid("no target module configured".into()))?;
    let mut setups = cfg.setups.clone();
    if setups.is_empty() {
        let full = PredictorSet::full(model, j, k)?;
        setups.push(SetupConfig {
            name: "full".into(),
            predictors: full.ordered(),
            orders: None,
            nc: 0,
            nd: 0,
        });
        if let Some(ps) = enumerate_valid_predictor_sets(model, j, k, usize::MAX)?
            .into_iter()
            .find(|p| p.predictors() != full.predictors())
        {
            setups.push(SetupConfig { name: "immersed".into(), predictors: ps.ordered(), orders: None, nc: 0, nd: 0 });
        }
    }
    setups.iter().map(|s| plan_setup(model, j, k, s)).collect()
}

fn plan_setup(model: &NetworkModel, j: usize, k: usize, s: &SetupConfig) -> Result<SetupPlan> {
    let ps = PredictorSet::new(j, k, s.predictors.iter().copied())?;
    let inputs = ps.ordered();
    let orders = match &s.orders {
        Some(listed) => inputs
            .iter()
            .map(|id| {
                let pos = s.predictors.iter().position(|p| p == id).expect("predictor listed");
                listed[pos]
            })
            .collect(),
        None => true_orders(model, &ps, &inputs)?,
    };
    Ok(SetupPlan {
        name: s.name.clone(),
        predictor_set: ps,
        inputs,
        structure: BJStructure::new(orders, s.nc, s.nd)?,
    })
}

/// Orders of the true (lumped) transfers into `w_j`.
fn true_orders(model: &NetworkModel, ps: &PredictorSet, inputs: &[usize]) -> Result<Vec<InputOrders>> {
    let j = ps.output();
    let imm = if ps.eliminated(model).is_empty() {
        None
    } else {
        Some(immerse(model, ps, &FrequencyGrid::uniform(8), ImmerseOptions::default())?)
    };
    inputs
        .iter()
        .map(|&p| {
            let tf = match &imm {
                None => model.module(j, p).cloned(),
                Some(imm) => Some(imm.lumped_exact(p).cloned().ok_or_else(|| {
                    Error::Invalid(format!("cannot derive orders for w{p}: list them with orders=[..]"))
                })?),
            };
            Ok(match tf {
                Some(tf) if !tf.is_zero() => InputOrders::new(tf.num().coeffs().len(), tf.den().coeffs().len() - 1, tf.delay()),
                _ => InputOrders::new(1, 0, 1),
            })
        })
        .collect()
}

/// True-system quantities for one setup.
#[derive(Debug, Clone)]
pub struct AnalyticSetup {
    pub block: SpectralBlock,
    /// Noise spectrum of the setup's node equation (`phi_v` or `phi_breve_v`).
    pub phi_noise: Vec<f64>,
    pub curve: CovarianceCurve,
    pub immersed: Option<ImmersedNetwork>,
}

pub fn analytic_setup(model: &NetworkModel, plan: &SetupPlan, grid: &FrequencyGrid, n_samples: usize) -> Result<AnalyticSetup> {
    let j = plan.predictor_set.output();
    let n = plan.structure.n_params();
    if plan.is_full(model) {
        let block = build_spectral_block(SpectralSource::Analytic(model), j, &plan.tags(), grid)?;
        let phi_noise = model.noise(j).spectrum(grid.points())?;
        let curve = asymptotic_cov_full(&block, n, n_samples, &phi_noise)?;
        Ok(AnalyticSetup { block, phi_noise, curve, immersed: None })
    } else {
        let imm = immerse(model, &plan.predictor_set, grid, ImmerseOptions::default())?;
        let block = build_spectral_block(SpectralSource::Immersed(model, &imm), j, &plan.tags(), grid)?;
        let phi_noise = imm.phi_breve_v.clone();
        let curve = asymptotic_cov_immersed(&block, n, n_samples, &phi_noise)?;
        Ok(AnalyticSetup { block, phi_noise, curve, immersed: Some(imm) })
    }
}

/// Condition curve of `b` relative to the reference setup `a`.
pub fn condition_between(a: &AnalyticSetup, na: usize, b: &AnalyticSetup, nb: usize) -> Result<ConditionCurve> {
    Ok(theorem1_condition(&a.block, na, &b.block, nb, &a.phi_noise, &b.phi_noise)?)
}

/// SHA-256 over every sample of `w` and `r`, little-endian.
pub fn record_hash(rec: &SignalRecord) -> String {
    let mut h = Sha256::new();
    for seq in rec.w.iter().chain(&rec.r) {
        for v in seq {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Ljung-Box statistic of the residuals over [`WHITENESS_LAGS`] lags.
pub fn ljung_box(eps: &[f64]) -> f64 {
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    let c0: f64 = eps.iter().map(|e| (e - mean).powi(2)).sum();
    if c0 == 0.0 {
        return 0.0;
    }
    (1..=WHITENESS_LAGS.min(eps.len().saturating_sub(1)))
        .map(|tau| {
            let c: f64 = eps.iter().zip(&eps[tau..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
            (c / c0).powi(2) / (n - tau as f64)
        })
        .sum::<f64>()
        * n
        * (n + 2.0)
}

#[derive(Debug, Clone)]
pub struct SetupFit {
    pub fit: FitResult,
    pub response: Vec<Complex64>,
    pub delta: Vec<f64>,
    pub whiteness: f64,
}

/// Fits one setup on a record.
pub fn fit_setup(plan: &SetupPlan, rec: &SignalRecord, grid: &FrequencyGrid, opts: &FitOptions) -> Result<SetupFit> {
    let inputs: Vec<&[f64]> = plan.inputs.iter().map(|&k| rec.node(k)).collect();
    let data = MisoData::new(rec.node(plan.predictor_set.output()), &inputs)?;
    let fit = fit_pem(&plan.structure, &data, opts)?;
    let response = fit.module_response(0, grid)?;
    let delta = module_response_covariance(&fit, 0, grid)?.values;
    let eps = predict(&plan.structure, &fit.theta, &data)?.eps;
    Ok(SetupFit { whiteness: ljung_box(&eps), fit, response, delta })
}

#[derive(Debug, Clone)]
struct RunOutcome {
    seed: u64,
    record_hash: String,
    fits: std::result::Result<Vec<SetupFit>, String>,
}

fn run_one(model: &NetworkModel, plans: &[SetupPlan], cfg: &ExperimentConfig, grid: &FrequencyGrid, seed: u64) -> RunOutcome {
    let sim = SimulationOptions { sample_time: cfg.sample_time, burn_in: cfg.burn_in };
    let rec = match simulate(model, cfg.n_samples, seed, sim) {
        Ok(r) => r,
        Err(e) => return RunOutcome { seed, record_hash: String::new(), fits: Err(format!("simulation: {e}")) },
    };
    let hash = record_hash(&rec);
    let opts = FitOptions { restarts: cfg.restarts, seed, ..FitOptions::default() };
    let mut fits = Vec::with_capacity(plans.len());
    for plan in plans {
        // every setup must see exactly the record hashed above
        assert_eq!(record_hash(&rec), hash, "signal record changed between setups");
        match fit_setup(plan, &rec, grid, &opts) {
            Ok(f) => fits.push(f),
            Err(e) => return RunOutcome { seed, record_hash: hash, fits: Err(format!("setup {}: {e}", plan.name)) },
        }
    }
    RunOutcome { seed, record_hash: hash, fits: Ok(fits) }
}

/// Per-setup results at one sweep point.
#[derive(Debug, Clone)]
pub struct SetupSummary {
    pub name: String,
    pub inputs: Vec<usize>,
    pub n_params: usize,
    pub phi_noise: Vec<f64>,
    pub asymptotic: CovarianceCurve,
    /// `None` with fewer than two included runs or an aborted point.
    pub sample: Option<CovarianceCurve>,
    /// Run-averaged delta-method curve.
    pub delta: Option<CovarianceCurve>,
    /// Target-module responses of the included runs, in seed order.
    pub responses: Vec<Vec<Complex64>>,
    pub thetas: Vec<Vec<f64>>,
    /// Run-averaged parameter covariance.
    pub p_mean: Option<DMatrix<f64>>,
    pub converged: usize,
    pub whiteness_pass: usize,
    pub mean_iterations: f64,
    pub mean_sigma2: f64,
}

impl SetupSummary {
    /// Monte-Carlo variance of each parameter (mean removed, divided by runs).
    pub fn theta_spread(&self) -> Option<Vec<f64>> {
        let runs = self.thetas.len();
        if runs < 2 {
            return None;
        }
        let n = self.thetas[0].len();
        Some(
            (0..n)
                .map(|i| {
                    let mean = self.thetas.iter().map(|t| t[i]).sum::<f64>() / runs as f64;
                    self.thetas.iter().map(|t| (t[i] - mean).powi(2)).sum::<f64>() / runs as f64
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub gain: Option<f64>,
    pub setups: Vec<SetupSummary>,
    /// Second setup relative to the first.
    pub condition: Option<ConditionCurve>,
    /// Target-module marginal of the mean covariances, first setup as `a`.
    pub d_optimality: Option<DComparison>,
    pub e_optimality: Option<EVerdict>,
    pub included: Vec<u64>,
    pub excluded: Vec<(u64, String)>,
    pub record_hashes: Vec<(u64, String)>,
    pub aborted: Option<String>,
}

impl SweepPoint {
    /// `gain<g>` for swept points, `base` otherwise.
    pub fn label(&self) -> String {
        match self.gain {
            Some(g) => format!("gain{g}"),
            None => "base".into(),
        }
    }

    pub fn setup(&self, name: &str) -> Option<&SetupSummary> {
        self.setups.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    /// Canonical config text; hashing and manifests use it.
    pub config_text: String,
    pub config_hash: String,
    pub grid: FrequencyGrid,
    pub points: Vec<SweepPoint>,
    /// False for analytic-only bundles.
    pub fitted: bool,
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn sweep_gains(cfg: &ExperimentConfig) -> Vec<Option<f64>> {
    match &cfg.sweep {
        Some(s) => s.gains.iter().map(|&g| Some(g)).collect(),
        None => vec![None],
    }
}

fn validated_model(cfg: &ExperimentConfig, gain: Option<f64>, grid: &FrequencyGrid) -> Result<NetworkModel> {
    let model = cfg.network_at(gain)?;
    let report = model.validate_on(grid);
    if !report.is_valid() {
        return Err(Error::Core(netvar_core::Error::InvalidModel(report.issues)));
    }
    Ok(model)
}

fn analytic_point(cfg: &ExperimentConfig, gain: Option<f64>, grid: &FrequencyGrid) -> Result<(NetworkModel, Vec<SetupPlan>, Vec<AnalyticSetup>, Option<ConditionCurve>)> {
    let model = validated_model(cfg, gain, grid)?;
    let plans = plan_setups(cfg, &model)?;
    let analytic = plans
        .iter()
        .map(|p| analytic_setup(&model, p, grid, cfg.n_samples))
        .collect::<Result<Vec<_>>>()?;
    let condition = if plans.len() >= 2 {
        Some(condition_between(&analytic[0], plans[0].structure.n_params(), &analytic[1], plans[1].structure.n_params())?)
    } else {
        None
    };
    Ok((model, plans, analytic, condition))
}

fn empty_summary(plan: &SetupPlan, a: AnalyticSetup) -> SetupSummary {
    SetupSummary {
        name: plan.name.clone(),
        inputs: plan.inputs.clone(),
        n_params: plan.structure.n_params(),
        phi_noise: a.phi_noise,
        asymptotic: a.curve,
        sample: None,
        delta: None,
        responses: Vec::new(),
        thetas: Vec::new(),
        p_mean: None,
        converged: 0,
        whiteness_pass: 0,
        mean_iterations: 0.0,
        mean_sigma2: 0.0,
    }
}

/// Asymptotic curves and conditions at every sweep point, without fitting.
pub fn run_analytic(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.check()?;
    let grid = FrequencyGrid::uniform(cfg.grid);
    let mut points = Vec::new();
    for gain in sweep_gains(cfg) {
        let (_, plans, analytic, condition) = analytic_point(cfg, gain, &grid)?;
        let setups = plans.iter().zip(analytic).map(|(p, a)| empty_summary(p, a)).collect();
        points.push(SweepPoint {
            gain,
            setups,
            condition,
            d_optimality: None,
            e_optimality: None,
            included: Vec::new(),
            excluded: Vec::new(),
            record_hashes: Vec::new(),
            aborted: None,
        });
    }
    Ok(bundle(cfg, grid, points, false))
}

fn bundle(cfg: &ExperimentConfig, grid: FrequencyGrid, points: Vec<SweepPoint>, fitted: bool) -> ResultBundle {
    let config_text = cfg.to_text();
    ResultBundle { config: cfg.clone(), config_hash: config_hash(&config_text), config_text, grid, points, fitted }
}

/// Runs `cfg.runs` seeded simulations per sweep point and fits every setup
/// on each record.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.check()?;
    let grid = FrequencyGrid::uniform(cfg.grid);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let mut points = Vec::new();
    for gain in sweep_gains(cfg) {
        let (model, plans, analytic, condition) = analytic_point(cfg, gain, &grid)?;
        let outcomes: Vec<RunOutcome> = pool.install(|| {
            (0..cfg.runs as u64)
                .into_par_iter()
                .map(|i| run_one(&model, &plans, cfg, &grid, cfg.seed.wrapping_add(i)))
                .collect()
        });
        points.push(assemble_point(gain, &plans, analytic, condition, outcomes, &grid, cfg.runs)?);
    }
    Ok(bundle(cfg, grid, points, true))
}

fn assemble_point(
    gain: Option<f64>,
    plans: &[SetupPlan],
    analytic: Vec<AnalyticSetup>,
    condition: Option<ConditionCurve>,
    outcomes: Vec<RunOutcome>,
    grid: &FrequencyGrid,
    runs: usize,
) -> Result<SweepPoint> {
    let mut included = Vec::new();
    let mut excluded = Vec::new();
    let mut record_hashes = Vec::new();
    let mut per_setup: Vec<Vec<SetupFit>> = vec![Vec::new(); plans.len()];
    for o in outcomes {
        record_hashes.push((o.seed, o.record_hash));
        match o.fits {
            Ok(fits) => {
                included.push(o.seed);
                for (slot, f) in per_setup.iter_mut().zip(fits) {
                    slot.push(f);
                }
            }
            Err(msg) => excluded.push((o.seed, msg)),
        }
    }
    let aborted = (excluded.len() as f64 > MAX_FAILURE_FRACTION * runs as f64)
        .then(|| format!("{} of {} runs failed", excluded.len(), runs));
    let mut setups = Vec::new();
    for ((plan, a), fits) in plans.iter().zip(analytic).zip(per_setup) {
        let mut s = empty_summary(plan, a);
        if aborted.is_none() && !fits.is_empty() {
            summarize_fits(&mut s, &fits, grid)?;
        }
        setups.push(s);
    }
    let (mut d_optimality, mut e_optimality) = (None, None);
    if setups.len() >= 2 {
        if let (Some(pa), Some(pb)) = (&setups[0].p_mean, &setups[1].p_mean) {
            let ma = marginal_block(pa, plans[0].structure.input_range(0));
            let mb = marginal_block(pb, plans[1].structure.input_range(0));
            d_optimality = d_optimality_compare(&ma, &mb).ok();
            e_optimality = e_optimality_compare(&ma, &mb).ok();
        }
    }
    Ok(SweepPoint { gain, setups, condition, d_optimality, e_optimality, included, excluded, record_hashes, aborted })
}

fn summarize_fits(s: &mut SetupSummary, fits: &[SetupFit], grid: &FrequencyGrid) -> Result<()> {
    let runs = fits.len() as f64;
    s.responses = fits.iter().map(|f| f.response.clone()).collect();
    s.thetas = fits.iter().map(|f| f.fit.theta.values.clone()).collect();
    s.sample = sample_covariance(&s.responses, grid).ok();
    let delta: Vec<f64> = (0..grid.len())
        .map(|i| fits.iter().map(|f| f.delta[i]).sum::<f64>() / runs)
        .collect();
    s.delta = Some(CovarianceCurve::new(grid.clone(), delta, CurveLabel::DeltaMethod, s.n_params, fits[0].fit.n_samples)?);
    let mut p = fits[0].fit.p_theta.clone() * 0.0;
    for f in fits {
        p += &f.fit.p_theta;
    }
    s.p_mean = Some(p / runs);
    s.converged = fits.iter().filter(|f| f.fit.converged).count();
    s.whiteness_pass = fits.iter().filter(|f| f.whiteness < LJUNG_BOX_LIMIT).count();
    s.mean_iterations = fits.iter().map(|f| f.fit.iterations as f64).sum::<f64>() / runs;
    s.mean_sigma2 = fits.iter().map(|f| f.fit.sigma2).sum::<f64>() / runs;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseStudy {
    /// `G_43` with one numerator parameter: equal parameter counts at the target.
    OneParamG43,
    /// `G_43` with two numerator parameters.
    TwoParamG43,
}

impl CaseStudy {
    pub fn config_text(self) -> &'static str {
        match self {
            CaseStudy::OneParamG43 => include_str!("../configs/one_param_g43.txt"),
            CaseStudy::TwoParamG43 => include_str!("../configs/two_param_g43.txt"),
        }
    }

    pub fn config(self) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(self.config_text())
    }
}

impl fmt::Display for CaseStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseStudy::OneParamG43 => "one_param_g43",
            CaseStudy::TwoParamG43 => "two_param_g43",
        })
    }
}

impl FromStr for CaseStudy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_param_g43" | "one" => Ok(CaseStudy::OneParamG43),
            "two_param_g43" | "two" => Ok(CaseStudy::TwoParamG43),
            _ => Err(Error::Invalid(format!("unknown case-study variant `{s}`"))),
        }
    }
}

/// Command-line style overrides applied on top of a config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub workers: Option<usize>,
    pub n_samples: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.grid {
            cfg.grid = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.n_samples {
            cfg.n_samples = v;
        }
    }
}

/// Runs a built-in case-study campaign.
pub fn reproduce_case_study(variant: CaseStudy, overrides: Overrides) -> Result<ResultBundle> {
    let mut cfg = variant.config()?;
    overrides.apply(&mut cfg);
    run_montecarlo(&cfg)
}
