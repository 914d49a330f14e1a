mod common;

use std::collections::BTreeMap;

use common::{case_study, first_order};
use nalgebra::DMatrix;
use netvar_core::immersion::{ImmerseOptions, ImmersedNetwork};
use netvar_core::linalg::{hermitian_min_eigenvalue, invert, CMatrix};
use netvar_core::network::white_noise;
use netvar_core::variance::{
    asymptotic_cov_direct, DVerdict, EVerdict, EstimatedSignals, WelchOptions, Window,
};
use netvar_core::{
    asymptotic_cov_full, asymptotic_cov_immersed, build_spectral_block, d_optimality_compare, e_optimality_compare,
    immerse, sample_covariance, simulate, theorem1_condition, welch_cross_spectrum, Error, FrequencyGrid,
    NetworkModel, NoiseShape, PredictorSet, SignalTag, SimulationOptions, SpectralBlock, SpectralSource,
};
use num_complex::Complex64;
use proptest::prelude::*;

const FULL_TAGS: [SignalTag; 3] = [SignalTag::W(1), SignalTag::W(3), SignalTag::W(4)];
const IMM_TAGS: [SignalTag; 2] = [SignalTag::W(1), SignalTag::W(3)];

struct Setup {
    full: SpectralBlock,
    imm: ImmersedNetwork,
    imm_block: SpectralBlock,
    n_full: usize,
    n_imm: usize,
    phi_v: Vec<f64>,
}

fn setup(gain: f64, two: bool, grid: &FrequencyGrid) -> Setup {
    let model = case_study(gain, two);
    let full = build_spectral_block(SpectralSource::Analytic(&model), 2, &FULL_TAGS, grid).unwrap();
    let ps = PredictorSet::new(2, 1, [1, 3]).unwrap();
    let imm = immerse(&model, &ps, grid, ImmerseOptions::default()).unwrap();
    let imm_block = build_spectral_block(SpectralSource::Immersed(&model, &imm), 2, &IMM_TAGS, grid).unwrap();
    let phi_v = model.noise(2).spectrum(grid.points()).unwrap();
    Setup { full, imm, imm_block, n_full: 5, n_imm: if two { 6 } else { 5 }, phi_v }
}

fn random_psd(m: usize, rng: &mut impl rand::Rng) -> CMatrix {
    let a = CMatrix::from_fn(m, m + 2, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    &a * a.adjoint()
}

fn block_of(mats: Vec<CMatrix>) -> SpectralBlock {
    let m = mats[0].nrows();
    let ordering = (0..m).map(|i| format!("x{i}")).collect();
    let grid = FrequencyGrid::uniform(mats.len());
    SpectralBlock::from_matrices(grid, ordering, &mats).unwrap()
}

#[test]
fn block_layouts_follow_the_ordering_convention() {
    let grid = FrequencyGrid::uniform(64);
    let s = setup(0.5, false, &grid);
    assert_eq!(s.full.ordering, ["w1", "e2", "w3", "w4"]);
    assert_eq!(s.full.upsilon[0].shape(), (3, 3));
    assert_eq!(s.imm_block.ordering, ["w1", "breve_e2", "w3"]);
    assert_eq!(s.imm_block.upsilon[0].shape(), (2, 2));
    for i in 0..grid.len() {
        assert!((s.full.upsilon[i][(0, 0)].re - 0.1).abs() < 1e-15);
        for b in [&s.full, &s.imm_block] {
            let u = &b.upsilon[i];
            assert!((u - u.adjoint()).norm() < 1e-15);
            assert!(hermitian_min_eigenvalue(&b.full_matrix(i)) >= -1e-9);
        }
    }
    // breve e of a white breve v has the same variance
    assert!((s.imm_block.upsilon[0][(0, 0)].re - 0.1 * 1.25).abs() < 1e-12);
}

#[test]
fn open_loop_noise_cross_term_vanishes() {
    let mut m = NetworkModel::new(2).with_module(2, 1, first_order(0.4, 0.5)).unwrap();
    for j in 1..=2 {
        m.set_noise(j, NoiseShape::white(0.1).unwrap()).unwrap();
    }
    let grid = FrequencyGrid::uniform(32);
    let b = build_spectral_block(SpectralSource::Analytic(&m), 2, &[SignalTag::W(1)], &grid).unwrap();
    assert!(b.gamma.iter().all(|g| g[0].norm() == 0.0));
    // classic open-loop expression (n/N) phi_v / phi_u
    let curve = asymptotic_cov_full(&b, 2, 1000, &[0.1; 32]).unwrap();
    assert!(curve.values.iter().all(|v| (v - 2.0 / 1000.0 * 0.1 / 0.1).abs() < 1e-15));
}

#[test]
fn bad_tags_are_rejected() {
    let grid = FrequencyGrid::uniform(8);
    let m = case_study(0.5, false);
    let err = build_spectral_block(SpectralSource::Analytic(&m), 2, &[SignalTag::E(1)], &grid).unwrap_err();
    assert!(matches!(err, Error::UnknownTag(_)));
    let err = build_spectral_block(SpectralSource::Analytic(&m), 2, &[SignalTag::W(2)], &grid).unwrap_err();
    assert!(matches!(err, Error::UnknownTag(_)));
    let s = setup(0.5, false, &grid);
    let err = build_spectral_block(SpectralSource::Immersed(&m, &s.imm), 2, &FULL_TAGS, &grid).unwrap_err();
    assert!(matches!(err, Error::UnknownTag(_)));
}

#[test]
fn case_study_curves_are_finite_and_positive() {
    let grid = FrequencyGrid::default();
    for two in [false, true] {
        for &g in &[0.005, 0.05, 0.5, 1.0] {
            let s = setup(g, two, &grid);
            let full = asymptotic_cov_full(&s.full, s.n_full, 10_000, &s.phi_v).unwrap();
            let imm = asymptotic_cov_immersed(&s.imm_block, s.n_imm, 10_000, &s.imm.phi_breve_v).unwrap();
            assert_eq!(full.values.len(), 512);
            assert!(full.values.iter().chain(&imm.values).all(|v| v.is_finite() && *v > 0.0));
        }
    }
}

#[test]
fn identity_immersion_reproduces_full_curve() {
    let grid = FrequencyGrid::default();
    let m = case_study(0.5, true);
    let ps = PredictorSet::full(&m, 2, 1).unwrap();
    let imm = immerse(&m, &ps, &grid, ImmerseOptions::default()).unwrap();
    let ib = build_spectral_block(SpectralSource::Immersed(&m, &imm), 2, &FULL_TAGS, &grid).unwrap();
    let fb = build_spectral_block(SpectralSource::Analytic(&m), 2, &FULL_TAGS, &grid).unwrap();
    let phi_v = m.noise(2).spectrum(grid.points()).unwrap();
    let a = asymptotic_cov_full(&fb, 4, 10_000, &phi_v).unwrap();
    let b = asymptotic_cov_immersed(&ib, 4, 10_000, &imm.phi_breve_v).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-10 * x);
    }
    let c = theorem1_condition(&fb, 4, &ib, 4, &phi_v, &imm.phi_breve_v).unwrap();
    assert!(c.values.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn no_leak_and_fewer_parameters_favour_immersion() {
    let grid = FrequencyGrid::default();
    let s = setup(0.0, false, &grid);
    let full = asymptotic_cov_full(&s.full, s.n_full, 10_000, &s.phi_v).unwrap();
    let imm = asymptotic_cov_immersed(&s.imm_block, s.n_imm - 1, 10_000, &s.imm.phi_breve_v).unwrap();
    assert!(imm.values.iter().zip(&full.values).all(|(a, b)| a < b));
}

#[test]
fn condition_signs_in_the_case_study() {
    let grid = FrequencyGrid::default();
    let mid = grid.midband_indices();
    for &g in &[0.005, 0.05, 0.5, 1.0] {
        // v4 reaches w1 only through w2 together with v2, so dropping w4 loses
        // no information: the Schur complements agree and, with equal
        // parameter counts, the condition is exactly the noise leak g^2.
        let one = setup(g, false, &grid);
        let c = theorem1_condition(&one.full, one.n_full, &one.imm_block, one.n_imm, &one.phi_v, &one.imm.phi_breve_v)
            .unwrap();
        for i in 0..grid.len() {
            assert!((c.values[i] - g * g).abs() < 1e-9, "gain {g}: {}", c.values[i]);
        }
        let two = setup(g, true, &grid);
        let c = theorem1_condition(&two.full, two.n_full, &two.imm_block, two.n_imm, &two.phi_v, &two.imm.phi_breve_v)
            .unwrap();
        assert!(mid.iter().all(|&i| c.values[i] > 0.0), "gain {g}");
    }
    // fewer immersed parameters flip the sign at small gains
    let one = setup(0.005, false, &grid);
    let c = theorem1_condition(&one.full, 5, &one.imm_block, 4, &one.phi_v, &one.imm.phi_breve_v).unwrap();
    assert!(mid.iter().all(|&i| c.values[i] < 0.0));
}

#[test]
fn condition_sign_matches_covariance_difference() {
    let grid = FrequencyGrid::default();
    for two in [false, true] {
        for &g in &[0.005, 0.05, 0.5, 1.0] {
            let s = setup(g, two, &grid);
            let full = asymptotic_cov_full(&s.full, s.n_full, 10_000, &s.phi_v).unwrap();
            let imm = asymptotic_cov_immersed(&s.imm_block, s.n_imm, 10_000, &s.imm.phi_breve_v).unwrap();
            let c = theorem1_condition(&s.full, s.n_full, &s.imm_block, s.n_imm, &s.phi_v, &s.imm.phi_breve_v).unwrap();
            for i in 0..grid.len() {
                let d = imm.values[i] - full.values[i];
                if d.abs() > 1e-12 * full.values[i].max(imm.values[i]) {
                    assert_eq!(d > 0.0, c.values[i] > 0.0);
                }
            }
        }
    }
}

#[test]
fn grid_mismatch_is_reported() {
    let a = setup(0.5, false, &FrequencyGrid::uniform(16));
    let b = setup(0.5, false, &FrequencyGrid::uniform(32));
    let err = theorem1_condition(&a.full, 4, &b.imm_block, 3, &a.phi_v, &a.imm.phi_breve_v).unwrap_err();
    assert!(matches!(err, Error::GridMismatch));
}

#[test]
fn nonpositive_schur_complement_is_reported() {
    let mut m = CMatrix::identity(2, 2);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    m[(1, 0)] = Complex64::new(1.0, 0.0);
    let b = block_of(vec![m]);
    assert!(matches!(asymptotic_cov_full(&b, 1, 10, &[1.0]), Err(Error::NoExcitationMargin { .. })));
}

#[test]
fn sample_covariance_examples() {
    let grid = FrequencyGrid::uniform(4);
    let same = vec![vec![Complex64::new(1.0, 2.0); 4]; 3];
    assert!(sample_covariance(&same, &grid).unwrap().values.iter().all(|v| *v == 0.0));

    let a = Complex64::new(1.0, -1.0);
    let b = Complex64::new(0.5, 2.0);
    let m = (a + b) / 2.0;
    let c = sample_covariance(&[vec![a; 4], vec![b; 4]], &grid).unwrap();
    let expected = ((a - m).norm_sqr() + (b - m).norm_sqr()) / 2.0;
    assert!(c.values.iter().all(|v| (v - expected).abs() < 1e-15));

    assert!(matches!(sample_covariance(&[vec![a; 4]], &grid), Err(Error::TooFewRuns { .. })));
}

#[test]
fn sample_covariance_matches_naive_loop() {
    let grid = FrequencyGrid::default();
    let runs: Vec<Vec<Complex64>> = (0..100)
        .map(|r| {
            let re = white_noise(r, 0, 1.0, grid.len());
            let im = white_noise(r, 1, 1.0, grid.len());
            re.into_iter().zip(im).map(|(x, y)| Complex64::new(x, y)).collect()
        })
        .collect();
    let curve = sample_covariance(&runs, &grid).unwrap();
    for i in 0..grid.len() {
        let mut mean = Complex64::new(0.0, 0.0);
        for r in &runs {
            mean += r[i];
        }
        mean /= 100.0;
        let mut acc = 0.0;
        for r in &runs {
            let d = r[i] - mean;
            acc += d.re * d.re + d.im * d.im;
        }
        assert!((curve.values[i] - acc / 100.0).abs() < 1e-12);
    }
}

#[test]
fn welch_examples() {
    let grid = FrequencyGrid::default();
    let x = white_noise(5, 0, 0.1, 10_000);
    let opts = WelchOptions::default();
    let p = welch_cross_spectrum(&x, &x, &grid, &opts).unwrap();
    let mid = grid.midband_indices();
    let level = mid.iter().map(|&i| p[i].re).sum::<f64>() / mid.len() as f64;
    assert!((level / 0.1 - 1.0).abs() < 0.15);
    for &i in &mid {
        assert!(p[i].re > 0.0 && p[i].im.abs() <= 1e-12);
    }
    let y: Vec<f64> = std::iter::once(0.0).chain(x[..x.len() - 1].iter().copied()).collect();
    let xy = welch_cross_spectrum(&x, &y, &grid, &opts).unwrap();
    let yx = welch_cross_spectrum(&y, &x, &grid, &opts).unwrap();
    for i in grid.midband_indices() {
        let w = grid.points()[i];
        let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        assert!(wrap(xy[i].arg() - w).abs() < 0.05);
        assert!(wrap(yx[i].arg() + w).abs() < 0.05);
        assert!((xy[i] - yx[i].conj()).norm() < 1e-15);
    }
    // non-uniform grids take the direct transform
    let custom = FrequencyGrid::custom(vec![0.5, 1.0, 2.0]).unwrap();
    let q = welch_cross_spectrum(&x, &x, &custom, &opts).unwrap();
    let idx: Vec<usize> = [0.5, 1.0, 2.0].iter().map(|w| (w / std::f64::consts::PI * 512.0) as usize).collect();
    for (v, i) in q.iter().zip(idx) {
        assert!((v.re / p[i].re - 1.0).abs() < 0.3);
    }
    let short = [0.0; 10];
    assert!(welch_cross_spectrum(&short, &short, &grid, &WelchOptions { segment: Some(8), ..opts }).is_err());
    let rect = WelchOptions { window: Window::Rectangular, ..opts };
    assert!(welch_cross_spectrum(&x, &x, &grid, &rect).is_ok());
}

#[test]
fn welch_block_converges_to_analytic_block() {
    let grid = FrequencyGrid::default();
    let m = case_study(0.5, false);
    let analytic = build_spectral_block(SpectralSource::Analytic(&m), 2, &FULL_TAGS, &grid).unwrap();
    let blocks: Vec<SpectralBlock> = (0..200)
        .map(|r| {
            let rec = simulate(&m, 10_000, 5000 + r, SimulationOptions::default()).unwrap();
            let nodes: BTreeMap<usize, &[f64]> = (1..=4).map(|k| (k, rec.node(k))).collect();
            let est = EstimatedSignals { noise: &rec.e[1], nodes, welch: WelchOptions::default() };
            build_spectral_block(SpectralSource::Estimated(&est), 2, &FULL_TAGS, &grid).unwrap()
        })
        .collect();
    let avg = SpectralBlock::average(&blocks).unwrap();
    for i in grid.midband_indices() {
        let a = analytic.full_matrix(i);
        let e = avg.full_matrix(i);
        assert!((&e - &a).norm() / a.norm() < 0.1, "omega index {i}");
        // each node auto-spectrum individually
        for d in [0, 2, 3] {
            assert!((e[(d, d)].re / a[(d, d)].re - 1.0).abs() < 0.1);
        }
    }
}

#[test]
fn optimality_examples() {
    let p = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
    assert_eq!(d_optimality_compare(&p, &p).unwrap().verdict, DVerdict::Equal);
    assert_eq!(d_optimality_compare(&p, &q).unwrap().verdict, DVerdict::Equal);
    assert_eq!(d_optimality_compare(&p, &(&p * 2.0)).unwrap().verdict, DVerdict::ABetter);
    assert_eq!(d_optimality_compare(&(&p * 2.0), &p).unwrap().verdict, DVerdict::BBetter);
    assert_eq!(e_optimality_compare(&p, &(&p * 2.0)).unwrap(), EVerdict::ADominates);
    assert_eq!(e_optimality_compare(&(&p * 2.0), &p).unwrap(), EVerdict::BDominates);
    assert_eq!(e_optimality_compare(&p, &q).unwrap(), EVerdict::Incomparable);
    assert_eq!(e_optimality_compare(&p, &p).unwrap(), EVerdict::Equal);
    assert!(d_optimality_compare(&p, &DMatrix::identity(3, 3)).is_err());
    assert!(e_optimality_compare(&p, &DMatrix::zeros(2, 2)).is_err());
}

#[test]
fn curve_csv_headers() {
    let grid = FrequencyGrid::uniform(4);
    let s = setup(0.5, false, &grid);
    let c = asymptotic_cov_full(&s.full, 4, 100, &s.phi_v).unwrap();
    assert!(c.to_csv().starts_with("omega,value,label,n_params,N\n0,"));
    assert!(c.to_csv().contains(",full-MISO,4,100\n"));
    let t = theorem1_condition(&s.full, 4, &s.imm_block, 3, &s.phi_v, &s.imm.phi_breve_v).unwrap();
    assert!(t.to_csv().starts_with("omega,condition_value,sign\n"));
    assert_eq!(t.to_csv().lines().count(), 5);
}

#[test]
fn case_study_schur_shrinks_with_more_predictors() {
    let grid = FrequencyGrid::default();
    let s = setup(0.5, true, &grid);
    let reduced = s.full.without_channel(2).unwrap();
    for i in 0..grid.len() {
        assert!(reduced.schur(i).unwrap() >= s.full.schur(i).unwrap() - 1e-10);
    }
}

fn random_block(seed: u64, m: usize, points: usize) -> SpectralBlock {
    let mut r = common::rng(seed);
    block_of((0..points).map(|_| random_psd(m, &mut r)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_inverse_identity(seed in any::<u64>(), m in 2usize..6) {
        let b = random_block(seed, m, 16);
        let phi_v = vec![0.7; 16];
        let via_schur = asymptotic_cov_full(&b, 3, 1000, &phi_v).unwrap();
        let direct = asymptotic_cov_direct(&b, 3, 1000, &phi_v).unwrap();
        for (a, d) in via_schur.values.iter().zip(&direct) {
            prop_assert!((a - d).abs() <= 1e-10 * d.abs().max(1.0));
        }
    }

    #[test]
    fn removing_a_predictor_never_decreases_schur(seed in any::<u64>(), m in 3usize..6, drop in 1usize..5) {
        let b = random_block(seed, m, 8);
        let drop = 1 + (drop - 1) % (m - 2);
        let reduced = b.without_channel(drop).unwrap();
        for i in 0..8 {
            prop_assert!(reduced.schur(i).unwrap() >= b.schur(i).unwrap() - 1e-10);
        }
    }

    #[test]
    fn covariance_scales_with_n_and_data_length(seed in any::<u64>(), n in 1usize..20, len in 100usize..100_000) {
        let b = random_block(seed, 3, 8);
        let phi = vec![0.3; 8];
        let base = asymptotic_cov_full(&b, n, len, &phi).unwrap();
        let more_data = asymptotic_cov_full(&b, n, 2 * len, &phi).unwrap();
        let more_params = asymptotic_cov_full(&b, 2 * n, len, &phi).unwrap();
        for i in 0..8 {
            prop_assert!((more_data.values[i] * 2.0 - base.values[i]).abs() <= 1e-12 * base.values[i]);
            prop_assert!((more_params.values[i] - 2.0 * base.values[i]).abs() <= 1e-12 * base.values[i]);
        }
    }

    #[test]
    fn assembled_blocks_are_psd(seed in any::<u64>(), m in 2usize..6) {
        let b = random_block(seed, m, 4);
        for i in 0..4 {
            prop_assert!(hermitian_min_eigenvalue(&b.full_matrix(i)) >= -1e-9);
            let inv = invert(&b.full_matrix(i)).unwrap();
            prop_assert!((1.0 / inv[(0, 0)].re - b.schur(i).unwrap()).abs() <= 1e-8 * b.phi_w1[i]);
        }
    }
}
