use netvar_core::fft::fft_in_place;
use netvar_core::{FrequencyGrid, InitialState, NoiseShape, Polynomial, RationalTransfer};
use num_complex::Complex64;
use proptest::prelude::*;

/// Order-2 stable transfer from two pole radii/angles and free numerator.
fn stable_tf() -> impl Strategy<Value = RationalTransfer> {
    (
        0.0..0.9f64,
        0.0..std::f64::consts::PI,
        prop::collection::vec(-1.0..1.0f64, 3),
        0usize..3,
    )
        .prop_map(|(r, th, num, delay)| {
            let pole = Complex64::from_polar(r, th);
            let den = Polynomial::from_z_roots(&[pole, pole.conj()], 1.0);
            RationalTransfer::new(num, den.coeffs().to_vec(), delay).unwrap()
        })
}

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonicalization_is_idempotent(tf in stable_tf()) {
        let again = RationalTransfer::new(tf.num().coeffs().to_vec(), tf.den().coeffs().to_vec(), tf.delay()).unwrap();
        prop_assert_eq!(&again, &tf);
        let text = tf.to_string();
        prop_assert_eq!(text.parse::<RationalTransfer>().unwrap(), tf);
    }

    #[test]
    fn series_filtering_matches_product(a in stable_tf(), b in stable_tf(), u in signal(400)) {
        let ab = a.mul(&b).unwrap();
        let direct = ab.filter(&u, &InitialState::Zero, true).unwrap();
        let inner = b.filter(&u, &InitialState::Zero, true).unwrap();
        let chained = a.filter(&inner, &InitialState::Zero, true).unwrap();
        let skip = 50.max(10 * ab.order());
        for t in skip..u.len() {
            prop_assert!((direct[t] - chained[t]).abs() < 1e-8);
        }
    }

    #[test]
    fn sum_and_product_respond_pointwise(a in stable_tf(), b in stable_tf()) {
        let grid = FrequencyGrid::uniform(128);
        let ra = a.freq_response(grid.points()).unwrap();
        let rb = b.freq_response(grid.points()).unwrap();
        let sum = a.add(&b).unwrap().freq_response(grid.points()).unwrap();
        let prod = a.mul(&b).unwrap().freq_response(grid.points()).unwrap();
        for i in 0..grid.len() {
            prop_assert!((sum[i] - (ra[i] + rb[i])).norm() < 1e-10);
            prop_assert!((prod[i] - ra[i] * rb[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn filter_matches_frequency_domain_product(tf in stable_tf(), u in signal(64)) {
        let m = 4096;
        let mut spec: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        spec.resize(m, Complex64::new(0.0, 0.0));
        fft_in_place(&mut spec);
        let omegas: Vec<f64> = (0..m).map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64).collect();
        let h = tf.freq_response(&omegas).unwrap();
        // inverse transform through conjugation
        let mut prod: Vec<Complex64> = spec.iter().zip(&h).map(|(a, b)| (a * b).conj()).collect();
        fft_in_place(&mut prod);
        let y = tf.filter(&u, &InitialState::Zero, true).unwrap();
        for t in 0..64 {
            prop_assert!((y[t] - prod[t].re / m as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn noise_spectrum_is_even_and_nonnegative(c in -0.9..0.9f64, a in -0.9..0.9f64, lambda in 0.0..2.0f64) {
        let h = RationalTransfer::new(vec![1.0, c], vec![1.0, a], 0).unwrap();
        let ns = NoiseShape::new(h, lambda).unwrap();
        let grid = FrequencyGrid::uniform(64);
        let pos = ns.spectrum(grid.points()).unwrap();
        let neg: Vec<f64> = grid.points().iter().map(|w| -w).collect();
        let neg = ns.spectrum(&neg).unwrap();
        for (p, n) in pos.iter().zip(&neg) {
            prop_assert!(*p >= 0.0);
            prop_assert!((p - n).abs() <= 1e-14 * p.max(1.0));
        }
    }
}
