//! Radix-2 FFT for the power-of-two transforms used by the spectral
//! estimators, with a direct DFT fallback for arbitrary frequency sets.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// In-place forward transform `X[k] = sum_t x[t] e^{-2 pi i k t / n}`.
/// `buf.len()` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, -2.0 * PI / len as f64);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= step;
            }
        }
        len <<= 1;
    }
}

/// `X(omega) = sum_t x[t] e^{-i omega t}` at each requested frequency.
pub fn dft_at(x: &[f64], omegas: &[f64]) -> Vec<Complex64> {
    omegas
        .iter()
        .map(|&w| {
            let rot = Complex64::from_polar(1.0, -w);
            let mut acc = Complex64::new(0.0, 0.0);
            // Horner in e^{-i omega}, highest power first.
            for &v in x.iter().rev() {
                acc = acc * rot + v;
            }
            acc
        })
        .collect()
}

/// `X(pi k / count)` for `k < count`, computed by wrapping `x` modulo
/// `2 count` and one FFT. `count` must be a power of two.
pub fn dft_uniform_half(x: &[f64], count: usize) -> Vec<Complex64> {
    let m = 2 * count;
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); m];
    for (t, &v) in x.iter().enumerate() {
        buf[t % m].re += v;
    }
    fft_in_place(&mut buf);
    buf.truncate(count);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<f64> = (0..37).map(|t| ((t * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let count = 16;
        let omegas: Vec<f64> = (0..count).map(|k| PI * k as f64 / count as f64).collect();
        let direct = dft_at(&x, &omegas);
        let fast = dft_uniform_half(&x, count);
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}
