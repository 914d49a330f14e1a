use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Radian frequencies in `[0, pi)`, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

pub const DEFAULT_GRID_POINTS: usize = 512;

impl FrequencyGrid {
    /// `omega_k = pi k / count`, starting at DC.
    pub fn uniform(count: usize) -> Self {
        FrequencyGrid {
            points: (0..count).map(|k| PI * k as f64 / count as f64).collect(),
        }
    }

    /// `omega_k = pi (k + 1) / (count + 1)`; avoids DC for formulas that divide
    /// by a spectrum vanishing there.
    pub fn uniform_skip_dc(count: usize) -> Self {
        FrequencyGrid {
            points: (0..count)
                .map(|k| PI * (k + 1) as f64 / (count + 1) as f64)
                .collect(),
        }
    }

    pub fn custom(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DimensionMismatch("empty frequency grid".into()));
        }
        let ok = points.iter().all(|w| w.is_finite() && *w >= 0.0 && *w < PI)
            && points.windows(2).all(|p| p[0] < p[1]);
        if !ok {
            return Err(Error::DimensionMismatch(
                "grid points must be strictly increasing in [0, pi)".into(),
            ));
        }
        Ok(FrequencyGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Some(count)` when this is `uniform(count)`.
    pub fn uniform_count(&self) -> Option<usize> {
        let n = self.points.len();
        let expected = FrequencyGrid::uniform(n);
        let same = self
            .points
            .iter()
            .zip(&expected.points)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        same.then_some(n)
    }

    /// Indices with `omega` in `[0.1 pi, 0.9 pi]`.
    pub fn midband_indices(&self) -> Vec<usize> {
        self.band_indices(0.1 * PI, 0.9 * PI)
    }

    pub fn band_indices(&self, lo: f64, hi: f64) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= lo && w <= hi)
            .map(|(i, _)| i)
            .collect()
    }

    /// Index of the grid point nearest to `pi / 2`.
    pub fn median_index(&self) -> usize {
        self.len() / 2
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid::uniform(DEFAULT_GRID_POINTS)
    }
}
