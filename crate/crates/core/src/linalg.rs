//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn invert(m: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().try_inverse()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Inverse of a symmetric positive semidefinite matrix. On (near) singularity
/// returns the eigenvector of the smallest eigenvalue.
pub fn spd_inverse(m: &DMatrix<f64>, rel_tol: f64) -> core::result::Result<DMatrix<f64>, Vec<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let (imin, min) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !(max > 0.0) || min <= rel_tol * max {
        return Err(eig.eigenvectors.column(imin).iter().copied().collect());
    }
    let mut inv = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        inv += (v * v.transpose()) / lam;
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn real_symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().collect()
}
