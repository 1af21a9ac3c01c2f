//! Small dense linear-algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

pub type Matrix = DMatrix<f64>;

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)))
}

pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max(libm::fabs(m[(i, j)] - m[(j, i)]));
        }
    }
    worst
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor polynomial
/// (`nalgebra` only ships `exp` with `std`).
pub fn expm(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let norm = m.row_iter().map(|r| r.iter().map(|v| libm::fabs(*v)).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = Matrix::identity(n, n);
    let mut sum = Matrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Replaces eigenvalues below `floor` by zero and rebuilds the matrix.
pub fn clamp_psd(m: &Matrix, floor: f64) -> Matrix {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| if l < floor { 0.0 } else { l });
    let v = &eig.eigenvectors;
    symmetrize(&(v * Matrix::from_diagonal(&vals) * v.transpose()))
}

/// A factor `L` with `L Lᵀ = cov`, via the symmetric eigendecomposition so that
/// degenerate directions are allowed. Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn psd_factor(cov: &Matrix, tol: f64) -> Result<Matrix> {
    let d = cov.nrows();
    if cov.ncols() != d {
        return Err(Error::Dimension { expected: d, got: cov.ncols() });
    }
    if d == 0 {
        return Ok(cov.clone());
    }
    let eig = symmetrize(cov).symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&roots))
}

/// Moduli of the (complex) eigenvalues of a general square matrix, from its real Schur
/// form.
pub fn eigenvalue_moduli(m: &Matrix) -> Vec<f64> {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .collect()
}

/// Symmetric, estimation-noise-tolerant covariance matrix.
///
/// Construction accepts matrices whose asymmetry is at most `1e-10` and stores the exact
/// symmetrization. Small negative eigenvalues (down to `-1e-8`) are tolerated and
/// removed by [`CovMatrix::clamped`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: Matrix,
}

impl CovMatrix {
    pub const ASYMMETRY_TOL: f64 = 1e-10;
    pub const NEGATIVE_EIGEN_TOL: f64 = 1e-8;

    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension { expected: entries.nrows(), got: entries.ncols() });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("covariance has non-finite entries"));
        }
        let skew = asymmetry(&entries);
        if skew > Self::ASYMMETRY_TOL {
            return Err(invalid(alloc::format!("covariance asymmetric by {skew:e}")));
        }
        Ok(Self { entries: symmetrize(&entries) })
    }

    pub fn zeros(d: usize) -> Self {
        Self { entries: Matrix::zeros(d, d) }
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: Matrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.entries).first().copied().unwrap_or(0.0)
    }

    /// PSD copy with every eigenvalue below `floor` set to zero.
    pub fn clamped(&self, floor: f64) -> Self {
        Self { entries: clamp_psd(&self.entries, floor) }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// `⟨t, Σ t⟩`.
    pub fn quadratic_form(&self, t: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += t[i] * self.entries[(i, j)] * t[j];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_matches_closed_forms() {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let e = expm(&rot);
        assert!((e[(0, 0)] - libm::cos(3.0)).abs() < 1e-13);
        assert!((e[(0, 1)] - libm::sin(3.0)).abs() < 1e-13);
        let nil = Matrix::from_row_slice(2, 2, &[-2.0, 5.0, 0.0, -2.0]);
        let e = expm(&nil);
        assert!((e[(0, 1)] - 5.0 * libm::exp(-2.0)).abs() < 1e-13);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let c = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&c, 1e-10).unwrap();
        assert!(max_abs(&(&l * l.transpose() - &c)) < 1e-12);
    }

    #[test]
    fn factor_rejects_indefinite() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(psd_factor(&c, 1e-10), Err(Error::NotPsd(_))));
    }

    #[test]
    fn cat_map_spectrum_is_hyperbolic() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let mut m = eigenvalue_moduli(&a);
        m.sort_by(f64::total_cmp);
        let golden = (3.0 + libm::sqrt(5.0)) / 2.0;
        assert!((m[1] - golden).abs() < 1e-12);
        assert!((m[0] - 1.0 / golden).abs() < 1e-12);
    }

    #[test]
    fn clamping_removes_negative_noise() {
        let c = CovMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5e-9])).unwrap();
        assert!(c.min_eigenvalue() < 0.0);
        assert!(c.clamped(1e-8).min_eigenvalue() >= 0.0);
    }

    #[test]
    fn covariance_rejects_asymmetry() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1e-6, 0.0, 1.0]);
        assert!(CovMatrix::new(m).is_err());
    }
}
