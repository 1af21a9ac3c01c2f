use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

use super::MapDriver;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalue_moduli, Matrix};

/// Largest torus dimension supported by the in-place stepping path.
pub const MAX_DIM: usize = 16;

/// Canonical representative of `x mod 1` in `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - libm::floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `max_i min_k |x_i − y_i − k|`: the sup-norm lifted to `R^d / Z^d`.
pub fn torus_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0_f64, |acc, (a, b)| {
        let delta = wrap_unit(a - b);
        acc.max(delta.min(1.0 - delta))
    })
}

/// Metric used by Hölder-ratio estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMetric {
    /// Quotient sup-metric on the torus.
    Torus,
    /// Sup-norm between the `[0,1)^d` representatives (no identification).
    Flat,
}

impl PhaseMetric {
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            PhaseMetric::Torus => torus_distance(x, y),
            PhaseMetric::Flat => x
                .iter()
                .zip(y)
                .fold(0.0_f64, |acc, (a, b)| acc.max(libm::fabs(a - b))),
        }
    }
}

/// Point of `T^d` stored by its representative in `[0,1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords: coords.into_iter().map(wrap_unit).collect() }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &TorusPoint) -> f64 {
        torus_distance(&self.coords, &other.coords)
    }
}

/// Hyperbolic unimodular integer matrix acting on `T^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToralAutomorphism {
    dim: usize,
    entries: Vec<i64>,
    sup_norm: f64,
}

impl ToralAutomorphism {
    /// Tolerance on `| |λ| − 1 |` for the hyperbolicity gate.
    pub const UNIT_CIRCLE_TOL: f64 = 1e-9;

    /// `entries` is row-major `dim × dim`.
    pub fn new(dim: usize, entries: Vec<i64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidAutomorphism(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, got: entries.len() });
        }
        let det = integer_determinant(dim, &entries);
        if det.abs() != 1 {
            return Err(Error::InvalidAutomorphism(format!("|det A| = {} ≠ 1", det.abs())));
        }
        let real = Matrix::from_row_iterator(dim, dim, entries.iter().map(|v| *v as f64));
        if let Some(m) = eigenvalue_moduli(&real)
            .into_iter()
            .find(|m| libm::fabs(m - 1.0) < Self::UNIT_CIRCLE_TOL)
        {
            return Err(Error::InvalidAutomorphism(format!(
                "eigenvalue of modulus {m} on the unit circle (not hyperbolic)"
            )));
        }
        let sup_norm = entries
            .chunks(dim)
            .map(|row| row.iter().map(|v| v.unsigned_abs() as f64).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self { dim, entries, sup_norm })
    }

    /// Arnold's cat map `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        Self::new(2, alloc::vec![2, 1, 1, 1]).expect("cat map is hyperbolic")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    /// Operator norm for `|·|_∞` (max absolute row sum); Lipschitz constant of the map
    /// for the torus metric.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `A·x mod 1` written into `out`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = &self.entries[i * self.dim..(i + 1) * self.dim];
            let mut acc = 0.0;
            for (a, xj) in row.iter().zip(x) {
                acc += *a as f64 * xj;
            }
            *o = wrap_unit(acc);
        }
    }

    pub fn step_point(&self, x: &TorusPoint) -> TorusPoint {
        let mut out = alloc::vec![0.0; self.dim];
        self.apply(&x.coords, &mut out);
        TorusPoint { coords: out }
    }
}

impl MapDriver for ToralAutomorphism {
    type State = TorusPoint;

    fn phase_dim(&self) -> usize {
        self.dim
    }

    fn coords<'a>(&self, state: &'a TorusPoint) -> &'a [f64] {
        &state.coords
    }

    fn advance(&self, state: &mut TorusPoint) {
        let mut buf = [0.0; MAX_DIM];
        self.apply(&state.coords, &mut buf[..self.dim]);
        state.coords.copy_from_slice(&buf[..self.dim]);
    }

    fn sample_invariant<R: RngCore + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        TorusPoint { coords: (0..self.dim).map(|_| rng.random::<f64>()).collect() }
    }

    fn state_from_coords(&self, coords: &[f64]) -> TorusPoint {
        TorusPoint::new(coords.to_vec())
    }
}

/// Fraction-free (Bareiss) determinant of an integer matrix.
fn integer_determinant(n: usize, entries: &[i64]) -> i128 {
    let mut m: Vec<i128> = entries.iter().map(|v| *v as i128).collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k * n + k] == 0 {
            match (k + 1..n).find(|&r| m[r * n + k] != 0) {
                Some(r) => {
                    for c in 0..n {
                        m.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i * n + j] = (m[i * n + j] * m[k * n + k] - m[i * n + k] * m[k * n + j]) / prev;
            }
        }
        prev = m[k * n + k];
    }
    sign * m[(n - 1) * n + (n - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_is_rejected() {
        let err = ToralAutomorphism::new(2, vec![1, 0, 0, 1]).unwrap_err();
        assert!(matches!(err, Error::InvalidAutomorphism(_)));
    }

    #[test]
    fn non_unimodular_is_rejected() {
        assert!(ToralAutomorphism::new(2, vec![2, 0, 0, 1]).is_err());
        assert!(ToralAutomorphism::new(2, vec![3, 1, 1, 1]).is_err());
    }

    #[test]
    fn elliptic_rotation_is_rejected() {
        // Order-4 rotation: eigenvalues ±i.
        assert!(ToralAutomorphism::new(2, vec![0, -1, 1, 0]).is_err());
    }

    #[test]
    fn three_dimensional_hyperbolic_accepted() {
        let a = ToralAutomorphism::new(3, vec![0, 0, 1, 1, 0, 1, 0, 1, 1]);
        assert_eq!(integer_determinant(3, &[0, 0, 1, 1, 0, 1, 0, 1, 1]), 1);
        assert!(a.is_ok(), "{a:?}");
    }

    #[test]
    fn bareiss_matches_cofactor_expansion() {
        assert_eq!(integer_determinant(2, &[2, 1, 1, 1]), 1);
        assert_eq!(integer_determinant(3, &[2, 0, 1, 1, 3, 2, 1, 1, 1]), 0);
        assert_eq!(integer_determinant(3, &[2, 1, 0, 1, 1, 0, 0, 0, -3]), -3);
        assert_eq!(integer_determinant(2, &[0, 1, 1, 0]), -1);
    }

    #[test]
    fn cat_map_fixed_point_and_dyadic_step() {
        let a = ToralAutomorphism::cat_map();
        assert_eq!(a.step_point(&TorusPoint::new(vec![0.0, 0.0])).coords(), &[0.0, 0.0]);
        assert_eq!(a.step_point(&TorusPoint::new(vec![0.5, 0.25])).coords(), &[0.25, 0.75]);
    }

    #[test]
    fn wrap_handles_negative_roundoff() {
        assert_eq!(wrap_unit(-1e-18), 0.0);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn torus_distance_wraps() {
        assert!((torus_distance(&[0.95, 0.1], &[0.05, 0.1]) - 0.1).abs() < 1e-15);
        assert_eq!(torus_distance(&[0.2], &[0.7]), 0.5);
    }
}
