use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{asymmetry, psd_factor, Matrix};
use crate::rng::{domain, stream};

/// Probability measure with finitely many atoms in `R^d`.
///
/// Atoms are stored sorted lexicographically, pairwise distinct (duplicates merged) and
/// with strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub const WEIGHT_SUM_TOL: f64 = 1e-12;

    /// `atoms` is flat, `weights.len()` points of dimension `dim`.
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if atoms.len() != dim * weights.len() {
            return Err(Error::Dimension { expected: dim * weights.len(), got: atoms.len() });
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total = compensated_sum(&weights);
        if libm::fabs(total - 1.0) > Self::WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self::merged(dim, &atoms, &weights))
    }

    /// Empirical measure of `points.len() / dim` samples.
    pub fn empirical(dim: usize, points: &[f64]) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure("empirical sample shape".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite sample".into()));
        }
        let n = points.len() / dim;
        Ok(Self::merged(dim, points, &alloc::vec![1.0 / n as f64; n]))
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self { dim: point.len(), atoms: point.to_vec(), weights: alloc::vec![1.0] }
    }

    fn merged(dim: usize, atoms: &[f64], weights: &[f64]) -> Self {
        let n = weights.len();
        let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
        let atom = |i: usize| &atoms[i * dim..(i + 1) * dim];
        order.sort_by(|&a, &b| lex_cmp(atom(a), atom(b)));
        let mut out_atoms = Vec::with_capacity(order.len() * dim);
        let mut counts: Vec<(usize, f64)> = Vec::with_capacity(order.len());
        for &i in &order {
            let same = counts
                .last()
                .is_some_and(|&(j, _)| lex_cmp(atom(j), atom(i)) == Ordering::Equal);
            if same {
                counts.last_mut().unwrap().1 += weights[i];
            } else {
                counts.push((i, weights[i]));
                out_atoms.extend_from_slice(atom(i));
            }
        }
        let total = compensated_sum(&counts.iter().map(|c| c.1).collect::<Vec<_>>());
        let weights = counts.into_iter().map(|(_, w)| w / total).collect();
        Self { dim, atoms: out_atoms, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for (i, w) in self.weights.iter().enumerate() {
            for (mk, x) in m.iter_mut().zip(self.atom(i)) {
                *mk += w * x;
            }
        }
        m
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

pub(crate) fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = sum + x;
        if libm::fabs(sum) >= libm::fabs(x) {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Joint sample `(X, Y)` on one probability space.
///
/// Pairs carry weights; [`CoupledSample::new`] gives every pair weight `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

impl CoupledSample {
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len().checked_div(dim).unwrap_or(0);
        Self::weighted(dim, xs, ys, alloc::vec![1.0 / n.max(1) as f64; n])
    }

    pub fn weighted(dim: usize, xs: Vec<f64>, ys: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() {
            return Err(invalid("coupled sample must be nonempty"));
        }
        if xs.len() != ys.len() || xs.len() != dim * weights.len() {
            return Err(Error::Dimension { expected: dim * weights.len(), got: xs.len().max(ys.len()) });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("coupling weights must be nonnegative"));
        }
        let total = compensated_sum(&weights);
        if libm::fabs(total - 1.0) > 1e-9 {
            return Err(invalid(format!("coupling weights sum to {total}")));
        }
        Ok(Self { dim, xs, ys, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|x_i − y_i|_∞` for every pair.
    pub fn distances(&self) -> Vec<f64> {
        self.xs
            .chunks(self.dim)
            .zip(self.ys.chunks(self.dim))
            .map(|(x, y)| super::sup_distance(x, y))
            .collect()
    }
}

/// Normal law `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: Vec<f64>,
    cov: Matrix,
}

impl GaussianSpec {
    pub const SYMMETRY_TOL: f64 = 1e-12;
    pub const EIGEN_CLAMP_TOL: f64 = 1e-10;

    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension { expected: d, got: cov.nrows() });
        }
        if asymmetry(&cov) > Self::SYMMETRY_TOL {
            return Err(invalid("covariance is not symmetric"));
        }
        psd_factor(&cov, Self::EIGEN_CLAMP_TOL)?;
        Ok(Self { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: alloc::vec![0.0; d], cov: Matrix::identity(d, d) }
    }

    pub fn centered(cov: Matrix) -> Result<Self> {
        Self::new(alloc::vec![0.0; cov.nrows()], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }
}

/// `m` i.i.d. draws from `g` as an equal-weight measure (coincident draws merge, so a
/// zero covariance yields the Dirac mass at the mean).
pub fn gaussian_sample(g: &GaussianSpec, m: usize, seed: u64) -> Result<FiniteMeasure> {
    if m == 0 {
        return Err(invalid("gaussian_sample needs m ≥ 1"));
    }
    let d = g.dim();
    let factor = psd_factor(&g.cov, GaussianSpec::EIGEN_CLAMP_TOL)?;
    let mut rng = stream(seed, domain::GAUSSIAN_REFERENCE, 0);
    let mut points = Vec::with_capacity(m * d);
    let mut z = alloc::vec![0.0; d];
    for _ in 0..m {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..d {
            let mut acc = g.mean[i];
            for (k, zk) in z.iter().enumerate() {
                acc += factor[(i, k)] * zk;
            }
            points.push(acc);
        }
    }
    FiniteMeasure::empirical(d, &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicates_merge_and_zero_weights_drop() {
        let m = FiniteMeasure::new(1, vec![1.0, 0.0, 1.0, 5.0], vec![0.25, 0.5, 0.25, 0.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(FiniteMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(FiniteMeasure::new(1, vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn zero_covariance_collapses_to_mean() {
        let g = GaussianSpec::new(vec![1.0, -2.0], Matrix::zeros(2, 2)).unwrap();
        let s = gaussian_sample(&g, 100, 3).unwrap();
        assert_eq!(s, FiniteMeasure::dirac(&[1.0, -2.0]));
    }

    #[test]
    fn sampler_mean_is_within_clt_band() {
        let m = 100_000;
        let s = gaussian_sample(&GaussianSpec::standard(2), m, 11).unwrap();
        for c in s.mean() {
            assert!(c.abs() < 4.0 / (m as f64).sqrt(), "{c}");
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let g = GaussianSpec::standard(3);
        assert_eq!(gaussian_sample(&g, 500, 9).unwrap(), gaussian_sample(&g, 500, 9).unwrap());
        assert_ne!(gaussian_sample(&g, 500, 9).unwrap(), gaussian_sample(&g, 500, 10).unwrap());
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianSpec::centered(c), Err(Error::NotPsd(_))));
    }
}
