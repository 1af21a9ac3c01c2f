use alloc::vec;
use alloc::vec::Vec;
use nalgebra::Complex;

use crate::error::{invalid, Error, Result};
use crate::linalg::CovMatrix;
use crate::metrics::FiniteMeasure;

/// `φ_P(t) − exp(−⟨t, Σt⟩/2)` for the measure `P` given by `samples`.
pub fn char_discrepancy(samples: &FiniteMeasure, sigma: &CovMatrix, t: &[f64]) -> Result<Complex<f64>> {
    if t.len() != samples.dim() || sigma.dim() != samples.dim() {
        return Err(Error::Dimension { expected: samples.dim(), got: t.len() });
    }
    let mut re = 0.0;
    let mut im = 0.0;
    let mut total = 0.0;
    for (j, w) in samples.weights().iter().enumerate() {
        let phase: f64 = t.iter().zip(samples.atom(j)).map(|(a, b)| a * b).sum();
        re += w * libm::cos(phase);
        im += w * libm::sin(phase);
        total += w;
    }
    let gauss = libm::exp(-0.5 * sigma.quadratic_form(t));
    Ok(Complex::new(re / total - gauss, im / total))
}

/// Polynomial in `d` variables as `(exponents, coefficient)` terms.
#[derive(Debug, Clone)]
struct Poly {
    terms: Vec<(Vec<u32>, f64)>,
}

impl Poly {
    fn one(d: usize) -> Self {
        Self { terms: vec![(vec![0; d], 1.0)] }
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == exps) {
            t.1 += c;
        } else {
            self.terms.push((exps, c));
        }
    }

    /// `∂_i P + P·∂_i q` with `q(t) = −⟨t, Σt⟩/2`, so that `∂_i(P e^q) = (that)·e^q`.
    fn gaussian_step(&self, i: usize, sigma: &CovMatrix) -> Self {
        let d = sigma.dim();
        let mut out = Poly { terms: Vec::new() };
        for (exps, c) in &self.terms {
            if exps[i] > 0 {
                let mut e = exps.clone();
                e[i] -= 1;
                out.add_term(e, c * exps[i] as f64);
            }
            for k in 0..d {
                let s = sigma.matrix()[(i, k)];
                if s != 0.0 {
                    let mut e = exps.clone();
                    e[k] += 1;
                    out.add_term(e, -c * s);
                }
            }
        }
        out
    }

    fn eval(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(t).map(|(p, x)| libm::pow(*x, *p as f64)).product::<f64>())
            .sum()
    }
}

/// Multi-indices of total order at most `cap`, each paired with the Gaussian
/// derivative polynomial.
fn derivative_table(sigma: &CovMatrix, cap: usize) -> Vec<(Vec<u32>, Poly)> {
    let d = sigma.dim();
    let mut table = vec![(vec![0u32; d], Poly::one(d))];
    let mut frontier = 0;
    for _ in 0..cap {
        let end = table.len();
        for idx in frontier..end {
            let (alpha, poly) = table[idx].clone();
            // Extend only at or after the last nonzero coordinate to list each index once.
            let last = alpha.iter().rposition(|a| *a > 0).unwrap_or(0);
            for i in last..d {
                let mut next = alpha.clone();
                next[i] += 1;
                table.push((next, poly.gaussian_step(i, sigma)));
            }
        }
        frontier = end;
    }
    table
}

/// `( ∫_{|t|_∞<U} Σ_{|α| ≤ r} |∂^α(φ_P − φ_Q)(t)|² dt )^{1/2}` with `Q = N(0, Σ)`, by the
/// midpoint rule on a `grid_per_axis^d` tensor grid.
///
/// The constants of the associated distance bound are not explicit, so the value is a
/// diagnostic for comparisons across sample sizes.
pub fn yurinskii_integral(
    samples: &FiniteMeasure,
    sigma: &CovMatrix,
    u: f64,
    derivative_order_cap: Option<usize>,
    grid_per_axis: usize,
) -> Result<f64> {
    if grid_per_axis < 8 {
        return Err(invalid("yurinskii_integral needs at least 8 grid points per axis"));
    }
    if !(u > 0.0) {
        return Err(invalid("integration radius must be positive"));
    }
    let d = samples.dim();
    if sigma.dim() != d {
        return Err(Error::Dimension { expected: d, got: sigma.dim() });
    }
    let cap = derivative_order_cap.unwrap_or(d / 2 + 1);
    let table = derivative_table(sigma, cap);
    let total_cells = grid_per_axis
        .checked_pow(d as u32)
        .ok_or_else(|| invalid("integration grid too large"))?;
    let h = 2.0 * u / grid_per_axis as f64;
    let cell = libm::pow(h, d as f64);
    let weights = samples.weights();
    let wsum: f64 = weights.iter().sum();
    // x_j^α for every atom and multi-index.
    let monomials: Vec<Vec<f64>> = table
        .iter()
        .map(|(alpha, _)| {
            (0..samples.len())
                .map(|j| {
                    alpha
                        .iter()
                        .zip(samples.atom(j))
                        .map(|(a, x)| libm::pow(*x, *a as f64))
                        .product::<f64>()
                        * weights[j]
                        / wsum
                })
                .collect()
        })
        .collect();
    let mut t = vec![0.0; d];
    let mut acc = 0.0;
    let mut cosines = vec![0.0; samples.len()];
    let mut sines = vec![0.0; samples.len()];
    for idx in 0..total_cells {
        let mut r = idx;
        for c in t.iter_mut() {
            *c = -u + h * ((r % grid_per_axis) as f64 + 0.5);
            r /= grid_per_axis;
        }
        for j in 0..samples.len() {
            let phase: f64 = t.iter().zip(samples.atom(j)).map(|(a, b)| a * b).sum();
            cosines[j] = libm::cos(phase);
            sines[j] = libm::sin(phase);
        }
        let gauss = libm::exp(-0.5 * sigma.quadratic_form(&t));
        for ((alpha, poly), mono) in table.iter().zip(&monomials) {
            // ∂^α e^{i⟨t,x⟩} = i^{|α|} x^α e^{i⟨t,x⟩}
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..samples.len() {
                re += mono[j] * cosines[j];
                im += mono[j] * sines[j];
            }
            let order: u32 = alpha.iter().sum();
            let (re, im) = match order % 4 {
                0 => (re, im),
                1 => (-im, re),
                2 => (-re, -im),
                _ => (im, -re),
            };
            let g = gauss * poly.eval(&t);
            let dr = re - g;
            acc += (dr * dr + im * im) * cell;
        }
    }
    Ok(libm::sqrt(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_table_counts_multi_indices() {
        // d = 2, order ≤ 2: 1 + 2 + 3 multi-indices.
        assert_eq!(derivative_table(&CovMatrix::identity(2), 2).len(), 6);
        assert_eq!(derivative_table(&CovMatrix::identity(3), 1).len(), 4);
    }

    #[test]
    fn gaussian_polynomials_match_finite_differences() {
        let sigma = CovMatrix::new(crate::linalg::Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5])).unwrap();
        let q = |t: &[f64]| libm::exp(-0.5 * sigma.quadratic_form(t));
        let table = derivative_table(&sigma, 2);
        let t = [0.4, -0.7];
        let h = 1e-4;
        for (alpha, poly) in &table {
            let analytic = q(&t) * poly.eval(&t);
            let numeric = match alpha.as_slice() {
                [0, 0] => q(&t),
                [1, 0] => (q(&[t[0] + h, t[1]]) - q(&[t[0] - h, t[1]])) / (2.0 * h),
                [0, 1] => (q(&[t[0], t[1] + h]) - q(&[t[0], t[1] - h])) / (2.0 * h),
                [2, 0] => (q(&[t[0] + h, t[1]]) - 2.0 * q(&t) + q(&[t[0] - h, t[1]])) / (h * h),
                [0, 2] => (q(&[t[0], t[1] + h]) - 2.0 * q(&t) + q(&[t[0], t[1] - h])) / (h * h),
                [1, 1] => {
                    (q(&[t[0] + h, t[1] + h]) - q(&[t[0] + h, t[1] - h]) - q(&[t[0] - h, t[1] + h])
                        + q(&[t[0] - h, t[1] - h]))
                        / (4.0 * h * h)
                }
                _ => unreachable!(),
            };
            assert!((analytic - numeric).abs() < 1e-6, "{alpha:?}: {analytic} vs {numeric}");
        }
    }
}
