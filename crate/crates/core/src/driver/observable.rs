use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use rand::Rng;

use super::torus::{wrap_unit, PhaseMetric, ToralAutomorphism};
use crate::linalg::Matrix;
use crate::rng::{domain, stream};

pub type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Vector-valued η-Hölder function on the phase space `[0,1)^d`.
///
/// `holder_constant` and `sup_bound`, when present, are declared bounds (for the torus
/// metric) that tests check against sampled ratios.
#[derive(Clone)]
pub struct Observable {
    dim_in: usize,
    dim_out: usize,
    eta: f64,
    holder_constant: Option<f64>,
    sup_bound: Option<f64>,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("eta", &self.eta)
            .field("holder_constant", &self.holder_constant)
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

impl Observable {
    pub fn new<F>(dim_in: usize, dim_out: usize, eta: f64, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(eta > 0.0 && eta <= 1.0, "Hölder exponent must lie in (0, 1]");
        Self { dim_in, dim_out, eta, holder_constant: None, sup_bound: None, eval: Arc::new(f) }
    }

    pub fn with_holder_constant(mut self, c: f64) -> Self {
        self.holder_constant = Some(c);
        self
    }

    pub fn with_sup_bound(mut self, b: f64) -> Self {
        self.sup_bound = Some(b);
        self
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn holder_constant(&self) -> Option<f64> {
        self.holder_constant
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out];
        (self.eval)(x, &mut out);
        out
    }

    pub fn constant(dim_in: usize, value: Vec<f64>) -> Self {
        let sup = value.iter().fold(0.0_f64, |a, v| a.max(libm::fabs(*v)));
        Self::new(dim_in, value.len(), 1.0, move |_, out| out.copy_from_slice(&value))
            .with_holder_constant(0.0)
            .with_sup_bound(sup)
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Self::constant(dim_in, vec![0.0; dim_out])
    }

    /// `x ↦ x_i` on the representatives; Lipschitz for the flat metric only.
    pub fn coordinate(dim_in: usize, i: usize) -> Self {
        Self::new(dim_in, 1, 1.0, move |x, out| out[0] = x[i]).with_sup_bound(1.0)
    }

    /// `(cos 2πx₁, sin 2π(x₁+x₂))`, centered for Lebesgue measure.
    pub fn default_pair() -> Self {
        Self::new(2, 2, 1.0, |x, out| {
            out[0] = libm::cos(TAU * x[0]);
            out[1] = libm::sin(TAU * (x[0] + x[1]));
        })
        .with_holder_constant(2.0 * TAU)
        .with_sup_bound(1.0)
    }

    /// `sin 2πx₁` on `T^d`.
    pub fn sin_first(dim_in: usize) -> Self {
        Self::new(dim_in, 1, 1.0, |x, out| out[0] = libm::sin(TAU * x[0]))
            .with_holder_constant(TAU)
            .with_sup_bound(1.0)
    }

    /// `cos 2πx₁` on `T^d`.
    pub fn cos_first(dim_in: usize) -> Self {
        Self::new(dim_in, 1, 1.0, |x, out| out[0] = libm::cos(TAU * x[0]))
            .with_holder_constant(TAU)
            .with_sup_bound(1.0)
    }

    /// `∏_i ‖x_i‖` where `‖·‖` is the distance to the nearest integer, centered.
    ///
    /// Its Fourier spectrum fills `Z^d`, so lagged correlations under a hyperbolic
    /// automorphism decay geometrically instead of vanishing after a few steps (as they
    /// do for trigonometric polynomials).
    pub fn tent_product(dim_in: usize) -> Self {
        let mean = libm::pow(0.25, dim_in as f64);
        Self::new(dim_in, 1, 1.0, move |x, out| {
            let mut p = 1.0;
            for c in x {
                let t = wrap_unit(*c);
                p *= t.min(1.0 - t);
            }
            out[0] = p - mean;
        })
        .with_holder_constant(dim_in as f64 * libm::pow(0.5, dim_in as f64 - 1.0))
        .with_sup_bound(libm::pow(0.5, dim_in as f64))
    }

    /// `d(x, 0)^η` for the torus sup-distance, centered: a cusp with Hölder exponent `η`
    /// and constant 1, whose Fourier coefficients spread over all of `Z^d`.
    pub fn cusp(dim_in: usize, eta: f64) -> Self {
        let d = dim_in as f64;
        // max_i ‖x_i‖ has density d·2^d·r^{d-1} on [0, 1/2].
        let mean = d * libm::pow(2.0, -eta) / (eta + d);
        Self::new(dim_in, 1, eta, move |x, out| {
            let r = x.iter().fold(0.0_f64, |m, c| {
                let t = wrap_unit(*c);
                m.max(t.min(1.0 - t))
            });
            out[0] = libm::pow(r, eta) - mean;
        })
        .with_holder_constant(1.0)
        .with_sup_bound(mean.max(libm::pow(0.5, eta) - mean))
    }

    /// `x ↦ A·f(x)`.
    pub fn linear_image(&self, a: &Matrix) -> Self {
        assert_eq!(a.ncols(), self.dim_out, "matrix columns must match observable output");
        let inner = self.eval.clone();
        let (rows, cols) = (a.nrows(), a.ncols());
        let entries: Vec<f64> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|ij| a[ij]).collect();
        let norm = (0..rows)
            .map(|i| entries[i * cols..(i + 1) * cols].iter().map(|v| libm::fabs(*v)).sum::<f64>())
            .fold(0.0, f64::max);
        let mut out = Self::new(self.dim_in, rows, self.eta, move |x, y| {
            let mut buf = [0.0; 16];
            let mut heap;
            let tmp: &mut [f64] = if cols <= 16 {
                &mut buf[..cols]
            } else {
                heap = vec![0.0; cols];
                &mut heap
            };
            inner(x, tmp);
            for (i, yi) in y.iter_mut().enumerate() {
                let row = &entries[i * cols..(i + 1) * cols];
                *yi = row.iter().zip(tmp.iter()).map(|(a, v)| a * v).sum();
            }
        });
        out.holder_constant = self.holder_constant.map(|c| c * norm);
        out.sup_bound = self.sup_bound.map(|b| b * norm);
        out
    }

    /// `x ↦ f(x) − shift`.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let inner = self.eval.clone();
        let s = shift.to_vec();
        let max_shift = s.iter().fold(0.0_f64, |a, v| a.max(libm::fabs(*v)));
        let mut out = Self::new(self.dim_in, self.dim_out, self.eta, move |x, y| {
            inner(x, y);
            for (yi, si) in y.iter_mut().zip(&s) {
                *yi -= si;
            }
        });
        out.holder_constant = self.holder_constant;
        out.sup_bound = self.sup_bound.map(|b| b + max_shift);
        out
    }

    /// Coboundary `h − h∘T`.
    pub fn coboundary(h: &Observable, map: &ToralAutomorphism) -> Self {
        let inner = h.eval.clone();
        let map = map.clone();
        let dim_out = h.dim_out;
        let lip = map.sup_norm();
        let mut out = Self::new(h.dim_in, dim_out, h.eta, move |x, y| {
            let mut tx = [0.0; 16];
            let d = x.len();
            map.apply(x, &mut tx[..d]);
            inner(x, y);
            let mut hy = [0.0; 16];
            inner(&tx[..d], &mut hy[..dim_out]);
            for (yi, v) in y.iter_mut().zip(&hy[..dim_out]) {
                *yi -= v;
            }
        });
        out.holder_constant = h.holder_constant.map(|c| c * (1.0 + libm::pow(lip, h.eta)));
        out.sup_bound = h.sup_bound.map(|b| 2.0 * b);
        out
    }
}

/// Empirical lower bound on the Hölder constant: the largest
/// `|f(x) − f(y)|_∞ / d(x, y)^η` over `samples` random pairs.
///
/// Half of the pairs are independent uniform points; the other half are local pairs at
/// log-uniform separations in `[1e-6, 0.5]`, where the supremum of smooth observables
/// is approached.
pub fn holder_ratio_estimate(f: &Observable, metric: PhaseMetric, samples: usize, seed: u64) -> f64 {
    assert!(samples >= 2, "need at least two samples");
    let d = f.dim_in();
    let mut rng = stream(seed, domain::HOLDER_PAIRS, 0);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut fx = vec![0.0; f.dim_out()];
    let mut fy = vec![0.0; f.dim_out()];
    let mut best = 0.0_f64;
    for i in 0..samples {
        for c in x.iter_mut() {
            *c = rng.random::<f64>();
        }
        if i % 2 == 0 {
            for c in y.iter_mut() {
                *c = rng.random::<f64>();
            }
        } else {
            let scale = libm::pow(10.0, -rng.random_range(0.3..6.0));
            for (yc, xc) in y.iter_mut().zip(&x) {
                *yc = wrap_unit(xc + scale * rng.random_range(-1.0..1.0));
            }
        }
        let dist = metric.distance(&x, &y);
        if dist <= 0.0 {
            continue;
        }
        f.eval_into(&x, &mut fx);
        f.eval_into(&y, &mut fy);
        let diff = fx.iter().zip(&fy).fold(0.0_f64, |a, (u, v)| a.max(libm::fabs(u - v)));
        best = best.max(diff / libm::pow(dist, f.eta()));
    }
    best
}

#[cfg(test)]
mod tests {
    use crate::clt::lebesgue_mean;
    use super::*;

    #[test]
    fn constant_has_zero_ratio() {
        let f = Observable::constant(2, vec![3.0, -1.0]);
        assert_eq!(holder_ratio_estimate(&f, PhaseMetric::Torus, 1000, 1), 0.0);
    }

    #[test]
    fn coordinate_ratio_approaches_one_for_flat_metric() {
        let f = Observable::coordinate(2, 0);
        let small = holder_ratio_estimate(&f, PhaseMetric::Flat, 100, 3);
        let big = holder_ratio_estimate(&f, PhaseMetric::Flat, 20_000, 3);
        assert!(small <= 1.0 + 1e-12 && big <= 1.0 + 1e-12);
        assert!(big > 0.999, "{big}");
    }

    #[test]
    fn coordinate_is_not_lipschitz_on_the_torus() {
        // The identification 0 ≡ 1 turns x₁ into a discontinuous function.
        let f = Observable::coordinate(2, 0);
        assert!(holder_ratio_estimate(&f, PhaseMetric::Torus, 20_000, 3) > 10.0);
    }

    #[test]
    fn declared_constants_dominate_estimates() {
        let cat = ToralAutomorphism::cat_map();
        let fs = [
            Observable::default_pair(),
            Observable::sin_first(2),
            Observable::tent_product(2),
            Observable::coboundary(&Observable::sin_first(2), &cat),
        ];
        for f in &fs {
            let c = f.holder_constant().unwrap();
            for seed in 0..5 {
                let est = holder_ratio_estimate(f, PhaseMetric::Torus, 5_000, seed);
                assert!(est <= c + 1e-9, "{f:?}: {est} > {c}");
                assert!(est > 0.0);
            }
        }
    }

    #[test]
    fn linear_image_and_shift() {
        let f = Observable::default_pair();
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let g = f.linear_image(&a).shifted(&[1.0, 0.0]);
        let x = [0.1, 0.3];
        let v = f.eval(&x);
        let w = g.eval(&x);
        assert!((w[0] - (-v[1] - 1.0)).abs() < 1e-15);
        assert!((w[1] - v[0]).abs() < 1e-15);
    }

    #[test]
    fn cusp_is_centered_and_holder() {
        for (d, eta) in [(1, 0.5), (2, 0.5), (2, 0.25), (3, 1.0)] {
            let f = Observable::cusp(d, eta);
            let points = if d == 3 { 40 } else { 400 };
            let m = lebesgue_mean(&f, points).unwrap()[0];
            assert!(m.abs() < 2e-3, "d={d} eta={eta}: mean {m}");
            let ratio = holder_ratio_estimate(&f, PhaseMetric::Torus, 20_000, 4);
            assert!(ratio <= 1.0 + 1e-9, "ratio {ratio}");
        }
    }
}
