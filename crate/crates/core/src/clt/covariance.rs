use alloc::vec;
use alloc::vec::Vec;

use super::sums::{birkhoff_sum, check_centered};
use crate::driver::{MapDriver, Observable};
use crate::error::{invalid, Result};
use crate::exec::{chunk_count, chunk_range, Executor};
use crate::linalg::{max_abs, CovMatrix, Matrix};
use crate::rng::{domain, stream};

/// Default truncation lag for the cat map.
pub const DEFAULT_LAG_CAP: usize = 40;

/// Monte Carlo estimate of the truncated series
/// `E[f⊗f] + Σ_{k=1}^{K} (E[f⊗f∘T^k] + E[f∘T^k⊗f])`.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: CovMatrix,
    /// Entrywise standard error of `matrix`.
    pub standard_error: Matrix,
    /// Norm of the lag-`K` term.
    pub last_lag_norm: f64,
    pub partial_norm: f64,
    /// Set when the last lag term exceeds 10% of the partial sum.
    pub truncation_warning: bool,
    pub lag_cap: usize,
    pub samples: usize,
}

impl CovarianceEstimate {
    pub fn max_standard_error(&self) -> f64 {
        max_abs(&self.standard_error)
    }
}

/// Running sums over a block of samples: value, square and last-lag term, each `d×d`.
struct Moments {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    last: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { sum: vec![0.0; len], sumsq: vec![0.0; len], last: vec![0.0; len] }
    }

    fn absorb(&mut self, other: &Moments) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
        for (a, b) in self.last.iter_mut().zip(&other.last) {
            *a += b;
        }
    }
}

fn mean_and_error(m: &Moments, d: usize, samples: usize) -> (Matrix, Matrix) {
    let n = samples as f64;
    let mean = Matrix::from_fn(d, d, |i, j| m.sum[i * d + j] / n);
    let se = Matrix::from_fn(d, d, |i, j| {
        let s = m.sum[i * d + j];
        let var = ((m.sumsq[i * d + j] - s * s / n) / (n - 1.0)).max(0.0);
        libm::sqrt(var / n)
    });
    (mean, se)
}

/// One sample of the truncated lag series, `f₀⊗f₀ + Σ_{k=1}^{K} (f₀⊗f_k + f_k⊗f₀)`, where
/// `values` holds `f(T^k ω)` for `k = 0..=K` back to back.
pub(crate) fn lag_series_sample(values: &[f64], d: usize, z: &mut [f64]) {
    let (f0, rest) = values.split_at(d);
    for a in 0..d {
        for b in 0..d {
            z[a * d + b] = f0[a] * f0[b];
        }
    }
    for fk in rest.chunks_exact(d) {
        for a in 0..d {
            for b in 0..d {
                z[a * d + b] += f0[a] * fk[b] + fk[a] * f0[b];
            }
        }
    }
}

pub fn asymptotic_covariance<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    lag_cap: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<CovarianceEstimate> {
    if samples < 100 {
        return Err(invalid("asymptotic_covariance needs at least 100 samples"));
    }
    if f.dim_in() != driver.phase_dim() {
        return Err(crate::Error::Dimension { expected: driver.phase_dim(), got: f.dim_in() });
    }
    check_centered(f)?;
    let d = f.dim_out();
    let chunks = exec.map_indexed(chunk_count(samples), |c| {
        let mut m = Moments::new(d * d);
        let mut z = vec![0.0; d * d];
        let mut f0 = vec![0.0; d];
        let mut fk = vec![0.0; d];
        for i in chunk_range(c, samples) {
            let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
            let mut state = driver.sample_invariant(&mut rng);
            f.eval_into(driver.coords(&state), &mut f0);
            for a in 0..d {
                for b in 0..d {
                    z[a * d + b] = f0[a] * f0[b];
                }
            }
            for k in 1..=lag_cap {
                driver.advance(&mut state);
                f.eval_into(driver.coords(&state), &mut fk);
                for a in 0..d {
                    for b in 0..d {
                        let term = f0[a] * fk[b] + fk[a] * f0[b];
                        z[a * d + b] += term;
                        if k == lag_cap {
                            m.last[a * d + b] += term;
                        }
                    }
                }
            }
            for (idx, v) in z.iter().enumerate() {
                m.sum[idx] += v;
                m.sumsq[idx] += v * v;
            }
        }
        m
    });
    let mut total = Moments::new(d * d);
    for c in &chunks {
        total.absorb(c);
    }
    let (mean, se) = mean_and_error(&total, d, samples);
    let last = Matrix::from_fn(d, d, |i, j| total.last[i * d + j] / samples as f64);
    let last_lag_norm = if lag_cap == 0 { 0.0 } else { max_abs(&last) };
    let partial_norm = max_abs(&mean);
    Ok(CovarianceEstimate {
        matrix: CovMatrix::new(mean)?,
        standard_error: se,
        last_lag_norm,
        partial_norm,
        truncation_warning: last_lag_norm > 0.1 * partial_norm,
        lag_cap,
        samples,
    })
}

/// Empirical covariance of `S_n(f)/√n` over `samples` invariant initial points, with
/// entrywise standard errors.
pub fn sum_covariance<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    n: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<(CovMatrix, Matrix)> {
    if samples < 2 || n == 0 {
        return Err(invalid("sum_covariance needs n ≥ 1 and at least two samples"));
    }
    let d = f.dim_out();
    let scale = 1.0 / libm::sqrt(n as f64);
    let sums: Vec<Vec<f64>> = exec.map_indexed(samples, |i| {
        let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
        let start = driver.sample_invariant(&mut rng);
        birkhoff_sum(driver, f, n, &start).into_iter().map(|v| v * scale).collect()
    });
    let m = samples as f64;
    let mut mean = vec![0.0; d];
    for s in &sums {
        for (a, v) in mean.iter_mut().zip(s) {
            *a += v / m;
        }
    }
    let mut moments = Moments::new(d * d);
    for s in &sums {
        for a in 0..d {
            for b in 0..d {
                let p = (s[a] - mean[a]) * (s[b] - mean[b]);
                moments.sum[a * d + b] += p;
                moments.sumsq[a * d + b] += p * p;
            }
        }
    }
    let (raw, se) = mean_and_error(&moments, d, samples);
    Ok((CovMatrix::new(raw * (m / (m - 1.0)))?, se))
}

/// Paired-seed comparison of `D(A·f)` with `A·D(f)·Aᵀ`.
#[derive(Debug, Clone)]
pub struct CongruenceReport {
    pub direct: Matrix,
    pub congruent: Matrix,
    pub discrepancy: f64,
    /// Largest entrywise standard error of the direct estimate.
    pub error_bound: f64,
}

pub fn covariance_congruence_check<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    a: &Matrix,
    lag_cap: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<CongruenceReport> {
    let d = a.nrows();
    if a.ncols() != d || d != f.dim_out() {
        return Err(invalid("congruence matrix must be square of the observable's dimension"));
    }
    let gram = a.transpose() * a;
    if max_abs(&(gram - Matrix::identity(d, d))) > 1e-10 {
        return Err(invalid("congruence matrix is not orthogonal"));
    }
    let base = asymptotic_covariance(driver, f, lag_cap, samples, seed, exec)?;
    let image = asymptotic_covariance(driver, &f.linear_image(a), lag_cap, samples, seed, exec)?;
    let congruent = a * base.matrix.matrix() * a.transpose();
    let direct = image.matrix.matrix().clone();
    let discrepancy = max_abs(&(&direct - &congruent));
    Ok(CongruenceReport { direct, congruent, discrepancy, error_bound: image.max_standard_error() })
}
