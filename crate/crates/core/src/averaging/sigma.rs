use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::integrate::KinkGrid;
use super::path::{mat_vec, MeanPath};
use super::system::{AveragedField, PerturbedSystem};
use crate::clt::{asymptotic_covariance, DEFAULT_LAG_CAP};
use crate::driver::{MapDriver, Observable};
use crate::error::{invalid, Error, Result};
use crate::exec::{chunk_count, chunk_range, Executor};
use crate::linalg::{CovMatrix, Matrix};
use crate::rng::{domain, stream};

/// The kernels `F_{l,N}(ω) = N ∫_{l/N}^{(l+1)/N} Φ(1)Φ(u)⁻¹ F̃(w_u, ω) du`, `l < N`, on
/// `[0, 1]`, so that `y_1^{1/N} = N^{-1/2} Σ_k F_{k,N}(T^k ω)`.
#[derive(Clone)]
pub struct KernelFamily {
    n: usize,
    dim: usize,
    sys: PerturbedSystem,
    /// Per kernel: quadrature points `(w_q, F̄(w_q), B_q)` with `B_q = N c_q Φ(1)Φ(u_q)⁻¹`.
    points: Vec<Vec<KernelPoint>>,
}

#[derive(Clone)]
struct KernelPoint {
    w: Vec<f64>,
    fbar: Vec<f64>,
    weight: Vec<f64>,
}

impl core::fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("KernelFamily").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl KernelFamily {
    /// Composite Simpson in `u` with `substeps` panels per kernel interval.
    pub fn new(sys: &PerturbedSystem, avg: &AveragedField, x: &[f64], n: usize, substeps: usize) -> Result<Self> {
        if n < 8 {
            return Err(invalid("Σ_F needs N ≥ 8"));
        }
        let d = sys.dim();
        let path = MeanPath::new(avg, x, KinkGrid::new(1.0 / n as f64, 1.0, substeps.max(1))?)?;
        let s = path.grid().substeps();
        let times = path.grid().times();
        let last = 2 * (times.len() - 1);
        let phi1 = path.phi(last).to_vec();
        let mut points = Vec::with_capacity(n);
        for l in 0..n {
            let mut coeff = vec![0.0; 2 * s + 1];
            for j in 0..s {
                let i = l * s + j;
                let h = times[i + 1] - times[i];
                coeff[2 * j] += h / 6.0;
                coeff[2 * j + 1] += 4.0 * h / 6.0;
                coeff[2 * j + 2] += h / 6.0;
            }
            let mut pts = Vec::with_capacity(2 * s + 1);
            for (r, c) in coeff.iter().enumerate() {
                let q = 2 * l * s + r;
                let mut b = vec![0.0; d * d];
                for row in 0..d {
                    for col in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += phi1[row * d + k] * path.phi_inv(q)[k * d + col];
                        }
                        b[row * d + col] = n as f64 * c * acc;
                    }
                }
                pts.push(KernelPoint { w: path.w(q).to_vec(), fbar: path.fbar(q).to_vec(), weight: b });
            }
            points.push(pts);
        }
        Ok(Self { n, dim: d, sys: sys.clone(), points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `F_{l,N}(ω)`; `scratch` needs `2·dim` entries.
    pub fn eval(&self, l: usize, omega: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        let (g, bg) = scratch.split_at_mut(d);
        for p in &self.points[l] {
            self.sys.eval(&p.w, omega, g);
            for (gi, m) in g.iter_mut().zip(&p.fbar) {
                *gi -= m;
            }
            mat_vec(&p.weight, g, d, &mut bg[..d]);
            for (o, v) in out.iter_mut().zip(bg.iter()) {
                *o += v;
            }
        }
    }

    pub fn observable(&self, l: usize) -> Observable {
        let fam = Arc::new(self.clone());
        let d = self.dim;
        Observable::new(self.sys.omega_dim(), d, self.sys.holder_eta(), move |w, out| {
            let mut scratch = vec![0.0; 2 * d];
            fam.eval(l, w, out, &mut scratch);
        })
    }
}

#[derive(Debug, Clone)]
pub struct SigmaConfig {
    pub n: usize,
    pub lag_cap: usize,
    pub samples: usize,
    pub seed: u64,
    /// Simpson panels per kernel interval.
    pub substeps: usize,
}

impl SigmaConfig {
    pub fn new(n: usize, samples: usize, seed: u64) -> Self {
        Self { n, lag_cap: DEFAULT_LAG_CAP, samples, seed, substeps: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct SigmaEstimate {
    /// PSD-clamped `Σ_F²`.
    pub matrix: CovMatrix,
    /// Unclamped average of the per-kernel series estimates.
    pub raw: Matrix,
    /// Entrywise standard error of `raw` (per-sample averages over `l` are i.i.d.).
    pub standard_error: Matrix,
    pub n: usize,
    pub lag_cap: usize,
    pub samples: usize,
}

/// `Σ_F² ≈ N⁻¹ Σ_l A(F_{l,N})`, each `A` by the truncated lag series.
///
/// Sample `i` starts kernel `l` at `T^l ω_i` (orbit shift of the invariant draw `ω_i`), so
/// the estimate is paired with [`direct_sigma`] on the same seed.
pub fn sigma_f<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    config: &SigmaConfig,
    exec: &E,
) -> Result<SigmaEstimate> {
    if config.samples < 100 {
        return Err(invalid("sigma_F needs at least 100 samples"));
    }
    if driver.phase_dim() != sys.omega_dim() {
        return Err(Error::Dimension { expected: sys.omega_dim(), got: driver.phase_dim() });
    }
    let fam = KernelFamily::new(sys, avg, x, config.n, config.substeps)?;
    let (d, n, k_cap) = (sys.dim(), config.n, config.lag_cap);
    let dd = d * d;
    let chunks = exec.map_indexed(chunk_count(config.samples), |c| {
        let mut sum = vec![0.0; dd];
        let mut sumsq = vec![0.0; dd];
        let mut values = vec![0.0; (k_cap + 1) * d];
        let mut scratch = vec![0.0; 2 * d];
        let mut z = vec![0.0; dd];
        let mut zbar = vec![0.0; dd];
        let mut orbit: Vec<D::State> = Vec::with_capacity(n + k_cap);
        for i in chunk_range(c, config.samples) {
            let mut rng = stream(config.seed, domain::INITIAL_POINTS, i as u64);
            let mut st = driver.sample_invariant(&mut rng);
            orbit.clear();
            for j in 0..n + k_cap {
                if j > 0 {
                    driver.advance(&mut st);
                }
                orbit.push(st.clone());
            }
            zbar.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..n {
                for j in 0..=k_cap {
                    fam.eval(l, driver.coords(&orbit[l + j]), &mut values[j * d..(j + 1) * d], &mut scratch);
                }
                crate::clt::lag_series_sample(&values, d, &mut z);
                for (a, b) in zbar.iter_mut().zip(&z) {
                    *a += b / n as f64;
                }
            }
            for e in 0..dd {
                sum[e] += zbar[e];
                sumsq[e] += zbar[e] * zbar[e];
            }
        }
        (sum, sumsq)
    });
    let m = config.samples as f64;
    let (mut sum, mut sumsq) = (vec![0.0; dd], vec![0.0; dd]);
    for (s, q) in &chunks {
        for e in 0..dd {
            sum[e] += s[e];
            sumsq[e] += q[e];
        }
    }
    let raw = Matrix::from_fn(d, d, |i, j| sum[i * d + j] / m);
    let se = Matrix::from_fn(d, d, |i, j| {
        let s = sum[i * d + j];
        libm::sqrt(((sumsq[i * d + j] - s * s / m) / (m - 1.0)).max(0.0) / m)
    });
    let matrix = CovMatrix::new(raw.clone())?.clamped(CovMatrix::NEGATIVE_EIGEN_TOL);
    Ok(SigmaEstimate { matrix, raw, standard_error: se, n, lag_cap: k_cap, samples: config.samples })
}

/// Empirical covariance (unbiased) of `y_1^{1/N} = N^{-1/2} Σ_k F_{k,N}(T^k ω_i)` over
/// `samples` invariant draws, with entrywise standard errors.
pub fn direct_sigma<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<(Matrix, Matrix)> {
    if samples < 2 {
        return Err(invalid("direct ensemble needs at least two samples"));
    }
    let fam = KernelFamily::new(sys, avg, x, n, 2)?;
    let d = sys.dim();
    let ys: Vec<Vec<f64>> = exec.map_indexed(samples, |i| {
        let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
        let mut st = driver.sample_invariant(&mut rng);
        let mut acc = vec![0.0; d];
        let mut val = vec![0.0; d];
        let mut scratch = vec![0.0; 2 * d];
        for k in 0..n {
            if k > 0 {
                driver.advance(&mut st);
            }
            fam.eval(k, driver.coords(&st), &mut val, &mut scratch);
            for (a, v) in acc.iter_mut().zip(&val) {
                *a += v;
            }
        }
        acc.iter().map(|v| v / libm::sqrt(n as f64)).collect()
    });
    Ok(ensemble_covariance(&ys, d))
}

/// Unbiased covariance of vectors plus entrywise standard errors.
pub(crate) fn ensemble_covariance(ys: &[Vec<f64>], d: usize) -> (Matrix, Matrix) {
    let m = ys.len() as f64;
    let mut mean = vec![0.0; d];
    for y in ys {
        for (a, v) in mean.iter_mut().zip(y) {
            *a += v / m;
        }
    }
    let mut sum = vec![0.0; d * d];
    let mut sumsq = vec![0.0; d * d];
    for y in ys {
        for a in 0..d {
            for b in 0..d {
                let p = (y[a] - mean[a]) * (y[b] - mean[b]);
                sum[a * d + b] += p;
                sumsq[a * d + b] += p * p;
            }
        }
    }
    let cov = Matrix::from_fn(d, d, |i, j| sum[i * d + j] / (m - 1.0));
    let se = Matrix::from_fn(d, d, |i, j| {
        let s = sum[i * d + j];
        libm::sqrt(((sumsq[i * d + j] - s * s / m) / (m - 1.0)).max(0.0) / m)
    });
    (cov, se)
}

/// Entrywise comparison of two estimates with independent-error standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaComparison {
    /// `max |a − b|`.
    pub gap: f64,
    /// `max |a − b| / √(se_a² + se_b²)`.
    pub worst_ratio: f64,
    pub within_three_se: bool,
}

pub fn compare_estimates(a: &Matrix, se_a: &Matrix, b: &Matrix, se_b: &Matrix) -> SigmaComparison {
    let mut gap = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let diff = (a[(i, j)] - b[(i, j)]).abs();
            let se = libm::hypot(se_a[(i, j)], se_b[(i, j)]);
            gap = gap.max(diff);
            let r = if se > 0.0 { diff / se } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
            worst_ratio = worst_ratio.max(r);
        }
    }
    SigmaComparison { gap, worst_ratio, within_three_se: worst_ratio <= 3.0 }
}

/// Smallest eigenvalue of `A(F̃(w_u, ·))` over `u ∈ {0, 1/points, …, 1}`: the
/// pointwise nondegeneracy condition, checked on a finite grid only.
pub fn pointwise_nondegeneracy<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    points: usize,
    lag_cap: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<f64> {
    let points = points.max(1);
    let path = MeanPath::new(avg, x, KinkGrid::new(1.0 / points as f64, 1.0, 1)?)?;
    let mut worst = f64::INFINITY;
    for i in 0..=points {
        let q = 2 * i;
        let (w, fbar) = (path.w(q).to_vec(), path.fbar(q).to_vec());
        let s = sys.clone();
        let f = Observable::new(sys.omega_dim(), sys.dim(), sys.holder_eta(), move |om, out| {
            s.eval(&w, om, out);
            for (o, m) in out.iter_mut().zip(&fbar) {
                *o -= m;
            }
        });
        let est = asymptotic_covariance(driver, &f, lag_cap, samples, seed, exec)?;
        worst = worst.min(est.matrix.min_eigenvalue());
    }
    Ok(worst)
}
