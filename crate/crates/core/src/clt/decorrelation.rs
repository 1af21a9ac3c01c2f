use alloc::vec;
use alloc::vec::Vec;

use crate::driver::{MapDriver, Observable};
use crate::error::{invalid, Result};
use crate::exec::{chunk_count, chunk_range, Executor};
use crate::rng::{domain, stream};
use crate::stats::RateFit;

/// Lagged covariances `|Cov(f, g∘T^n)|` with an exponential fit.
#[derive(Debug, Clone)]
pub struct DecorrelationProfile {
    pub lags: Vec<usize>,
    pub cov_norms: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// `None` when fewer than three lags clear three standard errors, or the fitted
    /// rate is not below one.
    pub fit: Option<DecorrelationFit>,
}

/// `|Cov(f, g∘T^n)| ≈ c (n+1)^k δ^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelationFit {
    pub delta: f64,
    pub poly_degree: u32,
    pub r2: f64,
    pub fitted_lags: Vec<usize>,
}

impl DecorrelationProfile {
    pub fn fitted_delta(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.delta)
    }
}

pub fn decorrelation_profile<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    g: &Observable,
    n_max: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<DecorrelationProfile> {
    if n_max < 4 {
        return Err(invalid("decorrelation_profile needs n_max ≥ 4"));
    }
    if samples < 2 {
        return Err(invalid("decorrelation_profile needs at least two samples"));
    }
    let (df, dg) = (f.dim_out(), g.dim_out());
    let width = df * dg;
    let lags = n_max + 1;
    // Per lag: sums of f_a·g_b∘T^n and of their squares.
    let chunks = exec.map_indexed(chunk_count(samples), |c| {
        let mut sum = vec![0.0; lags * width];
        let mut sumsq = vec![0.0; lags * width];
        let mut fx = vec![0.0; df];
        let mut gx = vec![0.0; dg];
        for i in chunk_range(c, samples) {
            let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
            let mut state = driver.sample_invariant(&mut rng);
            f.eval_into(driver.coords(&state), &mut fx);
            for n in 0..lags {
                if n > 0 {
                    driver.advance(&mut state);
                }
                g.eval_into(driver.coords(&state), &mut gx);
                for a in 0..df {
                    for b in 0..dg {
                        let p = fx[a] * gx[b];
                        sum[n * width + a * dg + b] += p;
                        sumsq[n * width + a * dg + b] += p * p;
                    }
                }
            }
        }
        (sum, sumsq)
    });
    let mut sum = vec![0.0; lags * width];
    let mut sumsq = vec![0.0; lags * width];
    for (s, q) in &chunks {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
        for (a, b) in sumsq.iter_mut().zip(q) {
            *a += b;
        }
    }
    let m = samples as f64;
    let mut cov_norms = Vec::with_capacity(lags);
    let mut standard_errors = Vec::with_capacity(lags);
    for n in 0..lags {
        let mut best = (0.0_f64, 0.0_f64);
        for e in 0..width {
            let s = sum[n * width + e];
            let mean = s / m;
            let var = ((sumsq[n * width + e] - s * s / m) / (m - 1.0)).max(0.0);
            let se = libm::sqrt(var / m);
            if libm::fabs(mean) > best.0 || e == 0 {
                best = (libm::fabs(mean), se);
            }
        }
        cov_norms.push(best.0);
        standard_errors.push(best.1);
    }
    let lag_list: Vec<usize> = (0..lags).collect();
    let fit = fit_profile(&cov_norms, &standard_errors);
    Ok(DecorrelationProfile { lags: lag_list, cov_norms, standard_errors, fit })
}

fn fit_profile(norms: &[f64], errors: &[f64]) -> Option<DecorrelationFit> {
    let used: Vec<usize> = (0..norms.len()).filter(|&n| norms[n] > 3.0 * errors[n] && norms[n] > 0.0).collect();
    if used.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, RateFit, u32)> = None;
    for k in 0..=2u32 {
        let points = used
            .iter()
            .map(|&n| (n as f64, libm::log(norms[n]) - k as f64 * libm::log(n as f64 + 1.0)))
            .collect();
        let fit = RateFit::ols(points).ok()?;
        let sse: f64 = fit
            .points
            .iter()
            .map(|p| {
                let r = p.1 - fit.intercept - fit.slope * p.0;
                r * r
            })
            .sum();
        // A higher degree must cut the residual by 5% to be preferred.
        if best.as_ref().is_none_or(|b| sse < 0.95 * b.0) {
            best = Some((sse, fit, k));
        }
    }
    let (_, fit, k) = best?;
    let delta = libm::exp(fit.slope);
    (delta < 1.0).then_some(DecorrelationFit { delta, poly_degree: k, r2: fit.r2, fitted_lags: used })
}
