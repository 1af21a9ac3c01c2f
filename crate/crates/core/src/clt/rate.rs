use alloc::vec::Vec;

use super::covariance::{asymptotic_covariance, CovarianceEstimate, DEFAULT_LAG_CAP};
use super::sums::birkhoff_sums_at;
use crate::driver::{MapDriver, Observable, ToralAutomorphism};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::metrics::{gaussian_sample, prokhorov, FiniteMeasure, GaussianSpec};
use crate::linalg::CovMatrix;
use crate::rng::{domain, stream};
use crate::stats::RateFit;

/// Smallest eigenvalue of `D(f)` treated as nondegenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneracyMode {
    /// Degenerate `D(f)` switches to the slower expected exponent.
    Auto,
    /// Degenerate `D(f)` is an error.
    Strict,
}

#[derive(Debug, Clone)]
pub struct CltRateConfig {
    pub n_grid: Vec<usize>,
    pub ensemble: usize,
    pub gaussian_m: usize,
    pub seed: u64,
    pub lag_cap: usize,
    pub covariance_samples: usize,
    pub prokhorov_tol: f64,
    /// Known limit covariance; estimated from the lag series when absent.
    pub covariance: Option<CovMatrix>,
    pub mode: DegeneracyMode,
}

impl CltRateConfig {
    pub fn new(n_grid: Vec<usize>, ensemble: usize, gaussian_m: usize, seed: u64) -> Self {
        Self {
            n_grid,
            ensemble,
            gaussian_m,
            seed,
            lag_cap: DEFAULT_LAG_CAP,
            covariance_samples: 100_000,
            prokhorov_tol: 1e-4,
            covariance: None,
            mode: DegeneracyMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltRateRow {
    pub n: usize,
    pub pi_hat: f64,
    /// `pi_hat` was below the resolution `1/(2·gaussian_m)` and the floor entered the fit.
    pub floored: bool,
}

#[derive(Debug, Clone)]
pub struct CltRateReport {
    pub rows: Vec<CltRateRow>,
    pub fit: RateFit,
    pub covariance: CovMatrix,
    pub estimate: Option<CovarianceEstimate>,
    pub degenerate: bool,
    /// Exponent the theory predicts for this path.
    pub expected_exponent: f64,
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 3 || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid must be strictly increasing, positive, with at least 3 entries"));
    }
    Ok(())
}

/// Ensemble of `S_n(f)/√n` at every grid point, sharing the initial points across `n`.
fn scaled_sums<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    n_grid: &[usize],
    ensemble: usize,
    seed: u64,
    exec: &E,
) -> Vec<Vec<f64>> {
    let d = f.dim_out();
    let per_start = exec.map_indexed(ensemble, |i| {
        let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
        let start = driver.sample_invariant(&mut rng);
        birkhoff_sums_at(driver, f, n_grid, &start)
    });
    n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let scale = 1.0 / libm::sqrt(n as f64);
            let mut pts = Vec::with_capacity(ensemble * d);
            for s in &per_start {
                pts.extend(s[k].iter().map(|v| v * scale));
            }
            pts
        })
        .collect()
}

/// Distance of the law of `S_n(f)/√n` from `N(0, D(f))` across `n_grid`.
pub fn clt_rate_experiment<D: MapDriver, E: Executor>(
    driver: &D,
    f: &Observable,
    config: &CltRateConfig,
    exec: &E,
) -> Result<CltRateReport> {
    check_grid(&config.n_grid)?;
    if config.ensemble == 0 || config.gaussian_m == 0 {
        return Err(invalid("ensemble and gaussian_m must be positive"));
    }
    let d = f.dim_out();
    let (covariance, estimate) = match &config.covariance {
        Some(c) => (c.clone(), None),
        None => {
            let est = asymptotic_covariance(driver, f, config.lag_cap, config.covariance_samples, config.seed, exec)?;
            (est.matrix.clone(), Some(est))
        }
    };
    if covariance.dim() != d {
        return Err(crate::Error::Dimension { expected: d, got: covariance.dim() });
    }
    let degenerate = covariance.min_eigenvalue() <= DEGENERACY_THRESHOLD;
    if degenerate && config.mode == DegeneracyMode::Strict {
        return Err(invalid("D(f) is degenerate"));
    }
    let clamped = covariance.clamped(CovMatrix::NEGATIVE_EIGEN_TOL);
    let reference = gaussian_sample(&GaussianSpec::centered(clamped.into_matrix())?, config.gaussian_m, config.seed)?;
    let ensembles = scaled_sums(driver, f, &config.n_grid, config.ensemble, config.seed, exec);
    let distances: Vec<Result<f64>> = exec.map_indexed(config.n_grid.len(), |k| {
        let law = FiniteMeasure::empirical(d, &ensembles[k])?;
        prokhorov(&law, &reference, config.prokhorov_tol)
    });
    let floor = 1.0 / (2.0 * config.gaussian_m as f64);
    let mut rows = Vec::with_capacity(config.n_grid.len());
    for (&n, pi) in config.n_grid.iter().zip(distances) {
        let pi_hat = pi?;
        rows.push(CltRateRow { n, pi_hat, floored: pi_hat < floor });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.pi_hat.max(floor)).collect();
    let fit = RateFit::loglog(&xs, &ys)?;
    Ok(CltRateReport {
        rows,
        fit,
        covariance,
        estimate,
        degenerate,
        expected_exponent: if degenerate { -1.0 / 3.0 } else { -0.5 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoboundaryRow {
    pub n: usize,
    /// `n·Var(S_n(g)/√n) = Var(S_n(g))`, traced over coordinates.
    pub n_variance: f64,
    /// `Π(law(S_n(g)/√n), δ_0)`.
    pub pi_hat: f64,
}

#[derive(Debug, Clone)]
pub struct CoboundaryReport {
    pub rows: Vec<CoboundaryRow>,
    /// `4‖h‖²_∞·d`, an exact upper bound for every `n_variance`.
    pub variance_bound: f64,
    pub bound_holds: bool,
    /// OLS slope of `n_variance` against `n`.
    pub variance_slope: f64,
    /// Log-log fit of `n_variance` against `n`.
    pub variance_trend: RateFit,
    /// Log-log fit of `pi_hat` against `n` (floored at `1/(2·ensemble)`).
    pub pi_fit: RateFit,
}

/// Sums of `g = h − h∘T` telescope to `h − h∘T^n`: checks bounded variance and the
/// collapse of `S_n(g)/√n` onto `δ_0`.
pub fn coboundary_degenerate_experiment<E: Executor>(
    map: &ToralAutomorphism,
    h: &Observable,
    n_grid: &[usize],
    ensemble: usize,
    seed: u64,
    exec: &E,
) -> Result<CoboundaryReport> {
    check_grid(n_grid)?;
    if ensemble < 2 {
        return Err(invalid("ensemble must be at least 2"));
    }
    let sup = h.sup_bound().ok_or_else(|| invalid("coboundary experiment needs a sup bound for h"))?;
    let g = Observable::coboundary(h, map);
    let d = g.dim_out();
    let ensembles = scaled_sums(map, &g, n_grid, ensemble, seed, exec);
    let origin = FiniteMeasure::dirac(&alloc::vec![0.0; d]);
    let mut rows = Vec::with_capacity(n_grid.len());
    for (&n, pts) in n_grid.iter().zip(&ensembles) {
        let m = ensemble as f64;
        let mut trace = 0.0;
        for a in 0..d {
            let mean = pts.iter().skip(a).step_by(d).sum::<f64>() / m;
            trace += pts.iter().skip(a).step_by(d).map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        }
        let law = FiniteMeasure::empirical(d, pts)?;
        let pi_hat = prokhorov(&law, &origin, 1e-9)?;
        rows.push(CoboundaryRow { n, n_variance: n as f64 * trace, pi_hat });
    }
    let variance_bound = 4.0 * sup * sup * d as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let vars: Vec<f64> = rows.iter().map(|r| r.n_variance).collect();
    let linear = RateFit::ols(xs.iter().copied().zip(vars.iter().copied()).collect())?;
    let floor = 1.0 / (2.0 * ensemble as f64);
    let pis: Vec<f64> = rows.iter().map(|r| r.pi_hat.max(floor)).collect();
    Ok(CoboundaryReport {
        bound_holds: vars.iter().all(|v| *v <= variance_bound),
        variance_bound,
        variance_slope: linear.slope,
        variance_trend: RateFit::loglog(&xs, &vars.iter().map(|v| v.max(f64::MIN_POSITIVE)).collect::<Vec<_>>())?,
        pi_fit: RateFit::loglog(&xs, &pis)?,
        rows,
    })
}
