use alloc::vec;
use alloc::vec::Vec;

use super::fluctuation::{gronwall_check, realize, Realization};
use super::integrate::{check_inputs, integrate_on_grid, KinkGrid};
use super::path::MeanPath;
use super::sigma::{sigma_f, SigmaConfig, SigmaEstimate};
use super::system::{sup_diff, sup_norm, AveragedField, PerturbedSystem};
use crate::clt::{DegeneracyMode, DEFAULT_LAG_CAP};
use crate::driver::MapDriver;
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::linalg::CovMatrix;
use crate::metrics::{gaussian_sample, prokhorov, FiniteMeasure, GaussianSpec};
use crate::rng::{domain, stream};
use crate::stats::{lp_norm, RateFit};

/// Values at or below this are treated as exact zeros (no decay fit).
pub const ZERO_TOL: f64 = 1e-10;

fn check_eps_grid(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("ε grid must be positive, strictly decreasing, with at least 3 entries"));
    }
    Ok(())
}

fn omega_for<D: MapDriver>(driver: &D, seed: u64, i: usize) -> D::State {
    let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
    driver.sample_invariant(&mut rng)
}

/// Runs `f` on every ensemble member at one `ε`. Member `i` always uses initial point
/// `ω_i` of `seed`, so different `ε` are paired.
fn ensemble_at<D, E, T, F>(
    sys: &PerturbedSystem,
    path: &MeanPath,
    driver: &D,
    ensemble: usize,
    seed: u64,
    with_y: bool,
    exec: &E,
    f: F,
) -> Result<Vec<T>>
where
    D: MapDriver,
    E: Executor,
    T: Send,
    F: Fn(&Realization) -> T + Sync + Send,
{
    exec.map_indexed(ensemble, |i| {
        let omega = omega_for(driver, seed, i);
        realize(sys, path, driver, &omega, with_y).map(|r| f(&r))
    })
    .into_iter()
    .collect()
}

/// `‖sup_t |e_t|_∞‖_{L^p}` for one `ε`, with the per-trajectory suprema kept.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStat {
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    pub sups: Vec<f64>,
    /// `(p, ‖·‖_{L^p})` in the order of the requested `p` list.
    pub lp_values: Vec<(f64, f64)>,
}

impl EnsembleStat {
    pub fn from_sups(epsilon: f64, seed: u64, sups: Vec<f64>, p_list: &[f64]) -> Self {
        let lp_values = p_list.iter().map(|p| (*p, lp_norm(&sups, *p))).collect();
        Self { epsilon, samples: sups.len(), seed, sups, lp_values }
    }

    /// `‖·‖_{L^p}` is nondecreasing in `p` on the stored sample (up to rounding).
    pub fn is_monotone(&self) -> bool {
        let mut sorted = self.lp_values.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        sorted.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub eps_grid: Vec<f64>,
    pub ensemble: usize,
    pub p_list: Vec<f64>,
    pub t0: f64,
    pub substeps: usize,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(eps_grid: Vec<f64>, ensemble: usize, seed: u64) -> Self {
        Self { eps_grid, ensemble, p_list: vec![2.0], t0: 1.0, substeps: 8, seed }
    }
}

#[derive(Debug, Clone)]
pub struct LpFit {
    pub p: f64,
    /// Log-log fit of the `L^p` value against `ε`; `None` when every value is zero.
    pub raw: Option<RateFit>,
    /// Same after dividing by `|ln ε|`.
    pub normalized: Option<RateFit>,
}

#[derive(Debug, Clone)]
pub struct LpScalingReport {
    pub stats: Vec<EnsembleStat>,
    pub fits: Vec<LpFit>,
}

fn fit_or_none(eps: &[f64], ys: &[f64]) -> Result<Option<RateFit>> {
    if ys.iter().all(|y| *y <= ZERO_TOL) {
        return Ok(None);
    }
    let floored: Vec<f64> = ys.iter().map(|y| y.max(ZERO_TOL)).collect();
    RateFit::loglog(eps, &floored).map(Some)
}

/// Decay of `‖sup_{t ≤ T0} |e_t^ε|_∞‖_{L^p}` in `ε`.
pub fn sup_error_lp_scaling<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    config: &EnsembleConfig,
    exec: &E,
) -> Result<LpScalingReport> {
    check_eps_grid(&config.eps_grid)?;
    check_inputs(sys, driver, x)?;
    if config.ensemble < 2 || config.p_list.is_empty() || config.p_list.iter().any(|p| !(*p >= 1.0)) {
        return Err(invalid("need ensemble ≥ 2 and every p ≥ 1"));
    }
    let mut stats = Vec::with_capacity(config.eps_grid.len());
    for &eps in &config.eps_grid {
        let path = MeanPath::new(avg, x, KinkGrid::new(eps, config.t0, config.substeps)?)?;
        let sups = ensemble_at(sys, &path, driver, config.ensemble, config.seed, false, exec, |r| r.error.sup_norm())?;
        stats.push(EnsembleStat::from_sups(eps, config.seed, sups, &config.p_list));
    }
    let mut fits = Vec::with_capacity(config.p_list.len());
    for (k, &p) in config.p_list.iter().enumerate() {
        let ys: Vec<f64> = stats.iter().map(|s| s.lp_values[k].1).collect();
        let normed: Vec<f64> = stats.iter().map(|s| s.lp_values[k].1 / libm::fabs(libm::log(s.epsilon))).collect();
        let raw = fit_or_none(&config.eps_grid, &ys)?;
        let normalized = if raw.is_some() { fit_or_none(&config.eps_grid, &normed)? } else { None };
        fits.push(LpFit { p, raw, normalized });
    }
    Ok(LpScalingReport { stats, fits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub epsilon: f64,
    pub p: f64,
    /// `‖e_{T0}/√ε − y_{T0}‖_{L^p}`.
    pub terminal: f64,
    /// `sup_t ‖e_t/√ε − y_t‖_{L^p}` over grid nodes.
    pub sup_over_t: f64,
}

#[derive(Debug, Clone)]
pub struct GapFit {
    pub p: f64,
    pub terminal: Option<RateFit>,
    pub sup_over_t: Option<RateFit>,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub fits: Vec<GapFit>,
}

/// Distance between the rescaled error and its Gaussian linearisation,
/// `‖e_t^ε/√ε − y_t^ε‖_{L^p}`, across an `ε` grid.
pub fn approximant_gap<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    config: &EnsembleConfig,
    exec: &E,
) -> Result<GapReport> {
    check_eps_grid(&config.eps_grid)?;
    check_inputs(sys, driver, x)?;
    if config.ensemble < 100 {
        return Err(invalid("approximant_gap needs an ensemble of at least 100"));
    }
    let mut rows = Vec::new();
    for &eps in &config.eps_grid {
        let path = MeanPath::new(avg, x, KinkGrid::new(eps, config.t0, config.substeps)?)?;
        let scale = 1.0 / libm::sqrt(eps);
        // Per trajectory: |gap_t|_∞ at every node.
        let gaps = ensemble_at(sys, &path, driver, config.ensemble, config.seed, true, exec, |r| {
            let y = r.fluctuations.y.as_ref().expect("requested");
            let d = y.dim();
            (0..y.len())
                .map(|i| {
                    let e = r.error.state(i);
                    let yi = y.state(i);
                    (0..d).fold(0.0f64, |m, c| m.max((e[c] * scale - yi[c]).abs()))
                })
                .collect::<Vec<f64>>()
        })?;
        let nodes = gaps[0].len();
        for &p in &config.p_list {
            let mut column = vec![0.0; gaps.len()];
            let mut sup_over_t = 0.0f64;
            for t in 0..nodes {
                for (c, g) in column.iter_mut().zip(&gaps) {
                    *c = g[t];
                }
                sup_over_t = sup_over_t.max(lp_norm(&column, p));
            }
            rows.push(GapRow { epsilon: eps, p, terminal: lp_norm(&column, p), sup_over_t });
        }
    }
    let mut fits = Vec::new();
    for &p in &config.p_list {
        let sel: Vec<&GapRow> = rows.iter().filter(|r| r.p == p).collect();
        let term: Vec<f64> = sel.iter().map(|r| r.terminal).collect();
        let sup: Vec<f64> = sel.iter().map(|r| r.sup_over_t).collect();
        fits.push(GapFit { p, terminal: fit_or_none(&config.eps_grid, &term)?, sup_over_t: fit_or_none(&config.eps_grid, &sup)? });
    }
    Ok(GapReport { rows, fits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallSummary {
    pub epsilon: f64,
    pub trajectories: usize,
    pub passed: usize,
    pub min_forward_slack: f64,
    pub min_reverse_slack: f64,
}

/// [`gronwall_check`] on every ensemble member at every `ε`.
pub fn gronwall_ensemble<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    config: &EnsembleConfig,
    exec: &E,
) -> Result<Vec<GronwallSummary>> {
    check_inputs(sys, driver, x)?;
    let mut out = Vec::with_capacity(config.eps_grid.len());
    for &eps in &config.eps_grid {
        let path = MeanPath::new(avg, x, KinkGrid::new(eps, config.t0, config.substeps)?)?;
        let reports: Result<Vec<_>> = exec
            .map_indexed(config.ensemble, |i| {
                let omega = omega_for(driver, config.seed, i);
                let x_traj = integrate_on_grid(sys, driver, x, path.grid(), &omega)?;
                gronwall_check(sys, &path, &x_traj, driver, &omega)
            })
            .into_iter()
            .collect();
        let reports = reports?;
        out.push(GronwallSummary {
            epsilon: eps,
            trajectories: reports.len(),
            passed: reports.iter().filter(|r| r.pass).count(),
            min_forward_slack: reports.iter().map(|r| r.forward_slack).fold(f64::INFINITY, f64::min),
            min_reverse_slack: reports.iter().map(|r| r.reverse_slack).fold(f64::INFINITY, f64::min),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AveragingRateConfig {
    pub s: f64,
    pub eps_grid: Vec<f64>,
    pub ensemble: usize,
    pub gaussian_m: usize,
    pub seed: u64,
    pub substeps: usize,
    /// Known `Σ_F²` at time `s`; estimated by [`sigma_f`] when absent.
    pub sigma: Option<CovMatrix>,
    pub sigma_n: usize,
    pub lag_cap: usize,
    pub sigma_samples: usize,
    pub prokhorov_tol: f64,
    pub mode: DegeneracyMode,
}

impl AveragingRateConfig {
    pub fn new(eps_grid: Vec<f64>, ensemble: usize, gaussian_m: usize, seed: u64) -> Self {
        Self {
            s: 1.0,
            eps_grid,
            ensemble,
            gaussian_m,
            seed,
            substeps: 4,
            sigma: None,
            sigma_n: 256,
            lag_cap: DEFAULT_LAG_CAP,
            sigma_samples: 2000,
            prokhorov_tol: 1e-4,
            mode: DegeneracyMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingRateRow {
    pub epsilon: f64,
    pub pi_hat: f64,
    /// Below the resolution `1/(2·gaussian_m)`; the floor entered the fit.
    pub floored: bool,
}

#[derive(Debug, Clone)]
pub struct AveragingRateReport {
    pub rows: Vec<AveragingRateRow>,
    pub fit: RateFit,
    pub sigma: CovMatrix,
    pub sigma_estimate: Option<SigmaEstimate>,
    pub degenerate: bool,
    pub expected_exponent: f64,
}

/// Prokhorov distance of `law(e_s^ε/√ε)` from `N(0, Σ_F²)` across `ε`.
///
/// Time `s` is reduced to time 1 by running `s·F` with `ε/s`; the limit covariance of
/// the rescaled problem is divided by `s`.
pub fn averaging_rate_experiment<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    config: &AveragingRateConfig,
    exec: &E,
) -> Result<AveragingRateReport> {
    check_eps_grid(&config.eps_grid)?;
    check_inputs(sys, driver, x)?;
    if !(config.s > 0.0) || config.ensemble == 0 || config.gaussian_m == 0 {
        return Err(invalid("need s > 0, ensemble > 0 and gaussian_m > 0"));
    }
    let s = config.s;
    let (sys_s, avg_s) = if s == 1.0 { (sys.clone(), avg.clone()) } else { (sys.scaled(s), avg.scaled(s)) };
    let (sigma, sigma_estimate) = match &config.sigma {
        Some(c) => (c.clone(), None),
        None => {
            let mut sc = SigmaConfig::new(config.sigma_n, config.sigma_samples, config.seed);
            sc.lag_cap = config.lag_cap;
            let est = sigma_f(&sys_s, &avg_s, driver, x, &sc, exec)?;
            let m = est.matrix.matrix() / s;
            (CovMatrix::new(m)?, Some(est))
        }
    };
    let d = sys.dim();
    if sigma.dim() != d {
        return Err(crate::Error::Dimension { expected: d, got: sigma.dim() });
    }
    let degenerate = sigma.min_eigenvalue() <= crate::clt::DEGENERACY_THRESHOLD;
    if degenerate && config.mode == DegeneracyMode::Strict {
        return Err(invalid("Σ_F² is degenerate"));
    }
    let clamped = sigma.clamped(CovMatrix::NEGATIVE_EIGEN_TOL);
    let reference = gaussian_sample(&GaussianSpec::centered(clamped.into_matrix())?, config.gaussian_m, config.seed)?;
    let floor = 1.0 / (2.0 * config.gaussian_m as f64);
    let mut rows = Vec::with_capacity(config.eps_grid.len());
    for &eps in &config.eps_grid {
        let path = MeanPath::new(&avg_s, x, KinkGrid::new(eps / s, 1.0, config.substeps)?)?;
        let scale = 1.0 / libm::sqrt(eps);
        let finals = ensemble_at(&sys_s, &path, driver, config.ensemble, config.seed, false, exec, |r| {
            r.error.final_state().iter().map(|v| v * scale).collect::<Vec<f64>>()
        })?;
        let pts: Vec<f64> = finals.into_iter().flatten().collect();
        let law = FiniteMeasure::empirical(d, &pts)?;
        let pi_hat = prokhorov(&law, &reference, config.prokhorov_tol)?;
        rows.push(AveragingRateRow { epsilon: eps, pi_hat, floored: pi_hat < floor });
    }
    let ys: Vec<f64> = rows.iter().map(|r| r.pi_hat.max(floor)).collect();
    let fit = RateFit::loglog(&config.eps_grid, &ys)?;
    Ok(AveragingRateReport { rows, fit, sigma, sigma_estimate, degenerate, expected_exponent: 0.5 })
}

/// Mean over the ensemble of `|sup_t |y^ε_t| − sup_t |y^{ε'}_t||` with
/// `ε' = 1/⌊1/ε⌋`: the effect of snapping `ε` to a reciprocal integer.
pub fn reciprocal_rounding_gap<D: MapDriver, E: Executor>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    epsilon: f64,
    config: &EnsembleConfig,
    exec: &E,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("ε must lie in (0, 1)"));
    }
    let snapped = 1.0 / libm::floor(1.0 / epsilon);
    let a = MeanPath::new(avg, x, KinkGrid::new(epsilon, config.t0, config.substeps)?)?;
    let b = MeanPath::new(avg, x, KinkGrid::new(snapped, config.t0, config.substeps)?)?;
    let sup_y = |p: &MeanPath| {
        ensemble_at(sys, p, driver, config.ensemble, config.seed, true, exec, |r| {
            sup_norm(r.fluctuations.y.as_ref().expect("requested").states())
        })
    };
    let (ya, yb) = (sup_y(&a)?, sup_y(&b)?);
    Ok(ya.iter().zip(&yb).map(|(u, v)| (u - v).abs()).sum::<f64>() / ya.len() as f64)
}

/// `sup_t |x_t|` at two substep counts on the same `ω`, for the kink-discipline check.
pub fn substep_sensitivity<D: MapDriver>(
    sys: &PerturbedSystem,
    driver: &D,
    x: &[f64],
    epsilon: f64,
    t0: f64,
    coarse: usize,
    fine: usize,
    omega: &D::State,
) -> Result<f64> {
    let a = integrate_on_grid(sys, driver, x, &KinkGrid::new(epsilon, t0, coarse)?, omega)?;
    let b = integrate_on_grid(sys, driver, x, &KinkGrid::new(epsilon, t0, fine)?, omega)?;
    // Compare at kinks, which both grids contain.
    let mut worst = (a.sup_norm() - b.sup_norm()).abs();
    for k in 0..=(a.len() - 1) / coarse {
        worst = worst.max(sup_diff(a.state(k * coarse), b.state(k * fine)));
    }
    Ok(worst)
}
