//! One runner per experiment kind. Each produces CSV tables, summary values and the
//! embedded checks that decide the exit status.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use limitlab_core::averaging::{
    approximant_gap, average_field, averaging_rate_experiment, compare_estimates, direct_sigma, gronwall_ensemble,
    sigma_f, special_flow_gap, special_flow_reduce, sup_error_lp_scaling, AveragingRateConfig, EnsembleConfig,
    PerturbedSystem, SigmaConfig,
};
use limitlab_core::clt::{
    asymptotic_covariance, clt_rate_experiment, coboundary_degenerate_experiment, decorrelation_profile,
    sum_covariance, CltRateConfig, IidSummand,
};
use limitlab_core::driver::{IidDriver, MapDriver, Observable, SpecialFlowSystem, ToralAutomorphism};
use limitlab_core::linalg::{max_abs, CovMatrix};
use limitlab_core::stats::RateFit;
use limitlab_core::Executor;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, MapKind, ObservableKind, SystemKind};
use crate::selftest;
use crate::table::{flag, num, Chart, Table};

/// A named pass/fail assertion embedded in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn new() -> Self {
        Self { tables: Vec::new(), summary: BTreeMap::new(), checks: Vec::new() }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    fn put_fit(&mut self, prefix: &str, fit: &RateFit) {
        self.put(&format!("{prefix}slope"), json!(fit.slope));
        self.put(&format!("{prefix}stderr"), json!(fit.stderr));
        self.put(&format!("{prefix}r2"), json!(fit.r2));
    }
}

type Res<T> = limitlab_core::Result<T>;

fn summary_table(file: &str, fit: &RateFit) -> Table {
    let mut t = Table::new(file, &["slope", "stderr", "r2"]);
    t.push(vec![num(fit.slope), num(fit.stderr), num(fit.r2)]);
    t
}

fn matrix_entries(m: &limitlab_core::linalg::Matrix) -> Vec<(String, f64)> {
    let d = m.nrows();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push((format!("{}{}", i + 1, j + 1), m[(i, j)]));
        }
    }
    out
}

fn toral(cfg: &ExperimentConfig) -> Res<ToralAutomorphism> {
    match (&cfg.driver.map, &cfg.driver.matrix) {
        (MapKind::Toral, Some(m)) => ToralAutomorphism::new((m.len() as f64).sqrt().round() as usize, m.clone()),
        _ => Ok(ToralAutomorphism::cat_map()),
    }
}

fn torus_observable(kind: ObservableKind, dim: usize, eta: f64) -> Observable {
    match kind {
        ObservableKind::SinFirst => Observable::sin_first(dim),
        ObservableKind::CosFirst => Observable::cos_first(dim),
        ObservableKind::Cusp => Observable::cusp(dim, eta),
        ObservableKind::Tent => Observable::tent_product(dim),
        ObservableKind::Zero => Observable::zero(dim, 2),
        _ => Observable::default_pair(),
    }
}

fn summand(cfg: &ExperimentConfig) -> Option<IidSummand> {
    match cfg.observable.kind {
        ObservableKind::IidGaussian => Some(IidSummand::Gaussian),
        ObservableKind::IidRademacher => Some(IidSummand::Rademacher),
        ObservableKind::IidExponential => Some(IidSummand::Exponential),
        ObservableKind::IidBernoulli => Some(IidSummand::Bernoulli(cfg.observable.bernoulli_p)),
        _ => None,
    }
}

/// The driver/observable pair of a CLT-side experiment.
enum CltSetup {
    Toral(ToralAutomorphism, Observable),
    Iid(IidDriver, Observable, bool),
}

fn clt_setup(cfg: &ExperimentConfig) -> Res<CltSetup> {
    if cfg.driver.map == MapKind::Iid {
        return Ok(match summand(cfg) {
            // Standardised summands: the limit covariance is the identity.
            Some(s) => CltSetup::Iid(IidDriver::new(s.input_dim(2)), s.observable(2), true),
            None => CltSetup::Iid(IidDriver::new(2), torus_observable(cfg.observable.kind, 2, cfg.observable.eta), false),
        });
    }
    let map = toral(cfg)?;
    let f = torus_observable(cfg.observable.kind, map.dim(), cfg.observable.eta);
    Ok(CltSetup::Toral(map, f))
}

/// Runs the experiment described by `cfg` on `exec`.
pub fn execute<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    match cfg.kind {
        ExperimentKind::MetricSelftest => Ok(metric_selftest(cfg, exec)),
        ExperimentKind::CltRate => match clt_setup(cfg)? {
            CltSetup::Toral(d, f) => clt_rate(cfg, &d, &f, false, exec),
            CltSetup::Iid(d, f, known) => clt_rate(cfg, &d, &f, known, exec),
        },
        ExperimentKind::Coboundary => coboundary(cfg, exec),
        ExperimentKind::Decorrelation => match clt_setup(cfg)? {
            CltSetup::Toral(d, f) => decorrelation(cfg, &d, &f, exec),
            CltSetup::Iid(d, f, _) => decorrelation(cfg, &d, &f, exec),
        },
        ExperimentKind::CltCovariance => match clt_setup(cfg)? {
            CltSetup::Toral(d, f) => clt_covariance(cfg, &d, &f, exec),
            CltSetup::Iid(d, f, _) => clt_covariance(cfg, &d, &f, exec),
        },
        ExperimentKind::AveragingRate => averaging_rate(cfg, exec),
        ExperimentKind::LpScaling => lp_scaling(cfg, exec),
        ExperimentKind::ApproximantGap => gap(cfg, exec),
        ExperimentKind::Gronwall => gronwall(cfg, exec),
        ExperimentKind::SigmaConsistency => sigma_consistency(cfg, exec),
        ExperimentKind::SpecialFlow => special_flow(cfg, exec),
    }
}

fn metric_selftest<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Outcome {
    let e = &cfg.ensemble;
    let suites = [
        selftest::oracle_equivalence(e.oracle_pairs, e.max_atoms, cfg.seed, exec),
        selftest::sandwich(e.sandwich_pairs, e.max_atoms, cfg.seed, exec),
        selftest::coupling_bound(e.coupling_pairs, e.couplings, e.max_atoms, cfg.seed, exec),
    ];
    let mut out = Outcome::new();
    let mut t = Table::new("selftest.csv", &["suite", "cases", "failures", "worst"]);
    for s in &suites {
        t.push(vec![s.name.into(), s.cases.to_string(), s.failures.to_string(), num(s.worst)]);
        out.put(&format!("{}_worst", s.name), json!(s.worst));
        out.checks.push(Check::new(s.name, s.passed(), format!("{} of {} cases failed, worst {:e}", s.failures, s.cases, s.worst)));
    }
    out.tables.push(t);
    out
}

fn clt_rate<D: MapDriver, E: Executor>(cfg: &ExperimentConfig, driver: &D, f: &Observable, known: bool, exec: &E) -> Res<Outcome> {
    let e = &cfg.ensemble;
    let mut rc = CltRateConfig::new(cfg.grid.n_grid.clone(), e.ensemble, e.gaussian_m, cfg.seed);
    rc.lag_cap = e.lag_cap;
    rc.covariance_samples = e.covariance_samples;
    rc.prokhorov_tol = e.prokhorov_tol;
    if known {
        rc.covariance = Some(CovMatrix::identity(f.dim_out()));
    }
    let rep = clt_rate_experiment(driver, f, &rc, exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("rates.csv", &["n", "pi_hat", "pi_floor_flag", "ensemble", "gaussian_m", "seed"])
        .with_chart(Chart::loglog("n", "pi_hat", None, "Prokhorov distance of S_n/√n from N(0, D)"));
    for r in &rep.rows {
        t.push(vec![r.n.to_string(), num(r.pi_hat), flag(r.floored), e.ensemble.to_string(), e.gaussian_m.to_string(), cfg.seed.to_string()]);
    }
    out.tables.push(t);
    out.tables.push(summary_table("summary.csv", &rep.fit));
    let mut cov = Table::new("covariance.csv", &["entry", "value"]);
    for (k, v) in matrix_entries(rep.covariance.matrix()) {
        cov.push(vec![k, num(v)]);
    }
    out.tables.push(cov);
    out.put_fit("", &rep.fit);
    out.put("expected_exponent", json!(rep.expected_exponent));
    out.put("degenerate", json!(rep.degenerate));
    out.put("pi_hat", json!(rep.rows.iter().map(|r| r.pi_hat).collect::<Vec<_>>()));
    out.put("min_eigenvalue", json!(rep.covariance.min_eigenvalue()));
    Ok(out)
}

fn coboundary<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let h = torus_observable(cfg.observable.kind, map.dim(), cfg.observable.eta);
    let rep = coboundary_degenerate_experiment(&map, &h, &cfg.grid.n_grid, cfg.ensemble.ensemble, cfg.seed, exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("coboundary.csv", &["n", "n_variance", "pi_hat", "ensemble", "seed"])
        .with_chart(Chart::loglog("n", "n_variance", None, "n·Var(S_n(g)/√n) for a coboundary"));
    for r in &rep.rows {
        t.push(vec![r.n.to_string(), num(r.n_variance), num(r.pi_hat), cfg.ensemble.ensemble.to_string(), cfg.seed.to_string()]);
    }
    out.tables.push(t);
    out.tables.push(summary_table("summary.csv", &rep.pi_fit));
    out.tables.push(summary_table("variance_summary.csv", &rep.variance_trend));
    out.put_fit("", &rep.pi_fit);
    out.put("variance_slope", json!(rep.variance_slope));
    out.put("variance_loglog_slope", json!(rep.variance_trend.slope));
    out.put("variance_bound", json!(rep.variance_bound));
    let g = Observable::coboundary(&h, &map);
    let est = asymptotic_covariance(&map, &g, cfg.ensemble.lag_cap, cfg.ensemble.covariance_samples, cfg.seed, exec)?;
    out.put("d_hat_norm", json!(est.matrix.max_abs()));
    out.put("d_hat_se", json!(est.max_standard_error()));
    out.checks.push(Check::new(
        "telescoping-variance-bound",
        rep.bound_holds,
        format!("n·Var ≤ {} on every n", rep.variance_bound),
    ));
    Ok(out)
}

fn decorrelation<D: MapDriver, E: Executor>(cfg: &ExperimentConfig, driver: &D, f: &Observable, exec: &E) -> Res<Outcome> {
    let g = match cfg.observable.partner {
        Some(k) => torus_observable(k, f.dim_in(), cfg.observable.eta),
        None => f.clone(),
    };
    let p = decorrelation_profile(driver, f, &g, cfg.grid.n_max, cfg.ensemble.samples, cfg.seed, exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("profile.csv", &["lag", "cov_norm", "standard_error"]).with_chart(Chart {
        x: "lag",
        y: "cov_norm",
        group: None,
        log_x: false,
        log_y: true,
        title: "|Cov(f, g∘T^n)|".into(),
    });
    for i in 0..p.lags.len() {
        t.push(vec![p.lags[i].to_string(), num(p.cov_norms[i]), num(p.standard_errors[i])]);
    }
    out.tables.push(t);
    let mut fit = Table::new("fit.csv", &["delta", "poly_degree", "r2"]);
    if let Some(fv) = &p.fit {
        fit.push(vec![num(fv.delta), fv.poly_degree.to_string(), num(fv.r2)]);
        out.put("delta", json!(fv.delta));
        out.put("r2", json!(fv.r2));
    }
    out.put("fitted", json!(p.fit.is_some()));
    out.tables.push(fit);
    Ok(out)
}

fn clt_covariance<D: MapDriver, E: Executor>(cfg: &ExperimentConfig, driver: &D, f: &Observable, exec: &E) -> Res<Outcome> {
    let e = &cfg.ensemble;
    let series = asymptotic_covariance(driver, f, e.lag_cap, e.covariance_samples, cfg.seed, exec)?;
    let (emp, emp_se) = sum_covariance(driver, f, cfg.grid.n, e.samples, cfg.seed.wrapping_add(1), exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("covariance.csv", &["entry", "empirical", "empirical_se", "series", "series_se"]);
    let (a, b) = (matrix_entries(emp.matrix()), matrix_entries(series.matrix.matrix()));
    let (sa, sb) = (matrix_entries(&emp_se), matrix_entries(&series.standard_error));
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        t.push(vec![a[i].0.clone(), num(a[i].1), num(sa[i].1), num(b[i].1), num(sb[i].1)]);
        worst = worst.max((a[i].1 - b[i].1).abs());
    }
    out.tables.push(t);
    out.put("max_entry_gap", json!(worst));
    out.put("truncation_warning", json!(series.truncation_warning));
    Ok(out)
}

fn perturbed_system(kind: SystemKind) -> PerturbedSystem {
    match kind {
        SystemKind::Default => PerturbedSystem::default_cat(),
        SystemKind::Coupled => PerturbedSystem::coupled_cat(),
        SystemKind::Zero => PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
            o[0] = -x[0];
            o[1] = -x[1];
        })
        .with_jacobian(|_, _, o| o.copy_from_slice(&[-1.0, 0.0, 0.0, -1.0])),
    }
}

fn ensemble_config(cfg: &ExperimentConfig) -> EnsembleConfig {
    let mut ec = EnsembleConfig::new(cfg.grid.epsilon_grid.clone(), cfg.ensemble.ensemble, cfg.seed);
    ec.p_list = cfg.ensemble.p_list.clone();
    ec.t0 = cfg.system.t0;
    ec.substeps = cfg.system.substeps;
    ec
}

fn averaging_rate<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let sys = perturbed_system(cfg.system.kind);
    let avg = average_field(&sys, cfg.system.quadrature)?;
    let e = &cfg.ensemble;
    let mut rc = AveragingRateConfig::new(cfg.grid.epsilon_grid.clone(), e.ensemble, e.gaussian_m, cfg.seed);
    rc.s = cfg.system.s;
    rc.substeps = cfg.system.substeps;
    rc.sigma_n = e.sigma_n;
    rc.sigma_samples = e.sigma_samples;
    rc.lag_cap = e.lag_cap;
    rc.prokhorov_tol = e.prokhorov_tol;
    let rep = averaging_rate_experiment(&sys, &avg, &map, &cfg.system.x0, &rc, exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("rates.csv", &["epsilon", "pi_hat", "gaussian_m", "seed"])
        .with_chart(Chart::loglog("epsilon", "pi_hat", None, "Prokhorov distance of e_s/√ε from N(0, Σ_F²)"));
    for r in &rep.rows {
        t.push(vec![num(r.epsilon), num(r.pi_hat), e.gaussian_m.to_string(), cfg.seed.to_string()]);
    }
    out.tables.push(t);
    out.tables.push(summary_table("summary.csv", &rep.fit));
    let mut s = Table::new("sigma.csv", &["entry", "value"]);
    for (k, v) in matrix_entries(rep.sigma.matrix()) {
        s.push(vec![k, num(v)]);
    }
    out.tables.push(s);
    out.put_fit("", &rep.fit);
    out.put("expected_exponent", json!(rep.expected_exponent));
    out.put("degenerate", json!(rep.degenerate));
    out.put("pi_hat", json!(rep.rows.iter().map(|r| r.pi_hat).collect::<Vec<_>>()));
    out.put("floored", json!(rep.rows.iter().map(|r| r.floored).collect::<Vec<_>>()));
    Ok(out)
}

fn lp_scaling<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let sys = perturbed_system(cfg.system.kind);
    let avg = average_field(&sys, cfg.system.quadrature)?;
    let rep = sup_error_lp_scaling(&sys, &avg, &map, &cfg.system.x0, &ensemble_config(cfg), exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("scaling.csv", &["epsilon", "ensemble", "p", "lp_value"])
        .with_chart(Chart::loglog("epsilon", "lp_value", Some("p"), "‖sup_t |e_t|‖_{L^p}"));
    for s in &rep.stats {
        for (p, v) in &s.lp_values {
            t.push(vec![num(s.epsilon), s.samples.to_string(), num(*p), num(*v)]);
        }
    }
    out.tables.push(t);
    let mut raw = Table::new("summary.csv", &["p", "slope", "stderr", "r2"]);
    let mut norm = Table::new("summary_normalized.csv", &["p", "slope", "stderr", "r2"]);
    for f in &rep.fits {
        if let Some(r) = &f.raw {
            raw.push(vec![num(f.p), num(r.slope), num(r.stderr), num(r.r2)]);
            out.put_fit(&format!("p{}_", f.p), r);
        }
        if let Some(r) = &f.normalized {
            norm.push(vec![num(f.p), num(r.slope), num(r.stderr), num(r.r2)]);
            out.put(&format!("p{}_normalized_slope", f.p), json!(r.slope));
        }
    }
    out.tables.push(raw);
    out.tables.push(norm);
    let monotone = rep.stats.iter().all(|s| s.is_monotone());
    out.checks.push(Check::new("lp-monotone-in-p", monotone, "L^p norms of stored sups nondecreasing in p"));
    Ok(out)
}

fn gap<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let sys = perturbed_system(cfg.system.kind);
    let avg = average_field(&sys, cfg.system.quadrature)?;
    let rep = approximant_gap(&sys, &avg, &map, &cfg.system.x0, &ensemble_config(cfg), exec)?;
    let mut out = Outcome::new();
    let header = ["epsilon", "ensemble", "p", "lp_value"];
    let mut term = Table::new("gap.csv", &header)
        .with_chart(Chart::loglog("epsilon", "lp_value", Some("p"), "‖e_T/√ε − y_T‖_{L^p}"));
    let mut sup = Table::new("gap_sup.csv", &header)
        .with_chart(Chart::loglog("epsilon", "lp_value", Some("p"), "sup_t ‖e_t/√ε − y_t‖_{L^p}"));
    let n = cfg.ensemble.ensemble.to_string();
    for r in &rep.rows {
        term.push(vec![num(r.epsilon), n.clone(), num(r.p), num(r.terminal)]);
        sup.push(vec![num(r.epsilon), n.clone(), num(r.p), num(r.sup_over_t)]);
    }
    out.tables.push(term);
    out.tables.push(sup);
    let mut summary = Table::new("summary.csv", &["p", "slope", "stderr", "r2"]);
    for f in &rep.fits {
        if let Some(r) = &f.terminal {
            summary.push(vec![num(f.p), num(r.slope), num(r.stderr), num(r.r2)]);
            out.put_fit(&format!("p{}_", f.p), r);
        }
        if let Some(r) = &f.sup_over_t {
            out.put(&format!("p{}_sup_slope", f.p), json!(r.slope));
        }
    }
    out.tables.push(summary);
    out.put("max_gap", json!(rep.rows.iter().map(|r| r.sup_over_t).fold(0.0, f64::max)));
    Ok(out)
}

fn gronwall<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let sys = perturbed_system(cfg.system.kind);
    let avg = average_field(&sys, cfg.system.quadrature)?;
    let rows = gronwall_ensemble(&sys, &avg, &map, &cfg.system.x0, &ensemble_config(cfg), exec)?;
    let mut out = Outcome::new();
    let mut t = Table::new("gronwall.csv", &["epsilon", "trajectories", "passed", "min_forward_slack", "min_reverse_slack"]);
    let (mut total, mut passed) = (0, 0);
    let mut min_slack = f64::INFINITY;
    for r in &rows {
        t.push(vec![num(r.epsilon), r.trajectories.to_string(), r.passed.to_string(), num(r.min_forward_slack), num(r.min_reverse_slack)]);
        total += r.trajectories;
        passed += r.passed;
        min_slack = min_slack.min(r.min_forward_slack).min(r.min_reverse_slack);
    }
    out.tables.push(t);
    out.put("trajectories", json!(total));
    out.put("passed", json!(passed));
    out.put("min_slack", json!(min_slack));
    out.checks.push(Check::new("gronwall-pathwise", passed == total, format!("{passed} of {total} trajectories pass")));
    Ok(out)
}

fn sigma_consistency<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let map = toral(cfg)?;
    let sys = perturbed_system(cfg.system.kind);
    let avg = average_field(&sys, cfg.system.quadrature)?;
    let mut out = Outcome::new();
    let mut t = Table::new("sigma.csv", &["n", "entry", "sigma_f", "sigma_f_se", "direct", "direct_se"]);
    let mut c = Table::new("comparison.csv", &["n", "gap", "worst_ratio", "within_three_se"])
        .with_chart(Chart::loglog("n", "gap", None, "max |Σ_F(N) − Cov(y_1^{1/N})|"));
    for &n in &cfg.grid.sigma_n_grid {
        let mut sc = SigmaConfig::new(n, cfg.ensemble.samples, cfg.seed);
        sc.lag_cap = cfg.ensemble.lag_cap;
        let s = sigma_f(&sys, &avg, &map, &cfg.system.x0, &sc, exec)?;
        let (direct, dse) = direct_sigma(&sys, &avg, &map, &cfg.system.x0, n, cfg.ensemble.samples, cfg.seed.wrapping_add(1), exec)?;
        let cmp = compare_estimates(&s.raw, &s.standard_error, &direct, &dse);
        let (a, sa, b, sb) =
            (matrix_entries(&s.raw), matrix_entries(&s.standard_error), matrix_entries(&direct), matrix_entries(&dse));
        for i in 0..a.len() {
            t.push(vec![n.to_string(), a[i].0.clone(), num(a[i].1), num(sa[i].1), num(b[i].1), num(sb[i].1)]);
        }
        c.push(vec![n.to_string(), num(cmp.gap), num(cmp.worst_ratio), flag(cmp.within_three_se)]);
        out.put(&format!("gap_n{n}"), json!(cmp.gap));
        out.put(&format!("within_three_se_n{n}"), json!(cmp.within_three_se));
        out.put(&format!("max_abs_n{n}"), json!(max_abs(&s.raw)));
    }
    out.tables.push(t);
    out.tables.push(c);
    Ok(out)
}

/// The documented flow field `f(x, (ω, s)) = −x + (cos 2π(ω₁ + s/2), e^{−s} sin 2π(ω₁+ω₂))`.
pub fn default_flow_field(x: &[f64], w: &[f64], s: f64, o: &mut [f64]) {
    o[0] = -x[0] + (TAU * (w[0] + 0.5 * s)).cos();
    o[1] = -x[1] + (TAU * (w[0] + w[1])).sin() * (-s).exp();
}

fn special_flow<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Res<Outcome> {
    let flow = SpecialFlowSystem::cosine_roof(toral(cfg)?, cfg.driver.roof_amplitude)?;
    let red = special_flow_reduce(2, 1.0, 3.0, default_flow_field, &flow, cfg.system.s_nodes, cfg.system.quadrature)?;
    let g = special_flow_gap(
        &red,
        &cfg.system.x0,
        &cfg.grid.epsilon_grid,
        cfg.ensemble.ensemble,
        cfg.system.t0,
        cfg.system.substeps,
        cfg.seed,
        exec,
    )?;
    let mut out = Outcome::new();
    let mut t = Table::new("gap.csv", &["epsilon", "ensemble", "p", "lp_value"])
        .with_chart(Chart::loglog("epsilon", "lp_value", Some("p"), "special-flow reduction gap"));
    let n = cfg.ensemble.ensemble.to_string();
    for (eps, mean, max) in &g.rows {
        t.push(vec![num(*eps), n.clone(), num(1.0), num(*mean)]);
        t.push(vec![num(*eps), n.clone(), num(f64::INFINITY), num(*max)]);
    }
    out.tables.push(t);
    out.tables.push(summary_table("summary.csv", &g.fit));
    out.put_fit("", &g.fit);
    out.put("tau_mean", json!(red.tau_mean));
    Ok(out)
}
