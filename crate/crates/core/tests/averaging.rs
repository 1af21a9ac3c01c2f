use std::f64::consts::TAU;

use limitlab_core::averaging::*;
use limitlab_core::driver::{MapDriver, Observable, SpecialFlowSystem, ToralAutomorphism, TorusPoint};
use limitlab_core::linalg::symmetric_eigenvalues;
use limitlab_core::stats::{inversions, RateFit};
use limitlab_core::Sequential;

const X0: [f64; 2] = [1.0, -0.5];

/// Cat-map orbit of a dyadic point, computed in exact integer arithmetic.
fn dyadic_orbit(num: [i64; 2], den: i64, n: usize) -> Vec<[f64; 2]> {
    let mut p = num;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push([p[0] as f64 / den as f64, p[1] as f64 / den as f64]);
        p = [(2 * p[0] + p[1]).rem_euclid(den), (p[0] + p[1]).rem_euclid(den)];
    }
    out
}

fn forcing(w: &[f64]) -> [f64; 2] {
    [(TAU * w[0]).cos(), (TAU * (w[0] + w[1])).sin()]
}

fn omegas(k: usize) -> Vec<TorusPoint> {
    (0..k).map(|i| TorusPoint::new(vec![(i as f64 * 0.618_034 + 0.1) % 1.0, (i as f64 * 0.414_214 + 0.3) % 1.0])).collect()
}

#[test]
fn averaged_field_examples() {
    let indep = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = x[1].sin();
        o[1] = -x[0];
    });
    let avg = average_field(&indep, 16).unwrap();
    let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
    avg.eval(&[0.3, 1.1], &mut a);
    indep.eval(&[0.3, 1.1], &[0.77, 0.12], &mut b);
    // Equal up to the rounding of summing identical quadrature terms.
    assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);

    let pure = PerturbedSystem::new(2, 2, 0.0, 1.0, |_, w, o| {
        o[0] = (TAU * w[0]).cos();
        o[1] = (TAU * w[1]).cos();
    });
    average_field(&pure, 8).unwrap().eval(&[2.0, -1.0], &mut a);
    assert!(a[0].abs() < 1e-15 && a[1].abs() < 1e-15);

    let sine = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, w, o| {
        o[0] = -x[0] + (TAU * w[0]).sin();
        o[1] = -x[1];
    });
    average_field(&sine, 64).unwrap().eval(&[0.4, -0.9], &mut a);
    assert!((a[0] + 0.4).abs() < 1e-13 && (a[1] - 0.9).abs() < 1e-13);
    assert!(average_field(&sine, 3).is_err());
}

#[test]
fn declared_bounds_hold_for_shipped_systems() {
    for sys in [PerturbedSystem::default_cat(), PerturbedSystem::coupled_cat()] {
        let (lip, sup) = sys.check_declared_bounds(4000, 3).unwrap();
        assert!(lip <= sys.lipschitz() && sup <= sys.sup());
    }
}

#[test]
fn omega_independent_field_has_zero_error() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0] + 0.5 * x[1].sin();
        o[1] = -0.3 * x[1];
    });
    let avg = average_field(&sys, 8).unwrap();
    let w = integrate_averaged(&avg, &X0, 1.0, 1.0 / 64.0).unwrap();
    for omega in omegas(3) {
        let x = integrate_perturbed(&sys, &cat, &X0, 1.0 / 32.0, 1.0, 8, &omega).unwrap();
        let e = error_process(&x, &w).unwrap();
        assert!(e.sup_norm() < 1e-8, "{}", e.sup_norm());
        let v = v_process(&sys, &avg, &cat, &X0, 1.0 / 32.0, 1.0, &omega).unwrap();
        assert!(v.sup_norm() < 1e-12);
        let y = y_process(&sys, &avg, &cat, &X0, 1.0 / 32.0, 1.0, &omega).unwrap();
        assert!(y.sup_norm() < 1e-12);
    }
}

#[test]
fn linear_decay_matches_exponential() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0];
        o[1] = -x[1];
    });
    let x = integrate_perturbed(&sys, &cat, &X0, 1.0 / 16.0, 1.0, 64, &omegas(1)[0]).unwrap();
    for (i, t) in x.times().iter().enumerate() {
        assert!((x.state(i)[0] - (-t).exp()).abs() < 1e-8);
        assert!((x.state(i)[1] + 0.5 * (-t).exp()).abs() < 1e-8);
    }
}

#[test]
fn piecewise_constant_forcing_is_an_exact_birkhoff_sum() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 0.0, 1.0, |_, w, o| o.copy_from_slice(&forcing(w)));
    let avg = average_field(&sys, 64).unwrap();
    let (num, den) = ([37, 901], 1024);
    let omega = cat.state_from_coords(&[num[0] as f64 / den as f64, num[1] as f64 / den as f64]);

    // Integral time grid: ε = 1/16, T0 = 1.
    let eps = 1.0 / 16.0;
    let orbit = dyadic_orbit(num, den, 16);
    let x = integrate_perturbed(&sys, &cat, &X0, eps, 1.0, 4, &omega).unwrap();
    let mut expect = X0;
    for (k, w) in orbit.iter().enumerate() {
        let g = forcing(w);
        expect = [expect[0] + eps * g[0], expect[1] + eps * g[1]];
        let got = x.state(4 * (k + 1));
        assert!((got[0] - expect[0]).abs() < 1e-13 && (got[1] - expect[1]).abs() < 1e-13, "kink {k}");
    }
    // v at t = Nε is √ε times the centered Birkhoff sum (the mean of the forcing is 0).
    let v = v_process(&sys, &avg, &cat, &X0, eps, 1.0, &omega).unwrap();
    assert_eq!(v.state(0), &[0.0, 0.0]);
    let sum = orbit.iter().fold([0.0; 2], |s, w| {
        let g = forcing(w);
        [s[0] + g[0], s[1] + g[1]]
    });
    let vf = v.final_state();
    assert!((vf[0] - eps.sqrt() * sum[0]).abs() < 1e-12 && (vf[1] - eps.sqrt() * sum[1]).abs() < 1e-12);
    // DF̄ ≡ 0, so y = v.
    let y = y_process(&sys, &avg, &cat, &X0, eps, 1.0, &omega).unwrap();
    for (a, b) in y.states().iter().zip(v.states()) {
        assert!((a - b).abs() < 1e-12);
    }

    // Non-integral horizon: three whole intervals of 0.3 plus a partial 0.1.
    let x = integrate_perturbed(&sys, &cat, &X0, 0.3, 1.0, 8, &omega).unwrap();
    let orbit = dyadic_orbit(num, den, 4);
    let mut expect = X0;
    for (k, w) in orbit.iter().enumerate() {
        let len = if k < 3 { 0.3 } else { 0.1 };
        let g = forcing(w);
        expect = [expect[0] + len * g[0], expect[1] + len * g[1]];
    }
    assert!((x.end_time() - 1.0).abs() < 1e-15);
    let got = x.final_state();
    assert!((got[0] - expect[0]).abs() < 1e-13 && (got[1] - expect[1]).abs() < 1e-13);
}

#[test]
fn coarse_grid_is_rejected_when_epsilon_exceeds_horizon() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    assert!(integrate_perturbed(&sys, &cat, &X0, 2.0, 1.0, 2, &omegas(1)[0]).is_err());
    assert!(integrate_perturbed(&sys, &cat, &X0, 2.0, 1.0, 4, &omegas(1)[0]).is_ok());
}

#[test]
fn scalar_response_matches_variation_of_constants() {
    let a = -0.7;
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(1, 2, 0.7, 2.0, move |x, w, o| o[0] = a * x[0] + (TAU * w[0]).cos());
    let avg = average_field(&sys, 64).unwrap();
    let (num, den) = ([411, 95], 1024);
    let omega = cat.state_from_coords(&[num[0] as f64 / den as f64, num[1] as f64 / den as f64]);
    for n in [16usize, 64] {
        let eps = 1.0 / n as f64;
        let y = y_process(&sys, &avg, &cat, &[0.8], eps, 1.0, &omega).unwrap();
        // y_1 = ε^{-1/2} Σ_k g_k ∫_{kε}^{(k+1)ε} e^{a(1−s)} ds.
        let oracle: f64 = dyadic_orbit(num, den, n)
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let (s0, s1) = (k as f64 * eps, (k + 1) as f64 * eps);
                (TAU * w[0]).cos() * ((a * (1.0 - s0)).exp() - (a * (1.0 - s1)).exp()) / a
            })
            .sum::<f64>()
            / eps.sqrt();
        let got = y.final_state()[0];
        assert!((got - oracle).abs() < 1e-6, "n={n}: {got} vs {oracle}");
    }
}

#[test]
fn kink_discipline_is_converged_at_sixteen_substeps() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    for eps in [1.0 / 16.0, 1.0 / 128.0] {
        for omega in omegas(4) {
            let diff = substep_sensitivity(&sys, &cat, &X0, eps, 1.0, 16, 64, &omega).unwrap();
            assert!(diff < 1e-6, "ε={eps}: {diff:e}");
        }
    }
}

#[test]
fn non_commuting_jacobians_separate_exponential_from_fundamental_matrix() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 1.5, 4.0, |x, w, o| {
        let g = forcing(w);
        o[0] = -x[0] + 0.8 * x[1].sin() + g[0];
        o[1] = -0.5 * x[1] + 0.6 * x[0].cos() + g[1];
    });
    let avg = average_field(&sys, 32).unwrap();
    let path = MeanPath::new(&avg, &[1.5, -1.0], KinkGrid::new(1.0 / 64.0, 1.0, 8).unwrap()).unwrap();
    let disc = path.exponential_discrepancy();
    println!("max |Φ − exp(∫DF̄)| on the non-commuting example: {disc:.3e}");
    assert!(disc > 1e-3, "{disc:e}");
    // The fundamental matrix is the one that satisfies the integral equation.
    for omega in omegas(3) {
        let f = fluctuations(&sys, &path, &cat, &omega, true).unwrap();
        assert!(f.residual <= RESIDUAL_TOL, "{:e}", f.residual);
    }
}

#[test]
fn gronwall_bounds_hold() {
    let cat = ToralAutomorphism::cat_map();
    let indep = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0];
        o[1] = -x[1];
    });
    let avg = average_field(&indep, 8).unwrap();
    let path = MeanPath::new(&avg, &X0, KinkGrid::new(1.0 / 32.0, 1.0, 8).unwrap()).unwrap();
    let omega = &omegas(1)[0];
    let x = integrate_on_grid(&indep, &cat, &X0, path.grid(), omega).unwrap();
    let r = gronwall_check(&indep, &path, &x, &cat, omega).unwrap();
    assert!(r.pass && r.sup_error < 1e-8 && r.sup_integral < 1e-12);

    let sys = PerturbedSystem::default_cat();
    let avg = average_field(&sys, 64).unwrap();
    let cfg = EnsembleConfig::new(vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0], 100, 5);
    for s in gronwall_ensemble(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap() {
        assert_eq!(s.passed, s.trajectories);
        assert!(s.min_forward_slack >= -GRONWALL_SLACK && s.min_reverse_slack >= -GRONWALL_SLACK);
    }
}

#[test]
fn sup_error_shrinks_and_lp_norms_are_monotone() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    let avg = average_field(&sys, 64).unwrap();
    let mut cfg = EnsembleConfig::new((4..=10).map(|k| 2f64.powi(-k)).collect(), 200, 21);
    cfg.p_list = vec![1.0, 2.0, 4.0];
    cfg.substeps = 4;
    let r = sup_error_lp_scaling(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    assert!(r.stats.iter().all(EnsembleStat::is_monotone));
    let l2: Vec<f64> = r.stats.iter().map(|s| s.lp_values[1].1).collect();
    assert!(inversions(&l2) <= 1, "{l2:?}");
    let slope = r.fits[1].raw.as_ref().unwrap().slope;
    assert!((0.3..=0.7).contains(&slope), "{slope}");

    let zero = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0];
        o[1] = -x[1];
    });
    let avg = average_field(&zero, 8).unwrap();
    cfg.eps_grid.truncate(4);
    cfg.ensemble = 20;
    let r = sup_error_lp_scaling(&zero, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    assert!(r.stats.iter().all(|s| s.sups.iter().all(|v| *v < 1e-8)));
}

#[test]
fn ensemble_stat_monotonicity_is_checked_on_stored_sups() {
    let s = EnsembleStat::from_sups(0.1, 1, vec![0.1, 0.4, 0.2, 0.9], &[4.0, 1.0, 2.0, 8.0]);
    assert!(s.is_monotone());
    let mut bad = s.clone();
    bad.lp_values[0].1 = 0.0;
    assert!(!bad.is_monotone());
}

#[test]
fn approximant_gap_examples() {
    let cat = ToralAutomorphism::cat_map();
    let indep = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0] + 0.3 * x[1].cos();
        o[1] = -x[1];
    });
    let avg = average_field(&indep, 8).unwrap();
    let cfg = EnsembleConfig::new(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 100, 4);
    let r = approximant_gap(&indep, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    assert!(r.rows.iter().all(|row| row.sup_over_t < 1e-6), "{:?}", r.rows);

    let mut small = cfg.clone();
    small.ensemble = 99;
    assert!(approximant_gap(&indep, &avg, &cat, &X0, &small, &Sequential).is_err());

    // State-dependent fluctuations: p = 2 and p = 4 exponents agree.
    let sys = PerturbedSystem::coupled_cat();
    let avg = average_field(&sys, 64).unwrap();
    let mut cfg = EnsembleConfig::new((4..=8).map(|k| 2f64.powi(-k)).collect(), 200, 4);
    cfg.p_list = vec![2.0, 4.0];
    cfg.substeps = 4;
    let r = approximant_gap(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    let s2 = r.fits[0].terminal.as_ref().unwrap().slope;
    let s4 = r.fits[1].terminal.as_ref().unwrap().slope;
    assert!(s2 >= 0.3 && (s2 - s4).abs() <= 0.2, "{s2} {s4}");
}

#[test]
fn linear_fields_have_no_linearisation_gap() {
    // With F = −x + g(ω) the error process is exactly linear, so e/√ε = y up to rounding.
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    let avg = average_field(&sys, 64).unwrap();
    let cfg = EnsembleConfig::new(vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0], 100, 9);
    let r = approximant_gap(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    assert!(r.rows.iter().all(|row| row.sup_over_t < 1e-7), "{:?}", r.rows);
}

#[test]
fn sigma_of_zero_fluctuation_is_zero() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0];
        o[1] = 0.2 * x[0] - x[1];
    });
    let avg = average_field(&sys, 8).unwrap();
    let s = sigma_f(&sys, &avg, &cat, &X0, &SigmaConfig::new(16, 200, 1), &Sequential).unwrap();
    assert!(s.matrix.max_abs() == 0.0);
}

/// `Σ_F = ∫_0^1 e^{−2(1−u)} ½ diag(a₁(w_u)², a₂(w_u)²) du` for the coupled system: the
/// forcing components are uncorrelated at every lag under the cat map and have variance ½.
fn coupled_sigma_oracle(x0: [f64; 2]) -> [f64; 2] {
    let panels = 2000;
    let mut acc = [0.0; 2];
    for j in 0..=panels {
        let u = j as f64 / panels as f64;
        let wt = if j == 0 || j == panels { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
        let w = [x0[0] * (-u).exp(), x0[1] * (-u).exp()];
        let k = (-2.0 * (1.0 - u)).exp() * 0.5;
        acc[0] += wt * k * (1.0 + 0.5 * w[1].sin()).powi(2);
        acc[1] += wt * k * (1.0 + 0.5 * w[0].cos()).powi(2);
    }
    [acc[0] / (3.0 * panels as f64), acc[1] / (3.0 * panels as f64)]
}

#[test]
fn sigma_matches_analytic_and_direct_covariance() {
    let cat = ToralAutomorphism::cat_map();
    let default_limit = (1.0 - (-2.0f64).exp()) / 4.0;
    for (sys, oracle) in [
        (PerturbedSystem::default_cat(), [default_limit, default_limit]),
        (PerturbedSystem::coupled_cat(), coupled_sigma_oracle(X0)),
    ] {
        let avg = average_field(&sys, 64).unwrap();
        let s = sigma_f(&sys, &avg, &cat, &X0, &SigmaConfig::new(64, 3000, 17), &Sequential).unwrap();
        assert!(symmetric_eigenvalues(s.matrix.matrix())[0] >= 0.0);
        for (i, want) in oracle.iter().enumerate() {
            let (got, se) = (s.raw[(i, i)], s.standard_error[(i, i)]);
            assert!((got - want).abs() <= 4.0 * se + 2e-3, "{i}: {got} vs {want} (se {se})");
        }
        assert!(s.raw[(0, 1)].abs() <= 4.0 * s.standard_error[(0, 1)]);
        let (direct, dse) = direct_sigma(&sys, &avg, &cat, &X0, 64, 3000, 18, &Sequential).unwrap();
        let cmp = compare_estimates(&s.raw, &s.standard_error, &direct, &dse);
        assert!(cmp.within_three_se, "{cmp:?}");
    }
}

#[test]
fn reciprocal_rounding_of_epsilon_is_order_root_epsilon() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    let avg = average_field(&sys, 64).unwrap();
    let cfg = EnsembleConfig::new(vec![1.0], 64, 13);
    let eps: Vec<f64> = (4..=9).map(|k| 1.0 / (2f64.powi(k) + 0.5)).collect();
    let gaps: Vec<f64> = eps
        .iter()
        .map(|e| reciprocal_rounding_gap(&sys, &avg, &cat, &X0, *e, &cfg, &Sequential).unwrap())
        .collect();
    let fit = RateFit::loglog(&eps, &gaps).unwrap();
    assert!(fit.slope >= 0.4, "{gaps:?} slope {}", fit.slope);
}

#[test]
fn rate_experiment_without_fluctuation_gives_zero_distances() {
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, _, o| {
        o[0] = -x[0];
        o[1] = -x[1];
    });
    let avg = average_field(&sys, 8).unwrap();
    let mut cfg = AveragingRateConfig::new(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 50, 500, 2);
    cfg.sigma_n = 16;
    cfg.sigma_samples = 100;
    let r = averaging_rate_experiment(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    assert!(r.degenerate);
    // Both laws are δ_0 up to the gap between the two integrators.
    assert!(r.rows.iter().all(|row| row.pi_hat < 1e-8), "{:?}", r.rows);
}

#[test]
fn rate_experiment_rescales_time() {
    // At s = ½ the limit covariance of the default system is (1 − e^{−1})/4 per axis.
    let cat = ToralAutomorphism::cat_map();
    let sys = PerturbedSystem::default_cat();
    let avg = average_field(&sys, 64).unwrap();
    let mut cfg = AveragingRateConfig::new(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 100, 10_000, 3);
    cfg.s = 0.5;
    cfg.sigma_n = 64;
    cfg.sigma_samples = 3000;
    let r = averaging_rate_experiment(&sys, &avg, &cat, &X0, &cfg, &Sequential).unwrap();
    let expect = (1.0 - (-1.0f64).exp()) / 4.0;
    for i in 0..2 {
        assert!((r.sigma.matrix()[(i, i)] - expect).abs() < 0.015, "{}", r.sigma.matrix());
    }
    assert!(r.rows.iter().all(|row| row.pi_hat > 0.0 && row.pi_hat < 0.5));
}

fn flow_field(x: &[f64], w: &[f64], s: f64, o: &mut [f64]) {
    o[0] = -x[0] + (TAU * (w[0] + 0.5 * s)).cos();
    o[1] = -x[1] + (TAU * (w[0] + w[1])).sin() * (-s).exp();
}

#[test]
fn unit_roof_reduction_is_the_time_one_flow_integral() {
    let cat = ToralAutomorphism::cat_map();
    let unit = SpecialFlowSystem::new(cat, Observable::constant(2, vec![1.0]), 1.0, 1.0).unwrap();
    let red = special_flow_reduce(2, 1.0, 3.0, flow_field, &unit, 16, 32).unwrap();
    assert!((red.tau_mean - 1.0).abs() < 1e-14);
    for omega in omegas(5) {
        let gap = flow_stopped_reference(&red, &[0.4, -0.2], &omega, 20_000).unwrap();
        assert!(gap < 1e-8, "{gap:e}");
    }
}

#[test]
fn height_independent_field_reduces_to_roof_times_field() {
    let cat = ToralAutomorphism::cat_map();
    let flow = SpecialFlowSystem::cosine_roof(cat, 0.3).unwrap();
    let f = |x: &[f64], w: &[f64], o: &mut [f64]| {
        o[0] = -x[0] + (TAU * w[0]).cos();
        o[1] = -x[1] + (TAU * w[1]).sin();
    };
    let red = special_flow_reduce(2, 1.0, 3.0, move |x, w, _, o| f(x, w, o), &flow, 8, 64).unwrap();
    assert!((red.tau_mean - 1.0).abs() < 1e-12);
    let x = [0.7, -1.2];
    // f̄ = ∫τ f dν / ∫τ dν = (−x₁ + 0.15, −x₂).
    let fbar = [-x[0] + 0.15, -x[1]];
    let mut got = [0.0; 2];
    red.flow_mean.eval(&x, &mut got);
    assert!((got[0] - fbar[0]).abs() < 1e-12 && (got[1] - fbar[1]).abs() < 1e-12);
    for omega in omegas(6) {
        let w = omega.coords();
        let tau = 1.0 + 0.3 * (TAU * w[0]).cos();
        let mut fx = [0.0; 2];
        f(&x, w, &mut fx);
        let (mut big_f, mut h) = ([0.0; 2], [0.0; 2]);
        red.system.eval(&x, w, &mut big_f);
        red.h.eval(&x, w, &mut h);
        for i in 0..2 {
            assert!((big_f[i] - tau * fx[i]).abs() < 1e-12);
            assert!((h[i] - tau * (fx[i] - fbar[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn special_flow_gap_is_order_epsilon() {
    let flow = SpecialFlowSystem::cosine_roof(ToralAutomorphism::cat_map(), 0.3).unwrap();
    let red = special_flow_reduce(2, 1.0, 3.0, flow_field, &flow, 16, 64).unwrap();
    let eps: Vec<f64> = (4..=7).map(|k| 2f64.powi(-k)).collect();
    let g = special_flow_gap(&red, &X0, &eps, 40, 1.0, 4, 8, &Sequential).unwrap();
    assert!(g.fit.slope >= 0.8, "{:?}", g.rows);
}
