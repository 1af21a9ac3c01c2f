use limitlab_core::clt::*;
use limitlab_core::driver::{IidDriver, MapDriver, Observable, ToralAutomorphism, TorusPoint};
use limitlab_core::linalg::{CovMatrix, Matrix};
use limitlab_core::metrics::{gaussian_sample, GaussianSpec};
use limitlab_core::stats::RateFit;
use limitlab_core::Sequential;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

#[test]
fn float_orbit_tracks_exact_rational_orbit() {
    let map = ToralAutomorphism::cat_map();
    let start = [BigRational::new(1.into(), 7.into()), BigRational::new(3.into(), 11.into())];
    let mut exact = start.clone();
    let mut x = TorusPoint::new(vec![1.0 / 7.0, 3.0 / 11.0]);
    let two = BigInt::from(2);
    for n in 1..=20 {
        exact = [frac(&(&exact[0] * &two + &exact[1])), frac(&(&exact[0] + &exact[1]))];
        x = map.step_point(&x);
        // Rounding errors grow like the expanding eigenvalue (3+√5)/2 per step.
        let allowed = 1e-15 * 2.62_f64.powi(n);
        for (e, f) in exact.iter().zip(x.coords()) {
            let gap = (e.to_f64().unwrap() - f).abs();
            assert!(gap.min(1.0 - gap) <= allowed, "step {n}: {gap}");
        }
    }
}

#[test]
fn cocycle_identity_is_exact_on_dyadic_points() {
    // Dyadic points and a dyadic-valued observable keep every operation exact.
    let map = ToralAutomorphism::cat_map();
    let f = Observable::coordinate(2, 0);
    let x = TorusPoint::new(vec![5.0 / 1024.0, 771.0 / 1024.0]);
    for (n, m) in [(0, 7), (3, 4), (10, 13), (25, 1)] {
        let whole = birkhoff_sum(&map, &f, n + m, &x);
        let mut y = x.clone();
        for _ in 0..n {
            y = map.step_point(&y);
        }
        let split: Vec<f64> = birkhoff_sum(&map, &f, n, &x)
            .iter()
            .zip(birkhoff_sum(&map, &f, m, &y))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(whole, split, "n={n} m={m}");
    }
    // Exact rational cross-check of the dyadic orbit.
    let mut e = [BigRational::new(5.into(), 1024.into()), BigRational::new(771.into(), 1024.into())];
    let mut total = BigRational::zero();
    for _ in 0..30 {
        total += &e[0];
        e = [frac(&(&e[0] + &e[0] + &e[1])), frac(&(&e[0] + &e[1]))];
    }
    assert_eq!(birkhoff_sum(&map, &f, 30, &x)[0], total.to_f64().unwrap());
    assert!(BigRational::one() > BigRational::zero());
}

#[test]
fn zero_observable_has_zero_covariance() {
    let est = asymptotic_covariance(&ToralAutomorphism::cat_map(), &Observable::zero(2, 2), 5, 200, 1, &Sequential).unwrap();
    assert_eq!(est.matrix.max_abs(), 0.0);
}

#[test]
fn uncentered_observable_rejected() {
    let r = asymptotic_covariance(&ToralAutomorphism::cat_map(), &Observable::coordinate(2, 0), 5, 200, 1, &Sequential);
    assert!(r.is_err());
}

#[test]
fn coboundary_has_vanishing_asymptotic_covariance() {
    let map = ToralAutomorphism::cat_map();
    let g = Observable::coboundary(&Observable::sin_first(2), &map);
    let est = asymptotic_covariance(&map, &g, 40, 1_000_000, 7, &Sequential).unwrap();
    assert!(est.matrix.max_abs() <= 0.02, "{:?} ± {}", est.matrix, est.max_standard_error());
}

#[test]
fn default_observable_covariance_matches_long_run_sums() {
    let map = ToralAutomorphism::cat_map();
    let f = Observable::default_pair();
    let series = asymptotic_covariance(&map, &f, DEFAULT_LAG_CAP, 1_000_000, 3, &Sequential).unwrap();
    let (long_run, _) = sum_covariance(&map, &f, 1 << 12, 20_000, 4, &Sequential).unwrap();
    let gap = (series.matrix.matrix() - long_run.matrix()).abs().max();
    assert!(gap <= 0.05, "gap {gap}");
    // Analytic value: all lag terms vanish and E[f⊗f] = I/2.
    assert!((series.matrix.matrix() - Matrix::identity(2, 2) * 0.5).abs().max() < 0.02);
}

#[test]
#[ignore = "several minutes; full-size long-run oracle"]
fn default_observable_covariance_matches_long_run_sums_full_size() {
    let map = ToralAutomorphism::cat_map();
    let f = Observable::default_pair();
    let series = asymptotic_covariance(&map, &f, DEFAULT_LAG_CAP, 100_000, 3, &Sequential).unwrap();
    let (long_run, _) = sum_covariance(&map, &f, 1 << 16, 100_000, 4, &Sequential).unwrap();
    assert!((series.matrix.matrix() - long_run.matrix()).abs().max() <= 0.05);
}

#[test]
fn congruence_under_orthogonal_maps() {
    let map = ToralAutomorphism::cat_map();
    let f = Observable::default_pair();
    let id = covariance_congruence_check(&map, &f, &Matrix::identity(2, 2), 10, 20_000, 5, &Sequential).unwrap();
    assert_eq!(id.discrepancy, 0.0);
    for a in [
        Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
    ] {
        let r = covariance_congruence_check(&map, &f, &a, 10, 20_000, 5, &Sequential).unwrap();
        assert!(r.discrepancy <= 2.0 * r.error_bound, "{} vs {}", r.discrepancy, r.error_bound);
    }
    let skew = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    assert!(covariance_congruence_check(&map, &f, &skew, 10, 200, 5, &Sequential).is_err());
}

#[test]
fn decorrelation_of_constant_has_no_fit() {
    let map = ToralAutomorphism::cat_map();
    let c = Observable::zero(2, 1);
    let p = decorrelation_profile(&map, &c, &Observable::cos_first(2), 8, 10_000, 1, &Sequential).unwrap();
    assert!(p.fit.is_none());
}

#[test]
fn decorrelation_of_trigonometric_coordinate_is_exactly_zero_after_lag_zero() {
    // cos 2πx₁∘T^n has frequency (Aᵀ)^n e₁ ≠ ±e₁, so every lagged covariance vanishes.
    let map = ToralAutomorphism::cat_map();
    let f = Observable::cos_first(2);
    let p = decorrelation_profile(&map, &f, &f, 8, 100_000, 2, &Sequential).unwrap();
    assert!((p.cov_norms[0] - 0.5).abs() < 0.01);
    for n in 1..=8 {
        assert!(p.cov_norms[n] <= 4.0 * p.standard_errors[n], "lag {n}");
    }
    assert!(p.fit.is_none());
}

#[test]
fn decorrelation_of_holder_cusp_decays_geometrically() {
    let map = ToralAutomorphism::cat_map();
    let f = Observable::cusp(2, 0.5);
    let p = decorrelation_profile(&map, &f, &f, 12, 1_000_000, 3, &Sequential).unwrap();
    let fit = p.fit.expect("cusp correlations should clear the noise");
    assert!(fit.delta < 1.0 && fit.r2 >= 0.9, "{fit:?}");
}

#[test]
fn iid_surrogate_decorrelates_immediately() {
    let d = IidDriver::new(2);
    let f = Observable::default_pair();
    let p = decorrelation_profile(&d, &f, &f, 6, 50_000, 4, &Sequential).unwrap();
    for n in 1..=6 {
        assert!(p.cov_norms[n] <= 4.0 * p.standard_errors[n], "lag {n}: {}", p.cov_norms[n]);
    }
}

#[test]
fn zero_observable_rate_experiment_is_degenerate_and_exact() {
    let map = ToralAutomorphism::cat_map();
    let cfg = CltRateConfig::new(vec![4, 8, 16], 200, 1000, 9);
    let rep = clt_rate_experiment(&map, &Observable::zero(2, 2), &cfg, &Sequential).unwrap();
    assert!(rep.degenerate);
    assert!(rep.rows.iter().all(|r| r.pi_hat == 0.0 && r.floored));
    let mut strict = cfg.clone();
    strict.mode = DegeneracyMode::Strict;
    assert!(clt_rate_experiment(&map, &Observable::zero(2, 2), &strict, &Sequential).is_err());
}

#[test]
fn rate_experiment_rejects_bad_grid() {
    let map = ToralAutomorphism::cat_map();
    let cfg = CltRateConfig::new(vec![4, 4, 16], 10, 10, 9);
    assert!(clt_rate_experiment(&map, &Observable::default_pair(), &cfg, &Sequential).is_err());
}

#[test]
fn coboundary_experiment() {
    let map = ToralAutomorphism::cat_map();
    let grid: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let zero = coboundary_degenerate_experiment(&map, &Observable::zero(2, 1).with_sup_bound(0.0), &grid, 500, 1, &Sequential)
        .unwrap();
    assert!(zero.rows.iter().all(|r| r.n_variance == 0.0 && r.pi_hat == 0.0));

    let rep = coboundary_degenerate_experiment(&map, &Observable::sin_first(2), &grid, 20_000, 2, &Sequential).unwrap();
    assert!(rep.bound_holds);
    assert!(rep.variance_slope.abs() <= 0.1, "linear slope {}", rep.variance_slope);
    assert!(rep.variance_trend.slope.abs() <= 0.1, "log-log slope {}", rep.variance_trend.slope);
    assert!(rep.pi_fit.slope <= -0.25, "Π slope {}", rep.pi_fit.slope);
}

#[test]
fn char_discrepancy_basics() {
    let s = gaussian_sample(&GaussianSpec::standard(2), 1000, 1).unwrap();
    let sigma = CovMatrix::identity(2);
    let zero = char_discrepancy(&s, &sigma, &[0.0, 0.0]).unwrap();
    assert_eq!((zero.re, zero.im), (0.0, 0.0));
    let a = char_discrepancy(&s, &sigma, &[0.7, -1.3]).unwrap();
    let b = char_discrepancy(&s, &sigma, &[-0.7, 1.3]).unwrap();
    assert_eq!(a, b.conj());
}

#[test]
fn char_discrepancy_of_gaussian_sample_is_small() {
    let n = 100_000;
    let s = gaussian_sample(&GaussianSpec::standard(2), n, 2).unwrap();
    let sigma = CovMatrix::identity(2);
    for i in 0..5 {
        for j in 0..5 {
            let t = [-2.0 + i as f64, -2.0 + j as f64];
            let h = char_discrepancy(&s, &sigma, &t).unwrap();
            let h = h.re.hypot(h.im);
            assert!(h <= 5.0 / (n as f64).sqrt(), "t={t:?}: {h}");
        }
    }
}

#[test]
fn yurinskii_integral_diagnostics() {
    let sigma = CovMatrix::identity(2);
    let s = gaussian_sample(&GaussianSpec::standard(2), 1000, 3).unwrap();
    assert!(yurinskii_integral(&s, &sigma, 2.0, None, 7).is_err());
    // The integration domain has side 2U, so the value shrinks linearly in U.
    let shrinking: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&u| yurinskii_integral(&s, &sigma, u, None, 8).unwrap())
        .collect();
    assert!(shrinking.windows(2).all(|w| w[1] < 0.2 * w[0]), "{shrinking:?}");
    assert!(shrinking[2] < 1e-3);

    let ns = [1_000usize, 10_000, 100_000];
    let values: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let s = gaussian_sample(&GaussianSpec::standard(2), n, 4).unwrap();
            yurinskii_integral(&s, &sigma, 2.0, None, 12).unwrap()
        })
        .collect();
    let fit = RateFit::loglog(&ns.map(|n| n as f64), &values).unwrap();
    assert!((-0.7..=-0.3).contains(&fit.slope), "{values:?} slope {}", fit.slope);
}

#[test]
fn driver_states_round_trip() {
    let map = ToralAutomorphism::cat_map();
    let s = map.state_from_coords(&[0.25, 0.5]);
    assert_eq!(map.coords(&s), &[0.25, 0.5]);
}
