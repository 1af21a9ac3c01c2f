//! Least-squares rate fits and small sample statistics.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Ordinary least-squares fit of `log metric` on `log scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    /// `(log x, log y)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

impl RateFit {
    /// Fits `y ≈ intercept + slope·x` on already-transformed coordinates.
    pub fn ols(points: Vec<(f64, f64)>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(invalid("a rate fit needs at least 3 points"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(invalid("non-finite point in rate fit"));
        }
        let nf = n as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
        if sxx <= 0.0 {
            return Err(invalid("rate fit abscissae are all equal"));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = points
            .iter()
            .map(|p| {
                let r = p.1 - intercept - slope * p.0;
                r * r
            })
            .sum();
        let stderr = libm::sqrt((sse / (nf - 2.0)) / sxx);
        let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
        Ok(Self { slope, intercept, stderr, r2, points })
    }

    /// Fits `log y` against `log x`.
    pub fn loglog(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(invalid("rate fit inputs differ in length"));
        }
        if xs.iter().chain(ys).any(|v| *v <= 0.0) {
            return Err(invalid("log-log fit needs positive values"));
        }
        Self::ols(xs.iter().zip(ys).map(|(x, y)| (libm::log(*x), libm::log(*y))).collect())
    }
}

/// Number of strict increases in a sequence that should be decreasing.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] >= w[0]).count()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// `(mean |x|^p)^(1/p)`.
pub fn lp_norm(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let s = xs.iter().map(|x| libm::pow(libm::fabs(*x), p)).sum::<f64>() / xs.len() as f64;
    libm::pow(s, 1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_power_law_is_recovered() {
        let xs = [16.0, 32.0, 64.0, 128.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * libm::pow(*x, -0.5)).collect();
        let fit = RateFit::loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - libm::log(3.0)).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(RateFit::ols(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn lp_norms_increase_with_p() {
        let xs = [0.1, 0.5, 2.0, 0.3];
        assert!(lp_norm(&xs, 1.0) <= lp_norm(&xs, 2.0));
        assert!(lp_norm(&xs, 2.0) <= lp_norm(&xs, 4.0));
    }

    #[test]
    fn inversion_count() {
        assert_eq!(inversions(&[5.0, 4.0, 4.5, 3.0]), 1);
        assert_eq!(inversions(&[3.0, 2.0, 1.0]), 0);
    }
}
