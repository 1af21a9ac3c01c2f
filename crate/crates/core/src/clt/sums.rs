use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::driver::{MapDriver, Observable};
use crate::error::{invalid, Result};

/// Largest admissible `|E f|_∞` for observables that must be centered.
pub const CENTERING_TOL: f64 = 1e-8;

/// `S_n(f)(ω) = Σ_{k<n} f(T^k ω)`.
pub fn birkhoff_sum<D: MapDriver>(driver: &D, f: &Observable, n: usize, start: &D::State) -> Vec<f64> {
    birkhoff_sums_at(driver, f, &[n], start).pop().unwrap()
}

/// `S_n(f)(ω)` for every `n` in the nondecreasing list `ns`, along one orbit.
pub fn birkhoff_sums_at<D: MapDriver>(driver: &D, f: &Observable, ns: &[usize], start: &D::State) -> Vec<Vec<f64>> {
    debug_assert!(ns.windows(2).all(|w| w[0] <= w[1]));
    let mut out = Vec::with_capacity(ns.len());
    let mut acc = vec![0.0; f.dim_out()];
    let mut val = vec![0.0; f.dim_out()];
    let mut state = start.clone();
    let mut k = 0;
    for &n in ns {
        while k < n {
            if k > 0 {
                driver.advance(&mut state);
            }
            f.eval_into(driver.coords(&state), &mut val);
            for (a, v) in acc.iter_mut().zip(&val) {
                *a += v;
            }
            k += 1;
        }
        out.push(acc.clone());
    }
    out
}

/// Lebesgue mean of `f` by the midpoint rule on a `points^d` tensor grid (exact for
/// trigonometric polynomials of degree below `points`).
pub fn lebesgue_mean(f: &Observable, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(invalid("quadrature needs at least two points per dimension"));
    }
    let d = f.dim_in();
    let total = points
        .checked_pow(d as u32)
        .filter(|t| *t <= 1 << 26)
        .ok_or_else(|| invalid("quadrature grid too large"))?;
    let mut sum = vec![0.0; f.dim_out()];
    let mut x = vec![0.0; d];
    let mut val = vec![0.0; f.dim_out()];
    for idx in 0..total {
        let mut r = idx;
        for c in x.iter_mut() {
            *c = ((r % points) as f64 + 0.5) / points as f64;
            r /= points;
        }
        f.eval_into(&x, &mut val);
        for (s, v) in sum.iter_mut().zip(&val) {
            *s += v;
        }
    }
    Ok(sum.into_iter().map(|s| s / total as f64).collect())
}

/// `f − E f` together with the subtracted mean.
pub fn center_observable(f: &Observable, quadrature_points: usize) -> Result<(Observable, Vec<f64>)> {
    let mean = lebesgue_mean(f, quadrature_points)?;
    Ok((f.shifted(&mean), mean))
}

/// Fails unless the quadrature mean of `f` is within [`CENTERING_TOL`] of zero.
pub fn check_centered(f: &Observable) -> Result<()> {
    let points = match f.dim_in() {
        1 => 4096,
        2 => 256,
        3 => 40,
        4 => 16,
        _ => 6,
    };
    let mean = lebesgue_mean(f, points)?;
    let worst = mean.iter().fold(0.0_f64, |a, m| a.max(libm::fabs(*m)));
    if worst > CENTERING_TOL {
        return Err(invalid(alloc::format!("observable is not centered (|mean| = {worst:.3e})")));
    }
    Ok(())
}

/// Standardized summands for the independence surrogate, as observables on `[0,1)^k`.
///
/// All have mean zero and identity covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IidSummand {
    /// Box–Muller normals; consumes two uniforms per output coordinate.
    Gaussian,
    /// Independent ±1 signs.
    Rademacher,
    /// `E − 1` with `E` standard exponential.
    Exponential,
    /// `(B − p)/√(p(1−p))` with `B` Bernoulli(`p`), independent per coordinate.
    Bernoulli(f64),
}

impl IidSummand {
    pub fn input_dim(self, d: usize) -> usize {
        match self {
            IidSummand::Gaussian => 2 * d,
            _ => d,
        }
    }

    pub fn observable(self, d: usize) -> Observable {
        let k = self.input_dim(d);
        match self {
            IidSummand::Gaussian => Observable::new(k, d, 1.0, |x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    let u = 1.0 - x[2 * i];
                    *o = libm::sqrt(-2.0 * libm::log(u)) * libm::cos(TAU * x[2 * i + 1]);
                }
            }),
            IidSummand::Rademacher => Observable::new(k, d, 1.0, |x, out| {
                for (o, u) in out.iter_mut().zip(x) {
                    *o = if *u < 0.5 { -1.0 } else { 1.0 };
                }
            })
            .with_sup_bound(1.0),
            IidSummand::Exponential => Observable::new(k, d, 1.0, |x, out| {
                for (o, u) in out.iter_mut().zip(x) {
                    *o = -libm::log(1.0 - u) - 1.0;
                }
            }),
            IidSummand::Bernoulli(p) => {
                let sd = libm::sqrt(p * (1.0 - p));
                let (lo, hi) = (-p / sd, (1.0 - p) / sd);
                Observable::new(k, d, 1.0, move |x, out| {
                    for (o, u) in out.iter_mut().zip(x) {
                        *o = if *u < p { hi } else { lo };
                    }
                })
                .with_sup_bound(hi.max(-lo))
            }
        }
    }
}

impl core::str::FromStr for IidSummand {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(IidSummand::Gaussian),
            "rademacher" => Ok(IidSummand::Rademacher),
            "exponential" => Ok(IidSummand::Exponential),
            other if other.starts_with("bernoulli:") => {
                let p: f64 = other["bernoulli:".len()..]
                    .parse()
                    .map_err(|_| invalid(alloc::format!("bad Bernoulli parameter in `{other}`")))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(invalid("Bernoulli parameter must lie in (0, 1)"));
                }
                Ok(IidSummand::Bernoulli(p))
            }
            other => Err(invalid(alloc::format!("unknown summand `{other}`"))),
        }
    }
}
