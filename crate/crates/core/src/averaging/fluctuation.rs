use alloc::vec;
use alloc::vec::Vec;

use super::integrate::{check_inputs, integrate_on_grid, KinkGrid, Trajectory};
use super::path::{mat_vec, MeanPath};
use super::system::{sup_norm, AveragedField, PerturbedSystem};
use crate::driver::MapDriver;
use crate::error::{invalid, Error, Result};

/// Largest admissible residual of `y = v + ∫ DF̄(w)·y`.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Gronwall inequalities may fail by at most this much.
pub const GRONWALL_SLACK: f64 = 1e-6;
/// Substeps per kink interval used by the convenience wrappers.
pub const DEFAULT_SUBSTEPS: usize = 8;

/// The fluctuation integral and its linear response along one `ω`.
#[derive(Debug, Clone)]
pub struct Fluctuations {
    /// `v_t = ε^{-1/2} ∫_0^t F̃(w_s, T^{⌊s/ε⌋}ω) ds` on the grid nodes.
    pub v: Trajectory,
    /// `y_t = Φ(t) ∫_0^t Φ(s)⁻¹ dv_s`, present when requested.
    pub y: Option<Trajectory>,
    /// `max_t |y_t − v_t − ∫_0^t DF̄(w_s) y_s ds|_∞`.
    pub residual: f64,
}

/// Kink-respecting Simpson quadrature of `F̃` along `path`, optionally solving for `y`.
///
/// Fails with [`Error::Residual`] if the integral-equation residual of `y` exceeds
/// [`RESIDUAL_TOL`].
pub fn fluctuations<D: MapDriver>(
    sys: &PerturbedSystem,
    path: &MeanPath,
    driver: &D,
    omega: &D::State,
    with_y: bool,
) -> Result<Fluctuations> {
    let d = sys.dim();
    if path.dim() != d {
        return Err(Error::Dimension { expected: d, got: path.dim() });
    }
    if driver.phase_dim() != sys.omega_dim() {
        return Err(Error::Dimension { expected: sys.omega_dim(), got: driver.phase_dim() });
    }
    let grid = path.grid();
    let times = grid.times();
    let n = times.len();
    let scale = 1.0 / libm::sqrt(grid.epsilon());
    let mut v_states = Vec::with_capacity(n * d);
    let mut y_states = Vec::with_capacity(if with_y { n * d } else { 0 });
    v_states.extend(core::iter::repeat_n(0.0, d));
    if with_y {
        y_states.extend(core::iter::repeat_n(0.0, d));
    }
    let mut integral = vec![0.0; d]; // ∫ F̃
    let mut pulled = vec![0.0; d]; // ∫ Φ⁻¹ F̃
    let mut response = vec![0.0; d]; // ∫ DF̄ y
    let (mut g0, mut gm, mut g1) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut p0, mut pm, mut p1) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut y0, mut y1, mut ym) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut r0, mut r1, mut rm) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut residual = 0.0f64;
    let mut w = omega.clone();
    let fluct = |q: usize, coords: &[f64], out: &mut [f64]| {
        sys.eval(path.w(q), coords, out);
        for (o, m) in out.iter_mut().zip(path.fbar(q)) {
            *o -= m;
        }
    };
    for k in 0..grid.intervals() {
        if k > 0 {
            driver.advance(&mut w);
        }
        let coords = driver.coords(&w);
        fluct(2 * k * grid.substeps(), coords, &mut g0);
        for j in 0..grid.substeps() {
            let i = k * grid.substeps() + j;
            let h = times[i + 1] - times[i];
            let (a, m, b) = (2 * i, 2 * i + 1, 2 * i + 2);
            fluct(m, coords, &mut gm);
            fluct(b, coords, &mut g1);
            for c in 0..d {
                integral[c] += h / 6.0 * (g0[c] + 4.0 * gm[c] + g1[c]);
            }
            v_states.extend(integral.iter().map(|x| x * scale));
            if with_y {
                mat_vec(path.phi_inv(a), &g0, d, &mut p0);
                mat_vec(path.phi_inv(m), &gm, d, &mut pm);
                mat_vec(path.phi_inv(b), &g1, d, &mut p1);
                for c in 0..d {
                    pulled[c] += h / 6.0 * (p0[c] + 4.0 * pm[c] + p1[c]);
                }
                mat_vec(path.phi(b), &pulled, d, &mut y1);
                y1.iter_mut().for_each(|x| *x *= scale);
                y0.copy_from_slice(&y_states[i * d..(i + 1) * d]);
                // One-sided derivatives y' = DF̄ y + F̃/√ε inside the step, Hermite midpoint.
                mat_vec(path.jacobian(a), &y0, d, &mut r0);
                mat_vec(path.jacobian(b), &y1, d, &mut r1);
                for c in 0..d {
                    let dy0 = r0[c] + scale * g0[c];
                    let dy1 = r1[c] + scale * g1[c];
                    ym[c] = 0.5 * (y0[c] + y1[c]) + h / 8.0 * (dy0 - dy1);
                }
                mat_vec(path.jacobian(m), &ym, d, &mut rm);
                for c in 0..d {
                    response[c] += h / 6.0 * (r0[c] + 4.0 * rm[c] + r1[c]);
                    let res = y1[c] - integral[c] * scale - response[c];
                    residual = residual.max(res.abs());
                }
                y_states.extend_from_slice(&y1);
            }
            core::mem::swap(&mut g0, &mut g1);
        }
    }
    if with_y && !(residual <= RESIDUAL_TOL) {
        return Err(Error::Residual(residual));
    }
    let v = Trajectory::new(d, times.to_vec(), v_states)?;
    let y = if with_y { Some(Trajectory::new(d, times.to_vec(), y_states)?) } else { None };
    Ok(Fluctuations { v, y, residual })
}

fn path_for<D: MapDriver>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    epsilon: f64,
    t0: f64,
) -> Result<MeanPath> {
    check_inputs(sys, driver, x)?;
    MeanPath::new(avg, x, KinkGrid::new(epsilon, t0, DEFAULT_SUBSTEPS)?)
}

/// `v_t^ε` with [`DEFAULT_SUBSTEPS`] per interval.
pub fn v_process<D: MapDriver>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    epsilon: f64,
    t0: f64,
    omega: &D::State,
) -> Result<Trajectory> {
    let path = path_for(sys, avg, driver, x, epsilon, t0)?;
    Ok(fluctuations(sys, &path, driver, omega, false)?.v)
}

/// `y_t^ε` with [`DEFAULT_SUBSTEPS`] per interval.
pub fn y_process<D: MapDriver>(
    sys: &PerturbedSystem,
    avg: &AveragedField,
    driver: &D,
    x: &[f64],
    epsilon: f64,
    t0: f64,
    omega: &D::State,
) -> Result<Trajectory> {
    let path = path_for(sys, avg, driver, x, epsilon, t0)?;
    Ok(fluctuations(sys, &path, driver, omega, true)?.y.expect("requested"))
}

/// One realisation `(x, e, v, y)` on the grid of `path`.
#[derive(Debug, Clone)]
pub struct Realization {
    pub perturbed: Trajectory,
    pub error: Trajectory,
    pub fluctuations: Fluctuations,
}

pub fn realize<D: MapDriver>(
    sys: &PerturbedSystem,
    path: &MeanPath,
    driver: &D,
    omega: &D::State,
    with_y: bool,
) -> Result<Realization> {
    let x0 = path.w(0).to_vec();
    let perturbed = integrate_on_grid(sys, driver, &x0, path.grid(), omega)?;
    let error = error_on_grid(&perturbed, path)?;
    let fluctuations = fluctuations(sys, path, driver, omega, with_y)?;
    Ok(Realization { perturbed, error, fluctuations })
}

/// `x − w` using the cached node values of `w`.
pub fn error_on_grid(perturbed: &Trajectory, path: &MeanPath) -> Result<Trajectory> {
    let d = path.dim();
    if perturbed.len() != path.grid().times().len() || perturbed.dim() != d {
        return Err(invalid("perturbed trajectory is not on the grid of the mean path"));
    }
    let mut states = perturbed.states().to_vec();
    for i in 0..perturbed.len() {
        for (s, w) in states[i * d..(i + 1) * d].iter_mut().zip(path.w(2 * i)) {
            *s -= w;
        }
    }
    Trajectory::new(d, perturbed.times().to_vec(), states)
}

/// Both pathwise Gronwall inequalities with their slacks (`bound − lhs`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
    pub sup_error: f64,
    pub sup_integral: f64,
    /// `(1 + L e^{L T0})·sup|I| − sup|e|`.
    pub forward_slack: f64,
    /// `(1 + L T0)·sup|e| − sup|I|`.
    pub reverse_slack: f64,
    pub pass: bool,
}

/// `sup|e| ≤ (1 + L e^{LT0}) sup|I|` and `sup|I| ≤ (1 + L T0) sup|e|`, with
/// `I_t = ∫_0^t F̃(w_u, T^{⌊u/ε⌋}ω) du`, on the grid of `path`. `perturbed` must come
/// from the same `(x, ω, ε)`.
pub fn gronwall_check<D: MapDriver>(
    sys: &PerturbedSystem,
    path: &MeanPath,
    perturbed: &Trajectory,
    driver: &D,
    omega: &D::State,
) -> Result<GronwallReport> {
    let e = error_on_grid(perturbed, path)?;
    let fl = fluctuations(sys, path, driver, omega, false)?;
    let sup_error = e.sup_norm();
    let sup_integral = sup_norm(fl.v.states()) * libm::sqrt(path.epsilon());
    let l = sys.lipschitz();
    let t0 = path.t0();
    let forward_slack = (1.0 + l * libm::exp(l * t0)) * sup_integral - sup_error;
    let reverse_slack = (1.0 + l * t0) * sup_error - sup_integral;
    Ok(GronwallReport {
        sup_error,
        sup_integral,
        forward_slack,
        reverse_slack,
        pass: forward_slack >= -GRONWALL_SLACK && reverse_slack >= -GRONWALL_SLACK,
    })
}
