use alloc::vec;
use alloc::vec::Vec;

use super::system::{sup_norm, AveragedField, PerturbedSystem};
use crate::driver::MapDriver;
use crate::error::{invalid, Error, Result};

const BLOW_UP: f64 = 1e12;
const REFINE_TOL: f64 = 1e-9;
const MAX_AVERAGED_STEPS: usize = 1 << 22;

/// States on an increasing time grid, optionally with the right-hand side at each node
/// (enables cubic Hermite dense output).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    rates: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, times: Vec<f64>, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.len() != dim * times.len() || times.is_empty() {
            return Err(invalid("trajectory shape mismatch"));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory times must start at 0 and increase"));
        }
        Ok(Self { dim, times, states, rates: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// `max_i |state_i|_∞`.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.states)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.states.iter_mut().for_each(|v| *v *= c);
        out.rates.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Dense output at `t`: cubic Hermite when node derivatives are stored, otherwise
    /// four-point Lagrange. Node times return the stored state exactly.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.len();
        let tol = 1e-12 * self.end_time().max(1.0);
        if !(t >= -tol && t <= self.end_time() + tol) {
            return Err(invalid("interpolation time outside the trajectory"));
        }
        let j = self.times.partition_point(|s| *s < t);
        if j < n && self.times[j] == t {
            out.copy_from_slice(self.state(j));
            return Ok(());
        }
        if n == 1 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        let i = j.clamp(1, n - 1) - 1;
        let d = self.dim;
        if !self.rates.is_empty() {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let h = t1 - t0;
            let s = (t - t0) / h;
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            for k in 0..d {
                out[k] = h00 * self.states[i * d + k]
                    + h10 * h * self.rates[i * d + k]
                    + h01 * self.states[(i + 1) * d + k]
                    + h11 * h * self.rates[(i + 1) * d + k];
            }
            return Ok(());
        }
        let lo = i.saturating_sub(1).min(n.saturating_sub(4));
        let idx: Vec<usize> = (lo..(lo + 4).min(n)).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (t - self.times[b]) / (self.times[a] - self.times[b]);
                }
            }
            for k in 0..d {
                out[k] += w * self.states[a * d + k];
            }
        }
        Ok(())
    }

    /// Dense output on another grid.
    pub fn resample(&self, times: &[f64]) -> Result<Trajectory> {
        let mut states = vec![0.0; times.len() * self.dim];
        for (t, chunk) in times.iter().zip(states.chunks_exact_mut(self.dim)) {
            self.interpolate(*t, chunk)?;
        }
        Trajectory::new(self.dim, times.to_vec(), states)
    }
}

/// Time grid of a map-driven ODE: interval `k` is `[kε, min((k+1)ε, T0)]`, split into
/// `substeps` equal RK4 steps. Every kink `kε ≤ T0` is a node.
#[derive(Debug, Clone)]
pub struct KinkGrid {
    epsilon: f64,
    t0: f64,
    substeps: usize,
    intervals: usize,
    times: Vec<f64>,
}

impl KinkGrid {
    pub fn new(epsilon: f64, t0: f64, substeps: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) || !(t0 > 0.0 && t0.is_finite()) {
            return Err(invalid("ε and T0 must be positive and finite"));
        }
        if substeps == 0 {
            return Err(invalid("substeps must be positive"));
        }
        if epsilon >= t0 && substeps < 4 {
            return Err(invalid("ε ≥ T0 needs at least 4 substeps per interval"));
        }
        let ratio = t0 / epsilon;
        let nearest = libm::round(ratio);
        let intervals = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest as usize
        } else {
            libm::ceil(ratio) as usize
        }
        .max(1);
        if intervals.saturating_mul(substeps) > 1 << 26 {
            return Err(invalid("kink grid too fine"));
        }
        let mut times = Vec::with_capacity(intervals * substeps + 1);
        for k in 0..intervals {
            let a = k as f64 * epsilon;
            let b = if k + 1 == intervals { t0 } else { (k + 1) as f64 * epsilon };
            let h = (b - a) / substeps as f64;
            for j in 0..substeps {
                times.push(if j == 0 { a } else { a + j as f64 * h });
            }
        }
        times.push(t0);
        Ok(Self { epsilon, t0, substeps, intervals, times })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Index of the interval containing step `i` (the step from node `i` to `i + 1`).
    pub fn interval_of_step(&self, i: usize) -> usize {
        i / self.substeps
    }
}

/// One classical RK4 step of `x' = f(t, x)`.
pub(crate) fn rk4_step<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, h: f64, x: &mut [f64], ws: &mut [Vec<f64>; 5]) {
    let d = x.len();
    let [k1, k2, k3, k4, tmp] = ws;
    f(t, x, k1);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..d {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, tmp, k4);
    for i in 0..d {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub(crate) fn workspace(d: usize) -> [Vec<f64>; 5] {
    [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]]
}

/// Integrates `dx/dt = F(x, T^{⌊t/ε⌋}ω)` with the driver frozen on each interval.
pub fn integrate_perturbed<D: MapDriver>(
    sys: &PerturbedSystem,
    driver: &D,
    x0: &[f64],
    epsilon: f64,
    t0: f64,
    substeps: usize,
    omega: &D::State,
) -> Result<Trajectory> {
    let grid = KinkGrid::new(epsilon, t0, substeps)?;
    integrate_on_grid(sys, driver, x0, &grid, omega)
}

pub(crate) fn check_inputs<D: MapDriver>(sys: &PerturbedSystem, driver: &D, x0: &[f64]) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: x0.len() });
    }
    if driver.phase_dim() != sys.omega_dim() {
        return Err(Error::Dimension { expected: sys.omega_dim(), got: driver.phase_dim() });
    }
    Ok(())
}

pub fn integrate_on_grid<D: MapDriver>(
    sys: &PerturbedSystem,
    driver: &D,
    x0: &[f64],
    grid: &KinkGrid,
    omega: &D::State,
) -> Result<Trajectory> {
    check_inputs(sys, driver, x0)?;
    let d = sys.dim();
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len() * d);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut ws = workspace(d);
    let mut w = omega.clone();
    for k in 0..grid.intervals() {
        if k > 0 {
            driver.advance(&mut w);
        }
        let coords = driver.coords(&w);
        let mut f = |_t: f64, x: &[f64], out: &mut [f64]| sys.eval(x, coords, out);
        for j in 0..grid.substeps() {
            let i = k * grid.substeps() + j;
            let h = times[i + 1] - times[i];
            rk4_step(&mut f, times[i], h, &mut x, &mut ws);
            states.extend_from_slice(&x);
        }
    }
    Trajectory::new(d, times.to_vec(), states)
}

fn averaged_pass(avg: &AveragedField, x0: &[f64], t0: f64, n: usize) -> Result<Trajectory> {
    let d = avg.dim();
    let h = t0 / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity((n + 1) * d);
    let mut rates = Vec::with_capacity((n + 1) * d);
    let mut x = x0.to_vec();
    let mut ws = workspace(d);
    let mut rate = vec![0.0; d];
    let mut f = |_t: f64, x: &[f64], out: &mut [f64]| avg.eval(x, out);
    for i in 0..=n {
        let t = if i == n { t0 } else { i as f64 * h };
        if !x.iter().all(|v| v.is_finite()) || sup_norm(&x) > BLOW_UP {
            return Err(Error::BlowUp(t));
        }
        times.push(t);
        states.extend_from_slice(&x);
        f(t, &x, &mut rate);
        rates.extend_from_slice(&rate);
        if i < n {
            rk4_step(&mut f, t, h, &mut x, &mut ws);
        }
    }
    let mut traj = Trajectory::new(d, times, states)?;
    traj.rates = rates;
    Ok(traj)
}

/// RK4 for `dw/dt = F̄(w)` on a uniform grid, halving the step until two successive
/// solutions agree within 1e-9 at their common nodes. The finer solution is returned
/// with node derivatives for Hermite dense output.
pub fn integrate_averaged(avg: &AveragedField, x0: &[f64], t0: f64, step: f64) -> Result<Trajectory> {
    if !(step > 0.0) || !(t0 > 0.0 && t0.is_finite()) {
        return Err(invalid("step and T0 must be positive"));
    }
    if x0.len() != avg.dim() {
        return Err(Error::Dimension { expected: avg.dim(), got: x0.len() });
    }
    let mut n = (libm::ceil(t0 / step) as usize).max(1);
    let mut coarse = averaged_pass(avg, x0, t0, n)?;
    loop {
        if 2 * n > MAX_AVERAGED_STEPS {
            return Err(invalid("averaged solution did not converge under step halving"));
        }
        let fine = averaged_pass(avg, x0, t0, 2 * n)?;
        let d = avg.dim();
        let gap = (0..=n).fold(0.0f64, |m, i| {
            let a = coarse.state(i);
            let b = fine.state(2 * i);
            (0..d).fold(m, |m, k| m.max((a[k] - b[k]).abs()))
        });
        if gap <= REFINE_TOL {
            return Ok(fine);
        }
        coarse = fine;
        n *= 2;
    }
}

/// `e_t = x_t − w_t` on the perturbed grid, resampling `averaged` by dense output.
pub fn error_process(perturbed: &Trajectory, averaged: &Trajectory) -> Result<Trajectory> {
    if perturbed.dim() != averaged.dim() {
        return Err(Error::Dimension { expected: perturbed.dim(), got: averaged.dim() });
    }
    let d = perturbed.dim();
    let mut states = perturbed.states.clone();
    let mut w = vec![0.0; d];
    for (i, t) in perturbed.times().iter().enumerate() {
        averaged.interpolate(*t, &mut w)?;
        for k in 0..d {
            states[i * d + k] -= w[k];
        }
    }
    Trajectory::new(d, perturbed.times.clone(), states)
}
