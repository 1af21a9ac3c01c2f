use alloc::vec;
use alloc::vec::Vec;

use super::integrate::{integrate_averaged, rk4_step, workspace, KinkGrid, Trajectory};
use super::system::AveragedField;
use crate::error::{invalid, Error, Result};
use crate::linalg::{expm, Matrix};

/// Everything along the averaged trajectory that does not depend on `ω`, cached on the
/// half-step nodes of a [`KinkGrid`].
///
/// Half-node `2i` is grid node `i`; half-node `2i+1` is the midpoint of step `i`. Stored
/// per half-node: `w`, `F̄(w)`, `DF̄(w)`, the fundamental matrix `Φ` of
/// `Φ' = DF̄(w_t)Φ, Φ(0) = I`, and `Φ⁻¹`.
#[derive(Debug, Clone)]
pub struct MeanPath {
    grid: KinkGrid,
    dim: usize,
    averaged: Trajectory,
    half_times: Vec<f64>,
    w: Vec<f64>,
    fbar: Vec<f64>,
    jac: Vec<f64>,
    phi: Vec<f64>,
    phi_inv: Vec<f64>,
}

fn mat_mul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

pub(crate) fn mat_vec(a: &[f64], v: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..d {
            s += a[i * d + k] * v[k];
        }
        out[i] = s;
    }
}

impl MeanPath {
    pub fn new(avg: &AveragedField, x0: &[f64], grid: KinkGrid) -> Result<Self> {
        let d = avg.dim();
        if x0.len() != d {
            return Err(Error::Dimension { expected: d, got: x0.len() });
        }
        let t0 = grid.t0();
        let averaged = integrate_averaged(avg, x0, t0, t0 / 64.0)?;
        let nodes = grid.times();
        let n_half = 2 * nodes.len() - 1;
        let mut half_times = Vec::with_capacity(n_half);
        for i in 0..nodes.len() {
            half_times.push(nodes[i]);
            if i + 1 < nodes.len() {
                half_times.push(0.5 * (nodes[i] + nodes[i + 1]));
            }
        }
        let mut w = vec![0.0; n_half * d];
        let mut fbar = vec![0.0; n_half * d];
        let mut jac = vec![0.0; n_half * d * d];
        for (q, t) in half_times.iter().enumerate() {
            let wq = &mut w[q * d..(q + 1) * d];
            averaged.interpolate(*t, wq)?;
            avg.eval(wq, &mut fbar[q * d..(q + 1) * d]);
            avg.jacobian(wq, &mut jac[q * d * d..(q + 1) * d * d]);
        }
        // Φ on grid nodes by RK4 (stage times are nodes and midpoints), then Hermite at
        // midpoints using Φ' = JΦ.
        let dd = d * d;
        let mut phi = vec![0.0; n_half * dd];
        let mut cur = vec![0.0; dd];
        for i in 0..d {
            cur[i * d + i] = 1.0;
        }
        phi[..dd].copy_from_slice(&cur);
        let mut ws = workspace(dd);
        for i in 0..nodes.len() - 1 {
            let h = nodes[i + 1] - nodes[i];
            let t_start = nodes[i];
            let mut f = |t: f64, p: &[f64], out: &mut [f64]| {
                let q = if t == t_start { 2 * i } else if t == t_start + h { 2 * i + 2 } else { 2 * i + 1 };
                mat_mul(&jac[q * dd..(q + 1) * dd], p, d, out);
            };
            rk4_step(&mut f, t_start, h, &mut cur, &mut ws);
            phi[(2 * i + 2) * dd..(2 * i + 3) * dd].copy_from_slice(&cur);
        }
        let (mut r0, mut r1) = (vec![0.0; dd], vec![0.0; dd]);
        for i in 0..nodes.len() - 1 {
            let h = nodes[i + 1] - nodes[i];
            let (a, b) = (2 * i, 2 * i + 2);
            mat_mul(&jac[a * dd..(a + 1) * dd], &phi[a * dd..(a + 1) * dd], d, &mut r0);
            mat_mul(&jac[b * dd..(b + 1) * dd], &phi[b * dd..(b + 1) * dd], d, &mut r1);
            for k in 0..dd {
                phi[(2 * i + 1) * dd + k] =
                    0.5 * (phi[a * dd + k] + phi[b * dd + k]) + h / 8.0 * (r0[k] - r1[k]);
            }
        }
        let mut phi_inv = vec![0.0; n_half * dd];
        for q in 0..n_half {
            let m = Matrix::from_row_slice(d, d, &phi[q * dd..(q + 1) * dd]);
            let inv = m.try_inverse().ok_or_else(|| invalid("fundamental matrix became singular"))?;
            for i in 0..d {
                for j in 0..d {
                    phi_inv[q * dd + i * d + j] = inv[(i, j)];
                }
            }
        }
        Ok(Self { grid, dim: d, averaged, half_times, w, fbar, jac, phi, phi_inv })
    }

    pub fn grid(&self) -> &KinkGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.grid.epsilon()
    }

    pub fn t0(&self) -> f64 {
        self.grid.t0()
    }

    /// The refined averaged solution on its own uniform grid.
    pub fn averaged(&self) -> &Trajectory {
        &self.averaged
    }

    pub fn half_times(&self) -> &[f64] {
        &self.half_times
    }

    pub fn w(&self, q: usize) -> &[f64] {
        &self.w[q * self.dim..(q + 1) * self.dim]
    }

    pub fn fbar(&self, q: usize) -> &[f64] {
        &self.fbar[q * self.dim..(q + 1) * self.dim]
    }

    pub fn jacobian(&self, q: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.jac[q * dd..(q + 1) * dd]
    }

    pub fn phi(&self, q: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.phi[q * dd..(q + 1) * dd]
    }

    pub fn phi_inv(&self, q: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.phi_inv[q * dd..(q + 1) * dd]
    }

    /// `w` on the grid nodes, as a trajectory.
    pub fn averaged_on_grid(&self) -> Trajectory {
        let d = self.dim;
        let n = self.grid.times().len();
        let mut states = Vec::with_capacity(n * d);
        for i in 0..n {
            states.extend_from_slice(self.w(2 * i));
        }
        Trajectory::new(d, self.grid.times().to_vec(), states).expect("grid is valid")
    }

    /// `max_t |Φ(t) − exp(∫_0^t DF̄(w_r) dr)|` over grid nodes. Zero when the Jacobians
    /// along the path commute; otherwise measures how far the plain exponential is from
    /// the time-ordered solution operator.
    pub fn exponential_discrepancy(&self) -> f64 {
        let d = self.dim;
        let dd = d * d;
        let nodes = self.grid.times();
        let mut integral = vec![0.0; dd];
        let mut worst = 0.0f64;
        for i in 0..nodes.len() {
            if i > 0 {
                let h = nodes[i] - nodes[i - 1];
                let (a, m, b) = (2 * i - 2, 2 * i - 1, 2 * i);
                for k in 0..dd {
                    integral[k] += h / 6.0 * (self.jac[a * dd + k] + 4.0 * self.jac[m * dd + k] + self.jac[b * dd + k]);
                }
            }
            let e = expm(&Matrix::from_row_slice(d, d, &integral));
            let p = self.phi(2 * i);
            for r in 0..d {
                for c in 0..d {
                    worst = worst.max((e[(r, c)] - p[r * d + c]).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_matrix_of_linear_field_is_exponential() {
        let a = [[-1.0, 0.5], [0.2, -0.3]];
        let avg = AveragedField::from_fn_with_jacobian(
            2,
            1.5,
            move |x, o| {
                o[0] = a[0][0] * x[0] + a[0][1] * x[1];
                o[1] = a[1][0] * x[0] + a[1][1] * x[1];
            },
            move |_, o| o.copy_from_slice(&[a[0][0], a[0][1], a[1][0], a[1][1]]),
        );
        let grid = KinkGrid::new(0.125, 1.0, 8).unwrap();
        let path = MeanPath::new(&avg, &[1.0, 1.0], grid).unwrap();
        let disc = path.exponential_discrepancy();
        assert!(disc < 1e-9, "{disc:e}");
        // Φ·Φ⁻¹ = I at a midpoint.
        let q = 2 * 17 + 1;
        let mut prod = [0.0; 4];
        mat_mul(path.phi(q), path.phi_inv(q), 2, &mut prod);
        assert!((prod[0] - 1.0).abs() < 1e-12 && prod[1].abs() < 1e-12 && (prod[3] - 1.0).abs() < 1e-12);
        // Midpoint Hermite value against the exact exponential.
        let t = path.half_times()[q];
        let m = Matrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]]) * t;
        let e = crate::linalg::expm(&m);
        assert!((e[(0, 1)] - path.phi(q)[1]).abs() < 1e-9);
    }
}
