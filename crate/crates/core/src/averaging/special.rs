use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::integrate::{check_inputs, integrate_averaged, integrate_on_grid, rk4_step, workspace, KinkGrid, Trajectory};
use super::system::{average_field, sup_diff, AveragedField, PerturbedSystem};
use crate::clt::lebesgue_mean;
use crate::driver::{MapDriver, SpecialFlowSystem, TorusPoint};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::rng::{domain, stream};
use crate::stats::RateFit;

/// `(x, ω, s, out)`: a field on `R^d × M` evaluated at the suspension point `(ω, s)`.
pub type FlowFieldFn = dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pi = core::f64::consts::PI;
    for i in 0..n {
        let mut z = libm::cos(pi * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - z);
        weights[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// The map-driven system obtained from a field on a suspension flow.
#[derive(Clone)]
pub struct SpecialFlowReduction {
    dim: usize,
    flow: SpecialFlowSystem,
    field: Arc<FlowFieldFn>,
    lipschitz: f64,
    /// `F(x, ω) = ∫_0^{τ(ω)} f(x, (ω, s)) ds`.
    pub system: PerturbedSystem,
    /// `G(x, ω) = τ(ω)·f̄(x)`.
    pub g: PerturbedSystem,
    /// `H = F − G`.
    pub h: PerturbedSystem,
    /// Flow average `f̄(x) = ∫∫ f dν ds / ∫τ dν`.
    pub flow_mean: AveragedField,
    /// `∫ τ dν`.
    pub tau_mean: f64,
}

impl core::fmt::Debug for SpecialFlowReduction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SpecialFlowReduction").field("dim", &self.dim).field("tau_mean", &self.tau_mean).finish()
    }
}

/// Reduces `dX/dt = f(X, Y_{t/ε}(ω, 0))` to a map-driven system over the base.
///
/// `s_nodes` Gauss–Legendre nodes integrate in the flow direction; `grid_per_axis`
/// midpoint nodes per base axis integrate over `ν`.
pub fn special_flow_reduce<F>(
    dim: usize,
    lipschitz: f64,
    sup: f64,
    f: F,
    flow: &SpecialFlowSystem,
    s_nodes: usize,
    grid_per_axis: usize,
) -> Result<SpecialFlowReduction>
where
    F: Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
{
    if s_nodes == 0 {
        return Err(invalid("need at least one quadrature node in the flow direction"));
    }
    let k = flow.base().dim();
    // Re-validate the roof on the quadrature grid the reduction will use.
    let total = grid_per_axis.checked_pow(k as u32).filter(|t| *t <= 1 << 22).ok_or_else(|| invalid("grid too large"))?;
    for idx in 0..total {
        let mut r = idx;
        let coords: Vec<f64> = (0..k)
            .map(|_| {
                let c = ((r % grid_per_axis) as f64 + 0.5) / grid_per_axis as f64;
                r /= grid_per_axis;
                c
            })
            .collect();
        flow.roof_at(&TorusPoint::new(coords))?;
    }
    let tau_mean = lebesgue_mean(flow.roof(), grid_per_axis)?[0];
    let field: Arc<FlowFieldFn> = Arc::new(f);
    let (nodes, weights) = gauss_legendre(s_nodes);
    let roof = flow.roof().clone();
    let (f_ref, roof_ref) = (field.clone(), roof.clone());
    let reduced = move |x: &[f64], w: &[f64], out: &mut [f64]| {
        let mut tau = [0.0];
        roof_ref.eval_into(w, &mut tau);
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, wt) in nodes.iter().zip(&weights) {
            f_ref(x, w, s * tau[0], &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += wt * tau[0] * t;
            }
        }
    };
    let system = PerturbedSystem::new(dim, k, lipschitz * flow.roof_sup(), sup * flow.roof_sup(), reduced);
    let flow_mean = average_field(&system, grid_per_axis)?.scaled(1.0 / tau_mean);
    let (fm, r2) = (flow_mean.clone(), roof.clone());
    let g = PerturbedSystem::new(dim, k, lipschitz * flow.roof_sup(), sup * flow.roof_sup(), move |x, w, out| {
        let mut tau = [0.0];
        r2.eval_into(w, &mut tau);
        fm.eval(x, out);
        out.iter_mut().for_each(|v| *v *= tau[0]);
    });
    let (sf, gf) = (system.clone(), g.clone());
    let h = PerturbedSystem::new(dim, k, 2.0 * lipschitz * flow.roof_sup(), 2.0 * sup * flow.roof_sup(), move |x, w, out| {
        let mut tmp = vec![0.0; out.len()];
        sf.eval(x, w, out);
        gf.eval(x, w, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o -= t;
        }
    });
    Ok(SpecialFlowReduction { dim, flow: flow.clone(), field, lipschitz, system, g, h, flow_mean, tau_mean })
}

impl SpecialFlowReduction {
    pub fn flow(&self) -> &SpecialFlowSystem {
        &self.flow
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `f(x, (ω, s))`.
    pub fn eval_field(&self, x: &[f64], omega: &[f64], s: f64, out: &mut [f64]) {
        (self.field)(x, omega, s, out)
    }

    /// `W_t` for `dW/dt = f̄(W)` on `[0, t0]`.
    pub fn averaged_flow(&self, x0: &[f64], t0: f64) -> Result<Trajectory> {
        integrate_averaged(&self.flow_mean, x0, t0, t0 / 64.0)
    }

    /// `X_t` for `dX/dt = f(X, Y_{t/ε}(ω, 0))` on `[0, t0]`, with every roof crossing
    /// `t = ε Σ_{k<n} τ(T^k ω)` as a grid node. Returns the trajectory, the crossing
    /// count `n(t/ε)` at each node and the partial sums `Σ_{k<n} τ(T^k ω)`.
    pub fn integrate_flow_driven(
        &self,
        x0: &[f64],
        epsilon: f64,
        t0: f64,
        substeps: usize,
        omega: &TorusPoint,
    ) -> Result<(Trajectory, Vec<usize>, Vec<f64>)> {
        if !(epsilon > 0.0 && t0 > 0.0) || substeps == 0 {
            return Err(invalid("ε, T0 and substeps must be positive"));
        }
        let d = self.dim;
        let mut times = vec![0.0];
        let mut states = x0.to_vec();
        let mut counts = vec![0usize];
        let mut partial = vec![0.0];
        let mut x = x0.to_vec();
        let mut ws = workspace(d);
        let mut w = omega.clone();
        let mut start = 0.0; // ε·Σ_{j<k} τ_j
        let mut k = 0usize;
        while start < t0 {
            let tau = self.flow.roof_at(&w)?;
            let end_full = start + epsilon * tau;
            let end = end_full.min(t0);
            let h = (end - start) / substeps as f64;
            let base = w.coords().to_vec();
            let seg_start = start;
            let mut f = |t: f64, y: &[f64], out: &mut [f64]| {
                let s = ((t - seg_start) / epsilon).clamp(0.0, tau);
                (self.field)(y, &base, s, out)
            };
            for j in 0..substeps {
                let t = start + j as f64 * h;
                rk4_step(&mut f, t, h, &mut x, &mut ws);
                let t_next = if j + 1 == substeps { end } else { start + (j + 1) as f64 * h };
                times.push(t_next);
                states.extend_from_slice(&x);
                let crossed = j + 1 == substeps && end == end_full;
                counts.push(if crossed { k + 1 } else { k });
            }
            partial.push(partial[k] + tau);
            start = end_full;
            k += 1;
            self.flow.base().advance(&mut w);
        }
        Ok((Trajectory::new(d, times, states)?, counts, partial))
    }

    /// `sup_t |E_t − (x^F − x^G)_{ε n(t/ε)}|_∞` for one base point, where `E = X − W`.
    ///
    /// `x^G` is evaluated through the identity `x^G_{εn} = W_{ε Σ_{k<n} τ_k}`: on each
    /// interval `G` is the mean field slowed by the frozen roof value.
    pub fn gap(&self, x0: &[f64], epsilon: f64, t0: f64, substeps: usize, omega: &TorusPoint, averaged: &Trajectory) -> Result<f64> {
        let d = self.dim;
        let (big_x, counts, partial) = self.integrate_flow_driven(x0, epsilon, t0, substeps, omega)?;
        let n_max = *counts.iter().max().expect("nonempty");
        let mut gap = 0.0f64;
        let xf = if n_max > 0 {
            Some(integrate_on_grid(
                &self.system,
                self.flow.base(),
                x0,
                &KinkGrid::new(epsilon, epsilon * n_max as f64, substeps)?,
                omega,
            )?)
        } else {
            None
        };
        let (mut wt, mut wn) = (vec![0.0; d], vec![0.0; d]);
        for (i, t) in big_x.times().iter().enumerate() {
            let n = counts[i];
            averaged.interpolate(*t, &mut wt)?;
            averaged.interpolate((epsilon * partial[n]).min(averaged.end_time()), &mut wn)?;
            let xfn: Vec<f64> = match &xf {
                Some(tr) => tr.state(n * substeps).to_vec(),
                None => x0.to_vec(),
            };
            let xi = big_x.state(i);
            for c in 0..d {
                let g = (xi[c] - wt[c]) - (xfn[c] - wn[c]);
                gap = gap.max(g.abs());
            }
        }
        Ok(gap)
    }
}

#[derive(Debug, Clone)]
pub struct SpecialFlowGap {
    /// `(ε, mean over ω of the sup-gap, max over ω)`.
    pub rows: Vec<(f64, f64, f64)>,
    /// Log-log fit of the mean sup-gap against `ε`.
    pub fit: RateFit,
}

/// The flow-versus-map comparison across an `ε` grid, averaged over invariant base points.
pub fn special_flow_gap<E: Executor>(
    red: &SpecialFlowReduction,
    x0: &[f64],
    eps_grid: &[f64],
    ensemble: usize,
    t0: f64,
    substeps: usize,
    seed: u64,
    exec: &E,
) -> Result<SpecialFlowGap> {
    check_inputs(&red.system, red.flow.base(), x0)?;
    if ensemble == 0 || eps_grid.len() < 3 {
        return Err(invalid("need a positive ensemble and at least 3 ε values"));
    }
    let averaged = red.averaged_flow(x0, t0)?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let gaps: Result<Vec<f64>> = exec
            .map_indexed(ensemble, |i| {
                let mut rng = stream(seed, domain::INITIAL_POINTS, i as u64);
                let omega = red.flow.base().sample_invariant(&mut rng);
                red.gap(x0, eps, t0, substeps, &omega, &averaged)
            })
            .into_iter()
            .collect();
        let gaps = gaps?;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let max = gaps.iter().copied().fold(0.0, f64::max);
        rows.push((eps, mean, max));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.max(1e-300)).collect();
    let fit = RateFit::loglog(&xs, &ys)?;
    Ok(SpecialFlowGap { rows, fit })
}

/// `|F(x, ω) − ∫_0^1 f(x, Y_s(ω, 0)) ds|` by independent midpoint quadrature along the
/// flow, for checking the reduction against [`SpecialFlowSystem::evolve`].
pub fn flow_stopped_reference(red: &SpecialFlowReduction, x: &[f64], omega: &TorusPoint, panels: usize) -> Result<f64> {
    let d = red.dim;
    let mut acc = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let start = crate::driver::FlowPoint::on_base(omega.clone());
    for j in 0..panels {
        let s = (j as f64 + 0.5) / panels as f64;
        let p = red.flow.evolve(&start, s)?;
        (red.field)(x, p.base_point.coords(), p.height, &mut tmp);
        for (a, t) in acc.iter_mut().zip(&tmp) {
            *a += t / panels as f64;
        }
    }
    let mut f = vec![0.0; d];
    red.system.eval(x, omega.coords(), &mut f);
    Ok(sup_diff(&acc, &f))
}
