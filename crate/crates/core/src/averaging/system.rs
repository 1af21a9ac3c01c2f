use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::{domain, stream};

/// `(x, ω, out)`: writes `F(x, ω)` into `out`.
pub type FieldFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// `(x, ω, out)`: writes `D₁F(x, ω)` row-major into `out` (`d×d`).
pub type JacobianFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// `(x, out)`: a field on `R^d` alone.
pub type MeanFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Right-hand side `F(x, ω)` of an ODE driven by a map on `[0,1)^k`.
#[derive(Clone)]
pub struct PerturbedSystem {
    dim: usize,
    omega_dim: usize,
    field: Arc<FieldFn>,
    lipschitz: f64,
    sup: f64,
    /// Radius of the `x`-box on which `sup` is claimed (fields like `−x + g` are only
    /// bounded on bounded sets).
    sup_radius: f64,
    jacobian: Option<Arc<JacobianFn>>,
    holder_eta: f64,
}

impl fmt::Debug for PerturbedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedSystem")
            .field("dim", &self.dim)
            .field("omega_dim", &self.omega_dim)
            .field("lipschitz", &self.lipschitz)
            .field("sup", &self.sup)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl PerturbedSystem {
    pub fn new<F>(dim: usize, omega_dim: usize, lipschitz: f64, sup: f64, field: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            omega_dim,
            field: Arc::new(field),
            lipschitz,
            sup,
            sup_radius: 2.0,
            jacobian: None,
            holder_eta: 1.0,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_holder_eta(mut self, eta: f64) -> Self {
        self.holder_eta = eta;
        self
    }

    pub fn with_sup_radius(mut self, r: f64) -> Self {
        self.sup_radius = r;
        self
    }

    /// `F(x, ω) = −x + (cos 2πω₁, sin 2π(ω₁+ω₂))`, so `F̄(x) = −x`.
    pub fn default_cat() -> Self {
        Self::new(2, 2, 1.0, 3.0, |x, w, out| {
            out[0] = -x[0] + libm::cos(TAU * w[0]);
            out[1] = -x[1] + libm::sin(TAU * (w[0] + w[1]));
        })
        .with_jacobian(|_, _, out| {
            out.copy_from_slice(&[-1.0, 0.0, 0.0, -1.0]);
        })
    }

    /// `F(x, ω) = −x + ((1 + ½ sin x₂) cos 2πω₁, (1 + ½ cos x₁) sin 2π(ω₁+ω₂))`.
    ///
    /// Same mean field `−x` as [`default_cat`](Self::default_cat), but the fluctuation
    /// amplitude depends on the state, so `e/√ε` and its linearisation `y` differ.
    pub fn coupled_cat() -> Self {
        Self::new(2, 2, 1.5, 3.5, |x, w, out| {
            out[0] = -x[0] + (1.0 + 0.5 * libm::sin(x[1])) * libm::cos(TAU * w[0]);
            out[1] = -x[1] + (1.0 + 0.5 * libm::cos(x[0])) * libm::sin(TAU * (w[0] + w[1]));
        })
        .with_jacobian(|x, w, out| {
            let c = libm::cos(TAU * w[0]);
            let s = libm::sin(TAU * (w[0] + w[1]));
            out[0] = -1.0;
            out[1] = 0.5 * libm::cos(x[1]) * c;
            out[2] = -0.5 * libm::sin(x[0]) * s;
            out[3] = -1.0;
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega_dim(&self) -> usize {
        self.omega_dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn holder_eta(&self) -> f64 {
        self.holder_eta
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        (self.field)(x, w, out)
    }

    pub(crate) fn eval_jacobian(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> bool {
        match &self.jacobian {
            Some(j) => {
                j(x, w, out);
                true
            }
            None => false,
        }
    }

    /// `s·F`, used to reduce time `s` to time 1.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.field.clone();
        let mut out = Self::new(self.dim, self.omega_dim, self.lipschitz * s.abs(), self.sup * s.abs(), move |x, w, o| {
            inner(x, w, o);
            for v in o.iter_mut() {
                *v *= s;
            }
        });
        out.sup_radius = self.sup_radius;
        out.holder_eta = self.holder_eta;
        if let Some(j) = &self.jacobian {
            let j = j.clone();
            out.jacobian = Some(Arc::new(move |x: &[f64], w: &[f64], o: &mut [f64]| {
                j(x, w, o);
                for v in o.iter_mut() {
                    *v *= s;
                }
            }));
        }
        out
    }

    /// Checks the declared sup bound and Lipschitz constant on random inputs with
    /// `|x|_∞ ≤ sup_radius`. Returns the largest observed ratios `(|F|/sup, lip/L)`.
    pub fn check_declared_bounds(&self, samples: usize, seed: u64) -> Result<(f64, f64)> {
        let d = self.dim;
        let mut rng = stream(seed, domain::HOLDER_PAIRS, 0xA0);
        let (mut x, mut y, mut w) = (vec![0.0; d], vec![0.0; d], vec![0.0; self.omega_dim]);
        let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
        let (mut worst_sup, mut worst_lip) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v = self.sup_radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            for v in w.iter_mut() {
                *v = rng.random::<f64>();
            }
            self.eval(&x, &w, &mut fx);
            self.eval(&y, &w, &mut fy);
            let s = sup_norm(&fx).max(sup_norm(&fy));
            worst_sup = worst_sup.max(s / self.sup);
            let dxy = sup_diff(&x, &y);
            if dxy > 0.0 {
                worst_lip = worst_lip.max(sup_diff(&fx, &fy) / dxy / self.lipschitz);
            }
        }
        if worst_sup > 1.0 + 1e-12 {
            return Err(invalid("sampled |F| exceeds the declared sup bound"));
        }
        if worst_lip > 1.0 + 1e-12 {
            return Err(invalid("sampled Lipschitz ratio exceeds the declared constant"));
        }
        Ok((worst_sup, worst_lip))
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

enum MeanSource {
    Quadrature { sys: PerturbedSystem, nodes: Vec<f64>, grid: usize },
    Closure { f: Arc<MeanFn>, jacobian: Option<Arc<MeanFn>> },
}

/// The averaged field `F̄(x) = ∫ F(x, ω) dω` and its Jacobian.
#[derive(Clone)]
pub struct AveragedField {
    dim: usize,
    lipschitz: f64,
    source: Arc<MeanSource>,
}

impl fmt::Debug for AveragedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = match &*self.source {
            MeanSource::Quadrature { grid, .. } => Some(*grid),
            MeanSource::Closure { .. } => None,
        };
        f.debug_struct("AveragedField").field("dim", &self.dim).field("grid_per_axis", &q).finish()
    }
}

/// Midpoint tensor grid on `[0,1)^k`; exact for trigonometric polynomials of degree
/// below `grid_per_axis`.
pub fn average_field(sys: &PerturbedSystem, grid_per_axis: usize) -> Result<AveragedField> {
    if grid_per_axis < 4 {
        return Err(invalid("grid_per_axis must be at least 4"));
    }
    let k = sys.omega_dim;
    let total = grid_per_axis
        .checked_pow(k as u32)
        .filter(|t| *t <= 1 << 22)
        .ok_or_else(|| invalid("quadrature grid too large"))?;
    let mut nodes = Vec::with_capacity(total * k);
    for idx in 0..total {
        let mut r = idx;
        for _ in 0..k {
            nodes.push(((r % grid_per_axis) as f64 + 0.5) / grid_per_axis as f64);
            r /= grid_per_axis;
        }
    }
    Ok(AveragedField {
        dim: sys.dim,
        lipschitz: sys.lipschitz,
        source: Arc::new(MeanSource::Quadrature { sys: sys.clone(), nodes, grid: grid_per_axis }),
    })
}

impl AveragedField {
    /// A mean field given in closed form.
    pub fn from_fn<F>(dim: usize, lipschitz: f64, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, lipschitz, source: Arc::new(MeanSource::Closure { f: Arc::new(f), jacobian: None }) }
    }

    /// A closed-form mean field with its Jacobian (row-major).
    pub fn from_fn_with_jacobian<F, J>(dim: usize, lipschitz: f64, f: F, jac: J) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz,
            source: Arc::new(MeanSource::Closure { f: Arc::new(f), jacobian: Some(Arc::new(jac)) }),
        }
    }

    /// Mean field of `s·F`.
    pub fn scaled(&self, s: f64) -> Self {
        match &*self.source {
            MeanSource::Quadrature { sys, nodes, grid } => Self {
                dim: self.dim,
                lipschitz: self.lipschitz * s.abs(),
                source: Arc::new(MeanSource::Quadrature { sys: sys.scaled(s), nodes: nodes.clone(), grid: *grid }),
            },
            MeanSource::Closure { f, jacobian } => {
                let f = f.clone();
                let scaled_f: Arc<MeanFn> = Arc::new(move |x: &[f64], o: &mut [f64]| {
                    f(x, o);
                    o.iter_mut().for_each(|v| *v *= s);
                });
                let scaled_j = jacobian.clone().map(|j| {
                    let j: Arc<MeanFn> = Arc::new(move |x: &[f64], o: &mut [f64]| {
                        j(x, o);
                        o.iter_mut().for_each(|v| *v *= s);
                    });
                    j
                });
                Self {
                    dim: self.dim,
                    lipschitz: self.lipschitz * s.abs(),
                    source: Arc::new(MeanSource::Closure { f: scaled_f, jacobian: scaled_j }),
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn quadrature_points(&self) -> usize {
        match &*self.source {
            MeanSource::Quadrature { nodes, sys, .. } => nodes.len() / sys.omega_dim.max(1),
            MeanSource::Closure { .. } => 0,
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &*self.source {
            MeanSource::Closure { f, .. } => f(x, out),
            MeanSource::Quadrature { sys, nodes, .. } => {
                let k = sys.omega_dim;
                let mut tmp = vec![0.0; self.dim];
                out.iter_mut().for_each(|v| *v = 0.0);
                let count = nodes.len() / k;
                for w in nodes.chunks_exact(k) {
                    sys.eval(x, w, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
                out.iter_mut().for_each(|v| *v /= count as f64);
            }
        }
    }

    /// `DF̄(x)` row-major: averaged analytic `D₁F` when available, otherwise central
    /// differences with step `1e-5·max(1, |x_i|)`.
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &*self.source {
            MeanSource::Quadrature { sys, nodes, .. } if sys.has_jacobian() => {
                let k = sys.omega_dim;
                let mut tmp = vec![0.0; d * d];
                out.iter_mut().for_each(|v| *v = 0.0);
                for w in nodes.chunks_exact(k) {
                    sys.eval_jacobian(x, w, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
                let count = (nodes.len() / k) as f64;
                out.iter_mut().for_each(|v| *v /= count);
            }
            MeanSource::Closure { jacobian: Some(j), .. } => j(x, out),
            _ => self.jacobian_fd(x, out),
        }
    }

    pub(crate) fn jacobian_fd(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut xp = x.to_vec();
        let (mut fp, mut fm) = (vec![0.0; d], vec![0.0; d]);
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.eval(&xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval(&xp, &mut fm);
            xp[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_independent_field_is_its_own_average() {
        let sys = PerturbedSystem::new(2, 2, 1.0, 10.0, |x, _, o| {
            o[0] = libm::sin(x[1]);
            o[1] = 0.3 * x[0];
        });
        let avg = average_field(&sys, 8).unwrap();
        let x = [0.4, -1.1];
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        avg.eval(&x, &mut a);
        sys.eval(&x, &[0.123, 0.9], &mut b);
        assert!(sup_diff(&a, &b) < 1e-15);
    }

    #[test]
    fn pure_fluctuation_averages_to_zero() {
        let sys = PerturbedSystem::new(2, 2, 0.0, 1.0, |_, w, o| {
            o[0] = libm::cos(TAU * w[0]);
            o[1] = libm::cos(TAU * w[1]);
        });
        let avg = average_field(&sys, 4).unwrap();
        let mut a = [1.0; 2];
        avg.eval(&[3.0, 4.0], &mut a);
        assert!(sup_norm(&a) < 1e-15);
    }

    #[test]
    fn sine_forcing_averages_to_linear_decay() {
        let sys = PerturbedSystem::new(2, 2, 1.0, 3.0, |x, w, o| {
            o[0] = -x[0] + libm::sin(TAU * w[0]);
            o[1] = -x[1];
        });
        let avg = average_field(&sys, 64).unwrap();
        // Independent oracle: 1-D Simpson on the first coordinate only.
        let m = 4096;
        let h = 1.0 / m as f64;
        let mut simpson = 0.0;
        for i in 0..=m {
            let wgt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            simpson += wgt * libm::sin(TAU * i as f64 * h);
        }
        simpson *= h / 3.0;
        let x = [0.7, -0.2];
        let mut a = [0.0; 2];
        avg.eval(&x, &mut a);
        assert!((a[0] - (-0.7 + simpson)).abs() < 1e-12);
        assert!((a[1] - 0.2).abs() < 1e-13);
    }

    #[test]
    fn jacobians_agree_with_finite_differences() {
        let sys = PerturbedSystem::coupled_cat();
        let avg = average_field(&sys, 16).unwrap();
        let x = [0.3, 1.2];
        let (mut ja, mut jf) = ([0.0; 4], [0.0; 4]);
        avg.jacobian(&x, &mut ja);
        avg.jacobian_fd(&x, &mut jf);
        assert!(sup_diff(&ja, &jf) < 1e-8, "{ja:?} vs {jf:?}");
    }

    #[test]
    fn declared_bounds_hold_for_built_in_systems() {
        for sys in [PerturbedSystem::default_cat(), PerturbedSystem::coupled_cat()] {
            let (s, l) = sys.check_declared_bounds(20_000, 1).unwrap();
            assert!(s <= 1.0 + 1e-12 && l <= 1.0 + 1e-12);
            let avg = average_field(&sys, 32).unwrap();
            // F̄ inherits the Lipschitz constant.
            let mut rng = stream(2, domain::HOLDER_PAIRS, 0);
            for _ in 0..500 {
                let x: Vec<f64> = (0..2).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
                let y: Vec<f64> = (0..2).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
                let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
                avg.eval(&x, &mut a);
                avg.eval(&y, &mut b);
                assert!(sup_diff(&a, &b) <= sys.lipschitz() * sup_diff(&x, &y) + 1e-12);
            }
        }
    }

    #[test]
    fn understated_lipschitz_is_rejected() {
        let sys = PerturbedSystem::new(1, 1, 0.5, 10.0, |x, _, o| o[0] = x[0]);
        assert!(sys.check_declared_bounds(100, 3).is_err());
    }
}
