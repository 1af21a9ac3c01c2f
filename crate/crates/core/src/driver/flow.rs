use alloc::vec::Vec;

use super::observable::Observable;
use super::torus::{ToralAutomorphism, TorusPoint};
use super::MapDriver;
use crate::error::{invalid, Error, Result};
use crate::rng::{domain, stream};

/// Suspension flow over a toral automorphism under a roof `τ` with
/// `0 < roof_inf ≤ τ ≤ roof_sup < ∞`.
#[derive(Debug, Clone)]
pub struct SpecialFlowSystem {
    base: ToralAutomorphism,
    roof: Observable,
    roof_inf: f64,
    roof_sup: f64,
}

/// Point `(ω, s)` of the suspension with `0 ≤ s < τ(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint {
    pub base_point: TorusPoint,
    pub height: f64,
}

impl FlowPoint {
    pub fn on_base(base_point: TorusPoint) -> Self {
        Self { base_point, height: 0.0 }
    }
}

impl SpecialFlowSystem {
    /// Validates the declared roof bounds on a 4096-point random sample.
    pub fn new(base: ToralAutomorphism, roof: Observable, roof_inf: f64, roof_sup: f64) -> Result<Self> {
        if roof.dim_out() != 1 || roof.dim_in() != base.dim() {
            return Err(invalid("roof must map the base torus to R"));
        }
        if !(roof_inf > 0.0 && roof_inf <= roof_sup && roof_sup.is_finite()) {
            return Err(invalid("roof bounds must satisfy 0 < inf ≤ sup < ∞"));
        }
        let sys = Self { base, roof, roof_inf, roof_sup };
        let mut rng = stream(0x0F10_u64, domain::INITIAL_POINTS, 0);
        for _ in 0..4096 {
            let w = sys.base.sample_invariant(&mut rng);
            sys.roof_at(&w)?;
        }
        Ok(sys)
    }

    /// Roof `1 + amplitude·cos 2πω₁`.
    pub fn cosine_roof(base: ToralAutomorphism, amplitude: f64) -> Result<Self> {
        let d = base.dim();
        let roof = Observable::new(d, 1, 1.0, move |w, out| {
            out[0] = 1.0 + amplitude * libm::cos(core::f64::consts::TAU * w[0]);
        });
        let a = libm::fabs(amplitude);
        Self::new(base, roof, 1.0 - a, 1.0 + a)
    }

    pub fn base(&self) -> &ToralAutomorphism {
        &self.base
    }

    pub fn roof(&self) -> &Observable {
        &self.roof
    }

    pub fn roof_inf(&self) -> f64 {
        self.roof_inf
    }

    pub fn roof_sup(&self) -> f64 {
        self.roof_sup
    }

    /// `τ(ω)`, rejecting values outside the declared bounds.
    pub fn roof_at(&self, w: &TorusPoint) -> Result<f64> {
        let mut v = [0.0];
        self.roof.eval_into(w.coords(), &mut v);
        let r = v[0];
        if !(r >= self.roof_inf && r <= self.roof_sup) {
            return Err(Error::InconsistentRoof { value: r, inf: self.roof_inf, sup: self.roof_sup });
        }
        Ok(r)
    }

    /// `Y_t(ω, s) = (ω, s + t)` with `(ω, τ(ω)) ≡ (Tω, 0)`.
    pub fn evolve(&self, p: &FlowPoint, t: f64) -> Result<FlowPoint> {
        if !(t >= 0.0) {
            return Err(invalid("flow time must be nonnegative"));
        }
        let mut w = p.base_point.clone();
        let mut h = p.height + t;
        loop {
            let r = self.roof_at(&w)?;
            if h < r {
                return Ok(FlowPoint { base_point: w, height: h });
            }
            h -= r;
            self.base.advance(&mut w);
        }
    }

    /// `n(t, ω) = max{n ≥ 0 : Σ_{k<n} τ(T^k ω) ≤ t}`.
    pub fn crossing_count(&self, w: &TorusPoint, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(invalid("flow time must be nonnegative"));
        }
        let mut w = w.clone();
        let mut acc = 0.0;
        let mut n = 0;
        loop {
            let r = self.roof_at(&w)?;
            if acc + r > t {
                return Ok(n);
            }
            acc += r;
            n += 1;
            self.base.advance(&mut w);
        }
    }

    /// Roof values `τ(T^k ω)` for `k < n`.
    pub fn roof_sequence(&self, w: &TorusPoint, n: usize) -> Result<Vec<f64>> {
        let mut w = w.clone();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.roof_at(&w)?);
            self.base.advance(&mut w);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit_roof() -> SpecialFlowSystem {
        SpecialFlowSystem::cosine_roof(ToralAutomorphism::cat_map(), 0.0).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let sys = SpecialFlowSystem::cosine_roof(ToralAutomorphism::cat_map(), 0.3).unwrap();
        let p = FlowPoint { base_point: TorusPoint::new(vec![0.3, 0.6]), height: 0.2 };
        assert_eq!(sys.evolve(&p, 0.0).unwrap(), p);
        assert_eq!(sys.crossing_count(&p.base_point, 0.0).unwrap(), 0);
    }

    #[test]
    fn constant_roof_reduces_to_integer_steps() {
        let sys = unit_roof();
        let w = TorusPoint::new(vec![0.5, 0.25]);
        let q = sys.evolve(&FlowPoint::on_base(w.clone()), 2.5).unwrap();
        let cat = ToralAutomorphism::cat_map();
        assert_eq!(q.base_point, cat.step_point(&cat.step_point(&w)));
        assert!((q.height - 0.5).abs() < 1e-15);
        for t in [0.0, 0.5, 1.0, 3.7, 10.0] {
            assert_eq!(sys.crossing_count(&w, t).unwrap(), libm::floor(t) as usize);
        }
    }

    #[test]
    fn inconsistent_roof_is_rejected() {
        let roof = Observable::new(2, 1, 1.0, |w, out| out[0] = 0.2 + w[0]);
        let err = SpecialFlowSystem::new(ToralAutomorphism::cat_map(), roof, 0.5, 2.0).unwrap_err();
        assert!(matches!(err, Error::InconsistentRoof { .. }));
    }
}
