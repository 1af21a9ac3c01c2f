//! Finite-support probability measures and the Prokhorov, Ky Fan and bounded-Lipschitz
//! distances between them.
//!
//! All distances use the sup-norm `|·|_∞` on `R^d`.

mod bl;
mod kyfan;
pub mod lp;
mod maxflow;
mod measure;
mod prokhorov;

pub use bl::{bounded_lipschitz, BL_SUPPORT_CAP};
pub use kyfan::{ky_fan, ky_fan_weighted};
pub use measure::{gaussian_sample, CoupledSample, FiniteMeasure, GaussianSpec};
pub use prokhorov::{
    coupling_kyfan_upper, prokhorov, prokhorov_one_sided_oracle, prokhorov_oracle,
    strassen_coupling, StrassenCoupling, ORACLE_SUPPORT_CAP,
};

/// `|x − y|_∞`.
pub fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0_f64, |acc, (a, b)| acc.max(libm::fabs(a - b)))
}
