//! Numerical laboratory for multidimensional limit theorems of chaotic dynamical systems.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithm; IO, configuration
//! and the command line live in the companion `limitlab` crate.
//!
//! - [`driver`]: toral automorphisms, Hölder observables, suspension flows.
//! - [`metrics`]: finite-support measures with exact Prokhorov, Ky Fan and
//!   bounded-Lipschitz distances.
//! - [`clt`]: Birkhoff sums, asymptotic covariance series, CLT rate experiments.
//! - [`averaging`]: ODEs driven by a map, the averaged flow, error processes and their
//!   Gaussian approximants.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected; numeric kernels index
// several parallel buffers in one loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;

pub mod averaging;
pub mod clt;
pub mod driver;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
