//! IO, configuration, caching and the command line around `limitlab-core`.

pub mod config;
pub mod error;
pub mod executor;
pub mod experiments;
pub mod measure_io;
pub mod plot;
pub mod runner;
pub mod selftest;
pub mod table;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use error::{LabError, Result};
pub use executor::PoolExecutor;
pub use runner::{run, RunOptions, RunRecord};
