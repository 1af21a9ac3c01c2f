use std::path::PathBuf;

use crate::config::{ConfigErrors, ExperimentKind};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error("experiment `{kind}` failed: {source}")]
    Experiment {
        kind: ExperimentKind,
        #[source]
        source: limitlab_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("run record: {0}")]
    Record(#[from] serde_json::Error),
    #[error("measure file {path}: {message}")]
    Measure { path: PathBuf, message: String },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}
