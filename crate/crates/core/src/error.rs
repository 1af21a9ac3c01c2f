use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("automorphism rejected: {0}")]
    InvalidAutomorphism(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("support of {got} atoms exceeds the cap of {cap}")]
    SupportTooLarge { got: usize, cap: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("roof value {value} outside declared bounds [{inf}, {sup}]")]
    InconsistentRoof { value: f64, inf: f64, sup: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("averaged solution exceeded 1e12 at t = {0}")]
    BlowUp(f64),
    #[error("integral-equation residual {0:e} exceeds 1e-6")]
    Residual(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
