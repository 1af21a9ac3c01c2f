//! Birkhoff sums, asymptotic covariance, decorrelation profiles and CLT rate
//! experiments.

mod charfn;
mod covariance;
mod decorrelation;
mod rate;
mod sums;

pub use charfn::{char_discrepancy, yurinskii_integral};
pub use covariance::{
    asymptotic_covariance, covariance_congruence_check, sum_covariance, CongruenceReport,
    CovarianceEstimate, DEFAULT_LAG_CAP,
};
pub(crate) use covariance::lag_series_sample;
pub use decorrelation::{decorrelation_profile, DecorrelationFit, DecorrelationProfile};
pub use rate::{
    clt_rate_experiment, coboundary_degenerate_experiment, CltRateConfig, CltRateReport,
    CltRateRow, CoboundaryReport, CoboundaryRow, DegeneracyMode, DEGENERACY_THRESHOLD,
};
pub use sums::{
    birkhoff_sum, birkhoff_sums_at, center_observable, check_centered, lebesgue_mean,
    IidSummand, CENTERING_TOL,
};
