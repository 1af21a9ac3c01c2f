//! Averaging for ODEs driven by a map: `dx/dt = F(x, T^{⌊t/ε⌋}ω)` against the averaged
//! flow `dw/dt = F̄(w)`, the error `e = x − w`, the fluctuation integral `v`, its linear
//! response `y`, the limit covariance `Σ_F` and the rate experiments built on them.

mod experiments;
mod fluctuation;
mod integrate;
mod path;
mod sigma;
mod special;
mod system;

pub use experiments::{
    approximant_gap, averaging_rate_experiment, gronwall_ensemble, reciprocal_rounding_gap, substep_sensitivity,
    sup_error_lp_scaling, AveragingRateConfig, AveragingRateReport, AveragingRateRow, EnsembleConfig, EnsembleStat,
    GapFit, GapReport, GapRow, GronwallSummary, LpFit, LpScalingReport, ZERO_TOL,
};
pub use fluctuation::{
    error_on_grid, fluctuations, gronwall_check, realize, v_process, y_process, Fluctuations, GronwallReport,
    Realization, DEFAULT_SUBSTEPS, GRONWALL_SLACK, RESIDUAL_TOL,
};
pub use integrate::{error_process, integrate_averaged, integrate_on_grid, integrate_perturbed, KinkGrid, Trajectory};
pub use path::MeanPath;
pub use system::{average_field, AveragedField, FieldFn, JacobianFn, MeanFn, PerturbedSystem};
pub use sigma::{
    compare_estimates, direct_sigma, pointwise_nondegeneracy, sigma_f, KernelFamily, SigmaComparison, SigmaConfig,
    SigmaEstimate,
};
pub use special::{flow_stopped_reference, special_flow_gap, special_flow_reduce, FlowFieldFn, SpecialFlowGap, SpecialFlowReduction};
