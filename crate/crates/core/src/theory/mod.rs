//! Design theory: autocorrelation-driven MSE differences, exact oracles on
//! finite MDPs, and the design advisor.

mod advisor;
mod discrete;
mod mse;

pub use advisor::{
    recommend_design, Advice, AdvisorThresholds, CarryoverEvidence, CorrelationEvidence, Recommendation, WorkflowInput,
};
pub use discrete::{brute_force_ate_discrete, compute_delta, discretize_linear_1d, policy_value};
pub use mse::{
    autocorr_term, cor1_closed_form, cor2_closed_form, cor3_closed_form, divisors, mse_diff_report,
    toy_signed_sum_diff, ClosedFormKind, MseDiffReport,
};
