//! Monte Carlo harness: experiments, metrics, residual diagnostics,
//! bootstrap confidence intervals and resumable sweeps.

mod ci;
mod experiment;
mod metrics;
mod residuals;
mod sweep;

pub use ci::{bootstrap_ci, percentile_interval, run_ci, CiConfig, CiReport, CiRunConfig, CiSource, Interval};
pub use experiment::{
    run_experiment, simulate_from_config, CellKey, CellReport, CoefficientMode, DgpConfig, Experiment,
    ExperimentConfig, ExperimentReport, SimulationConfig, SimulationOutput, TruthMode,
};
pub use metrics::{aggregate_metrics, metrics_from_errors, proportion_se, MetricSe, Metrics};
pub use residuals::{residual_correlation, ResidualCorrelation};
pub use sweep::{report_rows, run_sweep, write_rows, SweepManifest, SweepOptions, SweepOutcome, SweepRow};
