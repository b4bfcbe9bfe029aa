//! Panel generation and truth oracles.

mod bootstrap;
mod dgp;
mod noise;

pub use bootstrap::{fit_bootstrap_env, gcv_grid, simulate_bootstrap, synthetic_aa_source, AaSourceConfig, BootstrapEnv};
pub use dgp::{simulate, simulate_linear, simulate_nonlinear, true_ate_linear, true_ate_mc, McTruth};
pub use noise::{sample_reward_errors, RewardNoise};
