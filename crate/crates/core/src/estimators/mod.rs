//! Treatment-effect estimators.
//!
//! Every estimator is addressable by a short id (see [`EstimatorId`]) and
//! dispatched through [`run_estimator`].

mod baselines;
mod basis;
mod drl;
mod lstd;
mod mlstd;
mod ols;
mod ratio;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{estimate_burnin_dim, estimate_multistep_is, estimate_simple_is, BurnInEstimate};
pub use basis::Basis;
pub use drl::{
    drl_equals_lstd_check, drl_lstd_gap, drl_with, estimate_drl, fold_assignment, lstd_implied_ratio, psi,
    DrlConfig, LinearRatio, LstdIdentity, Nuisance, RatioNuisance, UnitRatio, ValueNuisance, ZeroValue,
};
pub use lstd::{estimate_lstd, fit_lstd, lstd_residual, LstdCoeffs};
pub use mlstd::estimate_lstd_modified;
pub use ols::{ate_ols, estimate_ols, fit_ols, value_model_based, OlsFit};
pub use ratio::RatioModel;

use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::panel::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorId {
    Ols,
    Lstd,
    Mlstd,
    Drl,
    Msis,
    Burnin,
    Sis,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 7] = [
        EstimatorId::Ols,
        EstimatorId::Lstd,
        EstimatorId::Mlstd,
        EstimatorId::Drl,
        EstimatorId::Msis,
        EstimatorId::Burnin,
        EstimatorId::Sis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::Ols => "ols",
            EstimatorId::Lstd => "lstd",
            EstimatorId::Mlstd => "mlstd",
            EstimatorId::Drl => "drl",
            EstimatorId::Msis => "msis",
            EstimatorId::Burnin => "burnin",
            EstimatorId::Sis => "sis",
        }
    }

    /// Baselines are run on data from the regular Bernoulli switchback with
    /// the same block length; the RL estimators use the deterministic design.
    pub fn is_baseline(&self) -> bool {
        matches!(self, EstimatorId::Msis | EstimatorId::Burnin | EstimatorId::Sis)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator id {s:?}")))
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(id: EstimatorId) -> String {
        id.as_str().to_string()
    }
}

/// Tuning shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub basis: Basis,
    pub drl: DrlConfig,
    /// Burn-in of the difference in means; defaults to `min(1, m - 1)`.
    pub burn_in: Option<usize>,
    /// Look-back of multi-step importance sampling; defaults to `m`.
    pub lookback: Option<usize>,
}

/// Runs estimator `id` on a panel collected under `design`.
pub fn run_estimator(id: EstimatorId, panel: &Panel, design: &DesignSpec, opts: &EstimatorOptions) -> Result<f64> {
    match id {
        EstimatorId::Ols => estimate_ols(panel),
        EstimatorId::Lstd => estimate_lstd(panel, opts.basis),
        EstimatorId::Mlstd => estimate_lstd_modified(panel, opts.basis),
        EstimatorId::Drl => estimate_drl(panel, design, &DrlConfig { basis: opts.basis, ..opts.drl }),
        EstimatorId::Msis => estimate_multistep_is(panel, design, opts.lookback),
        EstimatorId::Burnin => {
            let b = opts.burn_in.unwrap_or_else(|| 1.min(design.block() - 1));
            Ok(estimate_burnin_dim(panel, design, b)?.estimate)
        }
        EstimatorId::Sis => Ok(estimate_simple_is(panel)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in EstimatorId::ALL {
            assert_eq!(id.as_str().parse::<EstimatorId>().unwrap(), id);
        }
        assert!("bogus".parse::<EstimatorId>().is_err());
        let v: Vec<EstimatorId> = serde_json::from_str(r#"["ols","drl"]"#).unwrap();
        assert_eq!(v, vec![EstimatorId::Ols, EstimatorId::Drl]);
    }
}
