//! Reward-error covariance families.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;

/// Covariance family of the within-day reward errors `e_1..e_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorCovSpec {
    /// `σ² ρ^|t1-t2|`
    Autoregressive { rho: f64, variance: f64 },
    /// `e_t = K^{-1/2} Σ_{k=1..K} ε_{t+k}`, so the covariance is `σ² [K-|t1-t2|]_+ / K`.
    MovingAverage { window: usize, variance: f64 },
    /// `σ²` on the diagonal, `σ² ρ` elsewhere.
    Exchangeable { rho: f64, variance: f64 },
    Uncorrelated { variance: f64 },
}

impl ErrorCovSpec {
    pub fn variance(&self) -> f64 {
        match *self {
            ErrorCovSpec::Autoregressive { variance, .. }
            | ErrorCovSpec::MovingAverage { variance, .. }
            | ErrorCovSpec::Exchangeable { variance, .. }
            | ErrorCovSpec::Uncorrelated { variance } => variance,
        }
    }

    /// Checks the parameter ranges that do not depend on the horizon.
    pub fn validate(&self) -> Result<()> {
        let variance = self.variance();
        // Zero variance is admitted so that noiseless panels can be simulated.
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::Config(format!("error variance must be non-negative, got {variance}")));
        }
        match *self {
            ErrorCovSpec::Autoregressive { rho, .. } | ErrorCovSpec::Exchangeable { rho, .. } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return Err(Error::Config(format!("correlation must lie in (-1, 1), got {rho}")));
                }
            }
            ErrorCovSpec::MovingAverage { window, .. } => {
                if window == 0 {
                    return Err(Error::Config("moving-average window must be at least 1".into()));
                }
            }
            ErrorCovSpec::Uncorrelated { .. } => {}
        }
        Ok(())
    }

    /// Checks admissibility for a day of `horizon` intervals (PSD requirement).
    pub fn validate_for(&self, horizon: usize) -> Result<()> {
        self.validate()?;
        if let ErrorCovSpec::Exchangeable { rho, .. } = *self {
            if horizon > 1 {
                let limit = -1.0 / (horizon as f64 - 1.0);
                if rho < limit - 1e-15 {
                    return Err(Error::Config(format!(
                        "exchangeable correlation {rho} is below the PSD limit {limit} for T={horizon}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `σ_e(t1, t2)`; only the lag (and equality) of the indices matters.
    pub fn covariance(&self, t1: usize, t2: usize) -> f64 {
        let lag = t1.abs_diff(t2);
        match *self {
            ErrorCovSpec::Autoregressive { rho, variance } => variance * rho.powi(lag as i32),
            ErrorCovSpec::MovingAverage { window, variance } => {
                variance * window.saturating_sub(lag) as f64 / window as f64
            }
            ErrorCovSpec::Exchangeable { rho, variance } => {
                if lag == 0 {
                    variance
                } else {
                    variance * rho
                }
            }
            ErrorCovSpec::Uncorrelated { variance } => {
                if lag == 0 {
                    variance
                } else {
                    0.0
                }
            }
        }
    }

    /// The `T x T` covariance matrix.
    pub fn cov_matrix(&self, horizon: usize) -> Result<DMatrix<f64>> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.validate_for(horizon)?;
        let m = DMatrix::from_fn(horizon, horizon, |i, j| self.covariance(i, j));
        let scale = self.variance();
        if min_eigenvalue(&m) < -1e-10 * scale.max(1.0) {
            return Err(Error::Config(format!("covariance {self:?} is not PSD for T={horizon}")));
        }
        Ok(m)
    }

    /// Short tag used in CSV outputs, e.g. `ar:0.9`.
    pub fn label(&self) -> String {
        match *self {
            ErrorCovSpec::Autoregressive { rho, .. } => format!("ar:{rho}"),
            ErrorCovSpec::MovingAverage { window, .. } => format!("ma:{window}"),
            ErrorCovSpec::Exchangeable { rho, .. } => format!("exch:{rho}"),
            ErrorCovSpec::Uncorrelated { .. } => "uncorr".to_string(),
        }
    }
}
