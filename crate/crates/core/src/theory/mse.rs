//! MSE difference between the alternating-day design and an `m`-switchback
//! design that is driven by reward autocorrelation.
//!
//! All quantities are scaled by `n` (the number of days): divide by `n` to
//! compare with finite-sample MSEs.

use nalgebra::DVector;
use serde::Serialize;

use crate::covariance::ErrorCovSpec;
use crate::error::{Error, Result};

fn check_block(horizon: usize, m: usize) -> Result<()> {
    if m == 0 || horizon == 0 || horizon % m != 0 {
        return Err(Error::Config(format!("m must divide T (m={m}, T={horizon})")));
    }
    Ok(())
}

/// `(16/T²) Σ_{0≤k1<k2<T/m, k2−k1 odd} Σ_{l1,l2=1}^m σ_e(l1 + k1 m, l2 + k2 m)`.
pub fn autocorr_term(spec: &ErrorCovSpec, horizon: usize, m: usize) -> Result<f64> {
    check_block(horizon, m)?;
    spec.validate_for(horizon)?;
    let blocks = horizon / m;
    let mut total = 0.0;
    for k1 in 0..blocks {
        for k2 in (k1 + 1..blocks).step_by(2) {
            for l1 in 0..m {
                for l2 in 0..m {
                    total += spec.covariance(l1 + k1 * m, l2 + k2 * m);
                }
            }
        }
    }
    Ok(16.0 * total / (horizon * horizon) as f64)
}

/// `(4/T²)[Var(Σ_t e_t) − Var(Σ_t s_t e_t)]` with `s_t = ±1` alternating
/// per block: the difference in (scaled) variance of the plug-in contrast
/// between the alternating-day design and the `m`-switchback.
pub fn toy_signed_sum_diff(spec: &ErrorCovSpec, horizon: usize, m: usize) -> Result<f64> {
    check_block(horizon, m)?;
    let cov = spec.cov_matrix(horizon)?;
    let ones = DVector::from_element(horizon, 1.0);
    let signs = DVector::from_fn(horizon, |t, _| if (t / m) % 2 == 0 { 1.0 } else { -1.0 });
    let q = |v: &DVector<f64>| v.dot(&(&cov * v));
    Ok(4.0 * (q(&ones) - q(&signs)) / (horizon * horizon) as f64)
}

/// Large-`T` value of [`autocorr_term`] for autoregressive errors:
/// `16σ²ρ(1−ρ^m) / (mT(1−ρ)²(1+ρ^m))`.
pub fn cor1_closed_form(rho: f64, variance: f64, horizon: usize, m: usize) -> Result<f64> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Config(format!("autoregressive coefficient must lie in (-1, 1), got {rho}")));
    }
    if m == 0 || horizon == 0 {
        return Err(Error::Config("m and T must be positive".into()));
    }
    let rm = rho.powi(m as i32);
    Ok(16.0 * variance * rho * (1.0 - rm) / (m as f64 * horizon as f64 * (1.0 - rho).powi(2) * (1.0 + rm)))
}

/// Exact value for moving-average errors of window `K` when `m ≥ K`:
/// `8σ²(T/m − 1)(K² − 1) / (3T²)`.
pub fn cor2_closed_form(window: usize, variance: f64, horizon: usize, m: usize) -> Result<f64> {
    check_block(horizon, m)?;
    if m < window {
        return Err(Error::Config(format!("closed form requires m >= K (m={m}, K={window})")));
    }
    let (t, k) = (horizon as f64, window as f64);
    Ok(8.0 * variance * (t / m as f64 - 1.0) * (k * k - 1.0) / (3.0 * t * t))
}

/// Exact value for exchangeable errors: `4σ²ρ` when `T/m` is even and
/// `4σ²ρ(1 − m²/T²)` when it is odd.
pub fn cor3_closed_form(rho: f64, variance: f64, horizon: usize, m: usize) -> Result<f64> {
    check_block(horizon, m)?;
    let base = 4.0 * variance * rho;
    if (horizon / m) % 2 == 0 {
        Ok(base)
    } else {
        let r = m as f64 / horizon as f64;
        Ok(base * (1.0 - r * r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    /// Large-`T` asymptote (autoregressive).
    Asymptotic,
    /// Exact for this `(T, m)`.
    Exact,
}

/// Alternating-day versus `m`-switchback comparison for one block length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseDiffReport {
    pub horizon: usize,
    pub m: usize,
    pub autocorr_term: f64,
    pub closed_form: Option<f64>,
    pub closed_form_kind: Option<ClosedFormKind>,
    pub oracle_value: Option<f64>,
}

pub fn mse_diff_report(spec: &ErrorCovSpec, horizon: usize, m: usize) -> Result<MseDiffReport> {
    let term = autocorr_term(spec, horizon, m)?;
    let oracle = toy_signed_sum_diff(spec, horizon, m)?;
    let closed = match *spec {
        ErrorCovSpec::Autoregressive { rho, variance } => {
            Some((cor1_closed_form(rho, variance, horizon, m)?, ClosedFormKind::Asymptotic))
        }
        ErrorCovSpec::MovingAverage { window, variance } if m >= window => {
            Some((cor2_closed_form(window, variance, horizon, m)?, ClosedFormKind::Exact))
        }
        ErrorCovSpec::MovingAverage { .. } => None,
        ErrorCovSpec::Exchangeable { rho, variance } => {
            Some((cor3_closed_form(rho, variance, horizon, m)?, ClosedFormKind::Exact))
        }
        ErrorCovSpec::Uncorrelated { .. } => Some((0.0, ClosedFormKind::Exact)),
    };
    Ok(MseDiffReport {
        horizon,
        m,
        autocorr_term: term,
        closed_form: closed.map(|c| c.0),
        closed_form_kind: closed.map(|c| c.1),
        oracle_value: Some(oracle),
    })
}

/// Divisors of `horizon` in increasing order.
pub fn divisors(horizon: usize) -> Vec<usize> {
    (1..=horizon).filter(|m| horizon % m == 0).collect()
}
