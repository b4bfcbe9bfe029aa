//! Accuracy metrics over Monte Carlo replications.
//!
//! Conventions: `bias` is the mean error, `sd` the sample standard deviation
//! (divisor `B - 1`) and `rmse` the root mean squared error, so
//! `rmse² = bias² + sd² (B - 1) / B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Number of replications aggregated.
    pub reps: usize,
    pub rmse: f64,
    pub bias: f64,
    pub sd: f64,
    pub mse: f64,
    /// `ln(mse)`; missing when the MSE is exactly zero.
    pub log_mse: Option<f64>,
    pub se: MetricSe,
}

/// Monte Carlo standard errors of the metrics; missing with a single
/// replication or where the delta method degenerates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSe {
    pub rmse: Option<f64>,
    pub bias: Option<f64>,
    pub sd: Option<f64>,
    pub mse: Option<f64>,
    pub log_mse: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64], centre: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - centre).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Metrics of estimation errors `estimate - truth`, one per replication.
/// Use this form when the truth changes between replications.
pub fn metrics_from_errors(errors: &[f64]) -> Result<Metrics> {
    if errors.is_empty() {
        return Err(Error::InsufficientData("no estimates to aggregate".into()));
    }
    let b = errors.len();
    let bias = mean(errors);
    let sd = sample_sd(errors, bias);
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = mean(&squares);
    let rmse = mse.sqrt();
    let log_mse = (mse > 0.0).then(|| mse.ln());

    let se = if b > 1 {
        let root_b = (b as f64).sqrt();
        let se_mse = sample_sd(&squares, mse) / root_b;
        MetricSe {
            bias: Some(sd / root_b),
            sd: Some(sd / (2.0 * (b - 1) as f64).sqrt()),
            mse: Some(se_mse),
            rmse: (rmse > 0.0).then(|| se_mse / (2.0 * rmse)),
            log_mse: (mse > 0.0).then(|| se_mse / mse),
        }
    } else {
        MetricSe::default()
    };
    Ok(Metrics {
        reps: b,
        rmse,
        bias,
        sd,
        mse,
        log_mse,
        se,
    })
}

/// Metrics of `estimates` against a single known truth.
pub fn aggregate_metrics(estimates: &[f64], truth: f64) -> Result<Metrics> {
    let errors: Vec<f64> = estimates.iter().map(|x| x - truth).collect();
    metrics_from_errors(&errors)
}

/// Standard error of a binomial proportion.
pub fn proportion_se(p: f64, count: usize) -> f64 {
    if count == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / count as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_estimates() {
        let m = aggregate_metrics(&[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!((m.rmse, m.bias, m.sd), (0.0, 0.0, 0.0));
        assert_eq!(m.log_mse, None);
    }

    #[test]
    fn two_points() {
        let m = aggregate_metrics(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.bias, 0.0);
        assert!((m.sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.log_mse, Some(0.0));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(aggregate_metrics(&[], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mse_decomposes(xs in prop::collection::vec(-50.0f64..50.0, 1..40), truth in -10.0f64..10.0) {
            let m = aggregate_metrics(&xs, truth).unwrap();
            let b = xs.len() as f64;
            let rhs = m.bias * m.bias + m.sd * m.sd * (b - 1.0) / b;
            prop_assert!((m.rmse * m.rmse - rhs).abs() <= 1e-10 * (1.0 + rhs));
        }
    }
}
