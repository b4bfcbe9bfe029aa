//! Gaussian reward-error vectors with a prescribed temporal covariance.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::ErrorCovSpec;
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::rng::Rng;

/// Pre-computed sampler for one day's reward errors `(e_1, …, e_T)`.
///
/// Autoregressive errors use the recursion with a stationary start and
/// moving-average errors are `K^{-1/2}` times a sliding sum over the next `K`
/// innovations, so both match their closed-form covariances at every lag.
/// Other families go through a factor of the covariance matrix.
#[derive(Debug, Clone)]
pub struct RewardNoise {
    horizon: usize,
    kind: NoiseKind,
}

#[derive(Debug, Clone)]
enum NoiseKind {
    White { sd: f64 },
    Autoregressive { rho: f64, sd: f64 },
    MovingAverage { window: usize, sd: f64 },
    Factor(DMatrix<f64>),
}

impl RewardNoise {
    pub fn new(spec: &ErrorCovSpec, horizon: usize) -> Result<Self> {
        spec.validate_for(horizon)?;
        let kind = match *spec {
            ErrorCovSpec::Uncorrelated { variance } => NoiseKind::White { sd: variance.sqrt() },
            ErrorCovSpec::Autoregressive { rho, variance } => NoiseKind::Autoregressive { rho, sd: variance.sqrt() },
            ErrorCovSpec::MovingAverage { window, variance } => NoiseKind::MovingAverage {
                window,
                sd: variance.sqrt(),
            },
            ErrorCovSpec::Exchangeable { .. } => {
                let cov = spec.cov_matrix(horizon)?;
                let l = psd_factor(&cov)
                    .ok_or_else(|| Error::Config("reward-error covariance is not positive semi-definite".into()))?;
                NoiseKind::Factor(l)
            }
        };
        Ok(RewardNoise { horizon, kind })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sample(&self, rng: &mut Rng) -> DVector<f64> {
        let t_len = self.horizon;
        let mut z = || -> f64 { StandardNormal.sample(rng) };
        match &self.kind {
            NoiseKind::White { sd } => DVector::from_fn(t_len, |_, _| sd * z()),
            NoiseKind::Autoregressive { rho, sd } => {
                let innov = sd * (1.0 - rho * rho).sqrt();
                let mut out = DVector::zeros(t_len);
                let mut prev = sd * z();
                out[0] = prev;
                for t in 1..t_len {
                    prev = rho * prev + innov * z();
                    out[t] = prev;
                }
                out
            }
            NoiseKind::MovingAverage { window, sd } => {
                let k = *window;
                let eps: Vec<f64> = (0..t_len + k).map(|_| sd * z()).collect();
                let scale = 1.0 / (k as f64).sqrt();
                // e_t = K^{-1/2} (ε_{t+1} + … + ε_{t+K}) with 1-based ε
                let mut window_sum: f64 = eps[1..=k].iter().sum();
                let mut out = DVector::zeros(t_len);
                for t in 0..t_len {
                    if t > 0 {
                        window_sum += eps[t + k] - eps[t];
                    }
                    out[t] = scale * window_sum;
                }
                out
            }
            NoiseKind::Factor(l) => {
                let zs = DVector::from_fn(t_len, |_, _| z());
                l * zs
            }
        }
    }
}

/// One draw of the reward-error vector for a day of `horizon` intervals.
pub fn sample_reward_errors(spec: &ErrorCovSpec, horizon: usize, rng: &mut Rng) -> Result<DVector<f64>> {
    Ok(RewardNoise::new(spec, horizon)?.sample(rng))
}

/// Draws `N(mean, L Lᵀ)` given a factor `L`.
pub(crate) fn gaussian_draw(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut Rng) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(rng));
    mean + factor * z
}
