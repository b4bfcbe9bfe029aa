//! Panel simulation from the linear and nonlinear processes, and the Monte
//! Carlo truth oracle.

use nalgebra::{DMatrix, DVector};

use super::noise::{gaussian_draw, RewardNoise};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::{Dgp, LinearDgpParams, NonlinearDgpParams};
use crate::panel::Panel;
use crate::rng::Rng;

struct Factors {
    init: DMatrix<f64>,
    state: DMatrix<f64>,
}

fn factors(params: &LinearDgpParams) -> Result<Factors> {
    params.validate()?;
    let init = psd_factor(&params.init_cov)
        .ok_or_else(|| Error::Config("initial-state covariance is not positive semi-definite".into()))?;
    let state = psd_factor(&params.state_noise_cov)
        .ok_or_else(|| Error::Config("state-noise covariance is not positive semi-definite".into()))?;
    Ok(Factors { init, state })
}

/// Simulates one panel. Per day the stream is consumed in a fixed order
/// (initial state, reward errors, transition noise) that does not depend on
/// the actions, so two designs fed the same stream see common random numbers.
pub fn simulate(dgp: &Dgp, actions: &DMatrix<u8>, rng: &mut Rng) -> Result<Panel> {
    let params = dgp.params();
    let t_len = params.horizon();
    let d = params.dim();
    if actions.ncols() != t_len {
        return Err(Error::Dimension(format!(
            "action matrix has {} intervals, the process has {t_len}",
            actions.ncols()
        )));
    }
    let f = factors(params)?;
    let noise = RewardNoise::new(&params.reward_cov, t_len)?;
    let m = &params.model;
    let n = actions.nrows();
    let zero = DVector::zeros(d);

    let mut states = vec![DMatrix::zeros(n, d); t_len];
    let mut rewards = DMatrix::zeros(n, t_len);
    for i in 0..n {
        let mut s = gaussian_draw(&params.init_mean, &f.init, rng);
        let e = noise.sample(rng);
        for t in 0..t_len {
            let a = actions[(i, t)];
            states[t].set_row(i, &s.transpose());
            rewards[(i, t)] = dgp.reward_mean(t, a, &s) + e[t];
            if t + 1 < t_len {
                let mean = &m.drift[t] + &m.transition[t] * &s + &m.carryover[t] * a as f64;
                s = mean + gaussian_draw(&zero, &f.state, rng);
            }
        }
    }
    Panel::new(states, actions.clone(), rewards)
}

pub fn simulate_linear(params: &LinearDgpParams, actions: &DMatrix<u8>, rng: &mut Rng) -> Result<Panel> {
    simulate(&Dgp::Linear(params.clone()), actions, rng)
}

pub fn simulate_nonlinear(params: &NonlinearDgpParams, actions: &DMatrix<u8>, rng: &mut Rng) -> Result<Panel> {
    simulate(&Dgp::Nonlinear(params.clone()), actions, rng)
}

/// Closed-form average treatment effect of the linear process.
pub fn true_ate_linear(params: &LinearDgpParams) -> f64 {
    params.true_ate()
}

/// Monte Carlo estimate of the average treatment effect with its standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McTruth {
    pub ate: f64,
    pub se: f64,
    pub reps: usize,
}

/// Rolls out both constant policies for `reps` days with shared initial
/// states and transition noise. Zero-mean reward errors are omitted: with
/// shared draws they cancel exactly in the contrast.
pub fn true_ate_mc(dgp: &Dgp, reps: usize, rng: &mut Rng) -> Result<McTruth> {
    if reps == 0 {
        return Err(Error::Config("at least one Monte Carlo replication is required".into()));
    }
    let params = dgp.params();
    let f = factors(params)?;
    let t_len = params.horizon();
    let m = &params.model;
    let zero = DVector::zeros(params.dim());

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..reps {
        let s1 = gaussian_draw(&params.init_mean, &f.init, rng);
        let mut s = [s1.clone(), s1];
        let mut diff = 0.0;
        for t in 0..t_len {
            diff += dgp.reward_mean(t, 1, &s[1]) - dgp.reward_mean(t, 0, &s[0]);
            if t + 1 < t_len {
                let shock = gaussian_draw(&zero, &f.state, rng);
                for a in 0..2 {
                    s[a] = &m.drift[t] + &m.transition[t] * &s[a] + &m.carryover[t] * a as f64 + &shock;
                }
            }
        }
        let x = diff / t_len as f64;
        sum += x;
        sum_sq += x * x;
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = if reps > 1 { ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0) } else { 0.0 };
    Ok(McTruth {
        ate: mean,
        se: (var / r).sqrt(),
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ErrorCovSpec;
    use crate::model::{CoefficientLaw, LinearModel};
    use crate::rng::seeded;

    fn flat_params(effect: f64) -> LinearDgpParams {
        let mut model = LinearModel::zeros(4, 2);
        model.intercept = vec![1.0, 2.0, 3.0, 4.0];
        model.effect = vec![effect; 4];
        LinearDgpParams {
            model,
            state_noise_cov: DMatrix::identity(2, 2),
            init_mean: DVector::zeros(2),
            init_cov: DMatrix::identity(2, 2),
            reward_cov: ErrorCovSpec::Uncorrelated { variance: 0.0 },
            carryover_shift: 0.0,
        }
    }

    #[test]
    fn rewards_are_exact_without_state_or_noise() {
        let p = flat_params(0.7);
        let actions = DMatrix::from_row_slice(2, 4, &[0, 1, 0, 1, 1, 1, 0, 0]);
        let panel = simulate_linear(&p, &actions, &mut seeded(1)).unwrap();
        for i in 0..2 {
            for t in 0..4 {
                let want = p.model.intercept[t] + 0.7 * actions[(i, t)] as f64;
                assert_eq!(panel.reward(i, t), want);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = flat_params(0.0);
        let actions = DMatrix::zeros(2, 3);
        assert!(simulate_linear(&p, &actions, &mut seeded(1)).is_err());
    }

    #[test]
    fn mc_truth_agrees_with_closed_form() {
        let p = CoefficientLaw::linear(0.5)
            .draw(6, 2, ErrorCovSpec::Uncorrelated { variance: 1.0 }, &mut seeded(9))
            .unwrap();
        let mc = true_ate_mc(&Dgp::Linear(p.clone()), 20_000, &mut seeded(10)).unwrap();
        assert!((mc.ate - p.true_ate()).abs() < 3.0 * mc.se.max(1e-12), "{mc:?} vs {}", p.true_ate());
    }

    #[test]
    fn same_stream_gives_same_panel() {
        let p = CoefficientLaw::linear(0.0)
            .draw(6, 2, ErrorCovSpec::Autoregressive { rho: 0.5, variance: 1.0 }, &mut seeded(4))
            .unwrap();
        let actions = DMatrix::from_fn(3, 6, |i, t| ((i + t) % 2) as u8);
        let a = simulate_linear(&p, &actions, &mut seeded(5)).unwrap();
        let b = simulate_linear(&p, &actions, &mut seeded(5)).unwrap();
        assert_eq!(a, b);
    }
}
