//! Wild-bootstrap simulation environment built from an A/A panel.
//!
//! Rewards and next states are ridge-regressed on `(1, S_t)` interval by
//! interval. New days reuse a whole source day's residual vectors multiplied
//! by one standard-normal factor, which keeps the within-day error covariance
//! of the source data.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::covariance::ErrorCovSpec;
use crate::design::{generate_actions, DesignSpec};
use crate::error::{Error, Result};
use crate::linalg::{log_grid, ridge_gcv};
use crate::model::{CoefficientLaw, LinearDgpParams, LinearModel};
use crate::panel::Panel;
use crate::rng::Rng;

use super::dgp::simulate_linear;

/// Penalty grid searched by generalized cross-validation.
pub fn gcv_grid() -> Vec<f64> {
    log_grid(1e-8, 1e2, 25)
}

#[derive(Debug, Clone)]
pub struct BootstrapEnv {
    /// Fitted intercepts, slopes and transitions plus the synthetic effects.
    pub model: LinearModel,
    /// `N × T` reward residuals.
    pub reward_residuals: DMatrix<f64>,
    /// `T - 1` matrices of `N × d` transition residuals.
    pub state_residuals: Vec<DMatrix<f64>>,
    /// `N × d` observed initial states.
    pub initial_states: DMatrix<f64>,
    pub reward_penalties: Vec<f64>,
    pub delta_reward: f64,
    pub delta_state: f64,
}

fn ridge_or_err(x: &DMatrix<f64>, y: &DVector<f64>, t: usize) -> Result<crate::linalg::RidgeFit> {
    ridge_gcv(x, y, &gcv_grid()).ok_or(Error::RankDeficient {
        t,
        reason: "ridge fit failed".into(),
    })
}

/// Fits the environment. `delta_reward` and `delta_state` are percentages:
/// the synthetic direct effect at `t` is `delta_reward / 100` times the
/// source's mean reward at `t`, and the synthetic carryover vector is
/// `delta_state / 100` times the mean state at `t`.
pub fn fit_bootstrap_env(source: &Panel, delta_reward: f64, delta_state: f64) -> Result<BootstrapEnv> {
    let n = source.n();
    let t_len = source.horizon();
    let d = source.dim();
    if source.actions.iter().any(|&a| a != 0) {
        return Err(Error::Config("bootstrap source must be an A/A panel with all actions 0".into()));
    }
    if n < d + 2 {
        return Err(Error::InsufficientData(format!(
            "bootstrap source needs at least {} days for state dimension {d}, got {n}",
            d + 2
        )));
    }

    let mut model = LinearModel::zeros(t_len, d);
    let mut reward_residuals = DMatrix::zeros(n, t_len);
    let mut state_residuals = Vec::with_capacity(t_len.saturating_sub(1));
    let mut reward_penalties = Vec::with_capacity(t_len);

    for t in 0..t_len {
        let x = &source.states[t];
        let r = source.rewards.column(t).into_owned();
        let fit = ridge_or_err(x, &r, t)?;
        model.intercept[t] = fit.intercept;
        model.state_coef[t] = fit.coef.clone();
        model.effect[t] = delta_reward * r.mean() / 100.0;
        reward_penalties.push(fit.penalty);
        for i in 0..n {
            reward_residuals[(i, t)] = r[i] - fit.intercept - x.row(i).dot(&fit.coef.transpose());
        }

        if t + 1 < t_len {
            let next = &source.states[t + 1];
            let mut resid = DMatrix::zeros(n, d);
            for j in 0..d {
                let y = next.column(j).into_owned();
                let fit = ridge_or_err(x, &y, t)?;
                model.drift[t][j] = fit.intercept;
                model.transition[t].set_row(j, &fit.coef.transpose());
                for i in 0..n {
                    resid[(i, j)] = y[i] - fit.intercept - x.row(i).dot(&fit.coef.transpose());
                }
            }
            state_residuals.push(resid);
            model.carryover[t] = x.row_mean().transpose() * (delta_state / 100.0);
        }
    }

    Ok(BootstrapEnv {
        model,
        reward_residuals,
        state_residuals,
        initial_states: source.states[0].clone(),
        reward_penalties,
        delta_reward,
        delta_state,
    })
}

impl BootstrapEnv {
    pub fn source_days(&self) -> usize {
        self.reward_residuals.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.model.horizon()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Average treatment effect of the environment. The multiplier has mean
    /// zero, so the residual terms do not contribute.
    pub fn true_ate(&self) -> f64 {
        self.model.ate()
    }

    /// Rolls out the given actions. For each day a source day `I` and a
    /// multiplier `ξ ~ N(0, 1)` are drawn; `xi` overrides every multiplier.
    pub fn simulate_with_actions(&self, actions: &DMatrix<u8>, xi: Option<f64>, rng: &mut Rng) -> Result<Panel> {
        let t_len = self.horizon();
        let d = self.dim();
        if actions.ncols() != t_len {
            return Err(Error::Dimension(format!(
                "action matrix has {} intervals, the environment has {t_len}",
                actions.ncols()
            )));
        }
        let n = actions.nrows();
        let pick = Uniform::new(0, self.source_days()).expect("non-empty source");
        let m = &self.model;
        let mut states = vec![DMatrix::zeros(n, d); t_len];
        let mut rewards = DMatrix::zeros(n, t_len);
        for i in 0..n {
            let src = pick.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            let mult = xi.unwrap_or(z);
            let mut s: DVector<f64> = self.initial_states.row(src).transpose();
            for t in 0..t_len {
                let a = actions[(i, t)] as f64;
                states[t].set_row(i, &s.transpose());
                rewards[(i, t)] = m.intercept[t]
                    + m.state_coef[t].dot(&s)
                    + m.effect[t] * a
                    + mult * self.reward_residuals[(src, t)];
                if t + 1 < t_len {
                    let shock: DVector<f64> = self.state_residuals[t].row(src).transpose() * mult;
                    s = &m.drift[t] + &m.transition[t] * &s + &m.carryover[t] * a + shock;
                }
            }
        }
        Panel::new(states, actions.clone(), rewards)
    }
}

/// Generates actions from `design` and then rolls them out.
pub fn simulate_bootstrap(env: &BootstrapEnv, design: &DesignSpec, n: usize, rng: &mut Rng) -> Result<Panel> {
    if design.horizon() != env.horizon() {
        return Err(Error::Dimension("design horizon differs from the environment's".into()));
    }
    let actions = generate_actions(design, n, rng)?;
    env.simulate_with_actions(&actions, None, rng)
}

/// Settings of a synthetic A/A source panel with a positive reward level,
/// standing in for proprietary logged data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AaSourceConfig {
    pub horizon: usize,
    pub dim: usize,
    pub days: usize,
    pub reward_cov: ErrorCovSpec,
    /// Baseline reward level added to every interval's intercept.
    pub reward_level: f64,
}

impl Default for AaSourceConfig {
    fn default() -> Self {
        AaSourceConfig {
            horizon: 24,
            dim: 2,
            days: 40,
            reward_cov: ErrorCovSpec::Autoregressive { rho: 0.8, variance: 1.5 },
            reward_level: 10.0,
        }
    }
}

/// Simulates an all-control panel from a linear process whose intercepts,
/// drifts and reward slopes are positive.
pub fn synthetic_aa_source(cfg: &AaSourceConfig, rng: &mut Rng) -> Result<Panel> {
    let mut params: LinearDgpParams =
        CoefficientLaw::linear(0.0).draw(cfg.horizon, cfg.dim, cfg.reward_cov, rng)?;
    let m = &mut params.model;
    for a in &mut m.intercept {
        *a = cfg.reward_level + a.abs();
    }
    for b in m.state_coef.iter_mut().chain(m.drift.iter_mut()) {
        b.apply(|v| *v = v.abs());
    }
    let actions = DMatrix::zeros(cfg.days, cfg.horizon);
    simulate_linear(&params, &actions, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_effects_and_forced_multiplier() {
        let src = synthetic_aa_source(&AaSourceConfig::default(), &mut seeded(1)).unwrap();
        let env = fit_bootstrap_env(&src, 0.0, 0.0).unwrap();
        assert_eq!(env.true_ate(), 0.0);
        assert!(env.model.effect.iter().all(|&g| g == 0.0));
        assert_eq!(env.reward_residuals.shape(), (40, 24));
        assert_eq!(env.state_residuals.len(), 23);
        assert_eq!(env.state_residuals[0].shape(), (40, 2));

        let actions = DMatrix::zeros(5, 24);
        let p = env.simulate_with_actions(&actions, Some(0.0), &mut seeded(2)).unwrap();
        for i in 0..5 {
            for t in 0..24 {
                let s = p.state(i, t);
                let fitted = env.model.intercept[t] + env.model.state_coef[t].dot(&s);
                assert!((p.reward(i, t) - fitted).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residuals_reproduce_the_source() {
        let src = synthetic_aa_source(&AaSourceConfig::default(), &mut seeded(3)).unwrap();
        let env = fit_bootstrap_env(&src, 2.0, 2.0).unwrap();
        for i in 0..src.n() {
            for t in 0..src.horizon() {
                let s = src.state(i, t);
                let back = env.model.intercept[t] + env.model.state_coef[t].dot(&s) + env.reward_residuals[(i, t)];
                assert!((back - src.reward(i, t)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_treated_or_tiny_sources() {
        let src = synthetic_aa_source(&AaSourceConfig::default(), &mut seeded(4)).unwrap();
        let mut treated = src.clone();
        treated.actions[(0, 0)] = 1;
        assert!(fit_bootstrap_env(&treated, 1.0, 1.0).is_err());
        let tiny = src.select_days(&[0, 1, 2]);
        assert!(fit_bootstrap_env(&tiny, 1.0, 1.0).is_err());
    }

    #[test]
    fn ate_grows_with_effect_size() {
        let src = synthetic_aa_source(&AaSourceConfig::default(), &mut seeded(5)).unwrap();
        let ates: Vec<f64> = [0.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&l| fit_bootstrap_env(&src, l, l).unwrap().true_ate())
            .collect();
        assert!(ates.windows(2).all(|w| w[1] > w[0]), "{ates:?}");
    }
}
