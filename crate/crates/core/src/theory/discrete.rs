//! Exact oracles on finite MDPs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::DiscreteMdp;
use crate::model::LinearDgpParams;

/// Expected per-interval reward under the constant policy `a`, obtained by
/// pushing the state distribution forward through the transitions.
pub fn policy_value(mdp: &DiscreteMdp, a: u8) -> f64 {
    let mut dist = mdp.init_dist().clone();
    let mut total = 0.0;
    for t in 0..mdp.horizon() {
        total += dist.dot(mdp.reward(t, a));
        if t + 1 < mdp.horizon() {
            dist = mdp.transition(t, a).transpose() * dist;
        }
    }
    total / mdp.horizon() as f64
}

/// Always-treat minus never-treat per-interval value.
pub fn brute_force_ate_discrete(mdp: &DiscreteMdp) -> f64 {
    policy_value(mdp, 1) - policy_value(mdp, 0)
}

/// `δ = max_{s,t} Σ_{s'} |p_t(s'|1,s) − p_t(s'|0,s)|`.
pub fn compute_delta(mdp: &DiscreteMdp) -> f64 {
    let mut delta = 0.0_f64;
    for t in 0..mdp.horizon().saturating_sub(1) {
        let diff = mdp.transition(t, 1) - mdp.transition(t, 0);
        for row in diff.row_iter() {
            delta = delta.max(row.iter().map(|x| x.abs()).sum());
        }
    }
    delta
}

/// Discretizes a one-dimensional linear process onto a uniform grid.
///
/// Transition rows and the initial law are Gaussian densities evaluated at
/// the grid points and renormalized; rewards are the linear reward
/// evaluated at each grid point. The grid covers `width` standard
/// deviations beyond the extreme means reached under either constant policy.
pub fn discretize_linear_1d(params: &LinearDgpParams, points: usize, width: f64) -> Result<DiscreteMdp> {
    params.validate()?;
    if params.dim() != 1 {
        return Err(Error::Dimension("grid discretization is implemented for one-dimensional states".into()));
    }
    if points < 2 {
        return Err(Error::Config("grid needs at least two points".into()));
    }
    let m = &params.model;
    let t_len = params.horizon();
    let noise_var = params.state_noise_cov[(0, 0)];
    let init_var = params.init_cov[(0, 0)];
    if !(noise_var > 0.0 && init_var > 0.0) {
        return Err(Error::Config("discretization needs positive state and initial variances".into()));
    }

    let covs = m.cov_path(&params.init_cov, &params.state_noise_cov);
    let sd_max = covs.iter().map(|c| c[(0, 0)].sqrt()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..2u8 {
        for mean in m.mean_path(&params.init_mean, &vec![a; t_len]) {
            lo = lo.min(mean[0]);
            hi = hi.max(mean[0]);
        }
    }
    lo -= width * sd_max;
    hi += width * sd_max;
    let grid: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();

    let weights = |mean: f64, var: f64| -> DVector<f64> {
        let w = DVector::from_iterator(points, grid.iter().map(|x| (-(x - mean) * (x - mean) / (2.0 * var)).exp()));
        let s = w.sum();
        w / s
    };

    let init = weights(params.init_mean[0], init_var);
    let transitions = (0..t_len.saturating_sub(1))
        .map(|t| {
            [0u8, 1].map(|a| {
                let mut p = DMatrix::zeros(points, points);
                for (j, &x) in grid.iter().enumerate() {
                    let mean = m.drift[t][0] + m.transition[t][(0, 0)] * x + m.carryover[t][0] * a as f64;
                    p.set_row(j, &weights(mean, noise_var).transpose());
                }
                p
            })
        })
        .collect();
    let rewards = (0..t_len)
        .map(|t| {
            [0u8, 1].map(|a| {
                DVector::from_iterator(
                    points,
                    grid.iter()
                        .map(|x| m.intercept[t] + m.state_coef[t][0] * x + m.effect[t] * a as f64),
                )
            })
        })
        .collect();
    DiscreteMdp::new(transitions, rewards, init)
}
