//! LSTD with the time index folded into the state.
//!
//! `θ_j` parameterizes the value of the next `j + 1` intervals as a function
//! of the time-augmented state at the first of them. Because the time index
//! is part of the state, one coefficient vector per gap serves every start
//! time, and all start times are pooled when solving for it.

use nalgebra::{DMatrix, DVector};

use super::basis::Basis;
use crate::error::{Error, Result};
use crate::linalg::solve_vec_checked;
use crate::panel::Panel;

#[derive(Debug, Clone)]
struct GapCoeffs {
    /// False when the pooled window has a single start time; the `(1, τ)`
    /// factor is then collinear and only the state basis is used.
    timed: bool,
    theta: [DVector<f64>; 2],
}

fn feats(basis: Basis, timed: bool, s: &DVector<f64>, t: usize, horizon: usize) -> DVector<f64> {
    if timed {
        basis.time_features(s, (t + 1) as f64 / horizon as f64)
    } else {
        basis.features(s)
    }
}

pub fn estimate_lstd_modified(panel: &Panel, basis: Basis) -> Result<f64> {
    let t_len = panel.horizon();
    let n = panel.n();
    let state = |i: usize, t: usize| panel.state(i, t);
    let mut prev: Option<GapCoeffs> = None;

    for gap in 0..t_len {
        let starts = t_len - gap;
        let timed = starts > 1;
        let l = if timed { 2 } else { 1 } * basis.len(panel.dim());
        let mut theta = [DVector::zeros(l), DVector::zeros(l)];
        for a in 0..2u8 {
            let mut gram = DMatrix::zeros(l, l);
            let mut rhs = DVector::zeros(l);
            for u in 0..starts {
                for i in 0..n {
                    if panel.actions[(i, u)] != a {
                        continue;
                    }
                    let x = feats(basis, timed, &state(i, u), u, t_len);
                    let mut y = panel.rewards[(i, u)];
                    if let Some(p) = &prev {
                        let next = feats(basis, p.timed, &state(i, u + 1), u + 1, t_len);
                        y += next.dot(&p.theta[a as usize]);
                    }
                    gram += &x * x.transpose();
                    rhs += x * y;
                }
            }
            gram /= n as f64;
            rhs /= n as f64;
            theta[a as usize] = solve_vec_checked(&gram, &rhs).ok_or(Error::SingularMoment { t: gap, action: a })?;
        }
        prev = Some(GapCoeffs { timed, theta });
    }

    let last = prev.expect("horizon is at least one interval");
    let contrast = &last.theta[1] - &last.theta[0];
    let total: f64 = (0..n).map(|i| feats(basis, last.timed, &state(i, 0), 0, t_len).dot(&contrast)).sum();
    Ok(total / (n * t_len) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ErrorCovSpec;
    use crate::design::{generate_actions_seeded, DesignSpec};
    use crate::model::CoefficientLaw;
    use crate::rng::seeded;
    use crate::simulate::simulate_linear;

    #[test]
    fn constant_rewards_give_zero() {
        let p = CoefficientLaw::linear(0.2)
            .draw(6, 2, ErrorCovSpec::Uncorrelated { variance: 1.0 }, &mut seeded(1))
            .unwrap();
        let design = DesignSpec::switchback(1, 6).unwrap();
        let actions = generate_actions_seeded(&design, 20, 1).unwrap();
        let mut panel = simulate_linear(&p, &actions, &mut seeded(2)).unwrap();
        panel.rewards.fill(-2.0);
        assert!(estimate_lstd_modified(&panel, Basis::Linear).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_interval_is_difference_of_arm_regressions() {
        let p = CoefficientLaw::linear(0.0)
            .draw(1, 1, ErrorCovSpec::Uncorrelated { variance: 1.0 }, &mut seeded(3))
            .unwrap();
        let actions = DMatrix::from_fn(30, 1, |i, _| (i % 2) as u8);
        let panel = simulate_linear(&p, &actions, &mut seeded(4)).unwrap();
        // Independent per-arm simple regression of R on (1, s).
        let mut coef = [(0.0, 0.0); 2];
        for a in 0..2u8 {
            let pts: Vec<(f64, f64)> = (0..30)
                .filter(|&i| panel.action(i, 0) == a)
                .map(|i| (panel.states[0][(i, 0)], panel.reward(i, 0)))
                .collect();
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let slope = sxy / sxx;
            coef[a as usize] = (my - slope * mx, slope);
        }
        let want: f64 = (0..30)
            .map(|i| {
                let s = panel.states[0][(i, 0)];
                (coef[1].0 + coef[1].1 * s) - (coef[0].0 + coef[0].1 * s)
            })
            .sum::<f64>()
            / 30.0;
        let got = estimate_lstd_modified(&panel, Basis::Linear).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}
