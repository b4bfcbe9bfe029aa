//! Estimators that ignore the state: multi-step importance sampling,
//! burn-in difference in means, and simple importance sampling.

use crate::design::{DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::panel::Panel;

fn bernoulli_block(design: &DesignSpec, panel: &Panel) -> Result<usize> {
    match design.kind() {
        DesignKind::RegularBernoulli { block } if design.horizon() == panel.horizon() => Ok(block),
        DesignKind::RegularBernoulli { .. } => Err(Error::Dimension("design horizon differs from the panel's".into())),
        _ => Err(Error::Config(format!(
            "this estimator needs a regular Bernoulli switchback design, got {}",
            design.label()
        ))),
    }
}

/// Multi-step importance sampling with a look-back of `lookback` intervals:
/// interval `t` contributes when the `lookback + 1` most recent actions (or
/// all actions so far, early in the day) are constant, weighted by the
/// inverse probability of that run. Under the Bernoulli design the run
/// probability is `2^{-b}` with `b` the number of blocks it touches.
/// `lookback = None` uses the design's block length.
pub fn estimate_multistep_is(panel: &Panel, design: &DesignSpec, lookback: Option<usize>) -> Result<f64> {
    let m = bernoulli_block(design, panel)?;
    let p = lookback.unwrap_or(m);
    let t_len = panel.horizon();
    let mut total = 0.0;
    for t in 0..t_len {
        let start = t.saturating_sub(p);
        let blocks = t / m - start / m + 1;
        let prob = 0.5f64.powi(blocks as i32);
        if prob <= 0.0 {
            return Err(Error::Singular(format!("zero run probability at interval {t}")));
        }
        for i in 0..panel.n() {
            let run = panel.actions.row(i);
            let first = run[start];
            if (start..=t).all(|k| run[k] == first) {
                let sign = if first == 1 { 1.0 } else { -1.0 };
                total += sign * panel.rewards[(i, t)] / prob;
            }
        }
    }
    Ok(total / (panel.n() * t_len) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurnInEstimate {
    pub estimate: f64,
    /// Days dropped because one arm never appeared.
    pub excluded_days: usize,
}

/// Per day, the mean reward over treated blocks minus the mean over control
/// blocks, skipping the first `burn_in` intervals of each block; averaged
/// over the days that have both arms.
pub fn estimate_burnin_dim(panel: &Panel, design: &DesignSpec, burn_in: usize) -> Result<BurnInEstimate> {
    let m = bernoulli_block(design, panel)?;
    if burn_in >= m {
        return Err(Error::Config(format!("burn-in {burn_in} must be smaller than the block length {m}")));
    }
    let kept = (m - burn_in) as f64;
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..panel.n() {
        let mut sums = [0.0; 2];
        let mut blocks = [0usize; 2];
        for k in 0..panel.horizon() / m {
            let a = panel.actions[(i, k * m)] as usize;
            blocks[a] += 1;
            sums[a] += (k * m + burn_in..(k + 1) * m).map(|t| panel.rewards[(i, t)]).sum::<f64>();
        }
        if blocks[0] == 0 || blocks[1] == 0 {
            continue;
        }
        total += sums[1] / (blocks[1] as f64 * kept) - sums[0] / (blocks[0] as f64 * kept);
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData("no day saw both arms".into()));
    }
    Ok(BurnInEstimate {
        estimate: total / used as f64,
        excluded_days: panel.n() - used,
    })
}

/// `(4/(nT)) Σ_i Σ_t (A_{it} − 1/2) R_{it}`.
pub fn estimate_simple_is(panel: &Panel) -> f64 {
    let total: f64 = panel
        .actions
        .iter()
        .zip(panel.rewards.iter())
        .map(|(&a, &r)| (a as f64 - 0.5) * r)
        .sum();
    4.0 * total / (panel.n() * panel.horizon()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::generate_actions_seeded;
    use nalgebra::DMatrix;

    fn panel_with(actions: DMatrix<u8>, rewards: DMatrix<f64>) -> Panel {
        let (n, t_len) = actions.shape();
        Panel::new(vec![DMatrix::zeros(n, 1); t_len], actions, rewards).unwrap()
    }

    #[test]
    fn simple_is_examples() {
        let d = DesignSpec::switchback(1, 4).unwrap();
        let a = generate_actions_seeded(&d, 6, 1).unwrap();
        let p = panel_with(a.clone(), a.map(|x| x as f64));
        assert!((estimate_simple_is(&p) - 1.0).abs() < 1e-15);
        let p = panel_with(a, DMatrix::from_element(6, 4, 2.5));
        assert_eq!(estimate_simple_is(&p), 0.0);
    }

    #[test]
    fn zero_lookback_is_simple_is() {
        let d = DesignSpec::regular_bernoulli(2, 8).unwrap();
        let a = generate_actions_seeded(&d, 10, 3).unwrap();
        let r = DMatrix::from_fn(10, 8, |i, t| (i * 8 + t) as f64 * 0.37 - 3.0);
        let p = panel_with(a, r);
        let x = estimate_multistep_is(&p, &d, Some(0)).unwrap();
        assert!((x - estimate_simple_is(&p)).abs() < 1e-12);
    }

    #[test]
    fn burn_in_examples() {
        let d = DesignSpec::regular_bernoulli(3, 6).unwrap();
        let a = DMatrix::from_row_slice(2, 6, &[1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1]);
        let gamma = 0.8;
        let p = panel_with(a.clone(), a.map(|x| gamma * x as f64));
        let est = estimate_burnin_dim(&p, &d, 0).unwrap();
        assert!((est.estimate - gamma).abs() < 1e-15);
        let p = panel_with(a, DMatrix::from_element(2, 6, 4.0));
        assert_eq!(estimate_burnin_dim(&p, &d, 1).unwrap().estimate, 0.0);
    }

    #[test]
    fn burn_in_excludes_one_arm_days() {
        let d = DesignSpec::regular_bernoulli(2, 4).unwrap();
        let a = DMatrix::from_row_slice(2, 4, &[1, 1, 1, 1, 1, 1, 0, 0]);
        let r = DMatrix::from_row_slice(2, 4, &[9.0, 9.0, 9.0, 9.0, 0.0, 5.0, 0.0, 2.0]);
        let est = estimate_burnin_dim(&panel_with(a.clone(), r.clone()), &d, 1).unwrap();
        assert_eq!(est.excluded_days, 1);
        assert_eq!(est.estimate, 3.0);
        let only_treated = DMatrix::from_element(2, 4, 1u8);
        assert!(estimate_burnin_dim(&panel_with(only_treated, r), &d, 1).is_err());
    }

    #[test]
    fn rejects_deterministic_designs() {
        let d = DesignSpec::switchback(2, 4).unwrap();
        let a = generate_actions_seeded(&d, 2, 1).unwrap();
        let p = panel_with(a, DMatrix::zeros(2, 4));
        assert!(estimate_multistep_is(&p, &d, None).is_err());
        assert!(estimate_burnin_dim(&p, &d, 1).is_err());
    }
}
