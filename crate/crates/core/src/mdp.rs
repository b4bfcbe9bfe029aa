//! Finite-state, finite-horizon MDPs with binary actions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// `transitions[t][a]` is the row-stochastic matrix `p_t(s' | a, s)` (row `s`,
/// column `s'`) for the move from interval `t` to `t + 1`, so there are `T - 1`
/// of them. `rewards[t][a]` holds `r_t(a, s)` for each of the `T` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMdp {
    transitions: Vec<[DMatrix<f64>; 2]>,
    rewards: Vec<[DVector<f64>; 2]>,
    init_dist: DVector<f64>,
}

impl DiscreteMdp {
    pub fn new(
        transitions: Vec<[DMatrix<f64>; 2]>,
        rewards: Vec<[DVector<f64>; 2]>,
        init_dist: DVector<f64>,
    ) -> Result<Self> {
        let s = init_dist.len();
        let horizon = rewards.len();
        if s == 0 || horizon == 0 {
            return Err(Error::Dimension("MDP needs at least one state and one interval".into()));
        }
        if transitions.len() + 1 != horizon {
            return Err(Error::Dimension(format!(
                "expected {} transition steps for horizon {horizon}, got {}",
                horizon - 1,
                transitions.len()
            )));
        }
        check_distribution(init_dist.iter().copied(), "initial distribution")?;
        for (t, pair) in transitions.iter().enumerate() {
            for (a, p) in pair.iter().enumerate() {
                if p.shape() != (s, s) {
                    return Err(Error::Dimension(format!("transition (t={t}, a={a}) must be {s}×{s}")));
                }
                for row in p.row_iter() {
                    check_distribution(row.iter().copied(), &format!("transition row (t={t}, a={a})"))?;
                }
            }
        }
        if rewards.iter().flatten().any(|r| r.len() != s) {
            return Err(Error::Dimension(format!("reward vectors must have length {s}")));
        }
        Ok(DiscreteMdp {
            transitions,
            rewards,
            init_dist,
        })
    }

    pub fn n_states(&self) -> usize {
        self.init_dist.len()
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn transition(&self, t: usize, a: u8) -> &DMatrix<f64> {
        &self.transitions[t][a as usize]
    }

    pub fn reward(&self, t: usize, a: u8) -> &DVector<f64> {
        &self.rewards[t][a as usize]
    }

    pub fn init_dist(&self) -> &DVector<f64> {
        &self.init_dist
    }
}

fn check_distribution(p: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    for x in p {
        if !(x >= 0.0) {
            return Err(Error::Config(format!("{what} has a negative or NaN entry")));
        }
        total += x;
    }
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Config(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        let good = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.0, 1.0]);
        let r = DVector::from_vec(vec![1.0, 0.0]);
        let init = DVector::from_vec(vec![1.0, 0.0]);
        assert!(DiscreteMdp::new(vec![[good.clone(), good.clone()]], vec![[r.clone(), r.clone()]; 2], init.clone()).is_ok());
        assert!(DiscreteMdp::new(vec![[good.clone(), bad]], vec![[r.clone(), r.clone()]; 2], init.clone()).is_err());
        assert!(DiscreteMdp::new(vec![], vec![[r.clone(), r.clone()]; 2], init).is_err());
    }
}
