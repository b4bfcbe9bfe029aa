//! Least-squares temporal-difference estimation of the per-interval value
//! functions of the two constant policies.

use nalgebra::{DMatrix, DVector};

use super::basis::Basis;
use crate::error::{Error, Result};
use crate::linalg::solve_vec_checked;
use crate::panel::Panel;

/// Solved coefficients: `V_t^a(s) = φ(s)ᵀ theta[t][a]` for 0-based `t`.
/// The value one step past the horizon is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LstdCoeffs {
    pub basis: Basis,
    pub theta: Vec<[DVector<f64>; 2]>,
}

impl LstdCoeffs {
    pub fn horizon(&self) -> usize {
        self.theta.len()
    }

    pub fn value(&self, t: usize, a: u8, s: &DVector<f64>) -> f64 {
        if t >= self.theta.len() {
            return 0.0;
        }
        self.basis.features(s).dot(&self.theta[t][a as usize])
    }

    /// `(1/(nT)) Σ_i φ(S_{i,1})ᵀ (θ_{1,1} − θ_{1,0})`.
    pub fn ate(&self, panel: &Panel) -> f64 {
        let contrast = &self.theta[0][1] - &self.theta[0][0];
        let total: f64 = (0..panel.n())
            .map(|i| self.basis.features(&panel.state(i, 0)).dot(&contrast))
            .sum();
        total / (panel.n() * panel.horizon()) as f64
    }
}

/// Feature matrices `Φ_t` (`n × L`) for every interval.
pub(crate) fn feature_matrices(panel: &Panel, basis: Basis) -> Vec<DMatrix<f64>> {
    let l = basis.len(panel.dim());
    (0..panel.horizon())
        .map(|t| {
            let mut m = DMatrix::zeros(panel.n(), l);
            for i in 0..panel.n() {
                m.set_row(i, &basis.features(&panel.state(i, t)).transpose());
            }
            m
        })
        .collect()
}

/// `(1/n) Σ_i 1(A_{i,t} = a) φ_{i,t} φ_{i,t}ᵀ`.
pub(crate) fn arm_gram(feats: &DMatrix<f64>, panel: &Panel, t: usize, a: u8) -> DMatrix<f64> {
    let l = feats.ncols();
    let mut g = DMatrix::zeros(l, l);
    for i in 0..panel.n() {
        if panel.actions[(i, t)] == a {
            let row = feats.row(i);
            g += row.transpose() * row;
        }
    }
    g / panel.n() as f64
}

/// TD targets `R_{i,t} + V_{t+1}^a(S_{i,t+1})` at interval `t`.
fn td_targets(panel: &Panel, feats: &[DMatrix<f64>], theta: &[[DVector<f64>; 2]], t: usize, a: u8) -> DVector<f64> {
    let mut y = panel.rewards.column(t).into_owned();
    if t + 1 < panel.horizon() {
        y += &feats[t + 1] * &theta[t + 1][a as usize];
    }
    y
}

/// Backward recursion: for `t = T..1` and each arm, solve
/// `(1/n) Σ_i 1(A_{i,t}=a) φ_{i,t} [R_{i,t} + φ_{i,t+1}ᵀ θ_{t+1,a} − φ_{i,t}ᵀ θ_{t,a}] = 0`.
pub fn fit_lstd(panel: &Panel, basis: Basis) -> Result<LstdCoeffs> {
    let t_len = panel.horizon();
    let l = basis.len(panel.dim());
    let n = panel.n() as f64;
    let feats = feature_matrices(panel, basis);
    let mut theta = vec![[DVector::zeros(l), DVector::zeros(l)]; t_len];
    for t in (0..t_len).rev() {
        for a in 0..2u8 {
            let gram = arm_gram(&feats[t], panel, t, a);
            let y = td_targets(panel, &feats, &theta, t, a);
            let mask = DVector::from_fn(panel.n(), |i, _| if panel.actions[(i, t)] == a { y[i] } else { 0.0 });
            let rhs = feats[t].transpose() * mask / n;
            theta[t][a as usize] = solve_vec_checked(&gram, &rhs).ok_or(Error::SingularMoment { t, action: a })?;
        }
    }
    Ok(LstdCoeffs { basis, theta })
}

pub fn estimate_lstd(panel: &Panel, basis: Basis) -> Result<f64> {
    Ok(fit_lstd(panel, basis)?.ate(panel))
}

/// Largest absolute entry of the estimating-equation residual over all
/// `(t, a)` for the given coefficients.
pub fn lstd_residual(panel: &Panel, coeffs: &LstdCoeffs) -> f64 {
    let feats = feature_matrices(panel, coeffs.basis);
    let n = panel.n() as f64;
    let mut worst = 0.0_f64;
    for t in 0..panel.horizon() {
        for a in 0..2u8 {
            let y = td_targets(panel, &feats, &coeffs.theta, t, a);
            let fitted = &feats[t] * &coeffs.theta[t][a as usize];
            let resid = DVector::from_fn(panel.n(), |i, _| {
                if panel.actions[(i, t)] == a {
                    y[i] - fitted[i]
                } else {
                    0.0
                }
            });
            let eq = feats[t].transpose() * resid / n;
            worst = worst.max(eq.amax());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ErrorCovSpec;
    use crate::design::{generate_actions_seeded, DesignSpec};
    use crate::model::CoefficientLaw;
    use crate::rng::seeded;
    use crate::simulate::simulate_linear;

    fn panel(seed: u64, n: usize) -> Panel {
        let p = CoefficientLaw::linear(0.3)
            .draw(8, 2, ErrorCovSpec::Autoregressive { rho: 0.5, variance: 1.0 }, &mut seeded(seed))
            .unwrap();
        let design = DesignSpec::switchback(2, 8).unwrap();
        let actions = generate_actions_seeded(&design, n, seed).unwrap();
        simulate_linear(&p, &actions, &mut seeded(seed + 1)).unwrap()
    }

    #[test]
    fn normal_equations_hold() {
        let p = panel(1, 40);
        for basis in [Basis::Linear, Basis::Polynomial { degree: 2 }] {
            let c = fit_lstd(&p, basis).unwrap();
            assert!(lstd_residual(&p, &c) < 1e-10);
        }
    }

    #[test]
    fn constant_rewards_give_zero() {
        let mut p = panel(2, 30);
        p.rewards.fill(3.5);
        assert!(estimate_lstd(&p, Basis::Linear).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singular_moment_names_the_cell() {
        let mut p = panel(3, 30);
        // Arm 1 never observed at the last interval.
        for i in 0..p.n() {
            p.actions[(i, 7)] = 0;
        }
        assert!(matches!(fit_lstd(&p, Basis::Linear), Err(Error::SingularMoment { t: 7, action: 1 })));
    }
}
