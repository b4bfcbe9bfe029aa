//! Linear state-space model of the reward and transition functions, plus the
//! data-generating parameter sets built on top of it.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::covariance::ErrorCovSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Time-indexed coefficients of
///
/// ```text
/// r_t(a, s)          = intercept_t + sᵀ state_coef_t + effect_t a
/// E[S_{t+1} | a, s]  = drift_t + transition_t s + carryover_t a
/// ```
///
/// Reward sequences have length `T`; transition sequences cover `t = 1..T-1`
/// and have length `T - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: Vec<f64>,
    pub state_coef: Vec<DVector<f64>>,
    pub effect: Vec<f64>,
    pub drift: Vec<DVector<f64>>,
    pub transition: Vec<DMatrix<f64>>,
    pub carryover: Vec<DVector<f64>>,
}

/// Closed-form value functions `V_t^a(s) = offset[a][t] + slope[t]ᵀ s` of a
/// [`LinearModel`] under the constant policy `a`.
#[derive(Debug, Clone)]
pub struct LinearValue {
    pub offset: [Vec<f64>; 2],
    pub slope: Vec<DVector<f64>>,
}

impl LinearValue {
    /// `V_t^a(s)`; `t == T` (one past the horizon) evaluates to zero.
    pub fn value(&self, t: usize, a: u8, s: &DVector<f64>) -> f64 {
        if t >= self.slope.len() {
            return 0.0;
        }
        self.offset[a as usize][t] + self.slope[t].dot(s)
    }

    pub fn horizon(&self) -> usize {
        self.slope.len()
    }
}

impl LinearModel {
    /// All-zero model.
    pub fn zeros(horizon: usize, dim: usize) -> Self {
        let steps = horizon.saturating_sub(1);
        LinearModel {
            intercept: vec![0.0; horizon],
            state_coef: vec![DVector::zeros(dim); horizon],
            effect: vec![0.0; horizon],
            drift: vec![DVector::zeros(dim); steps],
            transition: vec![DMatrix::zeros(dim, dim); steps],
            carryover: vec![DVector::zeros(dim); steps],
        }
    }

    pub fn horizon(&self) -> usize {
        self.intercept.len()
    }

    pub fn dim(&self) -> usize {
        self.state_coef.first().map_or(0, |b| b.len())
    }

    pub fn validate(&self) -> Result<()> {
        let t_len = self.horizon();
        let d = self.dim();
        if t_len == 0 {
            return Err(Error::Dimension("model has an empty horizon".into()));
        }
        let steps = t_len - 1;
        if self.state_coef.len() != t_len || self.effect.len() != t_len {
            return Err(Error::Dimension("reward sequences must have length T".into()));
        }
        if self.drift.len() != steps || self.transition.len() != steps || self.carryover.len() != steps {
            return Err(Error::Dimension("transition sequences must have length T-1".into()));
        }
        let bad_vec = self
            .state_coef
            .iter()
            .chain(&self.drift)
            .chain(&self.carryover)
            .any(|v| v.len() != d);
        let bad_mat = self.transition.iter().any(|m| m.nrows() != d || m.ncols() != d);
        if bad_vec || bad_mat {
            return Err(Error::Dimension(format!("coefficients must all have state dimension {d}")));
        }
        Ok(())
    }

    /// Average treatment effect: the direct effects plus the carryover routed
    /// through the state transitions,
    /// `(1/T) Σ_t γ_t + (1/T) Σ_{t≥2} β_tᵀ Σ_{k<t} Φ_{t-1}⋯Φ_{k+1} Γ_k`.
    pub fn ate(&self) -> f64 {
        let t_len = self.horizon();
        let mut total: f64 = self.effect.iter().sum();
        // carried[t] = Σ_{k<t} (Φ_{t-1}⋯Φ_{k+1}) Γ_k
        let mut carried = DVector::zeros(self.dim());
        for t in 1..t_len {
            carried = &self.transition[t - 1] * &carried + &self.carryover[t - 1];
            total += self.state_coef[t].dot(&carried);
        }
        total / t_len as f64
    }

    /// Model-based value functions under the two constant policies.
    pub fn value_functions(&self) -> LinearValue {
        let t_len = self.horizon();
        let d = self.dim();
        let mut slope = vec![DVector::zeros(d); t_len];
        let mut offset = [vec![0.0; t_len], vec![0.0; t_len]];
        for t in (0..t_len).rev() {
            if t + 1 == t_len {
                slope[t] = self.state_coef[t].clone();
                for a in 0..2 {
                    offset[a][t] = self.intercept[t] + self.effect[t] * a as f64;
                }
            } else {
                let next = slope[t + 1].clone();
                slope[t] = &self.state_coef[t] + self.transition[t].transpose() * &next;
                for a in 0..2 {
                    let af = a as f64;
                    offset[a][t] = self.intercept[t]
                        + self.effect[t] * af
                        + offset[a][t + 1]
                        + next.dot(&(&self.drift[t] + &self.carryover[t] * af));
                }
            }
        }
        LinearValue { offset, slope }
    }

    /// Mean of `S_t` for `t = 0..T` given the mean of `S_1` and an action
    /// sequence (only `actions[0..T-1]` matter).
    pub fn mean_path(&self, init_mean: &DVector<f64>, actions: &[u8]) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.horizon());
        let mut mean = init_mean.clone();
        out.push(mean.clone());
        for t in 0..self.horizon() - 1 {
            mean = &self.drift[t] + &self.transition[t] * &mean + &self.carryover[t] * actions[t] as f64;
            out.push(mean.clone());
        }
        out
    }

    /// Covariance of `S_t` for `t = 0..T` given `Cov(S_1)` and a common
    /// transition-noise covariance. Independent of the actions.
    pub fn cov_path(&self, init_cov: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.horizon());
        let mut cov = init_cov.clone();
        out.push(cov.clone());
        for t in 0..self.horizon() - 1 {
            let phi = &self.transition[t];
            cov = phi * &cov * phi.transpose() + noise_cov;
            out.push(cov.clone());
        }
        out
    }

    /// Largest spectral norm among the transition matrices.
    pub fn max_transition_norm(&self) -> f64 {
        self.transition
            .iter()
            .map(|m| m.clone().singular_values().max())
            .fold(0.0, f64::max)
    }
}

/// Full specification of the linear data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDgpParams {
    pub model: LinearModel,
    pub state_noise_cov: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub reward_cov: ErrorCovSpec,
    /// Mean of the carryover entries when the coefficients were drawn.
    pub carryover_shift: f64,
}

impl LinearDgpParams {
    pub fn horizon(&self) -> usize {
        self.model.horizon()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let d = self.dim();
        if self.state_noise_cov.shape() != (d, d) || self.init_cov.shape() != (d, d) || self.init_mean.len() != d {
            return Err(Error::Dimension("noise and initial-state laws must match the state dimension".into()));
        }
        self.reward_cov.validate_for(self.horizon())
    }

    /// Closed-form average treatment effect.
    pub fn true_ate(&self) -> f64 {
        self.model.ate()
    }
}

/// Same coefficients as the linear process; the reward becomes
/// `α + 2βᵀ[sin(s a) + cos(s)]² + 3(βᵀs) γ a + [a γ + cos(a γ)]²`
/// (element-wise trigonometry), while transitions stay linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearDgpParams {
    pub base: LinearDgpParams,
}

impl NonlinearDgpParams {
    pub fn reward_mean(&self, t: usize, a: u8, s: &DVector<f64>) -> f64 {
        nonlinear_reward(
            self.base.model.intercept[t],
            &self.base.model.state_coef[t],
            self.base.model.effect[t],
            a,
            s,
        )
    }
}

pub fn nonlinear_reward(alpha: f64, beta: &DVector<f64>, gamma: f64, a: u8, s: &DVector<f64>) -> f64 {
    let af = a as f64;
    let bracket = s.map(|x| {
        let v = (x * af).sin() + x.cos();
        v * v
    });
    let last = af * gamma + (af * gamma).cos();
    alpha + 2.0 * beta.dot(&bracket) + 3.0 * beta.dot(s) * gamma * af + last * last
}

/// Either process; used wherever a simulator or truth oracle is generic.
#[derive(Debug, Clone, PartialEq)]
pub enum Dgp {
    Linear(LinearDgpParams),
    Nonlinear(NonlinearDgpParams),
}

impl Dgp {
    pub fn params(&self) -> &LinearDgpParams {
        match self {
            Dgp::Linear(p) => p,
            Dgp::Nonlinear(p) => &p.base,
        }
    }

    pub fn reward_mean(&self, t: usize, a: u8, s: &DVector<f64>) -> f64 {
        match self {
            Dgp::Linear(p) => {
                let m = &p.model;
                m.intercept[t] + m.state_coef[t].dot(s) + m.effect[t] * a as f64
            }
            Dgp::Nonlinear(p) => p.reward_mean(t, a, s),
        }
    }
}

/// Draws `U[lo, hi]` with a random sign.
fn signed_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    let mag = Uniform::new_inclusive(lo, hi).expect("valid range").sample(rng);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Coefficient laws of the synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientLaw {
    /// Entries of each transition matrix are `U[-bound, bound]`.
    pub transition_bound: f64,
    /// Carryover entries are `N(carryover_shift, carryover_sd²)`.
    pub carryover_shift: f64,
    pub carryover_sd: f64,
    pub state_noise_var: f64,
}

impl CoefficientLaw {
    pub fn linear(carryover_shift: f64) -> Self {
        CoefficientLaw {
            transition_bound: 0.3,
            carryover_shift,
            carryover_sd: 0.3,
            state_noise_var: 1.5,
        }
    }

    pub fn nonlinear(carryover_shift: f64) -> Self {
        CoefficientLaw {
            transition_bound: 0.6,
            ..Self::linear(carryover_shift)
        }
    }

    /// Draws a full parameter set: effects `U[0.5, 0.8]`, intercepts and
    /// drifts `±U[0.5, 1]`, state coefficients `±U[0.1, 0.3]`, `S_1 ~ N(0, I)`.
    pub fn draw(&self, horizon: usize, dim: usize, reward_cov: ErrorCovSpec, rng: &mut Rng) -> Result<LinearDgpParams> {
        if horizon == 0 || dim == 0 {
            return Err(Error::Config("horizon and state dimension must be positive".into()));
        }
        reward_cov.validate_for(horizon)?;
        let steps = horizon - 1;
        let effect_law = Uniform::new_inclusive(0.5, 0.8).expect("valid range");
        let trans_law = Uniform::new_inclusive(-self.transition_bound, self.transition_bound)
            .map_err(|e| Error::Config(e.to_string()))?;
        let carry_law =
            Normal::new(self.carryover_shift, self.carryover_sd).map_err(|e| Error::Config(e.to_string()))?;

        let effect: Vec<f64> = (0..horizon).map(|_| effect_law.sample(rng)).collect();
        let carryover: Vec<DVector<f64>> = (0..steps)
            .map(|_| DVector::from_fn(dim, |_, _| carry_law.sample(rng)))
            .collect();
        let transition: Vec<DMatrix<f64>> = (0..steps)
            .map(|_| DMatrix::from_fn(dim, dim, |_, _| trans_law.sample(rng)))
            .collect();
        let intercept: Vec<f64> = (0..horizon).map(|_| signed_uniform(rng, 0.5, 1.0)).collect();
        let state_coef: Vec<DVector<f64>> = (0..horizon)
            .map(|_| DVector::from_fn(dim, |_, _| signed_uniform(rng, 0.1, 0.3)))
            .collect();
        let drift: Vec<DVector<f64>> = (0..steps)
            .map(|_| DVector::from_fn(dim, |_, _| signed_uniform(rng, 0.5, 1.0)))
            .collect();

        Ok(LinearDgpParams {
            model: LinearModel {
                intercept,
                state_coef,
                effect,
                drift,
                transition,
                carryover,
            },
            state_noise_cov: DMatrix::identity(dim, dim) * self.state_noise_var,
            init_mean: DVector::zeros(dim),
            init_cov: DMatrix::identity(dim, dim),
            reward_cov,
            carryover_shift: self.carryover_shift,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn scalar_model(effect: Vec<f64>, beta: Vec<f64>, phi: Vec<f64>, carry: Vec<f64>) -> LinearModel {
        let t_len = effect.len();
        LinearModel {
            intercept: vec![0.0; t_len],
            state_coef: beta.into_iter().map(|b| DVector::from_element(1, b)).collect(),
            effect,
            drift: vec![DVector::zeros(1); t_len - 1],
            transition: phi.into_iter().map(|p| DMatrix::from_element(1, 1, p)).collect(),
            carryover: carry.into_iter().map(|c| DVector::from_element(1, c)).collect(),
        }
    }

    #[test]
    fn ate_two_step_example() {
        let m = scalar_model(vec![1.0, 1.0], vec![0.0, 2.0], vec![0.0], vec![0.5]);
        assert!((m.ate() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn ate_without_carryover_is_mean_effect() {
        let m = scalar_model(vec![0.2, 0.4, 0.9], vec![1.0, -1.0, 2.0], vec![0.5, 0.5], vec![0.0, 0.0]);
        assert!((m.ate() - 0.5).abs() < 1e-15);
        let m = scalar_model(vec![0.2, 0.4, 0.9], vec![0.0, 0.0, 0.0], vec![0.5, 0.5], vec![1.0, 3.0]);
        assert!((m.ate() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ate_matches_explicit_product_formula() {
        let mut rng = seeded(11);
        let p = CoefficientLaw::linear(0.4)
            .draw(6, 2, ErrorCovSpec::Uncorrelated { variance: 1.0 }, &mut rng)
            .unwrap();
        let m = &p.model;
        let t_len = 6;
        let mut total: f64 = m.effect.iter().sum();
        for t in 1..t_len {
            for k in 0..t {
                // Φ_{t-1} ⋯ Φ_{k+1} Γ_k in 0-based indices
                let mut v = m.carryover[k].clone();
                for l in k + 1..t {
                    v = &m.transition[l] * v;
                }
                total += m.state_coef[t].dot(&v);
            }
        }
        assert!((m.ate() - total / t_len as f64).abs() < 1e-13);
    }

    #[test]
    fn value_difference_matches_ate() {
        let mut rng = seeded(5);
        let p = CoefficientLaw::linear(0.2)
            .draw(8, 3, ErrorCovSpec::Uncorrelated { variance: 1.0 }, &mut rng)
            .unwrap();
        let v = p.model.value_functions();
        let s = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let diff = (v.value(0, 1, &s) - v.value(0, 0, &s)) / 8.0;
        assert!((diff - p.model.ate()).abs() < 1e-12);
    }

    #[test]
    fn drawn_coefficients_follow_laws() {
        let mut rng = seeded(3);
        let p = CoefficientLaw::linear(0.0)
            .draw(48, 3, ErrorCovSpec::Autoregressive { rho: 0.9, variance: 1.5 }, &mut rng)
            .unwrap();
        p.validate().unwrap();
        assert!(p.model.effect.iter().all(|&g| (0.5..=0.8).contains(&g)));
        assert!(p.model.intercept.iter().all(|&a| (0.5..=1.0).contains(&a.abs())));
        assert!(p.model.max_transition_norm() < 1.0);
        assert_eq!(p.model.transition.len(), 47);
    }

    #[test]
    fn nonlinear_reward_special_cases() {
        let beta = DVector::from_vec(vec![0.2, -0.1, 0.3]);
        let s = DVector::from_vec(vec![0.4, -1.2, 2.0]);
        let r0 = nonlinear_reward(0.7, &beta, 0.6, 0, &s);
        let cos2 = s.map(|x| x.cos() * x.cos());
        assert!((r0 - (0.7 + 2.0 * beta.dot(&cos2) + 1.0)).abs() < 1e-14);
        let zero = DVector::zeros(3);
        let r1 = nonlinear_reward(0.7, &beta, 0.6, 1, &zero);
        let expect = 0.7 + 2.0 * beta.sum() + (0.6f64 + 0.6f64.cos()).powi(2);
        assert!((r1 - expect).abs() < 1e-14);
    }
}
