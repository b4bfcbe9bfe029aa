//! Model-based marginal importance ratios.
//!
//! Under the linear transition model with Gaussian initial state and
//! Gaussian transition noise, `S_t` is Gaussian for any fixed action
//! sequence; only its mean depends on the actions. The ratio at `t` compares
//! the law of `S_t` when `a` is applied throughout with its law under the
//! design's action sequence that has `A_t = a`.

use nalgebra::{DMatrix, DVector};

use super::ols::{fit_ols, OlsFit};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, Gaussian};
use crate::model::{LinearDgpParams, LinearModel};
use crate::panel::Panel;

#[derive(Debug, Clone)]
pub struct RatioModel {
    /// `numerator[a][t]`: mean of `S_t` when `a` is always applied.
    pub numerator: [Vec<DVector<f64>>; 2],
    /// `denominator[a][t]`: mean of `S_t` under the design given `A_t = a`.
    pub denominator: [Vec<DVector<f64>>; 2],
    /// Zero-mean laws carrying the shared covariance of `S_t`.
    laws: Vec<Gaussian>,
    /// Number of covariance matrices that needed a `1e-8 I` ridge.
    pub regularized: usize,
}

fn deterministic(design: &DesignSpec) -> Result<()> {
    if design.is_deterministic() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "model-based ratios need a deterministic switchback design, got {}",
            design.label()
        )))
    }
}

impl RatioModel {
    pub fn from_model(
        model: &LinearModel,
        design: &DesignSpec,
        init_mean: &DVector<f64>,
        init_cov: &DMatrix<f64>,
        noise_cov: &DMatrix<f64>,
    ) -> Result<Self> {
        deterministic(design)?;
        let t_len = model.horizon();
        if design.horizon() != t_len {
            return Err(Error::Dimension("design horizon differs from the model's".into()));
        }
        let covs = model.cov_path(init_cov, noise_cov);
        let mut regularized = 0;
        let zero = DVector::zeros(model.dim());
        let laws = covs
            .into_iter()
            .map(|c| {
                let (g, flagged) = Gaussian::new(zero.clone(), c);
                regularized += usize::from(flagged);
                g
            })
            .collect();

        let numerator = [0u8, 1].map(|a| model.mean_path(init_mean, &vec![a; t_len]));
        let denominator = [0u8, 1].map(|a| {
            (0..t_len)
                .map(|t| {
                    let seq: Vec<u8> = (0..t_len)
                        .map(|k| design.implied_action(k, t, a).expect("deterministic design"))
                        .collect();
                    model.mean_path(init_mean, &seq)[t].clone()
                })
                .collect()
        });
        Ok(RatioModel {
            numerator,
            denominator,
            laws,
            regularized,
        })
    }

    /// Ratios implied by the true parameters.
    pub fn from_params(params: &LinearDgpParams, design: &DesignSpec) -> Result<Self> {
        Self::from_model(
            &params.model,
            design,
            &params.init_mean,
            &params.init_cov,
            &params.state_noise_cov,
        )
    }

    /// Fits the Gaussian initial-state law and a pooled transition-noise
    /// covariance from `panel`, reusing an existing least-squares fit.
    pub fn from_fit(fit: &OlsFit, panel: &Panel, design: &DesignSpec) -> Result<Self> {
        deterministic(design)?;
        let d = panel.dim();
        let init_mean = panel.states[0].row_mean().transpose();
        let init_cov = sample_covariance(&panel.states[0]);
        let mut noise_cov = DMatrix::zeros(d, d);
        let dof_per_step = panel.n().saturating_sub(d + 2).max(1);
        for r in &fit.state_residuals {
            noise_cov += r.transpose() * r;
        }
        let steps = fit.state_residuals.len().max(1);
        noise_cov /= (steps * dof_per_step) as f64;
        Self::from_model(&fit.model, design, &init_mean, &init_cov, &noise_cov)
    }

    pub fn fit(panel: &Panel, design: &DesignSpec) -> Result<Self> {
        Self::from_fit(&fit_ols(panel)?, panel, design)
    }

    pub fn horizon(&self) -> usize {
        self.laws.len()
    }

    /// `p_t^a(s) / p_t^m(s | a)`.
    pub fn density_ratio(&self, t: usize, a: u8, s: &DVector<f64>) -> f64 {
        let law = &self.laws[t];
        let num = law.mahalanobis(&(s - &self.numerator[a as usize][t]));
        let den = law.mahalanobis(&(s - &self.denominator[a as usize][t]));
        (-0.5 * (num - den)).exp()
    }

    /// Covariance of `S_t` shared by both laws.
    pub fn covariance(&self, t: usize) -> &DMatrix<f64> {
        &self.laws[t].cov
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ErrorCovSpec;

    fn scalar_params(phi0: f64, carry: f64, noise: f64) -> LinearDgpParams {
        let mut model = LinearModel::zeros(3, 1);
        model.drift = vec![DVector::from_element(1, phi0); 2];
        model.carryover = vec![DVector::from_element(1, carry); 2];
        LinearDgpParams {
            model,
            state_noise_cov: DMatrix::from_element(1, 1, noise),
            init_mean: DVector::zeros(1),
            init_cov: DMatrix::identity(1, 1),
            reward_cov: ErrorCovSpec::Uncorrelated { variance: 1.0 },
            carryover_shift: 0.0,
        }
    }

    #[test]
    fn first_interval_and_no_carryover_give_unit_ratio() {
        let design = DesignSpec::switchback(1, 3).unwrap();
        let r = RatioModel::from_params(&scalar_params(0.4, 0.8, 1.5), &design).unwrap();
        let no = RatioModel::from_params(&scalar_params(0.4, 0.0, 1.5), &design).unwrap();
        for s in [-2.0, 0.0, 1.3] {
            let s = DVector::from_element(1, s);
            for a in 0..2 {
                assert_eq!(r.density_ratio(0, a, &s), 1.0);
                for t in 0..3 {
                    assert!((no.density_ratio(t, a, &s) - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn one_step_scalar_gaussian_ratio() {
        // Transition matrix 0, so S_2 ~ N(φ + Γ a_1, σ²_E).
        let (phi0, carry, noise) = (0.4, 0.8, 1.5);
        let design = DesignSpec::switchback(1, 3).unwrap();
        let r = RatioModel::from_params(&scalar_params(phi0, carry, noise), &design).unwrap();
        let dens = |x: f64, mu: f64| (-(x - mu) * (x - mu) / (2.0 * noise)).exp() / (2.0 * std::f64::consts::PI * noise).sqrt();
        for x in [-1.0, -0.2, 0.3, 1.1, 2.5] {
            for a in 0..2u8 {
                // Under m = 1 the action before A_2 = a is 1 - a.
                let want = dens(x, phi0 + carry * a as f64) / dens(x, phi0 + carry * (1 - a) as f64);
                let got = r.density_ratio(1, a, &DVector::from_element(1, x));
                assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn alternating_day_has_unit_ratio_and_bernoulli_is_rejected() {
        let p = scalar_params(0.4, 0.8, 1.5);
        let ad = RatioModel::from_params(&p, &DesignSpec::alternating_day(3).unwrap()).unwrap();
        assert!((ad.density_ratio(2, 1, &DVector::from_element(1, 0.7)) - 1.0).abs() < 1e-15);
        assert!(RatioModel::from_params(&p, &DesignSpec::regular_bernoulli(1, 3).unwrap()).is_err());
    }
}
