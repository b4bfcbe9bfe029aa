//! Per-interval least-squares fit of the linear reward and transition models
//! and the plug-in estimator built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, least_squares, MAX_CONDITION};
use crate::model::{LinearModel, LinearValue};
use crate::panel::Panel;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub model: LinearModel,
    /// Condition number of the Gram matrix of `(1, S_t, A_t)` at each interval.
    pub condition: Vec<f64>,
    /// Transition residuals `S_{t+1} - φ̂_t - Φ̂_t S_t - Γ̂_t A_t`, one `n × d`
    /// matrix per transition step.
    pub state_residuals: Vec<DMatrix<f64>>,
}

fn design_matrix(panel: &Panel, t: usize) -> DMatrix<f64> {
    let n = panel.n();
    let d = panel.dim();
    DMatrix::from_fn(n, d + 2, |i, c| {
        if c == 0 {
            1.0
        } else if c <= d {
            panel.states[t][(i, c - 1)]
        } else {
            panel.actions[(i, t)] as f64
        }
    })
}

/// Regresses `R_t` and each coordinate of `S_{t+1}` on `(1, S_t, A_t)`
/// separately at every interval.
pub fn fit_ols(panel: &Panel) -> Result<OlsFit> {
    let n = panel.n();
    let d = panel.dim();
    let t_len = panel.horizon();
    if n < d + 2 {
        return Err(Error::InsufficientData(format!(
            "least squares with state dimension {d} needs at least {} days, got {n}",
            d + 2
        )));
    }
    let mut model = LinearModel::zeros(t_len, d);
    let mut condition = Vec::with_capacity(t_len);
    let mut state_residuals = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 0..t_len {
        let x = design_matrix(panel, t);
        let gram = x.transpose() * &x;
        let cond = condition_number(&gram);
        condition.push(cond);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::RankDeficient {
                t,
                reason: format!("predictor (1, S_t, A_t) is collinear (condition number {cond:.3e})"),
            });
        }
        let mut y = DMatrix::zeros(n, if t + 1 < t_len { d + 1 } else { 1 });
        y.set_column(0, &panel.rewards.column(t));
        if t + 1 < t_len {
            y.columns_mut(1, d).copy_from(&panel.states[t + 1]);
        }
        let coef = least_squares(&x, &y).ok_or(Error::RankDeficient {
            t,
            reason: "normal equations are singular".into(),
        })?;
        model.intercept[t] = coef[(0, 0)];
        model.state_coef[t] = coef.view((1, 0), (d, 1)).into_owned().column(0).into_owned();
        model.effect[t] = coef[(d + 1, 0)];
        if t + 1 < t_len {
            for j in 0..d {
                let c = coef.column(j + 1);
                model.drift[t][j] = c[0];
                for k in 0..d {
                    model.transition[t][(j, k)] = c[1 + k];
                }
                model.carryover[t][j] = c[d + 1];
            }
            let fitted = &x * coef.columns(1, d);
            state_residuals.push(&panel.states[t + 1] - fitted);
        }
    }
    Ok(OlsFit {
        model,
        condition,
        state_residuals,
    })
}

/// Plug-in estimate: the closed-form treatment effect of the fitted model.
pub fn ate_ols(fit: &OlsFit) -> f64 {
    fit.model.ate()
}

pub fn estimate_ols(panel: &Panel) -> Result<f64> {
    Ok(ate_ols(&fit_ols(panel)?))
}

/// Model-based value `V_t^a(s)` (0-based `t`) of the fitted model.
pub fn value_model_based(fit: &OlsFit, t: usize, a: u8, s: &DVector<f64>) -> f64 {
    fit.model.value_functions().value(t, a, s)
}

impl OlsFit {
    pub fn values(&self) -> LinearValue {
        self.model.value_functions()
    }
}
