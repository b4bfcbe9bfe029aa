//! Correlation of fitted reward residuals across intervals.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::panel::Panel;

#[derive(Debug, Clone, Serialize)]
pub struct ResidualCorrelation {
    /// `n × T` fitted residuals.
    pub residuals: DMatrix<f64>,
    /// `T × T` correlations; `NaN` where a residual column has no variance.
    pub matrix: DMatrix<f64>,
    /// Intervals whose residuals are numerically constant.
    pub degenerate: Vec<usize>,
}

impl ResidualCorrelation {
    pub fn get(&self, t1: usize, t2: usize) -> Option<f64> {
        let v = self.matrix[(t1, t2)];
        (!v.is_nan()).then_some(v)
    }

    fn mean_where(&self, keep: impl Fn(usize, usize) -> bool) -> Option<f64> {
        let t_len = self.matrix.nrows();
        let (mut sum, mut count) = (0.0, 0usize);
        for t1 in 0..t_len {
            for t2 in (t1 + 1)..t_len {
                if keep(t1, t2) {
                    if let Some(v) = self.get(t1, t2) {
                        sum += v;
                        count += 1;
                    }
                }
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean of the defined off-diagonal entries.
    pub fn mean_offdiag(&self) -> Option<f64> {
        self.mean_where(|_, _| true)
    }

    /// Mean correlation at lag `k`.
    pub fn lag_mean(&self, k: usize) -> Option<f64> {
        self.mean_where(|t1, t2| t2 - t1 == k)
    }
}

/// Regresses the reward at each interval on `(1, S_t)`, plus `A_t` when the
/// action varies at that interval, and correlates the residuals across days.
pub fn residual_correlation(panel: &Panel) -> Result<ResidualCorrelation> {
    let n = panel.n();
    let t_len = panel.horizon();
    let d = panel.dim();
    let mut residuals = DMatrix::zeros(n, t_len);
    for t in 0..t_len {
        let varies = (1..n).any(|i| panel.actions[(i, t)] != panel.actions[(0, t)]);
        let p = d + 1 + usize::from(varies);
        if n <= p {
            return Err(Error::InsufficientData(format!(
                "residual fit at t={} needs more than {p} days, got {n}",
                t + 1
            )));
        }
        let x = DMatrix::from_fn(n, p, |i, c| match c {
            0 => 1.0,
            c if c <= d => panel.states[t][(i, c - 1)],
            _ => panel.actions[(i, t)] as f64,
        });
        let y = panel.rewards.column(t).into_owned();
        let y = DMatrix::from_column_slice(n, 1, y.as_slice());
        let coef = least_squares(&x, &y).ok_or(Error::RankDeficient {
            t: t + 1,
            reason: "reward regression for residuals".into(),
        })?;
        let fitted = &x * coef;
        for i in 0..n {
            residuals[(i, t)] = y[(i, 0)] - fitted[(i, 0)];
        }
    }

    let means: Vec<f64> = (0..t_len).map(|t| residuals.column(t).mean()).collect();
    let centred = DMatrix::from_fn(n, t_len, |i, t| residuals[(i, t)] - means[t]);
    let cross = centred.transpose() * &centred;
    let degenerate: Vec<usize> = (0..t_len)
        .filter(|&t| {
            let col = panel.rewards.column(t);
            let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
            cross[(t, t)].sqrt() <= 1e-9 * scale * (n as f64).sqrt()
        })
        .collect();
    let matrix = DMatrix::from_fn(t_len, t_len, |a, b| {
        if degenerate.contains(&a) || degenerate.contains(&b) {
            f64::NAN
        } else if a == b {
            1.0
        } else {
            cross[(a, b)] / (cross[(a, a)] * cross[(b, b)]).sqrt()
        }
    });
    Ok(ResidualCorrelation {
        residuals,
        matrix,
        degenerate,
    })
}
