use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Linear sieve used to approximate value functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Basis {
    /// Intercept plus raw state coordinates, `L = d + 1`.
    #[default]
    Linear,
    /// Intercept plus `s_j^k` for every coordinate and `k = 1..=degree`
    /// (no interactions), `L = 1 + d·degree`.
    Polynomial { degree: usize },
}

impl Basis {
    pub fn degree(&self) -> usize {
        match *self {
            Basis::Linear => 1,
            Basis::Polynomial { degree } => degree.max(1),
        }
    }

    pub fn len(&self, dim: usize) -> usize {
        1 + dim * self.degree()
    }

    pub fn features(&self, s: &DVector<f64>) -> DVector<f64> {
        let deg = self.degree();
        let mut out = DVector::zeros(self.len(s.len()));
        out[0] = 1.0;
        for (j, &x) in s.iter().enumerate() {
            let mut p = 1.0;
            for k in 0..deg {
                p *= x;
                out[1 + k * s.len() + j] = p;
            }
        }
        out
    }

    /// Features of the time-augmented state: the tensor product of
    /// [`Basis::features`] with `(1, τ)`.
    pub fn time_features(&self, s: &DVector<f64>, tau: f64) -> DVector<f64> {
        let base = self.features(s);
        let l = base.len();
        let mut out = DVector::zeros(2 * l);
        out.rows_mut(0, l).copy_from(&base);
        out.rows_mut(l, l).copy_from(&(base * tau));
        out
    }
}
