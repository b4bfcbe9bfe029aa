//! Design recommendation from Markov-test outcome, carryover size and
//! residual correlation.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Evidence about the carryover effect: a label or a numeric `δ` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarryoverEvidence {
    Weak,
    Strong,
    Delta(f64),
}

/// Evidence about residual correlation: a label or the mean off-diagonal
/// correlation of fitted reward residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationEvidence {
    Positive,
    Uncorrelated,
    Negative,
    Mean(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkflowInput {
    /// Outcome of an external test of the Markov assumption.
    pub markov_ok: bool,
    pub carryover: CarryoverEvidence,
    pub residuals: CorrelationEvidence,
}

/// Cutoffs used when the evidence is numeric. These defaults are a
/// judgment call, not derived from theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvisorThresholds {
    /// `δ` above this counts as strong carryover.
    pub strong_delta: f64,
    /// Mean correlation above this counts as mostly positive.
    pub positive_corr: f64,
    /// Mean correlation below this counts as mostly negative.
    pub negative_corr: f64,
}

impl Default for AdvisorThresholds {
    fn default() -> Self {
        AdvisorThresholds {
            strong_delta: 0.1,
            positive_corr: 0.05,
            negative_corr: -0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    AlternatingDay,
    SwitchbackM1,
    Rediscretize,
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recommendation::AlternatingDay => "AD",
            Recommendation::SwitchbackM1 => "SB, m=1",
            Recommendation::Rediscretize => "re-discretize",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Advice {
    pub recommendation: Recommendation,
    pub rationale: String,
}

pub fn recommend_design(input: &WorkflowInput, th: &AdvisorThresholds) -> Advice {
    if !input.markov_ok {
        return Advice {
            recommendation: Recommendation::Rediscretize,
            rationale: "The Markov assumption is violated: lengthen the time intervals until state and reward \
                        are Markov, then reassess."
                .into(),
        };
    }
    let strong = match input.carryover {
        CarryoverEvidence::Weak => false,
        CarryoverEvidence::Strong => true,
        CarryoverEvidence::Delta(d) => d > th.strong_delta,
    };
    if strong {
        return Advice {
            recommendation: Recommendation::AlternatingDay,
            rationale: "Carryover is strong: switching within a day shifts the state distribution away from \
                        either constant policy, and the resulting bias outweighs any variance gain. Use \
                        alternating days."
                .into(),
        };
    }
    let positive = match input.residuals {
        CorrelationEvidence::Positive => true,
        CorrelationEvidence::Uncorrelated | CorrelationEvidence::Negative => false,
        CorrelationEvidence::Mean(c) => c > th.positive_corr,
    };
    if positive {
        Advice {
            recommendation: Recommendation::SwitchbackM1,
            rationale: "Carryover is weak and reward residuals are mostly positively correlated: switching at \
                        every interval cancels correlated errors in the treatment contrast."
                .into(),
        }
    } else {
        Advice {
            recommendation: Recommendation::AlternatingDay,
            rationale: "Carryover is weak and reward residuals are uncorrelated or mostly negatively \
                        correlated: frequent switching brings no variance reduction, so alternating days \
                        is preferred."
                .into(),
        }
    }
}
