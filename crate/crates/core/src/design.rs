//! Treatment-assignment designs and action generation.
//!
//! Intervals are indexed from 0 internally: interval `t` in `0..horizon`
//! corresponds to the 1-based interval `t + 1`.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// Policy held for `block` intervals then flipped; the starting policy
    /// flips from one day to the next.
    Switchback { block: usize },
    /// One policy per day, alternated daily. Same as `Switchback` with `block = horizon`.
    AlternatingDay,
    /// Each block head is a fresh fair coin; interiors copy the head.
    RegularBernoulli { block: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct DesignSpec {
    kind: DesignKind,
    horizon: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDesign {
    #[serde(flatten)]
    kind: DesignKind,
    horizon: usize,
}

impl TryFrom<RawDesign> for DesignSpec {
    type Error = Error;
    fn try_from(raw: RawDesign) -> Result<Self> {
        DesignSpec::new(raw.kind, raw.horizon)
    }
}

impl From<DesignSpec> for RawDesign {
    fn from(d: DesignSpec) -> Self {
        RawDesign {
            kind: d.kind,
            horizon: d.horizon,
        }
    }
}

/// How the very first action of day 1 is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstAction {
    Random,
    Forced(u8),
}

impl DesignSpec {
    pub fn new(kind: DesignKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        match kind {
            DesignKind::Switchback { block } | DesignKind::RegularBernoulli { block } => {
                if block == 0 {
                    return Err(Error::Config("block length m must be positive".into()));
                }
                if horizon % block != 0 {
                    return Err(Error::Config(format!(
                        "m must divide T (m={block}, T={horizon})"
                    )));
                }
            }
            DesignKind::AlternatingDay => {}
        }
        Ok(DesignSpec { kind, horizon })
    }

    pub fn switchback(block: usize, horizon: usize) -> Result<Self> {
        Self::new(DesignKind::Switchback { block }, horizon)
    }

    pub fn alternating_day(horizon: usize) -> Result<Self> {
        Self::new(DesignKind::AlternatingDay, horizon)
    }

    pub fn regular_bernoulli(block: usize, horizon: usize) -> Result<Self> {
        Self::new(DesignKind::RegularBernoulli { block }, horizon)
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Block length `m` (`T` for alternating-day).
    pub fn block(&self) -> usize {
        match self.kind {
            DesignKind::Switchback { block } | DesignKind::RegularBernoulli { block } => block,
            DesignKind::AlternatingDay => self.horizon,
        }
    }

    pub fn blocks_per_day(&self) -> usize {
        self.horizon / self.block()
    }

    /// True when the whole day's action sequence is pinned down by any single action.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self.kind, DesignKind::RegularBernoulli { .. })
    }

    /// For deterministic designs: the action at interval `k` on a day whose
    /// action at interval `t` equals `a`.
    pub fn implied_action(&self, k: usize, t: usize, a: u8) -> Option<u8> {
        if !self.is_deterministic() {
            return None;
        }
        let m = self.block();
        let gap = (k / m).abs_diff(t / m);
        Some(if gap % 2 == 0 { a } else { 1 - a })
    }

    pub fn label(&self) -> String {
        match self.kind {
            DesignKind::Switchback { block } => format!("sb{block}"),
            DesignKind::AlternatingDay => "ad".to_string(),
            DesignKind::RegularBernoulli { block } => format!("rb{block}"),
        }
    }
}

/// Generates an `n x T` action matrix (rows are days) for `design`.
pub fn generate_actions(design: &DesignSpec, n: usize, rng: &mut Rng) -> Result<DMatrix<u8>> {
    generate_actions_with(design, n, FirstAction::Random, rng)
}

/// Seeded convenience wrapper around [`generate_actions`].
pub fn generate_actions_seeded(design: &DesignSpec, n: usize, seed: u64) -> Result<DMatrix<u8>> {
    generate_actions(design, n, &mut seeded(seed))
}

pub fn generate_actions_with(
    design: &DesignSpec,
    n: usize,
    first: FirstAction,
    rng: &mut Rng,
) -> Result<DMatrix<u8>> {
    if n == 0 {
        return Err(Error::Config("number of days must be at least 1".into()));
    }
    let t_len = design.horizon();
    let m = design.block();
    let mut actions = DMatrix::<u8>::zeros(n, t_len);
    let coin = |rng: &mut Rng| -> u8 { u8::from(rng.random::<bool>()) };
    match design.kind() {
        DesignKind::Switchback { .. } | DesignKind::AlternatingDay => {
            let start = match first {
                FirstAction::Random => coin(rng),
                FirstAction::Forced(a) => a.min(1),
            };
            for i in 0..n {
                let day_start = if i % 2 == 0 { start } else { 1 - start };
                for t in 0..t_len {
                    let flip = ((t / m) % 2) as u8;
                    actions[(i, t)] = day_start ^ flip;
                }
            }
        }
        DesignKind::RegularBernoulli { .. } => {
            for i in 0..n {
                for k in 0..t_len / m {
                    let head = match (i, k, first) {
                        (0, 0, FirstAction::Forced(a)) => a.min(1),
                        _ => coin(rng),
                    };
                    for t in k * m..(k + 1) * m {
                        actions[(i, t)] = head;
                    }
                }
            }
        }
    }
    Ok(actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: &DMatrix<u8>, i: usize) -> Vec<u8> {
        a.row(i).iter().copied().collect()
    }

    #[test]
    fn switchback_m1_alternates() {
        let d = DesignSpec::switchback(1, 4).unwrap();
        let a = generate_actions_with(&d, 1, FirstAction::Forced(0), &mut seeded(1)).unwrap();
        assert_eq!(row(&a, 0), vec![0, 1, 0, 1]);
    }

    #[test]
    fn alternating_day_flips_daily() {
        let d = DesignSpec::alternating_day(4).unwrap();
        let a = generate_actions_with(&d, 2, FirstAction::Forced(1), &mut seeded(1)).unwrap();
        assert_eq!(row(&a, 0), vec![1, 1, 1, 1]);
        assert_eq!(row(&a, 1), vec![0, 0, 0, 0]);
    }

    #[test]
    fn switchback_m2_blocks() {
        let d = DesignSpec::switchback(2, 6).unwrap();
        let a = generate_actions_with(&d, 1, FirstAction::Forced(1), &mut seeded(1)).unwrap();
        assert_eq!(row(&a, 0), vec![1, 1, 0, 0, 1, 1]);
    }

    #[test]
    fn block_must_divide_horizon() {
        let err = DesignSpec::switchback(5, 48).unwrap_err();
        assert!(err.to_string().contains("m must divide T"));
        assert!(DesignSpec::regular_bernoulli(7, 48).is_err());
        assert!(DesignSpec::switchback(0, 48).is_err());
    }

    #[test]
    fn alternating_day_equals_switchback_with_full_block() {
        let ad = DesignSpec::alternating_day(12).unwrap();
        let sb = DesignSpec::switchback(12, 12).unwrap();
        let a = generate_actions_seeded(&ad, 5, 3).unwrap();
        let b = generate_actions_seeded(&sb, 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regular_bernoulli_blocks_constant() {
        let d = DesignSpec::regular_bernoulli(3, 12).unwrap();
        let a = generate_actions_seeded(&d, 20, 9).unwrap();
        for i in 0..20 {
            for t in 0..12 {
                assert_eq!(a[(i, t)], a[(i, (t / 3) * 3)]);
            }
        }
    }

    #[test]
    fn implied_action_matches_generated_sequence() {
        let d = DesignSpec::switchback(3, 12).unwrap();
        let a = generate_actions_seeded(&d, 1, 5).unwrap();
        for t in 0..12 {
            for k in 0..12 {
                assert_eq!(d.implied_action(k, t, a[(0, t)]), Some(a[(0, k)]));
            }
        }
    }

    #[test]
    fn design_round_trips_through_serde() {
        let d = DesignSpec::regular_bernoulli(6, 48).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: DesignSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        assert!(serde_json::from_str::<DesignSpec>(r#"{"kind":"switchback","block":5,"horizon":48}"#).is_err());
    }
}
