//! Monte Carlo experiments over designs, estimators and sample sizes.
//!
//! Random streams are keyed by what they feed, never by scheduling order:
//!
//! * coefficients and truth by replication,
//! * panel noise by (replication, n), shared by every design so that design
//!   comparisons use common random numbers,
//! * actions by (replication, n, m, design family),
//! * the cross-fitting split by (replication, n, m).
//!
//! Any subset of cells therefore reproduces exactly the numbers it would
//! have had inside the full grid, which is what makes sweeps resumable.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_from_errors, Metrics};
use crate::covariance::ErrorCovSpec;
use crate::design::{generate_actions, DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{run_estimator, EstimatorId, EstimatorOptions};
use crate::model::{CoefficientLaw, Dgp, LinearDgpParams, NonlinearDgpParams};
use crate::panel::Panel;
use crate::rng::{derive_seed, substream, Rng};
use crate::simulate::{fit_bootstrap_env, simulate, synthetic_aa_source, true_ate_mc, AaSourceConfig, BootstrapEnv};

const COEF: u64 = 1;
const TRUTH: u64 = 2;
const NOISE: u64 = 3;
const ACTIONS: u64 = 4;
const FOLDS: u64 = 5;
const SOURCE: u64 = 6;
pub(crate) const SIM: u64 = 7;

fn default_horizon() -> usize {
    48
}
fn default_dim() -> usize {
    3
}
fn default_source_horizon() -> usize {
    24
}
fn default_source_dim() -> usize {
    2
}
fn default_source_days() -> usize {
    40
}
fn default_reward_level() -> f64 {
    10.0
}

/// Which process generates the panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DgpConfig {
    Linear {
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        /// Mean of the carryover coefficients; 0 when omitted.
        #[serde(default)]
        carryover_shift: Option<f64>,
    },
    Nonlinear {
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        carryover_shift: Option<f64>,
    },
    /// Wild-bootstrap environment fitted to an A/A panel: either a CSV file
    /// or a synthetic source simulated from each configured reward covariance.
    Bootstrap {
        #[serde(default)]
        source_panel: Option<PathBuf>,
        #[serde(default = "default_source_horizon")]
        horizon: usize,
        #[serde(default = "default_source_dim")]
        dim: usize,
        #[serde(default = "default_source_days")]
        source_days: usize,
        #[serde(default = "default_reward_level")]
        reward_level: f64,
        /// Synthetic direct effect, percent of the mean reward.
        delta_reward: f64,
        /// Synthetic carryover, percent of the mean state.
        delta_state: f64,
    },
}

impl DgpConfig {
    pub fn label(&self) -> &'static str {
        match self {
            DgpConfig::Linear { .. } => "linear",
            DgpConfig::Nonlinear { .. } => "nonlinear",
            DgpConfig::Bootstrap { .. } => "bootstrap",
        }
    }

    /// True when a synthetic process leaves its carryover shift unset.
    pub fn carryover_shift_defaulted(&self) -> bool {
        matches!(
            self,
            DgpConfig::Linear { carryover_shift: None, .. } | DgpConfig::Nonlinear { carryover_shift: None, .. }
        )
    }

    fn law(&self) -> Option<CoefficientLaw> {
        match *self {
            DgpConfig::Linear { carryover_shift, .. } => Some(CoefficientLaw::linear(carryover_shift.unwrap_or(0.0))),
            DgpConfig::Nonlinear { carryover_shift, .. } => {
                Some(CoefficientLaw::nonlinear(carryover_shift.unwrap_or(0.0)))
            }
            DgpConfig::Bootstrap { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// Fresh coefficients every replication.
    Redraw,
    /// One coefficient draw shared by all replications.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthMode {
    /// Closed form where one exists, Monte Carlo with 20 000 days otherwise.
    #[default]
    Auto,
    ClosedForm,
    MonteCarlo { reps: usize },
}

const AUTO_MC_REPS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; may be supplied on the command line instead.
    #[serde(default)]
    pub seed: Option<u64>,
    pub replications: usize,
    /// Days per panel.
    pub n: Vec<usize>,
    /// Block lengths `m`; `m = T` is the alternating-day design.
    pub designs: Vec<usize>,
    pub estimators: Vec<EstimatorId>,
    pub dgp: DgpConfig,
    /// Reward-error covariances; the grid runs over every entry.
    #[serde(default)]
    pub reward_cov: Vec<ErrorCovSpec>,
    /// Defaults to `redraw` for synthetic processes and `fixed` for the
    /// bootstrap environment.
    #[serde(default)]
    pub coefficients: Option<CoefficientMode>,
    #[serde(default)]
    pub truth: TruthMode,
    #[serde(default)]
    pub estimator_options: EstimatorOptions,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn coefficient_mode(&self) -> CoefficientMode {
        self.coefficients.unwrap_or(match self.dgp {
            DgpConfig::Bootstrap { .. } => CoefficientMode::Fixed,
            _ => CoefficientMode::Redraw,
        })
    }

    /// Every cell of the grid in output order.
    pub fn cells(&self) -> Vec<CellKey> {
        let covs = self.reward_cov.len().max(1);
        let mut out = Vec::new();
        for cov in 0..covs {
            for &n in &self.n {
                for &m in &self.designs {
                    for &estimator in &self.estimators {
                        out.push(CellKey { cov, n, m, estimator });
                    }
                }
            }
        }
        out
    }
}

/// One (covariance, n, m, estimator) combination of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    /// Index into the configured reward covariances.
    pub cov: usize,
    pub n: usize,
    pub m: usize,
    pub estimator: EstimatorId,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub key: CellKey,
    pub cov_label: String,
    /// Per-replication estimates; `None` where the estimator failed.
    pub estimates: Vec<Option<f64>>,
    /// Per-replication truth.
    pub truths: Vec<f64>,
    /// Metrics over the replications that succeeded.
    pub metrics: Option<Metrics>,
    pub excluded: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub dgp: String,
    pub coefficients: CoefficientMode,
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, key: &CellKey) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.key == *key)
    }

    pub fn excluded_total(&self) -> usize {
        self.cells.iter().map(|c| c.excluded).sum()
    }
}

enum Source {
    Synthetic { law: CoefficientLaw, horizon: usize, dim: usize, nonlinear: bool },
    Bootstrap(Vec<BootstrapEnv>),
}

/// A validated configuration with its fixed ingredients built.
pub struct Experiment {
    cfg: ExperimentConfig,
    seed: u64,
    horizon: usize,
    covs: Vec<ErrorCovSpec>,
    cov_labels: Vec<String>,
    source: Source,
    mode: CoefficientMode,
    /// Shared draw in fixed-coefficient mode.
    fixed: Option<(Dgp, f64)>,
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let seed = cfg
            .seed
            .ok_or_else(|| Error::Config("no seed given in the config or on the command line".into()))?;
        if cfg.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if cfg.n.is_empty() || cfg.designs.is_empty() || cfg.estimators.is_empty() {
            return Err(Error::Config("n, designs and estimators must each list at least one value".into()));
        }
        if cfg.n.contains(&0) {
            return Err(Error::Config("number of days must be at least 1".into()));
        }
        let mode = cfg.coefficient_mode();
        let (horizon, covs, labels, source) = match &cfg.dgp {
            DgpConfig::Linear { horizon, dim, .. } | DgpConfig::Nonlinear { horizon, dim, .. } => {
                if cfg.reward_cov.is_empty() {
                    return Err(Error::Config("at least one reward_cov entry is required".into()));
                }
                let law = cfg.dgp.law().expect("synthetic process");
                let nonlinear = matches!(cfg.dgp, DgpConfig::Nonlinear { .. });
                if nonlinear && cfg.truth == TruthMode::ClosedForm {
                    return Err(Error::Config("the nonlinear process has no closed-form truth".into()));
                }
                let labels = cfg.reward_cov.iter().map(|c| c.label()).collect();
                let src = Source::Synthetic { law, horizon: *horizon, dim: *dim, nonlinear };
                (*horizon, cfg.reward_cov.clone(), labels, src)
            }
            DgpConfig::Bootstrap {
                source_panel,
                horizon,
                dim,
                source_days,
                reward_level,
                delta_reward,
                delta_state,
            } => {
                if mode == CoefficientMode::Redraw {
                    return Err(Error::Config("the bootstrap environment is fitted once; use fixed coefficients".into()));
                }
                if let TruthMode::MonteCarlo { .. } = cfg.truth {
                    return Err(Error::Config("the bootstrap environment uses its closed-form truth".into()));
                }
                match source_panel {
                    Some(path) => {
                        if !cfg.reward_cov.is_empty() {
                            return Err(Error::Config(
                                "reward_cov cannot be combined with a bootstrap source panel".into(),
                            ));
                        }
                        let panel = Panel::read_csv(File::open(path)?)?;
                        let env = fit_bootstrap_env(&panel, *delta_reward, *delta_state)?;
                        (panel.horizon(), Vec::new(), vec!["source".to_string()], Source::Bootstrap(vec![env]))
                    }
                    None => {
                        if cfg.reward_cov.is_empty() {
                            return Err(Error::Config("at least one reward_cov entry is required".into()));
                        }
                        let mut envs = Vec::new();
                        for (k, cov) in cfg.reward_cov.iter().enumerate() {
                            let src_cfg = AaSourceConfig {
                                horizon: *horizon,
                                dim: *dim,
                                days: *source_days,
                                reward_cov: *cov,
                                reward_level: *reward_level,
                            };
                            let panel = synthetic_aa_source(&src_cfg, &mut substream(seed, &[SOURCE, k as u64]))?;
                            envs.push(fit_bootstrap_env(&panel, *delta_reward, *delta_state)?);
                        }
                        let labels = cfg.reward_cov.iter().map(|c| c.label()).collect();
                        (*horizon, cfg.reward_cov.clone(), labels, Source::Bootstrap(envs))
                    }
                }
            }
        };
        for c in &covs {
            c.validate_for(horizon)?;
        }
        for &m in &cfg.designs {
            DesignSpec::switchback(m, horizon)?;
        }
        let mut exp = Experiment {
            cfg: cfg.clone(),
            seed,
            horizon,
            covs,
            cov_labels: labels,
            source,
            mode,
            fixed: None,
        };
        if mode == CoefficientMode::Fixed {
            if let Source::Synthetic { .. } = exp.source {
                let mut rng = substream(seed, &[COEF]);
                let dgp = exp.draw_dgp(&mut rng)?;
                let truth = exp.truth_of(&dgp, &mut substream(seed, &[TRUTH]))?;
                exp.fixed = Some((dgp, truth));
            }
        }
        Ok(exp)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cov_label(&self, cov: usize) -> &str {
        &self.cov_labels[cov]
    }

    pub fn bootstrap_envs(&self) -> Option<&[BootstrapEnv]> {
        match &self.source {
            Source::Bootstrap(envs) => Some(envs),
            Source::Synthetic { .. } => None,
        }
    }

    /// The fixed process of covariance entry `cov`, for studies that
    /// resample a single coefficient draw.
    pub(crate) fn fixed_source(&self, cov: usize) -> super::ci::CiSource<'_> {
        match (&self.source, &self.fixed) {
            (Source::Bootstrap(envs), _) => super::ci::CiSource::Env(&envs[cov]),
            (Source::Synthetic { .. }, Some((dgp, truth))) => super::ci::CiSource::Dgp { dgp, truth: *truth },
            (Source::Synthetic { .. }, None) => unreachable!("fixed mode draws at construction"),
        }
    }

    fn draw_dgp(&self, rng: &mut Rng) -> Result<Dgp> {
        let Source::Synthetic { law, horizon, dim, nonlinear } = &self.source else {
            unreachable!("only synthetic processes are drawn");
        };
        let params: LinearDgpParams = law.draw(*horizon, *dim, self.covs[0], rng)?;
        Ok(if *nonlinear {
            Dgp::Nonlinear(NonlinearDgpParams { base: params })
        } else {
            Dgp::Linear(params)
        })
    }

    fn truth_of(&self, dgp: &Dgp, rng: &mut Rng) -> Result<f64> {
        match (dgp, self.cfg.truth) {
            (Dgp::Linear(p), TruthMode::Auto | TruthMode::ClosedForm) => Ok(p.true_ate()),
            (_, TruthMode::MonteCarlo { reps }) => Ok(true_ate_mc(dgp, reps, rng)?.ate),
            (Dgp::Nonlinear(_), _) => Ok(true_ate_mc(dgp, AUTO_MC_REPS, rng)?.ate),
        }
    }

    /// Coefficients and truth of one replication.
    fn replication_dgp(&self, rep: usize) -> Result<Option<(Dgp, f64)>> {
        match (&self.source, self.mode) {
            (Source::Bootstrap(_), _) => Ok(None),
            (Source::Synthetic { .. }, CoefficientMode::Fixed) => Ok(self.fixed.clone()),
            (Source::Synthetic { .. }, CoefficientMode::Redraw) => {
                let dgp = self.draw_dgp(&mut substream(self.seed, &[COEF, rep as u64]))?;
                let truth = self.truth_of(&dgp, &mut substream(self.seed, &[TRUTH, rep as u64]))?;
                Ok(Some((dgp, truth)))
            }
        }
    }

    fn with_cov(dgp: &Dgp, cov: ErrorCovSpec) -> Dgp {
        let mut d = dgp.clone();
        match &mut d {
            Dgp::Linear(p) => p.reward_cov = cov,
            Dgp::Nonlinear(p) => p.base.reward_cov = cov,
        }
        d
    }

    /// Runs the whole grid.
    pub fn run(&self, jobs: Option<usize>) -> Result<ExperimentReport> {
        self.run_cells(&self.cfg.cells(), jobs)
    }

    /// Runs the listed cells only; their values match a full run exactly.
    pub fn run_cells(&self, keys: &[CellKey], jobs: Option<usize>) -> Result<ExperimentReport> {
        let reps = self.cfg.replications;
        let work = || -> Vec<Result<RepOutcome>> {
            (0..reps).into_par_iter().map(|rep| self.replication(rep, keys)).collect()
        };
        let outcomes = match jobs {
            Some(j) => rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
                .install(work),
            None => work(),
        };
        let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

        let cells = keys
            .iter()
            .enumerate()
            .map(|(k, key)| {
                let mut estimates = Vec::with_capacity(reps);
                let mut truths = Vec::with_capacity(reps);
                let mut errors = Vec::with_capacity(reps);
                let mut first_error = None;
                for o in &outcomes {
                    let truth = o.truths[key.cov];
                    truths.push(truth);
                    match &o.values[k] {
                        Ok(v) => {
                            estimates.push(Some(*v));
                            errors.push(v - truth);
                        }
                        Err(msg) => {
                            estimates.push(None);
                            first_error.get_or_insert_with(|| msg.clone());
                        }
                    }
                }
                let excluded = reps - errors.len();
                CellReport {
                    key: *key,
                    cov_label: self.cov_labels[key.cov].clone(),
                    metrics: metrics_from_errors(&errors).ok(),
                    estimates,
                    truths,
                    excluded,
                    first_error,
                }
            })
            .collect();
        Ok(ExperimentReport {
            dgp: self.cfg.dgp.label().to_string(),
            coefficients: self.mode,
            seed: self.seed,
            cells,
        })
    }

    fn simulate_panel(&self, world: &World<'_>, design: &DesignSpec, rep: usize, n: usize) -> Result<Panel> {
        let family = u64::from(!design.is_deterministic());
        let path = [ACTIONS, rep as u64, n as u64, design.block() as u64, family];
        let actions = generate_actions(design, n, &mut substream(self.seed, &path))?;
        world.rollout(&actions, &mut substream(self.seed, &[NOISE, rep as u64, n as u64]))
    }

    fn replication(&self, rep: usize, keys: &[CellKey]) -> Result<RepOutcome> {
        let drawn = self.replication_dgp(rep)?;
        let n_covs = self.cov_labels.len();
        let worlds: Vec<World<'_>> = (0..n_covs)
            .map(|c| match (&self.source, &drawn) {
                (Source::Bootstrap(envs), _) => World::Env(&envs[c]),
                (Source::Synthetic { .. }, Some((dgp, _))) => World::Dgp(Self::with_cov(dgp, self.covs[c])),
                (Source::Synthetic { .. }, None) => unreachable!("synthetic replications always draw"),
            })
            .collect();
        let truths: Vec<f64> = worlds
            .iter()
            .map(|w| match w {
                World::Env(env) => env.true_ate(),
                World::Dgp(_) => drawn.as_ref().expect("drawn").1,
            })
            .collect();

        // Panels are shared by every estimator of a (cov, n, m, family) group.
        let groups: BTreeSet<(usize, usize, usize, bool)> =
            keys.iter().map(|k| (k.cov, k.n, k.m, k.estimator.is_baseline())).collect();
        let mut panels = std::collections::BTreeMap::new();
        for &(cov, n, m, baseline) in &groups {
            let kind = if baseline {
                DesignKind::RegularBernoulli { block: m }
            } else {
                DesignKind::Switchback { block: m }
            };
            let design = DesignSpec::new(kind, self.horizon)?;
            let panel = self.simulate_panel(&worlds[cov], &design, rep, n);
            panels.insert((cov, n, m, baseline), (design, panel));
        }

        let values = keys
            .iter()
            .map(|k| {
                let (design, panel) = &panels[&(k.cov, k.n, k.m, k.estimator.is_baseline())];
                let panel = panel.as_ref().map_err(|e| e.to_string())?;
                let mut opts = self.cfg.estimator_options;
                opts.drl.seed = derive_seed(self.seed, &[FOLDS, opts.drl.seed, rep as u64, k.n as u64, k.m as u64]);
                run_estimator(k.estimator, panel, design, &opts).map_err(|e| e.to_string())
            })
            .collect();
        Ok(RepOutcome { truths, values })
    }
}

struct RepOutcome {
    truths: Vec<f64>,
    values: Vec<std::result::Result<f64, String>>,
}

enum World<'a> {
    Dgp(Dgp),
    Env(&'a BootstrapEnv),
}

impl World<'_> {
    fn rollout(&self, actions: &DMatrix<u8>, rng: &mut Rng) -> Result<Panel> {
        match self {
            World::Dgp(dgp) => simulate(dgp, actions, rng),
            World::Env(env) => env.simulate_with_actions(actions, None, rng),
        }
    }
}

/// Convenience wrapper: validate, build and run the full grid.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    Experiment::new(cfg)?.run(jobs)
}

/// Settings of a single simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub n: usize,
    pub design: DesignKind,
    pub dgp: DgpConfig,
    #[serde(default)]
    pub reward_cov: Option<ErrorCovSpec>,
    #[serde(default)]
    pub truth: TruthMode,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub panel: Panel,
    pub design: DesignSpec,
    /// Average treatment effect of the generating process.
    pub true_ate: f64,
    /// Monte Carlo standard error of `true_ate`, when it was simulated.
    pub true_ate_se: Option<f64>,
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Draws coefficients and simulates one panel. The coefficient, truth and
/// panel streams derive from the seed as in [`Experiment`] replication 0.
pub fn simulate_from_config(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("no seed given in the config or on the command line".into()))?;
    let exp_cfg = ExperimentConfig {
        seed: Some(seed),
        replications: 1,
        n: vec![cfg.n],
        designs: vec![match cfg.design {
            DesignKind::Switchback { block } | DesignKind::RegularBernoulli { block } => block,
            DesignKind::AlternatingDay => match cfg.dgp {
                DgpConfig::Linear { horizon, .. }
                | DgpConfig::Nonlinear { horizon, .. }
                | DgpConfig::Bootstrap { horizon, .. } => horizon,
            },
        }],
        estimators: vec![EstimatorId::Ols],
        dgp: cfg.dgp.clone(),
        reward_cov: cfg.reward_cov.into_iter().collect(),
        coefficients: None,
        truth: cfg.truth,
        estimator_options: EstimatorOptions::default(),
    };
    let exp = Experiment::new(&exp_cfg)?;
    let design = DesignSpec::new(cfg.design, exp.horizon())?;
    let (world, truth, se) = match &exp.source {
        Source::Bootstrap(envs) => (World::Env(&envs[0]), envs[0].true_ate(), None),
        Source::Synthetic { .. } => {
            let dgp = exp.draw_dgp(&mut substream(seed, &[COEF, 0]))?;
            let mut rng = substream(seed, &[TRUTH, 0]);
            let (truth, se) = match (&dgp, cfg.truth) {
                (Dgp::Linear(p), TruthMode::Auto | TruthMode::ClosedForm) => (p.true_ate(), None),
                (_, TruthMode::MonteCarlo { reps }) => {
                    let mc = true_ate_mc(&dgp, reps, &mut rng)?;
                    (mc.ate, Some(mc.se))
                }
                (Dgp::Nonlinear(_), _) => {
                    let mc = true_ate_mc(&dgp, AUTO_MC_REPS, &mut rng)?;
                    (mc.ate, Some(mc.se))
                }
            };
            (World::Dgp(dgp), truth, se)
        }
    };
    let actions = generate_actions(&design, cfg.n, &mut substream(seed, &[SIM, ACTIONS]))?;
    let panel = world.rollout(&actions, &mut substream(seed, &[SIM, NOISE]))?;
    Ok(SimulationOutput {
        panel,
        design,
        true_ate: truth,
        true_ate_se: se,
    })
}
