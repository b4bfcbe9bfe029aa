//! Percentile-bootstrap confidence intervals and their coverage.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{CoefficientMode, DgpConfig, Experiment, ExperimentConfig, TruthMode};
use super::metrics::proportion_se;
use crate::covariance::ErrorCovSpec;
use crate::design::{generate_actions, DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{run_estimator, EstimatorId, EstimatorOptions};
use crate::model::Dgp;
use crate::panel::Panel;
use crate::rng::{substream, Rng};
use crate::simulate::{simulate, BootstrapEnv};

const CI: u64 = 11;

/// Process whose panels are resampled, with its known truth.
#[derive(Debug, Clone, Copy)]
pub enum CiSource<'a> {
    Env(&'a BootstrapEnv),
    Dgp { dgp: &'a Dgp, truth: f64 },
}

impl CiSource<'_> {
    pub fn truth(&self) -> f64 {
        match self {
            CiSource::Env(env) => env.true_ate(),
            CiSource::Dgp { truth, .. } => *truth,
        }
    }

    fn horizon(&self) -> usize {
        match self {
            CiSource::Env(env) => env.horizon(),
            CiSource::Dgp { dgp, .. } => dgp.params().horizon(),
        }
    }

    fn panel(&self, design: &DesignSpec, n: usize, rng: &mut Rng) -> Result<Panel> {
        let actions = generate_actions(design, n, rng)?;
        match self {
            CiSource::Env(env) => env.simulate_with_actions(&actions, None, rng),
            CiSource::Dgp { dgp, .. } => simulate(dgp, &actions, rng),
        }
    }
}

fn default_resamples() -> usize {
    400
}
fn default_level() -> f64 {
    0.95
}
fn default_outer() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiConfig {
    pub design: DesignKind,
    pub estimator: EstimatorId,
    pub n: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Simulated panels over which coverage is measured.
    #[serde(default = "default_outer")]
    pub outer_reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator_options: EstimatorOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CiReport {
    pub truth: f64,
    pub coverage: f64,
    /// Binomial standard error of `coverage`.
    pub coverage_se: f64,
    pub mean_width: f64,
    pub width_se: f64,
    /// One entry per outer replication; `None` where the point estimate failed.
    pub intervals: Vec<Option<Interval>>,
    pub failed_outer: usize,
    /// Resamples redrawn because the estimator failed on them.
    pub redrawn: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from `resamples` day-level bootstrap resamples.
/// Failed resamples are redrawn, up to ten times the requested count.
pub fn percentile_interval(
    panel: &Panel,
    design: &DesignSpec,
    estimator: EstimatorId,
    opts: &EstimatorOptions,
    resamples: usize,
    level: f64,
    rng: &mut Rng,
) -> Result<(Interval, usize)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if resamples < 2 {
        return Err(Error::Config("at least two bootstrap resamples are required".into()));
    }
    let estimate = run_estimator(estimator, panel, design, opts)?;
    let n = panel.n();
    let mut draws = Vec::with_capacity(resamples);
    let mut redrawn = 0;
    let mut days = vec![0usize; n];
    while draws.len() < resamples {
        if redrawn > 10 * resamples {
            return Err(Error::InsufficientData(format!(
                "{redrawn} bootstrap resamples failed; the estimator is unstable at n={n}"
            )));
        }
        for d in days.iter_mut() {
            *d = rng.random_range(0..n);
        }
        match run_estimator(estimator, &panel.select_days(&days), design, opts) {
            Ok(v) => draws.push(v),
            Err(_) => redrawn += 1,
        }
    }
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((
        Interval {
            estimate,
            lo: quantile(&draws, tail),
            hi: quantile(&draws, 1.0 - tail),
        },
        redrawn,
    ))
}

/// Coverage of the known truth and mean width over `cfg.outer_reps`
/// simulated panels. Each outer replication owns a substream, so the report
/// does not depend on the worker count.
pub fn bootstrap_ci(source: &CiSource<'_>, cfg: &CiConfig, jobs: Option<usize>) -> Result<CiReport> {
    if cfg.outer_reps == 0 {
        return Err(Error::Config("outer_reps must be at least 1".into()));
    }
    let design = DesignSpec::new(cfg.design, source.horizon())?;
    let truth = source.truth();
    let work = || -> Vec<Option<(Interval, usize)>> {
        (0..cfg.outer_reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(cfg.seed, &[CI, r as u64]);
                let panel = source.panel(&design, cfg.n, &mut rng).ok()?;
                percentile_interval(
                    &panel,
                    &design,
                    cfg.estimator,
                    &cfg.estimator_options,
                    cfg.resamples,
                    cfg.level,
                    &mut rng,
                )
                .ok()
            })
            .collect()
    };
    let results = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let ok: Vec<&Interval> = results.iter().flatten().map(|(iv, _)| iv).collect();
    if ok.is_empty() {
        return Err(Error::InsufficientData("every outer replication failed".into()));
    }
    let k = ok.len() as f64;
    let coverage = ok.iter().filter(|iv| iv.covers(truth)).count() as f64 / k;
    let widths: Vec<f64> = ok.iter().map(|iv| iv.width()).collect();
    let mean_width = widths.iter().sum::<f64>() / k;
    let width_var = if ok.len() > 1 {
        widths.iter().map(|w| (w - mean_width).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(CiReport {
        truth,
        coverage,
        coverage_se: proportion_se(coverage, ok.len()),
        mean_width,
        width_se: (width_var / k).sqrt(),
        failed_outer: results.iter().filter(|r| r.is_none()).count(),
        redrawn: results.iter().flatten().map(|(_, r)| r).sum(),
        intervals: results.into_iter().map(|r| r.map(|(iv, _)| iv)).collect(),
    })
}

/// Settings of a coverage study: the process plus the interval settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiRunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub dgp: DgpConfig,
    #[serde(default)]
    pub reward_cov: Option<ErrorCovSpec>,
    #[serde(default)]
    pub truth: TruthMode,
    pub ci: CiConfig,
}

impl CiRunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Builds the process (one fixed coefficient draw) and runs [`bootstrap_ci`].
pub fn run_ci(cfg: &CiRunConfig, jobs: Option<usize>) -> Result<CiReport> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("no seed given in the config or on the command line".into()))?;
    let exp = Experiment::new(&ExperimentConfig {
        seed: Some(seed),
        replications: 1,
        n: vec![cfg.ci.n],
        designs: vec![1],
        estimators: vec![cfg.ci.estimator],
        dgp: cfg.dgp.clone(),
        reward_cov: cfg.reward_cov.into_iter().collect(),
        coefficients: Some(CoefficientMode::Fixed),
        truth: cfg.truth,
        estimator_options: cfg.ci.estimator_options,
    })?;
    let source = exp.fixed_source(0);
    bootstrap_ci(&source, &CiConfig { seed, ..cfg.ci }, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 0.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert!((quantile(&xs, 0.1) - 0.4).abs() < 1e-15);
    }
}
