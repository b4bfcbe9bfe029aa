//! `switchback` command-line tool.
//!
//! Exit codes: 0 on success, 1 when the run completed but some replications
//! (or requested entries) were excluded, 2 on configuration or I/O errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use switchback::harness::{
    residual_correlation, run_ci, run_sweep, simulate_from_config, CiRunConfig, DgpConfig, ExperimentConfig,
    SimulationConfig, SweepManifest, SweepOptions,
};
use switchback::theory::{
    divisors, mse_diff_report, recommend_design, AdvisorThresholds, CarryoverEvidence, CorrelationEvidence,
    WorkflowInput,
};
use switchback::{ErrorCovSpec, Panel};

#[derive(Parser)]
#[command(name = "switchback", version, about = "Design and analysis of switchback experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one panel and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run (or resume) a Monte Carlo grid into a directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        jobs: JobsArg,
    },
    /// Tabulate the autocorrelation term of the MSE difference for each block length.
    Theory(TheoryArgs),
    /// Recommend a design from carryover and residual-correlation evidence.
    Advise(AdviseArgs),
    /// Correlation matrix of fitted reward residuals of an A/A panel.
    Residuals {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage and width of bootstrap percentile intervals.
    Ci {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        jobs: JobsArg,
    },
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; overrides the config. Drawn at random (and printed) if absent everywhere.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct JobsArg {
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Autoregressive,
    MovingAverage,
    Exchangeable,
    Uncorrelated,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, required_if_eq_any([("family", "autoregressive"), ("family", "exchangeable")]))]
    rho: Option<f64>,
    #[arg(long, required_if_eq("family", "moving-average"))]
    window: Option<usize>,
    /// Block lengths to report; every divisor of the horizon when omitted.
    #[arg(long = "m", value_delimiter = ',')]
    blocks: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CarryoverLevel {
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrelationSign {
    Positive,
    Uncorrelated,
    Negative,
}

#[derive(Args)]
struct AdviseArgs {
    #[arg(long, value_enum, conflicts_with = "delta")]
    carryover: Option<CarryoverLevel>,
    /// Estimated carryover discrepancy; compared against a threshold.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, conflicts_with_all = ["corr", "panel"])]
    residuals: Option<CorrelationSign>,
    /// Mean off-diagonal residual correlation.
    #[arg(long, conflicts_with = "panel")]
    corr: Option<f64>,
    /// A/A panel from which to estimate the residual correlation.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    markov_violated: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate { config, out, seed } => simulate(&config, out.as_deref(), seed.seed),
        Command::Sweep { config, out, seed, jobs } => sweep(&config, &out, seed.seed, jobs.jobs),
        Command::Theory(args) => theory(&args),
        Command::Advise(args) => advise(&args),
        Command::Residuals { panel, out } => residuals(&panel, out.as_deref()),
        Command::Ci { config, seed, jobs } => ci(&config, seed.seed, jobs.jobs),
    }
}

fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> u64 {
    cli.or(config).unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn note_defaults(dgp: &DgpConfig) {
    if dgp.carryover_shift_defaulted() {
        eprintln!("note: carryover_shift not set; using 0");
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_panel(path: &Path) -> Result<Panel> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Panel::read_csv(file)?)
}

fn simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<ExitCode> {
    let mut cfg = SimulationConfig::load(config)?;
    cfg.seed = Some(resolve_seed(seed, cfg.seed));
    note_defaults(&cfg.dgp);
    let sim = simulate_from_config(&cfg)?;
    let mut w = output(out)?;
    sim.panel.write_csv(&mut w)?;
    w.flush()?;
    match sim.true_ate_se {
        Some(se) => eprintln!("true ATE: {} (Monte Carlo se {se})", sim.true_ate),
        None => eprintln!("true ATE: {}", sim.true_ate),
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(config: &Path, out: &Path, seed: Option<u64>, jobs: Option<usize>) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(config)?;
    // Resuming without a seed reuses the one recorded by the interrupted run.
    let recorded = std::fs::read(out.join("manifest.json"))
        .ok()
        .and_then(|bytes| serde_json::from_slice::<SweepManifest>(&bytes).ok())
        .map(|m| m.seed);
    cfg.seed = Some(match (seed, cfg.seed, recorded) {
        (None, None, Some(s)) => s,
        (cli, conf, _) => resolve_seed(cli, conf),
    });
    note_defaults(&cfg.dgp);
    let outcome = run_sweep(&cfg, out, &SweepOptions { jobs, max_chunks: None })?;
    eprintln!(
        "{}/{} cells complete ({} computed now); results in {}",
        outcome.completed,
        outcome.total,
        outcome.computed,
        outcome.csv.as_deref().unwrap_or(out).display()
    );
    if outcome.excluded_total > 0 {
        eprintln!("{} replications excluded after estimator failures", outcome.excluded_total);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(args: &TheoryArgs) -> Result<ExitCode> {
    let variance = args.variance;
    let spec = match args.family {
        Family::Autoregressive => ErrorCovSpec::Autoregressive { rho: args.rho.unwrap(), variance },
        Family::MovingAverage => ErrorCovSpec::MovingAverage { window: args.window.unwrap(), variance },
        Family::Exchangeable => ErrorCovSpec::Exchangeable { rho: args.rho.unwrap(), variance },
        Family::Uncorrelated => ErrorCovSpec::Uncorrelated { variance },
    };
    spec.validate_for(args.horizon)?;
    let blocks = if args.blocks.is_empty() { divisors(args.horizon) } else { args.blocks.clone() };

    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["m", "autocorr_term", "closed_form", "oracle"])?;
    let mut skipped = 0;
    for m in blocks {
        if m == 0 || args.horizon % m != 0 {
            eprintln!("skipping m={m}: m must divide T={}", args.horizon);
            skipped += 1;
            continue;
        }
        let r = mse_diff_report(&spec, args.horizon, m)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([m.to_string(), r.autocorr_term.to_string(), opt(r.closed_form), opt(r.oracle_value)])?;
    }
    w.flush()?;
    Ok(if skipped > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn advise(args: &AdviseArgs) -> Result<ExitCode> {
    let carryover = match (args.carryover, args.delta) {
        (Some(CarryoverLevel::Weak), _) => CarryoverEvidence::Weak,
        (Some(CarryoverLevel::Strong), _) => CarryoverEvidence::Strong,
        (None, Some(d)) => CarryoverEvidence::Delta(d),
        (None, None) => bail!("give carryover evidence with --carryover or --delta"),
    };
    let residuals = if let Some(path) = &args.panel {
        let corr = residual_correlation(&read_panel(path)?)?;
        let mean = corr
            .mean_offdiag()
            .context("no interval pair has non-degenerate residuals")?;
        println!("mean off-diagonal residual correlation: {mean:.4}");
        CorrelationEvidence::Mean(mean)
    } else {
        match (args.residuals, args.corr) {
            (Some(CorrelationSign::Positive), _) => CorrelationEvidence::Positive,
            (Some(CorrelationSign::Uncorrelated), _) => CorrelationEvidence::Uncorrelated,
            (Some(CorrelationSign::Negative), _) => CorrelationEvidence::Negative,
            (None, Some(c)) => CorrelationEvidence::Mean(c),
            (None, None) => bail!("give residual evidence with --residuals, --corr or --panel"),
        }
    };
    let advice = recommend_design(
        &WorkflowInput {
            markov_ok: !args.markov_violated,
            carryover,
            residuals,
        },
        &AdvisorThresholds::default(),
    );
    println!("{}", advice.recommendation);
    println!("{}", advice.rationale);
    Ok(ExitCode::SUCCESS)
}

fn residuals(panel: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let corr = residual_correlation(&read_panel(panel)?)?;
    let t_len = corr.matrix.nrows();
    let mut w = csv::Writer::from_writer(output(out)?);
    let mut header = vec!["t".to_string()];
    header.extend((1..=t_len).map(|t| t.to_string()));
    w.write_record(&header)?;
    for t1 in 0..t_len {
        let mut row = vec![(t1 + 1).to_string()];
        row.extend((0..t_len).map(|t2| corr.get(t1, t2).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    if let Some(mean) = corr.mean_offdiag() {
        eprintln!("mean off-diagonal correlation: {mean:.4}");
    }
    if let Some(lag1) = corr.lag_mean(1) {
        eprintln!("mean lag-1 correlation: {lag1:.4}");
    }
    if !corr.degenerate.is_empty() {
        let list: Vec<String> = corr.degenerate.iter().map(|t| (t + 1).to_string()).collect();
        eprintln!("intervals with constant residuals: {}", list.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

fn ci(config: &Path, seed: Option<u64>, jobs: Option<usize>) -> Result<ExitCode> {
    let mut cfg = CiRunConfig::load(config)?;
    cfg.seed = Some(resolve_seed(seed, cfg.seed));
    note_defaults(&cfg.dgp);
    let report = run_ci(&cfg, jobs)?;
    let summary = serde_json::json!({
        "truth": report.truth,
        "coverage": report.coverage,
        "coverage_se": report.coverage_se,
        "mean_width": report.mean_width,
        "width_se": report.width_se,
        "failed_outer": report.failed_outer,
        "redrawn": report.redrawn,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if report.failed_outer > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
