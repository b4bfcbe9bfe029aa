//! Resumable sweeps: plot-ready CSV plus a JSON run manifest.
//!
//! Layout of an output directory:
//!
//! * `sweep.csv` — `dgp,design_m,estimator,n,rho_or_family,metric,value,mc_se`,
//!   written once every cell is done, in grid order;
//! * `cells.jsonl` — one record per finished cell, appended as cells finish;
//! * `manifest.json` — the resolved config, seed, version and progress.
//!
//! Rerunning into the same directory skips the cells already in
//! `cells.jsonl`. Cell values do not depend on which other cells run in the
//! same pass, so an interrupted sweep finishes with the same CSV.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::experiment::{CellKey, Experiment, ExperimentConfig, ExperimentReport};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["dgp", "design_m", "estimator", "n", "rho_or_family", "metric", "value", "mc_se"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dgp: String,
    pub design_m: usize,
    pub estimator: String,
    pub n: usize,
    pub rho_or_family: String,
    pub metric: String,
    /// Formatted value; empty when undefined.
    pub value: String,
    pub mc_se: String,
}

fn fmt(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

/// Long-format rows of a report: `rmse`, `bias`, `sd`, `log_mse`, `reps`
/// and `excluded` for every cell.
pub fn report_rows(report: &ExperimentReport) -> Vec<(CellKey, Vec<SweepRow>)> {
    report
        .cells
        .iter()
        .map(|c| {
            let row = |metric: &str, value: Option<f64>, se: Option<f64>| SweepRow {
                dgp: report.dgp.clone(),
                design_m: c.key.m,
                estimator: c.key.estimator.to_string(),
                n: c.key.n,
                rho_or_family: c.cov_label.clone(),
                metric: metric.to_string(),
                value: fmt(value),
                mc_se: fmt(se),
            };
            let m = c.metrics.as_ref();
            let rows = vec![
                row("rmse", m.map(|m| m.rmse), m.and_then(|m| m.se.rmse)),
                row("bias", m.map(|m| m.bias), m.and_then(|m| m.se.bias)),
                row("sd", m.map(|m| m.sd), m.and_then(|m| m.se.sd)),
                row("log_mse", m.and_then(|m| m.log_mse), m.and_then(|m| m.se.log_mse)),
                row("reps", Some(m.map_or(0, |m| m.reps) as f64), None),
                row("excluded", Some(c.excluded as f64), None),
            ];
            (c.key, rows)
        })
        .collect()
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.dgp.as_str(),
            &r.design_m.to_string(),
            &r.estimator,
            &r.n.to_string(),
            &r.rho_or_family,
            &r.metric,
            &r.value,
            &r.mc_se,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch when the manifest was last written.
    pub updated_unix: u64,
    pub seed: u64,
    /// Resolved config (seed filled in); rerunning it reproduces the CSV.
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
    pub completed: Vec<CellKey>,
    pub total_cells: usize,
    pub excluded_total: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub jobs: Option<usize>,
    /// Stop after this many (covariance, n) chunks; used to test resumption.
    pub max_chunks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub csv: Option<PathBuf>,
    pub manifest: PathBuf,
    pub completed: usize,
    pub total: usize,
    pub excluded_total: usize,
    /// Cells computed in this call (the rest were resumed).
    pub computed: usize,
}

impl SweepOutcome {
    pub fn finished(&self) -> bool {
        self.completed == self.total
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellRecord {
    key: CellKey,
    excluded: usize,
    rows: Vec<SweepRow>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Reads finished cells, dropping a torn final line left by an interruption.
fn load_records(path: &Path) -> Result<BTreeMap<CellKey, CellRecord>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if let Ok(rec) = serde_json::from_str::<CellRecord>(&line) {
            out.insert(rec.key, rec);
        }
    }
    Ok(out)
}

fn write_records(path: &Path, records: &BTreeMap<CellKey, CellRecord>) -> Result<()> {
    let mut f = File::create(path)?;
    for rec in records.values() {
        writeln!(f, "{}", serde_json::to_string(rec).map_err(|e| Error::Parse(e.to_string()))?)?;
    }
    Ok(())
}

fn write_manifest(path: &Path, manifest: &SweepManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n")?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs (or resumes) the sweep described by `cfg` into `out_dir`.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, opts: &SweepOptions) -> Result<SweepOutcome> {
    let exp = Experiment::new(cfg)?;
    let cfg = exp.config().clone();
    fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    let cells_path = out_dir.join("cells.jsonl");
    let csv_path = out_dir.join("sweep.csv");

    if manifest_path.exists() {
        let old: SweepManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", manifest_path.display())))?;
        if old.config != cfg {
            return Err(Error::Config(format!(
                "{} holds a different sweep; choose a fresh output directory",
                out_dir.display()
            )));
        }
    }
    let all = cfg.cells();
    let mut records = load_records(&cells_path)?;
    records.retain(|k, _| all.contains(k));
    write_records(&cells_path, &records)?;

    let mut manifest = SweepManifest {
        tool: "switchback".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        updated_unix: now_unix(),
        seed: exp.seed(),
        config: cfg.clone(),
        outputs: vec!["sweep.csv".into(), "cells.jsonl".into()],
        completed: records.keys().copied().collect(),
        total_cells: all.len(),
        excluded_total: records.values().map(|r| r.excluded).sum(),
    };
    write_manifest(&manifest_path, &manifest)?;

    // Chunks of one (covariance, n) pair share simulated panels.
    let mut chunks: BTreeMap<(usize, usize), Vec<CellKey>> = BTreeMap::new();
    for k in &all {
        if !records.contains_key(k) {
            chunks.entry((k.cov, k.n)).or_default().push(*k);
        }
    }
    let mut computed = 0;
    for (done, (_, keys)) in chunks.into_iter().enumerate() {
        if opts.max_chunks.is_some_and(|max| done >= max) {
            break;
        }
        let report = exp.run_cells(&keys, opts.jobs)?;
        let mut file = OpenOptions::new().append(true).create(true).open(&cells_path)?;
        for ((key, rows), cell) in report_rows(&report).into_iter().zip(&report.cells) {
            let rec = CellRecord {
                key,
                excluded: cell.excluded,
                rows,
            };
            writeln!(file, "{}", serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?)?;
            records.insert(key, rec);
            computed += 1;
        }
        file.flush()?;
        manifest.completed = records.keys().copied().collect();
        manifest.excluded_total = records.values().map(|r| r.excluded).sum();
        manifest.updated_unix = now_unix();
        write_manifest(&manifest_path, &manifest)?;
    }

    let finished = records.len() == all.len();
    if finished {
        let rows: Vec<SweepRow> = all.iter().flat_map(|k| records[k].rows.clone()).collect();
        write_rows(File::create(&csv_path)?, &rows)?;
    }
    Ok(SweepOutcome {
        csv: finished.then_some(csv_path),
        manifest: manifest_path,
        completed: records.len(),
        total: all.len(),
        excluded_total: manifest.excluded_total,
        computed,
    })
}
