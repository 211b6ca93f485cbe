//! Sweep execution and artifact writing.
//!
//! Every `(distance, N_t, mode)` point is optimized independently, so the
//! points run on the worker pool in any order. Finished points are appended
//! to the manifest as they arrive; the CSVs are written once at the end,
//! sorted by `(distance, N_t, mode)`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snstf_core::decoy::Fluctuation;
use snstf_core::model::CodeBitOption;
use snstf_core::optimizer::{optimize, Optimum, SearchSpec};
use snstf_core::pipeline::Mode;

use crate::config::RunConfig;
use crate::CliError;

pub const RATES_FILE: &str = "rates.csv";
pub const PROBABILITIES_FILE: &str = "probabilities.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Column order of `rates.csv`.
pub const RATE_COLUMNS: [&str; 15] = [
    "distance_km",
    "N_t",
    "mode",
    "option",
    "rate_per_pulse",
    "n_tilde",
    "delta_bits",
    "mu_x",
    "mu_y",
    "mu_z",
    "p_x",
    "p_y",
    "p_z",
    "lambda",
    "eps_ledger",
];

/// Column order of `probabilities.csv`.
pub const PROBABILITY_COLUMNS: [&str; 9] = ["distance_km", "N_t", "mode", "option", "p_v", "p_x", "p_y", "p_z", "p_o"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub distance_km: f64,
    #[serde(rename = "N_t")]
    pub n_total: f64,
    pub mode: Mode,
    pub option: CodeBitOption,
    pub rate_per_pulse: f64,
    pub n_tilde: f64,
    pub delta_bits: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub lambda: f64,
    /// Number of concentration bounds and the failure probability of each.
    pub eps_ledger: String,
}

/// Optimal source probabilities at one point, for the best option.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub distance_km: f64,
    #[serde(rename = "N_t")]
    pub n_total: f64,
    pub mode: Mode,
    pub option: CodeBitOption,
    pub p_v: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub p_o: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub distance_km: f64,
    pub n_total: f64,
    pub mode: Mode,
    pub rates: Vec<RateRow>,
    pub probabilities: ProbabilityRow,
}

impl PointResult {
    fn key(&self) -> (f64, f64, Mode) {
        (self.distance_km, self.n_total, self.mode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub completed: Vec<PointResult>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub resume: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub points: usize,
    pub resumed: usize,
    pub out: PathBuf,
}

fn cmp_key(a: &(f64, f64, Mode), b: &(f64, f64, Mode)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Sweep points in output order.
pub fn sweep_points(cfg: &RunConfig) -> Vec<(f64, f64, Mode)> {
    let mut pts = Vec::new();
    for &d in &cfg.sweep.distances_km {
        for &n in &cfg.sweep.n_total {
            for m in cfg.modes() {
                pts.push((d, n, m));
            }
        }
    }
    pts.sort_by(cmp_key);
    pts.dedup_by(|a, b| cmp_key(a, b).is_eq());
    pts
}

fn search_spec(cfg: &RunConfig, mode: Mode, options: Vec<CodeBitOption>, seed: u64) -> SearchSpec {
    SearchSpec {
        mode,
        options,
        three_intensity: cfg.modes.three_intensity,
        pin_mu_x: cfg.pins.mu_x,
        pin_lambda: cfg.pins.lambda,
        restarts: cfg.search.restarts,
        max_evals: cfg.search.max_evals,
        seed,
        warm_start: None,
        fluctuation: if cfg.modes.asymptotic { Fluctuation::Asymptotic } else { Fluctuation::Finite },
        joint_constraints: cfg.modes.joint_constraints,
        scan_points: cfg.modes.scan_points,
    }
}

fn rate_row(distance_km: f64, n_total: f64, mode: Mode, o: &Optimum) -> RateRow {
    let p = &o.params;
    RateRow {
        distance_km,
        n_total,
        mode,
        option: o.report.option,
        rate_per_pulse: o.report.rate_per_pulse,
        n_tilde: o.report.n_tilde,
        delta_bits: o.report.delta + o.report.delta_jc,
        mu_x: p.mu_x,
        mu_y: p.mu_y,
        mu_z: p.mu_z,
        p_x: p.p_x,
        p_y: p.p_y,
        p_z: p.p_z,
        lambda: p.lambda,
        eps_ledger: o.report.budget.summary(),
    }
}

/// Optimizes one sweep point.
pub fn compute_point(
    cfg: &RunConfig,
    distance_km: f64,
    n_total: f64,
    mode: Mode,
    seed: u64,
) -> Result<PointResult, CliError> {
    let channel = cfg.device.channel(distance_km);
    let sec = cfg.device.security();
    let groups: Vec<Vec<CodeBitOption>> = match mode {
        Mode::PriorArt => vec![vec![CodeBitOption::Z]],
        _ if cfg.modes.per_option => cfg.options()?.into_iter().map(|o| vec![o]).collect(),
        _ => vec![cfg.options()?],
    };
    let mut best: Option<Optimum> = None;
    let mut rates = Vec::with_capacity(groups.len());
    for options in groups {
        let o = optimize(&channel, n_total, &sec, &search_spec(cfg, mode, options, seed))?;
        rates.push(rate_row(distance_km, n_total, mode, &o));
        if best.as_ref().is_none_or(|b| o.report.n_tilde > b.report.n_tilde) {
            best = Some(o);
        }
    }
    let best = best.ok_or_else(|| CliError::Runtime("no option evaluated".into()))?;
    let p = &best.params;
    Ok(PointResult {
        distance_km,
        n_total,
        mode,
        rates,
        probabilities: ProbabilityRow {
            distance_km,
            n_total,
            mode,
            option: best.report.option,
            p_v: p.p_v,
            p_x: p.p_x,
            p_y: p.p_y,
            p_z: p.p_z,
            p_o: p.p_o,
        },
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_manifest(out: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let path = out.join(MANIFEST_FILE);
    let tmp = out.join(format!("{MANIFEST_FILE}.tmp"));
    let text = serde_json::to_string_pretty(manifest).map_err(|e| io_err(&path, e))?;
    fs::write(&tmp, text + "\n").map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
}

fn read_manifest(out: &Path) -> Result<Option<Manifest>, CliError> {
    let path = out.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Runs the sweep and writes `rates.csv`, `probabilities.csv` and
/// `manifest.json` into `opts.out`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    fs::create_dir_all(&opts.out).map_err(|e| io_err(&opts.out, e))?;
    let fresh = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        config: cfg.clone(),
        completed: Vec::new(),
    };
    let mut manifest = match (opts.resume, read_manifest(&opts.out)?) {
        (true, Some(m)) => {
            if m.config != fresh.config || m.seed != fresh.seed {
                return Err(CliError::Config(format!(
                    "{} was written for a different configuration or seed; rerun without --resume",
                    opts.out.join(MANIFEST_FILE).display()
                )));
            }
            m
        }
        _ => fresh,
    };
    let points = sweep_points(cfg);
    manifest.completed.retain(|r| points.iter().any(|p| cmp_key(p, &r.key()).is_eq()));
    let resumed = manifest.completed.len();
    let todo: Vec<(f64, f64, Mode)> =
        points.iter().copied().filter(|p| !manifest.completed.iter().any(|r| cmp_key(p, &r.key()).is_eq())).collect();
    write_manifest(&opts.out, &manifest)?;

    let shared = Mutex::new(manifest);
    todo.par_iter().try_for_each(|&(d, n, mode)| -> Result<(), CliError> {
        let result = compute_point(cfg, d, n, mode, opts.seed)?;
        let mut m = shared.lock().map_err(|_| CliError::Runtime("manifest lock poisoned".into()))?;
        m.completed.push(result);
        write_manifest(&opts.out, &m)
    })?;
    let mut manifest = shared.into_inner().map_err(|_| CliError::Runtime("manifest lock poisoned".into()))?;
    manifest.completed.sort_by(|a, b| cmp_key(&a.key(), &b.key()));
    write_manifest(&opts.out, &manifest)?;

    let rates: Vec<RateRow> = manifest.completed.iter().flat_map(|r| r.rates.iter().cloned()).collect();
    let probs: Vec<ProbabilityRow> = manifest.completed.iter().map(|r| r.probabilities.clone()).collect();
    write_csv(&opts.out.join(RATES_FILE), &rates, &RATE_COLUMNS)?;
    write_csv(&opts.out.join(PROBABILITIES_FILE), &probs, &PROBABILITY_COLUMNS)?;
    Ok(RunSummary { points: points.len(), resumed, out: opts.out.clone() })
}
