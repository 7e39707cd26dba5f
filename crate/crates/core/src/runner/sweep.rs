//! Cartesian sweeps over config keys with replicate seeds.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! cap = 64
//! threshold = 1e-3   # optional: early stop + steps-to-threshold fit
//!
//! [axes]
//! "optimizer.eta" = [0.05, 0.1]
//! "optimizer.batch_size" = [2, 5]
//!
//! [base]
//! name = "grid"
//! # ... an experiment config
//! ```
//!
//! Each cell gets `cell_NNN/` with one `seed_S/` run directory per
//! replicate and a `cell.json` of its axis values. `aggregate.csv` has one
//! row per cell with medians over replicates; `scaling_fit.json` is written
//! when `threshold` is set.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{parse_config, ExperimentConfig};
use super::csv_io::{fmt_f64, write_table};
use super::run::{run_experiment, write_json, RunSummary};
use crate::error::{Error, Result};
use crate::instrument::{median, scaling_fit, GridPoint, ScalingFit};
use crate::optim::Algorithm;

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FIT_FILE: &str = "scaling_fit.json";
pub const FAILURES_FILE: &str = "failures.json";

/// Defaults: `base` = default experiment, `axes = {}`, `seeds = [0]`,
/// `cap = 256` runs (cells × seeds), `threshold = 0` (off).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    /// Dotted config key → values, in file order.
    pub axes: serde_json::Map<String, Value>,
    pub seeds: Vec<u64>,
    pub cap: usize,
    /// Relative level of the first-layer irrelevant norm that counts as
    /// "reached"; sets `probes.stop_ratio` on every run.
    pub threshold: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { base: ExperimentConfig::default(), axes: serde_json::Map::new(), seeds: vec![0], cap: 256, threshold: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub index: usize,
    /// `(key, value)` per axis.
    pub values: Vec<(String, Value)>,
    #[serde(skip)]
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub cell: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub summaries: Vec<RunSummary>,
    pub failures: Vec<Failure>,
    pub median_final_loss: Option<f64>,
    pub median_final_irrel_l1: Option<f64>,
    /// Median steps to threshold; `None` unless more than half of the
    /// replicates reached it.
    pub median_threshold_step: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub cells: Vec<CellResult>,
    pub fit: Option<ScalingFit>,
    pub failures: Vec<Failure>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = parse_config(&text, &path.display().to_string())?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: need at least one replicate seed".into()));
        }
        if !(self.threshold.is_finite() && (0.0..1.0).contains(&self.threshold)) {
            return Err(Error::Config("threshold: must be in [0, 1)".into()));
        }
        for (k, v) in &self.axes {
            match v.as_array() {
                Some(a) if !a.is_empty() => {}
                _ => return Err(Error::Config(format!("axes.{k}: must be a non-empty list"))),
            }
        }
        let runs = self.cell_count() * self.seeds.len();
        if runs > self.cap {
            return Err(Error::Config(format!("cap: sweep has {runs} runs, cap is {}", self.cap)));
        }
        // The base alone may be incomplete (e.g. batch size supplied by an axis).
        for cell in self.cells()? {
            cell.config.validate().map_err(|e| Error::Config(format!("cell {}: {e}", cell.index)))?;
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.values().map(|v| v.as_array().map_or(0, Vec::len)).product()
    }

    /// Cells in row-major order over the axes (last axis fastest).
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let base = serde_json::to_value(&self.base).map_err(|e| Error::Config(e.to_string()))?;
        let axes: Vec<(&String, &Vec<Value>)> =
            self.axes.iter().map(|(k, v)| (k, v.as_array().expect("validated"))).collect();
        let mut cells = Vec::new();
        for index in 0..self.cell_count() {
            let mut rem = index;
            let mut picks = vec![0; axes.len()];
            for (a, (_, vals)) in axes.iter().enumerate().rev() {
                picks[a] = rem % vals.len();
                rem /= vals.len();
            }
            let mut value = base.clone();
            let mut values = Vec::new();
            for ((key, vals), &p) in axes.iter().zip(&picks) {
                set_path(&mut value, key, vals[p].clone())?;
                values.push(((*key).clone(), vals[p].clone()));
            }
            let mut config: ExperimentConfig =
                serde_json::from_value(value).map_err(|e| Error::Config(format!("axes: cell {index}: {e}")))?;
            if self.threshold > 0.0 {
                config.probes.stop_ratio = self.threshold;
            }
            cells.push(Cell { index, values, config });
        }
        Ok(cells)
    }
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| Error::Config(format!("axes.{key}: empty key")))?;
    let mut cur = root;
    for p in parts {
        cur = cur.get_mut(p).ok_or_else(|| Error::Config(format!("axes.{key}: no config section `{p}`")))?;
    }
    let obj = cur.as_object_mut().ok_or_else(|| Error::Config(format!("axes.{key}: parent is not a section")))?;
    obj.insert(leaf.to_string(), v);
    Ok(())
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
    let w = if requested == 0 { auto } else { requested };
    w.clamp(1, jobs.max(1))
}

pub fn cell_dir(out: &Path, cell: usize) -> PathBuf {
    out.join(format!("cell_{cell:03}"))
}

/// Runs every (cell, seed) pair on a pool of `workers` threads (`0` = one
/// per core), then writes the aggregate once all runs are done. Failed or
/// diverged runs are recorded and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, out: &Path, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let cells = spec.cells()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let jobs: Vec<(usize, u64)> = cells.iter().flat_map(|c| spec.seeds.iter().map(move |&s| (c.index, s))).collect();
    let results: Mutex<Vec<Option<std::result::Result<RunSummary, String>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(workers, jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(ci, seed)) = jobs.get(k) else { break };
                let mut cfg = cells[ci].config.clone();
                cfg.optimizer.seed = seed;
                let dir = cell_dir(out, ci).join(format!("seed_{seed}"));
                let res = match run_experiment(&cfg, &dir) {
                    Ok(o) => match &o.summary.divergence {
                        Some(d) => Err(format!("diverged: non-finite {} at step {}", d.what, d.step)),
                        None => Ok(o.summary),
                    },
                    Err(e) => Err(e.to_string()),
                };
                if let Err(msg) = &res {
                    log::warn!("cell {ci} seed {seed}: {msg}");
                }
                results.lock().expect("no panics while holding the lock")[k] = Some(res);
            });
        }
    });
    let results = results.into_inner().expect("workers joined");

    let mut cell_results = Vec::with_capacity(cells.len());
    let mut all_failures = Vec::new();
    let mut per_cell = results.into_iter();
    for cell in cells {
        let mut summaries = Vec::new();
        let mut failures = Vec::new();
        for &seed in &spec.seeds {
            match per_cell.next().flatten().expect("every job ran") {
                Ok(s) => summaries.push(s),
                Err(error) => failures.push(Failure { cell: cell.index, seed, error }),
            }
        }
        let dir = cell_dir(out, cell.index);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(&dir.join("cell.json"), &cell)?;
        let med = |vals: Vec<f64>| (!vals.is_empty()).then(|| median(&vals));
        let reached: Vec<f64> = summaries.iter().filter_map(|s| s.threshold_step.map(|t| t as f64)).collect();
        let median_threshold_step = (2 * reached.len() > spec.seeds.len()).then(|| {
            // Unreached replicates count as +∞ for the median.
            let mut all = reached.clone();
            all.resize(spec.seeds.len(), f64::INFINITY);
            median(&all)
        });
        all_failures.extend(failures.iter().cloned());
        cell_results.push(CellResult {
            median_final_loss: med(summaries.iter().filter_map(|s| s.final_loss).collect()),
            median_final_irrel_l1: med(summaries.iter().filter_map(|s| s.final_irrel_norms.as_ref()?.first().copied()).collect()),
            median_threshold_step,
            cell,
            summaries,
            failures,
        });
    }

    write_aggregate(spec, out, &cell_results)?;
    let fit = if spec.threshold > 0.0 {
        let points: Vec<GridPoint> = cell_results.iter().map(grid_point).collect();
        match scaling_fit(&points) {
            Ok(f) => {
                write_json(&out.join(FIT_FILE), &f)?;
                Some(f)
            }
            Err(e) => {
                log::warn!("no scaling fit: {e}");
                None
            }
        }
    } else {
        None
    };
    if !all_failures.is_empty() {
        write_json(&out.join(FAILURES_FILE), &all_failures)?;
    }
    Ok(SweepOutcome { cells: cell_results, fit, failures: all_failures })
}

fn grid_point(c: &CellResult) -> GridPoint {
    let o = &c.cell.config.optimizer;
    let batch = match o.algorithm {
        Algorithm::Gd => c.summaries.first().map_or(0.0, full_batch),
        _ => o.batch_size as f64,
    };
    GridPoint { eta: o.eta, batch_size: batch, steps: c.median_threshold_step }
}

fn full_batch(s: &RunSummary) -> f64 {
    // GD batches are the whole dataset; the summary does not carry n, so
    // rebuild the data once.
    s.config.build_dataset().map_or(0.0, |d| d.n() as f64)
}

fn write_aggregate(spec: &SweepSpec, out: &Path, cells: &[CellResult]) -> Result<()> {
    let mut header = vec!["cell".to_string()];
    header.extend(spec.axes.keys().cloned());
    header.extend(
        ["replicates", "completed", "failed", "median_final_loss", "median_final_irrel_norm_L1", "median_threshold_step"]
            .map(String::from),
    );
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_f64);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let mut row = vec![c.cell.index.to_string()];
            row.extend(c.cell.values.iter().map(|(_, v)| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }));
            row.push(spec.seeds.len().to_string());
            row.push(c.summaries.len().to_string());
            row.push(c.failures.len().to_string());
            row.push(opt(c.median_final_loss));
            row.push(opt(c.median_final_irrel_l1));
            row.push(opt(c.median_threshold_step));
            row
        })
        .collect();
    write_table(&out.join(AGGREGATE_FILE), &header, &rows)
}
