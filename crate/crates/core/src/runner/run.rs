//! One experiment: build data and network, train, write the trajectory
//! table and a JSON summary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, Format, Metric};
use super::csv_io::{fmt_f64, write_table, write_trajectory};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::instrument::{
    detect_phases, first_layer_identifies_support, gram_spectrum, irrelevant_norms, support_layer, zero_tolerance,
    BalancednessProbe, ChainProbe, ComponentSupport, LayerProbe, PhaseReport,
};
use crate::models::{NetworkState, Topology};
use crate::optim::{run_training, Algorithm, Divergence, EtaMax, Probe, TrainOptions};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const GRAM_FILE: &str = "gram.csv";
pub const EIGEN_FILE: &str = "eigen.csv";

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub dataset: String,
    /// Sampling-order seed.
    pub seed: u64,
    pub init_seed: u64,
    pub steps_run: usize,
    pub irrelevant: Vec<usize>,
    pub initial_irrel_norms: Vec<f64>,
    pub final_loss: Option<f64>,
    pub final_irrel_norms: Option<Vec<f64>>,
    /// Step at which the first-layer irrelevant norm reached
    /// `probes.stop_ratio` of its initial value.
    pub threshold_step: Option<usize>,
    pub eta_max: Option<EtaMax>,
    pub phase: Option<PhaseReport>,
    /// Diagonal nets: per irrelevant component, the layer whose weight is
    /// smallest and whether it is zeroed.
    pub support: Option<Vec<ComponentSupport>>,
    /// Dense nets: the first layer's irrelevant block is zeroed while the
    /// downstream map is not.
    pub first_layer_identifies_support: Option<bool>,
    pub divergence: Option<Divergence>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub network: NetworkState,
}

/// Irrelevant inputs: the dataset's ground truth when known, otherwise the
/// columns no row excites.
pub fn irrelevant_columns(ds: &Dataset) -> Vec<usize> {
    ds.ground_truth_irrelevant()
        .unwrap_or_else(|| (0..ds.d()).filter(|&c| (0..ds.n()).all(|r| ds.x[(r, c)] == 0.0)).collect())
}

/// Trains as configured and writes outputs into `out_dir`, which is created.
///
/// A divergence is not an error here: the records up to it are written and
/// the summary carries it.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let ds = cfg.build_dataset()?;
    let mut net = cfg.build_network(&ds)?;
    cfg.optimizer.validate(ds.n()).map_err(|e| Error::Config(format!("optimizer: {e}")))?;
    let irrelevant = irrelevant_columns(&ds);
    let depth = net.depth();
    let diagonal = net.spec.topology == Topology::Diagonal;

    let components = if cfg.probes.components.is_empty() { irrelevant.clone() } else { cfg.probes.components.clone() };
    if let Some(&j) = components.iter().find(|&&j| j >= ds.d()) {
        return Err(Error::Config(format!("probes.components: {j} is not an input index (d = {})", ds.d())));
    }
    let mut probes: Vec<Box<dyn Probe>> = Vec::new();
    for m in &cfg.probes.metrics {
        match m {
            Metric::Balancedness | Metric::Chains if !diagonal => {
                return Err(Error::Config(format!("probes.metrics: `{m:?}` needs a diagonal network").to_lowercase()));
            }
            Metric::Balancedness => {
                probes.extend(components.iter().map(|&j| Box::new(BalancednessProbe { component: j, depth }) as Box<dyn Probe>))
            }
            Metric::Chains => {
                probes.extend(components.iter().map(|&j| Box::new(ChainProbe { component: j, depth }) as Box<dyn Probe>))
            }
            Metric::Layer1 => probes.push(Box::new(LayerProbe { layer: 0, shape: net.spec.layer_shape(0) })),
            Metric::Gram => {}
        }
    }

    let initial = net.clone();
    let initial_irrel_norms = irrelevant_norms(&net, &irrelevant)?;
    let stop_level = cfg.probes.stop_ratio * initial_irrel_norms.first().copied().unwrap_or(0.0);
    let stop = if cfg.probes.stop_ratio > 0.0 && !irrelevant.is_empty() {
        let irr = irrelevant.clone();
        Some(Box::new(move |_s: usize, n: &NetworkState| irrelevant_norms(n, &irr).is_ok_and(|v| v[0] <= stop_level))
            as crate::optim::StopRule)
    } else {
        None
    };
    let opts = TrainOptions {
        stride: cfg.probes.stride,
        irrelevant: irrelevant.clone(),
        check_eta_max: cfg.probes.check_eta_max && cfg.optimizer.steps > 0,
        probes,
        stop,
    };
    let traj = run_training(&mut net, &ds, &cfg.optimizer, opts)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if cfg.output.formats.contains(&Format::Csv) {
        write_trajectory(&out_dir.join(TRAJECTORY_FILE), depth, &traj)?;
        if cfg.probes.metrics.contains(&Metric::Gram) {
            write_gram(out_dir, &net, cfg.probes.gram_bins)?;
        }
    }

    let last = traj.records.last();
    let final_irrel_norms = last.map(|r| r.irrel_norm_per_layer.clone());
    let threshold_step = match (&final_irrel_norms, cfg.probes.stop_ratio > 0.0) {
        (Some(v), true) if traj.divergence.is_none() && v[0] <= stop_level => Some(traj.steps_run),
        _ => None,
    };
    let steps_per_epoch = match cfg.optimizer.algorithm {
        Algorithm::Gd => 1,
        _ => ds.n().div_ceil(cfg.optimizer.batch_size),
    };
    let window_steps = if cfg.probes.phase_window == 0 { steps_per_epoch } else { cfg.probes.phase_window };
    let window = (window_steps / cfg.probes.stride).max(1);
    let phase = detect_phases(&traj.records, window, cfg.probes.plateau_tol).ok();

    let (support, identifies) = if irrelevant.is_empty() || traj.divergence.is_some() {
        (None, None)
    } else if diagonal {
        let mut comps = Vec::with_capacity(irrelevant.len());
        for &j in &irrelevant {
            let tol = if cfg.probes.support_tol > 0.0 { cfg.probes.support_tol } else { zero_tolerance(&initial.chain(j)) };
            comps.extend(support_layer(&net, &[j], tol)?.components);
        }
        (Some(comps), None)
    } else {
        let tol = if cfg.probes.support_tol > 0.0 { cfg.probes.support_tol } else { 1e-3 * initial_irrel_norms[0] };
        (None, Some(first_layer_identifies_support(&net, &irrelevant, tol)?))
    };

    let summary = RunSummary {
        name: cfg.name.clone(),
        dataset: ds.name.clone(),
        seed: cfg.optimizer.seed,
        init_seed: cfg.network.init_seed,
        steps_run: traj.steps_run,
        irrelevant,
        initial_irrel_norms,
        final_loss: last.map(|r| r.loss),
        final_irrel_norms,
        threshold_step,
        eta_max: traj.eta_max,
        phase,
        support,
        first_layer_identifies_support: identifies,
        divergence: traj.divergence.clone(),
        config: cfg.clone(),
    };
    if cfg.output.formats.contains(&Format::Json) {
        write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    }
    Ok(RunOutcome { dir: out_dir.to_path_buf(), summary, network: net })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `W_1ᵀW_1` (input × input) as `row,col,value` and its spectrum as
/// `index,eigenvalue`.
fn write_gram(dir: &Path, net: &NetworkState, bins: usize) -> Result<()> {
    let spec = gram_spectrum(&net.dense_layer(0).transpose(), bins)?;
    let g = &spec.gram;
    let rows: Vec<Vec<String>> = (0..g.rows())
        .flat_map(|i| (0..g.cols()).map(move |j| (i, j)))
        .map(|(i, j)| vec![i.to_string(), j.to_string(), fmt_f64(g[(i, j)])])
        .collect();
    write_table(&dir.join(GRAM_FILE), &["row".into(), "col".into(), "value".into()], &rows)?;
    let rows: Vec<Vec<String>> =
        spec.eigenvalues.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]).collect();
    write_table(&dir.join(EIGEN_FILE), &["index".into(), "eigenvalue".into()], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::config::{DatasetConfig, SyntheticConfig, ToyConfig};
    use crate::runner::csv_io::Table;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = DatasetConfig::Synthetic(SyntheticConfig { d: 6, r: 2, m: 20, unspanned: 1, ..Default::default() });
        cfg.network.widths = vec![7, 5, 1];
        cfg.optimizer.steps = 30;
        cfg
    }

    #[test]
    fn writes_table_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&small(), dir.path()).unwrap();
        let t = Table::read(&dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(t.header, vec!["step", "loss", "irrel_norm_L1", "irrel_norm_L2", "grad_norm"]);
        assert_eq!(t.rows.len(), 30);
        assert_eq!(out.summary.irrelevant, vec![2, 3, 4, 5, 6]);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
        assert_eq!(json["steps_run"], 30);
        assert!(json["eta_max"]["value"].as_f64().unwrap() > 0.0);
        assert_eq!(json["config"]["optimizer"]["steps"], 30);
    }

    #[test]
    fn zero_steps_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.optimizer.steps = 0;
        let out = run_experiment(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert_eq!(text, "step,loss,irrel_norm_L1,irrel_norm_L2,grad_norm\n");
        assert_eq!(out.summary.final_loss, None);
    }

    #[test]
    fn chain_metrics_need_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.probes.metrics = vec![Metric::Chains];
        let msg = run_experiment(&cfg, dir.path()).unwrap_err().to_string();
        assert!(msg.contains("probes.metrics"), "{msg}");
    }

    #[test]
    fn toy_chain_columns_and_stop_rule() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = DatasetConfig::Toy(ToyConfig { which: crate::datagen::ToyData::D2 });
        cfg.network.topology = Topology::Diagonal;
        cfg.network.params = vec![0.5, 1.0];
        cfg.optimizer.eta = 0.05;
        cfg.optimizer.steps = 10_000;
        cfg.probes.metrics = vec![Metric::Chains, Metric::Balancedness];
        cfg.probes.stop_ratio = 1e-3;
        let out = run_experiment(&cfg, dir.path()).unwrap();
        let t = Table::read(&dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert!(t.column("chain_c0_w1").is_ok() && t.column("balance_c0_1").is_ok());
        let reached = out.summary.threshold_step.unwrap();
        assert!(reached < 10_000);
        assert_eq!(t.rows.last().unwrap()[0] as usize, reached);
    }

    #[test]
    fn divergence_keeps_partial_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.optimizer.eta = 50.0;
        cfg.optimizer.steps = 500;
        let out = run_experiment(&cfg, dir.path()).unwrap();
        let div = out.summary.divergence.clone().unwrap();
        assert!(div.step < 500);
        let t = Table::read(&dir.path().join(TRAJECTORY_FILE)).unwrap();
        assert!(t.rows.len() < div.step);
        assert!(dir.path().join(SUMMARY_FILE).exists());
    }

    #[test]
    fn gram_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.probes.metrics = vec![Metric::Gram];
        run_experiment(&cfg, dir.path()).unwrap();
        let g = Table::read(&dir.path().join(GRAM_FILE)).unwrap();
        assert_eq!(g.rows.len(), 49);
        let e = Table::read(&dir.path().join(EIGEN_FILE)).unwrap();
        assert_eq!(e.rows.len(), 7);
        // The unspanned input keeps its initial weights, so its Gram row is nonzero
        // but the spectrum is still PSD.
        assert!(e.column("eigenvalue").unwrap().iter().all(|v| *v >= -1e-10));
    }
}
