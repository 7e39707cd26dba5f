//! Trajectory metrics: irrelevant-weight norms, Gram spectra, support and
//! phase detection, scaling-law fits and SGD-versus-GD shrink rates.

use serde::Serialize;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Mat};
use crate::models::{NetworkState, Topology};
use crate::optim::{run_training, Algorithm, OptimizerConfig, Probe, TrainOptions};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// Full-dataset loss after the update.
    pub loss: f64,
    pub irrel_norm_per_layer: Vec<f64>,
    /// Norm of the batch gradient used by the update.
    pub grad_norm: f64,
    pub extras: Vec<f64>,
}

fn check_indices(irrelevant: &[usize], d: usize) -> Result<()> {
    match irrelevant.iter().find(|&&j| j >= d) {
        Some(bad) => Err(Error::Index(format!("input coordinate {bad} out of range for d={d}"))),
        None => Ok(()),
    }
}

/// Per-layer size of the weights acting on irrelevant inputs.
///
/// Layer 1 is `‖W_1[:, irr]‖_F`. For dense nets, layer `l` is
/// `‖(W_l ⋯ W_1)[:, irr]‖_F`, the linear partial product restricted to the
/// irrelevant columns. For diagonal nets, layer `l` is `‖W_l[irr]‖_2`.
pub fn irrelevant_norms(net: &NetworkState, irrelevant: &[usize]) -> Result<Vec<f64>> {
    check_indices(irrelevant, net.spec.input_dim())?;
    let depth = net.depth();
    if irrelevant.is_empty() {
        return Ok(vec![0.0; depth]);
    }
    match net.spec.topology {
        Topology::Diagonal => Ok(net
            .weights
            .iter()
            .map(|w| irrelevant.iter().map(|&j| w[(0, j)] * w[(0, j)]).sum::<f64>().sqrt())
            .collect()),
        Topology::Dense => {
            let mut acc = net.weights[0].select_cols(irrelevant)?;
            let mut out = vec![acc.frobenius_norm()];
            for l in 1..depth {
                acc = net.weights[l].matmul(&acc)?;
                out.push(acc.frobenius_norm());
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if values.is_empty() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

#[derive(Clone, Debug, Serialize)]
pub struct GramSpectrum {
    /// `W·Wᵀ`
    pub gram: Mat,
    /// Eigenvalues of the Gram matrix, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub histogram: Histogram,
}

pub fn gram_spectrum(w: &Mat, bins: usize) -> Result<GramSpectrum> {
    let gram = w.gram();
    let eigenvalues = sym_eigen(&gram)?.values;
    let histogram = histogram(&eigenvalues, bins);
    Ok(GramSpectrum { gram, eigenvalues, histogram })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentSupport {
    pub component: usize,
    /// 1-based layer holding the smallest `|W_l[j,j]|` (lowest layer on ties).
    pub layer: usize,
    pub min_abs: f64,
    pub zeroed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportReport {
    pub components: Vec<ComponentSupport>,
    /// `per_layer[l][k] = |W_{l+1}[j_k, j_k]|` for the k-th listed component.
    pub per_layer: Vec<Vec<f64>>,
}

/// For each listed component of a diagonal net, the layer where its chain
/// is smallest and whether that weight is within `tol` of zero.
pub fn support_layer(net: &NetworkState, components: &[usize], tol: f64) -> Result<SupportReport> {
    if net.spec.topology != Topology::Diagonal {
        return Err(Error::Unsupported("support layers are defined for diagonal networks".into()));
    }
    check_indices(components, net.spec.input_dim())?;
    let per_layer: Vec<Vec<f64>> =
        net.weights.iter().map(|w| components.iter().map(|&j| w[(0, j)].abs()).collect()).collect();
    let components = components
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let (layer, min_abs) = per_layer
                .iter()
                .enumerate()
                .map(|(l, row)| (l + 1, row[k]))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            ComponentSupport { component: j, layer, min_abs, zeroed: min_abs <= tol }
        })
        .collect();
    Ok(SupportReport { components, per_layer })
}

/// Default "zeroed" threshold for a chain: `1e-3 × ‖initial chain‖`.
pub fn zero_tolerance(initial_chain: &[f64]) -> f64 {
    1e-3 * crate::linalg::norm(initial_chain)
}

/// Dense-net support identification: the first layer's irrelevant block is
/// within `tol` of zero while the downstream map `W_L ⋯ W_2` is not.
pub fn first_layer_identifies_support(net: &NetworkState, irrelevant: &[usize], tol: f64) -> Result<bool> {
    let norms = irrelevant_norms(net, irrelevant)?;
    Ok(norms[0] <= tol && net.downstream().frobenius_norm() > tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseReport {
    pub transition_step: Option<usize>,
    pub plateau_loss: f64,
    /// Loss standard deviation over mean within the reported window.
    pub oscillation_amplitude: f64,
}

fn window_stats(losses: &[f64]) -> (f64, f64) {
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Splits the loss sequence into consecutive windows and reports the first
/// window whose mean dropped by less than `plateau_tol` (relative) from the
/// previous window while the loss still fluctuates inside it (or is
/// exactly zero). The transition step is the first step of that window.
pub fn detect_phases(records: &[TrajectoryRecord], window: usize, plateau_tol: f64) -> Result<PhaseReport> {
    if window == 0 || records.len() < 2 * window {
        return Err(Error::Param(format!("phase detection needs at least {} records, got {}", 2 * window.max(1), records.len())));
    }
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let windows: Vec<&[f64]> = losses.chunks_exact(window).collect();
    let amp = |mean: f64, sd: f64| if mean == 0.0 { 0.0 } else { sd / mean.abs() };
    let (mut prev_mean, _) = window_stats(windows[0]);
    for (k, w) in windows.iter().enumerate().skip(1) {
        let (mean, sd) = window_stats(w);
        let rel_drop = if prev_mean == 0.0 { 0.0 } else { (prev_mean - mean) / prev_mean.abs() };
        if rel_drop < plateau_tol && (sd > 0.0 || mean == 0.0) {
            return Ok(PhaseReport {
                transition_step: Some(records[k * window].step),
                plateau_loss: mean,
                oscillation_amplitude: amp(mean, sd),
            });
        }
        prev_mean = mean;
    }
    let (mean, sd) = window_stats(windows.last().expect("at least two windows"));
    Ok(PhaseReport { transition_step: None, plateau_loss: mean, oscillation_amplitude: amp(mean, sd) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta: f64,
    pub batch_size: f64,
    /// Steps to reach the threshold; `None` when it was never reached.
    pub steps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub grid: Vec<GridPoint>,
    /// Points left out because the threshold was not reached.
    pub excluded: Vec<GridPoint>,
}

/// Least-squares fit of `ln(steps)` against `ln(b/η²)`.
pub fn scaling_fit(points: &[GridPoint]) -> Result<ScalingFit> {
    let (grid, excluded): (Vec<GridPoint>, Vec<GridPoint>) =
        points.iter().partition(|p| p.steps.is_some_and(|s| s > 0.0 && s.is_finite()));
    if grid.len() < 4 {
        return Err(Error::Param(format!("scaling fit needs at least 4 reached grid points, got {}", grid.len())));
    }
    let xs: Vec<f64> = grid.iter().map(|p| (p.batch_size / (p.eta * p.eta)).ln()).collect();
    let ys: Vec<f64> = grid.iter().map(|p| p.steps.expect("filtered").ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Param("scaling fit needs distinct values of b/η²".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy <= 1e-24 * n { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(ScalingFit { slope, intercept, r2, grid, excluded })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkExcess {
    /// Mean over seeds of the per-step shrink-rate difference SGD − GD.
    pub mean: f64,
    pub std_err: f64,
    pub per_seed: Vec<f64>,
    pub steps: usize,
    /// Seeds whose SGD run diverged.
    pub excluded_seeds: Vec<u64>,
}

/// Per-step shrink rate `−ln(|w_T| / |w_0|) / T` of each first-layer weight
/// on an irrelevant input, SGD without replacement minus full-batch GD,
/// averaged over entries and then over `seeds` sampling orders. Both runs
/// last `T = epochs · ⌈n/b⌉` steps from the same initial network. Positive
/// values mean SGD shrinks those weights faster.
pub fn empirical_shrink_excess(
    ds: &Dataset,
    net: &NetworkState,
    eta: f64,
    batch_size: usize,
    epochs: usize,
    seeds: &[u64],
    irrelevant: &[usize],
) -> Result<ShrinkExcess> {
    if !net.spec.is_linear() {
        return Err(Error::Unsupported("shrink excess is defined for linear networks".into()));
    }
    check_indices(irrelevant, net.spec.input_dim())?;
    if batch_size == 0 {
        return Err(Error::Param("batch size must be >= 1".into()));
    }
    let steps = epochs * ds.n().div_ceil(batch_size);
    let w1 = &net.weights[0];
    let candidates: Vec<(usize, usize)> = match net.spec.topology {
        Topology::Dense => irrelevant.iter().flat_map(|&j| (0..w1.rows()).map(move |i| (i, j))).collect(),
        Topology::Diagonal => irrelevant.iter().map(|&j| (0, j)).collect(),
    };
    let entries: Vec<(usize, usize)> = candidates.into_iter().filter(|&idx| w1[idx] != 0.0).collect();
    if entries.is_empty() {
        return Err(Error::Param("no nonzero irrelevant first-layer weights".into()));
    }
    let rates = |cfg: &OptimizerConfig| -> Result<Option<Vec<f64>>> {
        let mut run = net.clone();
        let traj = run_training(&mut run, ds, cfg, TrainOptions { stride: steps.max(1), ..Default::default() })?;
        if traj.divergence.is_some() {
            return Ok(None);
        }
        Ok(Some(
            entries
                .iter()
                .map(|&idx| -(run.weights[0][idx].abs() / net.weights[0][idx].abs()).ln() / steps as f64)
                .collect(),
        ))
    };
    let gd = rates(&OptimizerConfig::gd(eta, steps))?
        .ok_or_else(|| Error::Diverged { step: steps, what: "GD reference run".into() })?;
    let mut per_seed = Vec::new();
    let mut excluded_seeds = Vec::new();
    for &seed in seeds {
        let cfg = OptimizerConfig { algorithm: Algorithm::SgdWithout, eta, batch_size, weight_decay: 0.0, steps, seed };
        match rates(&cfg)? {
            Some(sgd) => {
                let diff = sgd.iter().zip(&gd).map(|(s, g)| s - g).sum::<f64>() / gd.len() as f64;
                per_seed.push(diff);
            }
            None => excluded_seeds.push(seed),
        }
    }
    let k = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / k;
    let std_err = if per_seed.len() > 1 {
        (per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    Ok(ShrinkExcess { mean, std_err, per_seed, steps, excluded_seeds })
}

/// Records `W_{i+1}[j,j]² − W_i[j,j]²` for every adjacent pair of one
/// diagonal chain.
pub struct BalancednessProbe {
    pub component: usize,
    pub depth: usize,
}

impl Probe for BalancednessProbe {
    fn columns(&self) -> Vec<String> {
        (1..self.depth).map(|i| format!("balance_c{}_{}", self.component, i)).collect()
    }

    fn observe(&mut self, _step: usize, net: &NetworkState, _ds: &Dataset) -> Vec<f64> {
        let chain = net.chain(self.component);
        chain.windows(2).map(|w| w[1] * w[1] - w[0] * w[0]).collect()
    }
}

/// Records the weights of one diagonal chain.
pub struct ChainProbe {
    pub component: usize,
    pub depth: usize,
}

impl Probe for ChainProbe {
    fn columns(&self) -> Vec<String> {
        (1..=self.depth).map(|l| format!("chain_c{}_w{}", self.component, l)).collect()
    }

    fn observe(&mut self, _step: usize, net: &NetworkState, _ds: &Dataset) -> Vec<f64> {
        net.chain(self.component)
    }
}

/// Records every entry of one layer, row-major.
pub struct LayerProbe {
    pub layer: usize,
    pub shape: (usize, usize),
}

impl Probe for LayerProbe {
    fn columns(&self) -> Vec<String> {
        let (r, c) = self.shape;
        (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| format!("w{}_{}_{}", self.layer + 1, i, j)).collect()
    }

    fn observe(&mut self, _step: usize, net: &NetworkState, _ds: &Dataset) -> Vec<f64> {
        net.weights[self.layer].data().to_vec()
    }
}
