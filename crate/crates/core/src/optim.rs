//! Full-batch GD and mini-batch SGD (with or without replacement), optional
//! weight decay, the `2/λ_max` step-size guard and the training loop.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::instrument::{irrelevant_norms, TrajectoryRecord};
use crate::linalg::{dominant_eigenvalue, Mat};
use crate::models::NetworkState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Gd,
    /// Every batch is an independent uniform draw of `b` distinct rows.
    SgdWith,
    /// Batches partition a fresh random permutation each epoch.
    SgdWithout,
}

/// Defaults: `gd`, `eta = 0.05`, `batch_size = 0` (ignored by GD),
/// `weight_decay = 0`, `steps = 1000`, `seed = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub steps: usize,
    /// Sampling-order seed.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::gd(0.05, 1000)
    }
}

impl OptimizerConfig {
    pub fn gd(eta: f64, steps: usize) -> Self {
        Self { algorithm: Algorithm::Gd, eta, batch_size: 0, weight_decay: 0.0, steps, seed: 0 }
    }

    pub fn sgd_without(eta: f64, batch_size: usize, steps: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::SgdWithout, eta, batch_size, weight_decay: 0.0, steps, seed }
    }

    pub fn sgd_with(eta: f64, batch_size: usize, steps: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::SgdWith, eta, batch_size, weight_decay: 0.0, steps, seed }
    }

    pub fn with_weight_decay(mut self, lambda: f64) -> Self {
        self.weight_decay = lambda;
        self
    }

    /// Checks the config against a dataset of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Param(format!("step size must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Param(format!("weight decay must be finite and >= 0, got {}", self.weight_decay)));
        }
        if n == 0 {
            return Err(Error::Param("empty dataset".into()));
        }
        if self.algorithm != Algorithm::Gd {
            if self.batch_size == 0 {
                return Err(Error::Param("batch size must be >= 1".into()));
            }
            if self.batch_size > n {
                return Err(Error::Param(format!("batch size {} exceeds dataset size {n}", self.batch_size)));
            }
        }
        Ok(())
    }
}

/// Stateful batch generator; deterministic per seed.
pub struct BatchSampler {
    algorithm: Algorithm,
    n: usize,
    b: usize,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    pos: usize,
    current: Vec<usize>,
}

impl BatchSampler {
    pub fn new(cfg: &OptimizerConfig, n: usize) -> Result<Self> {
        cfg.validate(n)?;
        let current = if cfg.algorithm == Algorithm::Gd { (0..n).collect() } else { Vec::with_capacity(cfg.batch_size) };
        Ok(Self {
            algorithm: cfg.algorithm,
            n,
            b: cfg.batch_size,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            perm: (0..n).collect(),
            pos: n,
            current,
        })
    }

    pub fn next_batch(&mut self) -> &[usize] {
        match self.algorithm {
            Algorithm::Gd => {}
            Algorithm::SgdWith => {
                self.current.clear();
                self.current.extend(index::sample(&mut self.rng, self.n, self.b).iter());
            }
            Algorithm::SgdWithout => {
                if self.pos >= self.n {
                    self.perm.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                // The last batch of an epoch is short when b does not divide n.
                let end = (self.pos + self.b).min(self.n);
                self.current.clear();
                self.current.extend_from_slice(&self.perm[self.pos..end]);
                self.pos = end;
            }
        }
        &self.current
    }
}

/// Materialised sequence of batches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchSchedule {
    pub batches: Vec<Vec<usize>>,
}

pub fn make_schedule(cfg: &OptimizerConfig, n: usize) -> Result<BatchSchedule> {
    let mut sampler = BatchSampler::new(cfg, n)?;
    Ok(BatchSchedule { batches: (0..cfg.steps).map(|_| sampler.next_batch().to_vec()).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Batch loss before the update.
    pub loss: f64,
    /// Norm of the batch gradient (without decay).
    pub grad_norm: f64,
}

/// One update `w ← (1 − ηλ)·w − η·∇_B L` on every weight.
///
/// Written this way a weight with zero gradient is scaled by exactly
/// `1 − ηλ`, and with `η = 0` or `λ = 0, ∇ = 0` it is left bit-identical.
pub fn step(net: &mut NetworkState, x: &Mat, y: &Mat, batch: &[usize], eta: f64, lambda: f64) -> Result<StepInfo> {
    let (grads, loss) = net.backward_mse(x, y, batch)?;
    let decay = 1.0 - eta * lambda;
    for (w, g) in net.weights.iter_mut().zip(&grads.layers) {
        for (wv, gv) in w.data_mut().iter_mut().zip(g.data()) {
            *wv = *wv * decay - eta * gv;
        }
    }
    Ok(StepInfo { loss, grad_norm: grads.norm() })
}

/// Reported when the curvature is zero or negative and `2/(λ_max+λ)` is
/// unbounded.
pub const ETA_MAX_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaMax {
    pub value: f64,
    /// Largest Hessian eigenvalue estimate (without decay).
    pub lambda_max: f64,
    pub converged: bool,
    pub capped: bool,
}

const HVP_ITERS: usize = 200;
const HVP_TOL: f64 = 1e-6;

/// `2 / (λ_max(H) + λ)` at the current weights, with `H` the full-batch
/// loss Hessian applied through central differences of the gradient,
/// step `h = 1e-4·(1 + ‖θ‖)`.
pub fn eta_max(net: &NetworkState, ds: &Dataset, lambda: f64) -> Result<EtaMax> {
    let theta = net.params();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Param("non-finite weights".into()));
    }
    let g0 = net.full_gradient(&ds.x, &ds.y)?;
    if g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Param("non-finite gradient".into()));
    }
    let h = 1e-4 * (1.0 + crate::linalg::norm(&theta));
    let mut probe = net.clone();
    let mut failure: Option<Error> = None;
    let mut shifted = theta.clone();
    let est = dominant_eigenvalue(
        |v| {
            let mut grad_at = |sign: f64| -> Result<Vec<f64>> {
                for ((s, t), vi) in shifted.iter_mut().zip(&theta).zip(v) {
                    *s = t + sign * h * vi;
                }
                probe.set_params(&shifted)?;
                probe.full_gradient(&ds.x, &ds.y)
            };
            match (grad_at(1.0), grad_at(-1.0)) {
                (Ok(p), Ok(m)) => p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    vec![f64::NAN; v.len()]
                }
            }
        },
        theta.len(),
        HVP_ITERS,
        HVP_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !est.value.is_finite() {
        return Err(Error::Param("non-finite Hessian-vector product".into()));
    }
    let curvature = est.value + lambda;
    let (value, capped) = if curvature <= 2.0 / ETA_MAX_CAP { (ETA_MAX_CAP, true) } else { (2.0 / curvature, false) };
    Ok(EtaMax { value, lambda_max: est.value, converged: est.converged, capped })
}

/// Per-record hook adding extra columns.
pub trait Probe {
    fn columns(&self) -> Vec<String>;
    fn observe(&mut self, step: usize, net: &NetworkState, ds: &Dataset) -> Vec<f64>;
}

/// Early-exit rule checked after every step.
pub type StopRule<'a> = Box<dyn FnMut(usize, &NetworkState) -> bool + 'a>;

pub struct TrainOptions<'a> {
    /// Record every `stride` steps (and always the last step).
    pub stride: usize,
    /// Input coordinates whose weights are tracked as irrelevant.
    pub irrelevant: Vec<usize>,
    /// Compute `η_max` at the initial weights and warn when `η` exceeds it.
    pub check_eta_max: bool,
    pub probes: Vec<Box<dyn Probe + 'a>>,
    pub stop: Option<StopRule<'a>>,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        Self { stride: 1, irrelevant: Vec::new(), check_eta_max: false, probes: Vec::new(), stop: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Divergence {
    pub step: usize,
    pub what: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub extra_names: Vec<String>,
    pub records: Vec<TrajectoryRecord>,
    pub eta_max: Option<EtaMax>,
    /// First step with a non-finite loss, gradient or weight. Training
    /// stops there and the records hold everything up to that point.
    pub divergence: Option<Divergence>,
    /// Steps actually performed.
    pub steps_run: usize,
}

impl Trajectory {
    pub fn into_result(self) -> Result<Self> {
        match &self.divergence {
            Some(d) => Err(Error::Diverged { step: d.step, what: d.what.clone() }),
            None => Ok(self),
        }
    }
}

/// Runs `cfg.steps` updates on `net` in place.
///
/// Records (after the update) the full-dataset loss, the batch gradient
/// norm, per-layer irrelevant norms and probe columns at every `stride`-th
/// step and at the final step. Step numbers count updates from 1.
pub fn run_training(net: &mut NetworkState, ds: &Dataset, cfg: &OptimizerConfig, mut opts: TrainOptions<'_>) -> Result<Trajectory> {
    let mut sampler = BatchSampler::new(cfg, ds.n())?;
    let stride = opts.stride.max(1);
    let eta_max_report = if opts.check_eta_max {
        let em = eta_max(net, ds, cfg.weight_decay)?;
        if cfg.eta >= em.value {
            log::warn!("step size {} is at or above the stability threshold {:.6e}", cfg.eta, em.value);
        }
        Some(em)
    } else {
        None
    };
    let extra_names: Vec<String> = opts.probes.iter().flat_map(|p| p.columns()).collect();
    let mut traj = Trajectory { extra_names, records: Vec::new(), eta_max: eta_max_report, divergence: None, steps_run: 0 };

    for s in 1..=cfg.steps {
        let batch = sampler.next_batch();
        let info = step(net, &ds.x, &ds.y, batch, cfg.eta, cfg.weight_decay)?;
        traj.steps_run = s;
        let bad = if !info.loss.is_finite() {
            Some("batch loss")
        } else if !info.grad_norm.is_finite() {
            Some("gradient")
        } else if net.weights.iter().any(|w| w.data().iter().any(|v| !v.is_finite())) {
            Some("weights")
        } else {
            None
        };
        if let Some(what) = bad {
            traj.divergence = Some(Divergence { step: s, what: what.into() });
            break;
        }
        let stop = opts.stop.as_mut().is_some_and(|f| f(s, net));
        if s % stride == 0 || s == cfg.steps || stop {
            let loss = net.full_loss(&ds.x, &ds.y)?;
            if !loss.is_finite() {
                traj.divergence = Some(Divergence { step: s, what: "loss".into() });
                break;
            }
            let extras = opts.probes.iter_mut().flat_map(|p| p.observe(s, net, ds)).collect();
            traj.records.push(TrajectoryRecord {
                step: s,
                loss,
                irrel_norm_per_layer: irrelevant_norms(net, &opts.irrelevant)?,
                grad_norm: info.grad_norm,
                extras,
            });
        }
        if stop {
            break;
        }
    }
    Ok(traj)
}
