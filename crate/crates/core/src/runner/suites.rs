//! Self-contained verification protocols. Each compares simulated training
//! against a closed-form prediction on seeded fixtures and returns one
//! [`Check`] per property; a failed property is a result, not an error.
//! `Default` parameters are the full-scale settings.

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::datagen::{
    append_unspanned, decorrelate_irrelevant, gen_misspecified_diagonal, gen_synthetic, orthogonal_fixture, toy_as_dataset,
    Dataset, RelevanceDecomposition, Target, ToyData,
};
use crate::error::{Error, Result};
use crate::instrument::{irrelevant_norms, median, scaling_fit, support_layer, zero_tolerance, GridPoint, ScalingFit};
use crate::linalg::{sym_eigen, Mat};
use crate::models::{gradcheck, Activation, InitScheme, NetworkSpec, NetworkState, Topology};
use crate::optim::{eta_max, make_schedule, run_training, step, BatchSampler, OptimizerConfig, TrainOptions};
use crate::oracle::{balancedness_gaps, balancedness_multipliers, predict_gd_multiplier, sufficient_stat_gd_step, TwoBatchFixture};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= bound, value, bound, detail: detail.into() }
    }

    /// Passes when `value >= bound`.
    pub fn at_least(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value >= bound, value, bound, detail: detail.into() }
    }

    /// Passes when `value > bound`.
    pub fn above(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value > bound, value, bound, detail: detail.into() }
    }

    /// Passes when `|value − target| <= tol`; `bound` holds `tol`.
    pub fn within(name: &str, value: f64, target: f64, tol: f64, detail: impl Into<String>) -> Self {
        let d = detail.into();
        let detail = if d.is_empty() { format!("target {target}") } else { format!("target {target}; {d}") };
        Self { name: name.into(), passed: (value - target).abs() <= tol, value, bound: tol, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    ShrinkFactors,
    GdMonotone,
    UnspannedFrozen,
    GdZeroingLayer,
    TwoStep,
    Balancedness,
    WeightDecay,
    Gradcheck,
    ReluCounterexample,
    ToyModel,
    ScalingLaw,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::ShrinkFactors,
        Suite::GdMonotone,
        Suite::UnspannedFrozen,
        Suite::GdZeroingLayer,
        Suite::TwoStep,
        Suite::Balancedness,
        Suite::WeightDecay,
        Suite::Gradcheck,
        Suite::ReluCounterexample,
        Suite::ToyModel,
        Suite::ScalingLaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ShrinkFactors => "shrink-factors",
            Suite::GdMonotone => "gd-monotone",
            Suite::UnspannedFrozen => "unspanned-frozen",
            Suite::GdZeroingLayer => "gd-zeroing-layer",
            Suite::TwoStep => "two-step",
            Suite::Balancedness => "balancedness",
            Suite::WeightDecay => "weight-decay",
            Suite::Gradcheck => "gradcheck",
            Suite::ReluCounterexample => "relu-counterexample",
            Suite::ToyModel => "toy-model",
            Suite::ScalingLaw => "scaling-law",
        }
    }

    /// Runs the suite at full scale with `workers` threads where it
    /// parallelises (`0` = one per core).
    pub fn run(self, workers: usize) -> Result<SuiteReport> {
        match self {
            Suite::ShrinkFactors => shrink_factors(&ShrinkFactorParams::default()),
            Suite::GdMonotone => gd_monotone(&LinearRunParams::default()),
            Suite::UnspannedFrozen => unspanned_frozen(&LinearRunParams::default()),
            Suite::GdZeroingLayer => gd_zeroing_layer(&ZeroingLayerParams { workers, ..Default::default() }),
            Suite::TwoStep => two_step(&TwoStepParams::default()),
            Suite::Balancedness => balancedness(&BalancednessParams::default()),
            Suite::WeightDecay => weight_decay(&LinearRunParams::default()),
            Suite::Gradcheck => gradcheck_grid(&GradcheckParams::default()),
            Suite::ReluCounterexample => relu_counterexample(&ReluParams::default()),
            Suite::ToyModel => toy_model(&ToyParams::default()),
            Suite::ScalingLaw => scaling_law(&ScalingParams { workers, ..Default::default() }),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|k| k.name()).collect();
            Error::Param(format!("unknown suite `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

fn report(suite: Suite, checks: Vec<Check>) -> SuiteReport {
    SuiteReport { suite: suite.name().into(), checks }
}

fn threads(requested: usize, jobs: usize) -> usize {
    let auto = std::thread::available_parallelism().map_or(1, |n| n.get());
    (if requested == 0 { auto } else { requested }).clamp(1, jobs.max(1))
}

/// Runs `f(0..jobs)` on a thread pool and returns results in job order.
fn par_map<T: Send>(jobs: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads(workers, jobs) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs {
                    break;
                }
                let v = f(k);
                out.lock().expect("no panic under lock")[k] = Some(v);
            });
        }
    });
    out.into_inner().expect("joined").into_iter().map(|v| v.expect("every job ran")).collect()
}

fn all_rows(ds: &Dataset) -> Vec<usize> {
    (0..ds.n()).collect()
}

// ---------------------------------------------------------------------------
// Per-entry shrink factors on exact block-structured data.

#[derive(Clone, Debug)]
pub struct ShrinkFactorParams {
    pub fixtures: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ShrinkFactorParams {
    fn default() -> Self {
        Self { fixtures: 50, seed: 0, tol: 1e-10 }
    }
}

/// Random dense linear fixture with orthogonal input columns laid out as
/// `[relevant | spanned irrelevant | unspanned]`, hidden basis rotated so
/// that `W̃ᵀW̃` is diagonal.
pub fn shrink_fixture(seed: u64) -> Result<(Dataset, NetworkState, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(4..=10usize);
    let r = rng.random_range(1..=d - 2);
    let u = rng.random_range(0..d - r);
    let moments: Vec<f64> = (0..d).map(|c| if c >= d - u { 0.0 } else { rng.random_range(0.5..2.0) }).collect();
    let k = rng.random_range(1..=3usize);
    let depth = rng.random_range(2..=4usize);
    let mut widths = vec![d];
    widths.extend((1..depth).map(|_| rng.random_range(2..=8usize)));
    widths.push(k);
    let n = d + rng.random_range(4..20usize);
    let ds = orthogonal_fixture(n, &moments, r, k, seed)?;
    let spec = NetworkSpec::dense(widths, Activation::Identity)?;
    let mut net = NetworkState::init(&spec, &InitScheme::KaimingNormal, seed)?;
    let a = net.downstream().t_matmul(&net.downstream())?;
    let v = sym_eigen(&a)?.vectors;
    net.weights[0] = v.t_matmul(&net.weights[0])?;
    net.weights[1] = net.weights[1].matmul(&v)?;
    Ok((ds, net, r))
}

pub fn shrink_factors(p: &ShrinkFactorParams) -> Result<SuiteReport> {
    let mut worst_entry = 0.0f64;
    let mut worst_block = 0.0f64;
    let mut unspanned_moved = 0usize;
    let mut entries = 0usize;
    for f in 0..p.fixtures {
        let seed = p.seed + f as u64;
        let (ds, net, r) = shrink_fixture(seed)?;
        let dec = RelevanceDecomposition::from_ground_truth(&ds, &(0..r).collect::<Vec<_>>(), 1e-9)?;
        let a_max = net.downstream().t_matmul(&net.downstream())?.max_abs();
        let m_max = (0..ds.d()).map(|j| dec.lambda_xx[(j, j)]).fold(0.0, f64::max);
        let eta = 0.5 / (a_max * m_max);

        let mut stepped = net.clone();
        step(&mut stepped, &ds.x, &ds.y, &all_rows(&ds), eta, 0.0)?;
        let (w0, w1) = (&net.weights[0], &stepped.weights[0]);
        for i in 0..w0.rows() {
            for j in r..ds.d() {
                let pred = predict_gd_multiplier(&net, &dec, eta, (i, j))?;
                let want = pred.gd_factor * w0[(i, j)];
                entries += 1;
                if pred.second_moment == 0.0 {
                    unspanned_moved += usize::from(w1[(i, j)] != w0[(i, j)] || pred.gd_factor != 1.0);
                } else {
                    worst_entry = worst_entry.max((w1[(i, j)] - want).abs() / want.abs());
                }
            }
        }
        let irr: Vec<usize> = (r..ds.d()).collect();
        let pred = sufficient_stat_gd_step(&net, &ds.second_moment(), &ds.cross_moment(), eta, r)?;
        let actual = w1.sub(w0)?.select_cols(&irr)?;
        let scale = actual.frobenius_norm();
        if scale > 0.0 {
            worst_block = worst_block.max(pred.sub(&actual)?.frobenius_norm() / scale);
        }
    }
    Ok(report(
        Suite::ShrinkFactors,
        vec![
            Check::at_most(
                "irrelevant entry multiplier vs one GD step (max rel err)",
                worst_entry,
                p.tol,
                format!("{entries} entries over {} fixtures", p.fixtures),
            ),
            Check::at_most("moment-formula GD step vs backprop (max rel err)", worst_block, p.tol, ""),
            Check::at_most("unspanned entries not exactly frozen", unspanned_moved as f64, 0.0, ""),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Full GD runs on sparse-support data: monotone irrelevant norm, frozen
// unspanned weights, exact geometric decay under weight decay.

#[derive(Clone, Debug)]
pub struct LinearRunParams {
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub unspanned: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
    /// Step size as a fraction of `2/λ_max` at initialization.
    pub eta_fraction: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Remove rounding-level cross moments between relevant and irrelevant columns.
    pub decorrelate: bool,
    pub slack: f64,
    pub seed: u64,
}

impl Default for LinearRunParams {
    fn default() -> Self {
        Self {
            d: 15,
            r: 5,
            m: 500,
            unspanned: 3,
            hidden: vec![20, 20],
            steps: 2000,
            eta_fraction: 0.5,
            weight_decay: 1e-2,
            batch_size: 32,
            decorrelate: true,
            slack: 1e-10,
            seed: 0,
        }
    }
}

impl LinearRunParams {
    pub fn build(&self) -> Result<(Dataset, NetworkState, f64)> {
        let ds = gen_synthetic(self.d, self.r, self.m, Target::LinearSum, 0.01, self.seed)?;
        let ds = if self.decorrelate { decorrelate_irrelevant(&ds)? } else { ds };
        let ds = append_unspanned(&ds, self.unspanned)?;
        let mut widths = vec![ds.d()];
        widths.extend(&self.hidden);
        widths.push(1);
        let net = NetworkState::init(&NetworkSpec::dense(widths, Activation::Identity)?, &InitScheme::KaimingNormal, self.seed)?;
        let eta = self.eta_fraction * eta_max(&net, &ds, 0.0)?.value;
        Ok((ds, net, eta))
    }

    fn unspanned_cols(&self) -> Vec<usize> {
        (self.d..self.d + self.unspanned).collect()
    }
}

pub fn gd_monotone(p: &LinearRunParams) -> Result<SuiteReport> {
    let (ds, mut net, eta) = p.build()?;
    let irr = ds.ground_truth_irrelevant().expect("synthetic data has ground truth");
    let start = irrelevant_norms(&net, &irr)?[0];
    let loss0 = net.full_loss(&ds.x, &ds.y)?;
    let traj = run_training(&mut net, &ds, &OptimizerConfig::gd(eta, p.steps), TrainOptions { irrelevant: irr, ..Default::default() })?
        .into_result()?;
    let norms: Vec<f64> = std::iter::once(start).chain(traj.records.iter().map(|r| r.irrel_norm_per_layer[0])).collect();
    let worst_rise = norms.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let last = traj.records.last().map_or(loss0, |r| r.loss);
    Ok(report(
        Suite::GdMonotone,
        vec![
            Check::at_most(
                "largest per-step rise of first-layer irrelevant norm",
                worst_rise,
                p.slack,
                format!("{} GD steps, eta {eta:.4e}, norm {start:.6e} -> {:.6e}", p.steps, norms.last().unwrap_or(&start)),
            ),
            Check::above("loss decreased", loss0 - last, 0.0, format!("{loss0:.6e} -> {last:.6e}")),
        ],
    ))
}

/// Counts steps after which any watched first-layer weight differs from
/// `expect(previous)` bitwise.
fn count_mismatches(
    ds: &Dataset,
    net: &mut NetworkState,
    cfg: &OptimizerConfig,
    cols: &[usize],
    expect: impl Fn(f64) -> f64,
) -> Result<usize> {
    let mut sampler = BatchSampler::new(cfg, ds.n())?;
    let mut bad = 0;
    for _ in 0..cfg.steps {
        let before: Vec<f64> = (0..net.weights[0].rows()).flat_map(|i| cols.iter().map(move |&j| (i, j))).map(|ij| net.weights[0][ij]).collect();
        let batch = sampler.next_batch().to_vec();
        step(net, &ds.x, &ds.y, &batch, cfg.eta, cfg.weight_decay)?;
        let after = (0..net.weights[0].rows()).flat_map(|i| cols.iter().map(move |&j| (i, j))).map(|ij| net.weights[0][ij]);
        bad += usize::from(before.iter().zip(after).any(|(b, a)| a.to_bits() != expect(*b).to_bits()));
    }
    Ok(bad)
}

fn algorithms(p: &LinearRunParams, eta: f64) -> Vec<(&'static str, OptimizerConfig)> {
    vec![
        ("gd", OptimizerConfig::gd(eta, p.steps)),
        ("sgd-without", OptimizerConfig::sgd_without(eta, p.batch_size, p.steps, p.seed)),
        ("sgd-with", OptimizerConfig::sgd_with(eta, p.batch_size, p.steps, p.seed)),
    ]
}

pub fn unspanned_frozen(p: &LinearRunParams) -> Result<SuiteReport> {
    let (ds, net, eta) = p.build()?;
    let cols = p.unspanned_cols();
    let mut checks = Vec::new();
    for (name, cfg) in algorithms(p, eta) {
        let mut run = net.clone();
        let bad = count_mismatches(&ds, &mut run, &cfg, &cols, |w| w)?;
        checks.push(Check::at_most(
            &format!("{name}: steps changing an unspanned weight"),
            bad as f64,
            0.0,
            format!("{} steps, {} unspanned inputs", p.steps, cols.len()),
        ));
    }
    Ok(report(Suite::UnspannedFrozen, checks))
}

pub fn weight_decay(p: &LinearRunParams) -> Result<SuiteReport> {
    let (ds, net, eta) = p.build()?;
    let cols = p.unspanned_cols();
    let lambda = p.weight_decay;
    let decay = 1.0 - eta * lambda;
    let mut checks = Vec::new();
    for (name, cfg) in algorithms(p, eta) {
        let cfg = cfg.with_weight_decay(lambda);
        let mut run = net.clone();
        let bad = count_mismatches(&ds, &mut run, &cfg, &cols, |w| w * decay)?;
        checks.push(Check::at_most(
            &format!("{name}: steps where unspanned ratio is not exactly 1 - eta*lambda"),
            bad as f64,
            0.0,
            format!("lambda {lambda}, {} steps", p.steps),
        ));
    }
    Ok(report(Suite::WeightDecay, checks))
}

// ---------------------------------------------------------------------------
// Which layer GD zeroes in diagonal chains.

#[derive(Clone, Debug)]
pub struct ZeroingLayerParams {
    pub seeds: usize,
    pub depth: usize,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub init_scale: f64,
    pub max_steps: usize,
    pub eta_cap: f64,
    pub tol: f64,
    pub workers: usize,
}

impl Default for ZeroingLayerParams {
    fn default() -> Self {
        Self { seeds: 2000, depth: 3, d: 7, r: 5, m: 8, init_scale: 0.5, max_steps: 60_000, eta_cap: 0.2, tol: 0.05, workers: 0 }
    }
}

struct ZeroingOutcome {
    layers: Vec<usize>,
    init_argmin: Vec<usize>,
    reached: bool,
}

fn zeroing_run(p: &ZeroingLayerParams, ds: &Dataset, seed: u64) -> Result<ZeroingOutcome> {
    let spec = NetworkSpec::diagonal(p.depth, p.d, Activation::Identity)?;
    let init = NetworkState::init(&spec, &InitScheme::IidNormal { scale: p.init_scale }, seed)?;
    let irr: Vec<usize> = (p.r..p.d).collect();
    let tols: Vec<f64> = irr.iter().map(|&j| zero_tolerance(&init.chain(j))).collect();
    let eta = p.eta_cap.min(0.5 * eta_max(&init, ds, 0.0)?.value);
    let mut net = init.clone();
    let (irr_s, tols_s) = (irr.clone(), tols.clone());
    let stop = Box::new(move |_s: usize, n: &NetworkState| {
        irr_s.iter().zip(&tols_s).all(|(&j, &t)| n.chain(j).iter().any(|w| w.abs() <= t))
    });
    let opts = TrainOptions { stride: p.max_steps, stop: Some(stop), ..Default::default() };
    run_training(&mut net, ds, &OptimizerConfig::gd(eta, p.max_steps), opts)?.into_result()?;
    let mut layers = Vec::new();
    let mut reached = true;
    for (&j, &t) in irr.iter().zip(&tols) {
        let c = &support_layer(&net, &[j], t)?.components[0];
        layers.push(c.layer);
        reached &= c.zeroed;
    }
    let init_argmin = support_layer(&init, &irr, 0.0)?.components.iter().map(|c| c.layer).collect();
    Ok(ZeroingOutcome { layers, init_argmin, reached })
}

pub fn gd_zeroing_layer(p: &ZeroingLayerParams) -> Result<SuiteReport> {
    // Irrelevant labels are exactly zero; relevant ones are y_j = x_j.
    let ds = gen_misspecified_diagonal(p.d, p.r, p.m, 0.0, 0)?;
    let runs = par_map(p.seeds, p.workers, |k| zeroing_run(p, &ds, k as u64));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let all_first = runs.iter().filter(|o| o.layers.iter().all(|&l| l == 1)).count() as f64 / n;
    let chains = (runs.len() * (p.d - p.r)) as f64;
    let target = (1.0 / p.depth as f64).powi((p.d - p.r) as i32);
    let unreached = runs.iter().filter(|o| !o.reached).count();
    let agree = runs.iter().map(|o| o.layers.iter().zip(&o.init_argmin).filter(|(a, b)| a == b).count()).sum::<usize>() as f64;
    let mut checks = vec![Check::within(
        "fraction of seeds whose irrelevant chains all zero in layer 1",
        all_first,
        target,
        p.tol,
        format!("{} seeds, {unreached} hit the step cap before every chain reached tolerance", p.seeds),
    )];
    for l in 1..=p.depth {
        let freq = runs.iter().flat_map(|o| o.layers.iter()).filter(|&&x| x == l).count() as f64 / chains;
        checks.push(Check::within(&format!("share of chains zeroed in layer {l}"), freq, 1.0 / p.depth as f64, p.tol, ""));
    }
    checks.push(Check::at_least(
        "zeroing layer equals the layer of smallest initial weight",
        agree / chains,
        0.95,
        "ordering of |weights| is preserved by gradient flow",
    ));
    Ok(report(Suite::GdZeroingLayer, checks))
}

// ---------------------------------------------------------------------------
// Two batches with second moments s ± δ.

#[derive(Clone, Debug)]
pub struct TwoStepParams {
    pub fixtures: usize,
    pub zero_delta_fixtures: usize,
    pub seed: u64,
    pub rel_tol: f64,
}

impl Default for TwoStepParams {
    fn default() -> Self {
        Self { fixtures: 200, zero_delta_fixtures: 20, seed: 0, rel_tol: 0.2 }
    }
}

pub fn random_two_batch(rng: &mut ChaCha8Rng, zero_delta: bool) -> TwoBatchFixture {
    let s = rng.random_range(0.5..2.0);
    let delta = if zero_delta { 0.0 } else { s * rng.random_range(0.1..0.9) };
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let w2: f64 = sign(rng) * rng.random_range(0.5..1.5);
    let w1 = sign(rng) * w2.abs() * rng.random_range(0.02..0.15);
    let alpha = rng.random_range(0.005..0.02);
    TwoBatchFixture { s, delta, batch: 1, w1, w2, eta: alpha / (w2 * w2 * s) }
}

/// First-layer multipliers after two steps: `(gd, sgd)` where SGD averages
/// the two equally likely batch orders.
pub fn two_step_multipliers(f: &TwoBatchFixture) -> Result<(f64, f64)> {
    let ds = f.dataset();
    let (lo, hi): (Vec<usize>, Vec<usize>) = ((0..f.batch).collect(), (f.batch..2 * f.batch).collect());
    let run = |batches: [&[usize]; 2]| -> Result<f64> {
        let mut net = f.network();
        for b in batches {
            step(&mut net, &ds.x, &ds.y, b, f.eta, 0.0)?;
        }
        Ok(net.weights[0][(0, 0)] / f.w1)
    };
    let all = all_rows(&ds);
    let gd = run([&all, &all])?;
    let sgd = 0.5 * (run([&lo, &hi])? + run([&hi, &lo])?);
    Ok((gd, sgd))
}

pub fn two_step(p: &TwoStepParams) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut not_strict = 0usize;
    let mut worst_rel = 0.0f64;
    for _ in 0..p.fixtures {
        let f = random_two_batch(&mut rng, false);
        let (gd, sgd) = two_step_multipliers(&f)?;
        not_strict += usize::from(sgd >= gd);
        let pred = f.predicted_excess();
        worst_rel = worst_rel.max(((gd - sgd) - pred).abs() / pred);
    }
    let mut worst_zero = 0.0f64;
    for _ in 0..p.zero_delta_fixtures {
        let f = random_two_batch(&mut rng, true);
        let (gd, sgd) = two_step_multipliers(&f)?;
        worst_zero = worst_zero.max((gd - sgd).abs());
    }
    // With one row per batch, the without-replacement sampler on two rows
    // visits exactly the two orders enumerated above.
    let mut orders = [0usize; 2];
    for seed in 0..200 {
        let s = make_schedule(&OptimizerConfig::sgd_without(0.1, 1, 2, seed), 2)?;
        orders[s.batches[0][0]] += 1;
    }
    Ok(report(
        Suite::TwoStep,
        vec![
            Check::at_most("fixtures with delta != 0 where SGD does not shrink more", not_strict as f64, 0.0, format!("{} fixtures", p.fixtures)),
            Check::at_most("measured excess vs (eta*a*delta)^2 (max rel err)", worst_rel, p.rel_tol, ""),
            Check::at_most("delta = 0: |GD - SGD| two-step multiplier", worst_zero, 1e-15, format!("{} fixtures", p.zero_delta_fixtures)),
            Check::within("sampler picks each batch order equally often (share first)", orders[0] as f64 / 200.0, 0.5, 0.15, ""),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Balancedness gap of a misspecified diagonal chain.

#[derive(Clone, Debug)]
pub struct BalancednessParams {
    pub m: usize,
    pub sigma: f64,
    pub eta: f64,
    pub steps: usize,
    /// Initial `(W_1, W_2)` of the irrelevant chain.
    pub chain: (f64, f64),
    pub seed: u64,
}

impl Default for BalancednessParams {
    fn default() -> Self {
        Self { m: 50, sigma: 1.0, eta: 0.05, steps: 20_000, chain: (1.0, 0.5), seed: 0 }
    }
}

fn misspecified_net(relevant: (f64, f64), irrelevant: (f64, f64)) -> Result<NetworkState> {
    let spec = NetworkSpec::diagonal(2, 2, Activation::Identity)?;
    NetworkState::from_weights(
        spec,
        vec![Mat::new(1, 2, vec![relevant.0, irrelevant.0])?, Mat::new(1, 2, vec![relevant.1, irrelevant.1])?],
    )
}

pub fn balancedness(p: &BalancednessParams) -> Result<SuiteReport> {
    let ds = gen_misspecified_diagonal(2, 1, p.m, p.sigma, p.seed)?;
    let init = misspecified_net((0.5, 0.5), p.chain)?;
    let g0 = balancedness_gaps(&init, 1)?.values[0];

    let cfg = OptimizerConfig::sgd_without(p.eta, 1, p.steps, p.seed);
    let mut sampler = BatchSampler::new(&cfg, ds.n())?;
    let mut net = init.clone();
    let mut worst = 0.0f64;
    for _ in 0..p.steps {
        let batch = sampler.next_batch().to_vec();
        let g = balancedness_gaps(&net, 1)?.values[0];
        let mult = balancedness_multipliers(&net, &ds, &batch, p.eta, 0.0, 1)?[0];
        step(&mut net, &ds.x, &ds.y, &batch, p.eta, 0.0)?;
        let g_next = balancedness_gaps(&net, 1)?.values[0];
        if g.abs() > 1e-12 {
            worst = worst.max((g_next / g - mult).abs());
        }
    }
    let g_sgd = balancedness_gaps(&net, 1)?.values[0];

    let mut gd = init.clone();
    let traj = run_training(&mut gd, &ds, &OptimizerConfig::gd(p.eta, p.steps), TrainOptions { stride: p.steps / 10, ..Default::default() })?
        .into_result()?;
    let g_gd = balancedness_gaps(&gd, 1)?.values[0];
    let losses: Vec<f64> = traj.records.iter().map(|r| r.loss).collect();
    let plateau = match losses.as_slice() {
        [.., a, b] => (a - b).abs() / b.abs().max(f64::MIN_POSITIVE),
        _ => f64::INFINITY,
    };
    let eta3 = p.eta.powi(3);
    Ok(report(
        Suite::Balancedness,
        vec![
            Check::at_most("predicted vs simulated gap multiplier per SGD step (max abs err)", worst, 10.0 * eta3, format!("bound 10*eta^3, {} steps", p.steps)),
            Check::at_most("|G| after SGD(b=1)", g_sgd.abs(), 1e-6, format!("initial G {g0:.4e}")),
            Check::above("|G| after GD relative to initial", (g_gd / g0).abs(), 0.1, format!("G {g_gd:.6e}")),
            Check::at_most("GD loss change over the last tenth of the budget (relative)", plateau, 1e-6, "GD has reached its loss plateau"),
        ],
    ))
}

// ---------------------------------------------------------------------------
// ReLU network where irrelevant first-layer weights grow without decay.

#[derive(Clone, Debug)]
pub struct ReluParams {
    /// Magnitude of the relevant coordinate.
    pub big: f64,
    /// Shared small positive irrelevant coordinate.
    pub eps: f64,
    pub steps: usize,
    pub weight_decay: f64,
}

impl Default for ReluParams {
    fn default() -> Self {
        Self { big: 10.0, eps: 1e-3, steps: 100, weight_decay: 1e-2 }
    }
}

/// Two points `(±big, eps)` with label `big`, and a width-4 ReLU net whose
/// hidden units each fire on exactly one of them.
pub fn relu_fixture(p: &ReluParams) -> Result<(Dataset, NetworkState)> {
    let x = Mat::from_rows(&[vec![p.big, p.eps], vec![-p.big, p.eps]])?;
    let y = Mat::from_rows(&[vec![p.big], vec![p.big]])?;
    let ds = Dataset::new(x, y, Some(vec![0]), "relu-two-point")?;
    let spec = NetworkSpec::dense(vec![2, 4, 1], Activation::Relu)?;
    let w1 = Mat::from_rows(&[vec![1.0, 0.5], vec![-1.0, 0.5], vec![0.8, 0.5], vec![-0.8, 0.5]])?;
    let w2 = Mat::new(1, 4, vec![0.5; 4])?;
    Ok((ds, NetworkState::from_weights(spec, vec![w1, w2])?))
}

fn irrelevant_path(ds: &Dataset, init: &NetworkState, eta: f64, lambda: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut net = init.clone();
    let rows = all_rows(ds);
    let mut path = vec![net.weights[0].col(1)];
    for _ in 0..steps {
        step(&mut net, &ds.x, &ds.y, &rows, eta, lambda)?;
        path.push(net.weights[0].col(1));
    }
    Ok(path)
}

pub fn relu_counterexample(p: &ReluParams) -> Result<SuiteReport> {
    let (ds, init) = relu_fixture(p)?;
    let eta = 0.25 * eta_max(&init, &ds, 0.0)?.value;
    let free = irrelevant_path(&ds, &init, eta, 0.0, p.steps)?;
    let (first, last) = (&free[0], free.last().expect("non-empty"));
    let grown = first.iter().zip(last).filter(|(a, b)| b.abs() > a.abs()).count();
    let max_growth = first.iter().zip(last).map(|(a, b)| b.abs() - a.abs()).fold(f64::NEG_INFINITY, f64::max);

    let decayed = irrelevant_path(&ds, &init, eta, p.weight_decay, p.steps)?;
    let not_decreasing = decayed.windows(2).filter(|w| w[0].iter().zip(&w[1]).any(|(a, b)| b.abs() >= a.abs())).count();
    let loss = {
        let mut net = init.clone();
        for _ in 0..p.steps {
            step(&mut net, &ds.x, &ds.y, &all_rows(&ds), eta, 0.0)?;
        }
        net.full_loss(&ds.x, &ds.y)?
    };
    Ok(report(
        Suite::ReluCounterexample,
        vec![
            Check::at_least(
                "irrelevant first-layer weights that grew without decay",
                grown as f64,
                1.0,
                format!("largest growth {max_growth:.3e} over {} GD steps, eta {eta:.4e}, final loss {loss:.3e}", p.steps),
            ),
            Check::at_most(
                "steps where some irrelevant weight failed to shrink with decay",
                not_decreasing as f64,
                0.0,
                format!("lambda {}", p.weight_decay),
            ),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Gradient checks over an architecture grid.

#[derive(Clone, Debug)]
pub struct GradcheckParams {
    pub depths: Vec<usize>,
    pub h: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GradcheckParams {
    fn default() -> Self {
        Self { depths: vec![2, 3, 4], h: 1e-5, tol: 1e-5, seed: 0 }
    }
}

pub fn gradcheck_grid(p: &GradcheckParams) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for topology in [Topology::Dense, Topology::Diagonal] {
        for act in [Activation::Identity, Activation::Relu] {
            for &depth in &p.depths {
                let seed = p.seed + depth as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let spec = match topology {
                    Topology::Dense => {
                        let mut w = vec![5];
                        w.extend((1..depth).map(|_| rng.random_range(3..=6usize)));
                        w.push(2);
                        NetworkSpec::dense(w, act)?
                    }
                    Topology::Diagonal => NetworkSpec::diagonal(depth, 4, act)?,
                };
                let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, seed)?;
                let x = Mat::from_fn(8, spec.input_dim(), |_, _| rng.sample(StandardNormal));
                let y = Mat::from_fn(8, spec.output_dim(), |_, _| rng.sample(StandardNormal));
                let rows: Vec<usize> = (0..8).collect();
                let rep = gradcheck(&net, &x, &y, &rows, net.num_params(), p.h, seed)?;
                checks.push(Check::at_most(
                    &format!("{topology:?} {act:?} depth {depth}: max rel err").to_lowercase(),
                    rep.max_rel_err,
                    p.tol,
                    format!("{} probes, {} skipped at kinks", rep.checked, rep.skipped_kinks),
                ));
            }
        }
    }
    Ok(report(Suite::Gradcheck, checks))
}

// ---------------------------------------------------------------------------
// Two-parameter toy model f(x) = a·b·x.

#[derive(Clone, Debug)]
pub struct ToyParams {
    pub one_step_trials: usize,
    pub two_step_eta: f64,
    pub two_step_a: f64,
    pub two_step_b: f64,
    pub d1_eta: f64,
    pub d1_steps: usize,
    /// Initial `(a, b)` for the D1 runs.
    pub d1_init: (f64, f64),
    pub seed: u64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            one_step_trials: 100,
            two_step_eta: 1e-3,
            two_step_a: 1.0,
            two_step_b: 1e-4,
            d1_eta: 0.05,
            d1_steps: 50_000,
            d1_init: (1.5, 0.5),
            seed: 0,
        }
    }
}

/// Diagonal depth-2 net with `W_1 = b` (first layer) and `W_2 = a`.
pub fn toy_net(a: f64, b: f64) -> Result<NetworkState> {
    let spec = NetworkSpec::diagonal(2, 1, Activation::Identity)?;
    NetworkState::from_weights(spec, vec![Mat::new(1, 1, vec![b])?, Mat::new(1, 1, vec![a])?])
}

/// `(a, b)` after training on a toy dataset.
pub fn toy_endpoint(which: ToyData, init: (f64, f64), cfg: &OptimizerConfig) -> Result<(f64, f64)> {
    let ds = toy_as_dataset(which);
    let mut net = toy_net(init.0, init.1)?;
    run_training(&mut net, &ds, cfg, TrainOptions { stride: cfg.steps.max(1), ..Default::default() })?.into_result()?;
    Ok((net.weights[1][(0, 0)], net.weights[0][(0, 0)]))
}

pub fn toy_model(p: &ToyParams) -> Result<SuiteReport> {
    let d2 = toy_as_dataset(ToyData::D2);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut worst_one = 0.0f64;
    for _ in 0..p.one_step_trials {
        let a = rng.random_range(0.3..1.5);
        let b = rng.random_range(0.1..1.0);
        let eta = rng.random_range(1e-3..0.05);
        for (row, k) in [(0usize, 1.0), (1, 9.0)] {
            let mut net = toy_net(a, b)?;
            step(&mut net, &d2.x, &d2.y, &[row], eta, 0.0)?;
            let got = net.weights[0][(0, 0)] / b;
            worst_one = worst_one.max((got - (1.0 - k * eta * a * a)).abs());
        }
    }

    let (eta, a, b) = (p.two_step_eta, p.two_step_a, p.two_step_b);
    let two = |batches: [&[usize]; 2]| -> Result<f64> {
        let mut net = toy_net(a, b)?;
        for bt in batches {
            step(&mut net, &d2.x, &d2.y, bt, eta, 0.0)?;
        }
        Ok(net.weights[0][(0, 0)] / b)
    };
    let gd_rate = two([&[0, 1], &[0, 1]])?;
    let sgd_rate = 0.5 * (two([&[0], &[1]])? + two([&[1], &[0]])?);
    let a2 = a * a;
    let coef = |rate: f64| (rate - 1.0 + 10.0 * eta * a2) / (eta * eta * a2 * a2);

    let gd_end = toy_endpoint(ToyData::D1, p.d1_init, &OptimizerConfig::gd(p.d1_eta, p.d1_steps))?;
    let sgd_end = toy_endpoint(ToyData::D1, p.d1_init, &OptimizerConfig::sgd_without(p.d1_eta, 1, p.d1_steps, p.seed))?;
    let norm = |(x, y): (f64, f64)| x.hypot(y);
    Ok(report(
        Suite::ToyModel,
        vec![
            Check::at_most("one-step single-sample multipliers vs 1 - eta*a^2*x^2", worst_one, 4.0 * f64::EPSILON, format!("{} trials", p.one_step_trials)),
            Check::within("GD two-step second-order coefficient", coef(gd_rate), 25.0, 1e-3, ""),
            Check::within("SGD two-step second-order coefficient", coef(sgd_rate), 9.0, 1e-3, ""),
            Check::within("GD minus SGD coefficient gap", coef(gd_rate) - coef(sgd_rate), 16.0, 1e-3, ""),
            Check::at_most(
                "D1: SGD endpoint norm / GD endpoint norm",
                norm(sgd_end) / norm(gd_end),
                0.2,
                format!("GD ends at ({:.4}, {:.3e}), SGD at ({:.3e}, {:.3e})", gd_end.0, gd_end.1, sgd_end.0, sgd_end.1),
            ),
            Check::at_most("D1: GD endpoint residual |ab|", (gd_end.0 * gd_end.1).abs(), 1e-6, "GD stops on the zero-loss manifold"),
        ],
    ))
}

// ---------------------------------------------------------------------------
// Steps to zero an irrelevant first-layer weight across (η, b).

#[derive(Clone, Debug)]
pub struct ScalingParams {
    pub etas: Vec<f64>,
    pub batches: Vec<usize>,
    pub seeds: usize,
    pub m: usize,
    pub sigma: f64,
    pub threshold: f64,
    pub max_steps: usize,
    /// Initial `(W_1, W_2)` of the irrelevant chain. `W_1 > W_2` so that
    /// plain GD leaves `W_1` away from zero and only the noise removes it.
    pub chain: (f64, f64),
    pub slope_band: (f64, f64),
    pub min_r2: f64,
    pub workers: usize,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            etas: vec![0.02, 0.05, 0.1],
            batches: vec![2, 5, 10, 25],
            seeds: 10,
            m: 100,
            sigma: 2.0,
            threshold: 1e-3,
            max_steps: 5_000_000,
            chain: (1.0, 0.5),
            slope_band: (0.7, 1.3),
            min_r2: 0.8,
            workers: 0,
        }
    }
}

/// Steps until `|W_1|` of the irrelevant chain falls below
/// `threshold · |W_1(0)|`, or `None` within the budget.
pub fn steps_to_threshold(ds: &Dataset, init: &NetworkState, cfg: &OptimizerConfig, threshold: f64) -> Result<Option<usize>> {
    let level = threshold * init.weights[0][(0, 1)].abs();
    let mut net = init.clone();
    let stop = Box::new(move |_s: usize, n: &NetworkState| n.weights[0][(0, 1)].abs() < level);
    let traj = run_training(&mut net, ds, cfg, TrainOptions { stride: cfg.steps.max(1), stop: Some(stop), ..Default::default() })?
        .into_result()?;
    Ok((net.weights[0][(0, 1)].abs() < level).then_some(traj.steps_run))
}

pub fn scaling_grid(p: &ScalingParams) -> Result<Vec<GridPoint>> {
    let ds = gen_misspecified_diagonal(2, 1, p.m, p.sigma, 0)?;
    let init = misspecified_net((0.7, 0.7), p.chain)?;
    let cells: Vec<(f64, usize)> = p.etas.iter().flat_map(|&e| p.batches.iter().map(move |&b| (e, b))).collect();
    let jobs = cells.len() * p.seeds;
    let results = par_map(jobs, p.workers, |k| {
        let (eta, b) = cells[k / p.seeds];
        let cfg = OptimizerConfig::sgd_without(eta, b, p.max_steps, (k % p.seeds) as u64);
        steps_to_threshold(&ds, &init, &cfg, p.threshold)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(cells
        .iter()
        .zip(results.chunks(p.seeds))
        .map(|(&(eta, b), reps)| {
            let reached: Vec<f64> = reps.iter().flatten().map(|&s| s as f64).collect();
            let steps = (2 * reached.len() > reps.len()).then(|| {
                let mut all = reached.clone();
                all.resize(reps.len(), f64::INFINITY);
                median(&all)
            });
            GridPoint { eta, batch_size: b as f64, steps }
        })
        .collect())
}

pub fn scaling_law(p: &ScalingParams) -> Result<SuiteReport> {
    let grid = scaling_grid(p)?;
    let fit: ScalingFit = scaling_fit(&grid)?;
    // Control: full-batch GD from the same init only shrinks the irrelevant
    // chain through W_2, leaving W_1 in place.
    let ds = gen_misspecified_diagonal(2, 1, p.m, p.sigma, 0)?;
    let init = misspecified_net((0.7, 0.7), p.chain)?;
    let eta_gd = p.etas.iter().copied().fold(0.0, f64::max);
    let longest = fit.grid.iter().filter_map(|g| g.steps).fold(0.0, f64::max) as usize;
    let gd_steps = steps_to_threshold(&ds, &init, &OptimizerConfig::gd(eta_gd, longest.max(1)), p.threshold)?;
    let desc: Vec<String> =
        fit.grid.iter().map(|g| format!("(eta {}, b {}) {:.0}", g.eta, g.batch_size, g.steps.unwrap_or(f64::NAN))).collect();
    let (lo, hi) = p.slope_band;
    Ok(report(
        Suite::ScalingLaw,
        vec![
            Check::within("slope of log median steps vs log(b/eta^2)", fit.slope, (lo + hi) / 2.0, (hi - lo) / 2.0, desc.join("; ")),
            Check::above("r^2 of the log-log fit", fit.r2, p.min_r2, ""),
            Check::at_most("cells that did not reach the threshold", fit.excluded.len() as f64, 0.0, ""),
            Check::at_most(
                "GD control runs that reached the threshold",
                gd_steps.map_or(0.0, |_| 1.0),
                0.0,
                format!("eta {eta_gd}, {longest} steps"),
            ),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_passes(r: &SuiteReport) {
        for c in &r.checks {
            assert!(c.passed, "{}: {} (bound {}) {}", c.name, c.value, c.bound, c.detail);
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("theorem".parse::<Suite>().is_err());
    }

    #[test]
    fn small_shrink_factor_suite() {
        assert_passes(&shrink_factors(&ShrinkFactorParams { fixtures: 5, ..Default::default() }).unwrap());
    }

    #[test]
    fn small_linear_run_suites() {
        let p = LinearRunParams { d: 6, r: 2, m: 40, hidden: vec![5], steps: 200, ..Default::default() };
        assert_passes(&gd_monotone(&p).unwrap());
        assert_passes(&unspanned_frozen(&p).unwrap());
        assert_passes(&weight_decay(&p).unwrap());
    }

    #[test]
    fn small_two_step_suite() {
        assert_passes(&two_step(&TwoStepParams { fixtures: 20, zero_delta_fixtures: 3, ..Default::default() }).unwrap());
    }

    #[test]
    fn relu_and_gradcheck_suites() {
        assert_passes(&relu_counterexample(&ReluParams::default()).unwrap());
        assert_passes(&gradcheck_grid(&GradcheckParams { depths: vec![2, 3], ..Default::default() }).unwrap());
    }

    #[test]
    fn check_constructors() {
        assert!(Check::within("x", 1.04, 1.0, 0.05, "").passed);
        assert!(!Check::within("x", 1.06, 1.0, 0.05, "").passed);
        assert!(!Check::above("x", 0.1, 0.1, "").passed);
        assert!(Check::at_least("x", 0.1, 0.1, "").passed);
    }
}
