//! Acceptance gate. Runs every criterion at full scale and time budget,
//! prints one PASS/FAIL line per criterion (with detail lines), then asserts they all passed.
//! Criteria run one after another in a single test so the timings are not
//! skewed by other tests sharing the cores.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use support_lab::runner::suites::{self, SuiteReport};
use support_lab::runner::{run_experiment, run_sweep, ExperimentConfig, SweepSpec};

struct Outcome {
    label: &'static str,
    passed: bool,
    elapsed: Duration,
    budget: Option<Duration>,
    lines: Vec<String>,
}

fn from_reports(label: &'static str, budget_s: u64, run: impl FnOnce() -> Vec<SuiteReport>) -> Outcome {
    let t = Instant::now();
    let reports = run();
    let elapsed = t.elapsed();
    let mut lines = Vec::new();
    for r in &reports {
        for c in &r.checks {
            lines.push(format!(
                "    [{}] {} / {}: {:.6e} (bound {:.3e}) {}",
                if c.passed { "ok" } else { "FAIL" },
                r.suite,
                c.name,
                c.value,
                c.bound,
                c.detail
            ));
        }
    }
    let budget = Duration::from_secs(budget_s);
    Outcome { label, passed: reports.iter().all(|r| r.passed()) && elapsed < budget, elapsed, budget: Some(budget), lines }
}

fn ok(r: support_lab::Result<SuiteReport>) -> SuiteReport {
    r.unwrap_or_else(|e| panic!("suite errored: {e}"))
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

const DETERMINISM_CONFIGS: [(&str, &str); 4] = [
    (
        "synthetic-sgd-without",
        r#"
name = "a"
[dataset]
kind = "synthetic"
d = 8
r = 3
m = 60
unspanned = 2
[network]
widths = [10, 6, 6, 1]
[optimizer]
algorithm = "sgd-without"
eta = 0.01
batch_size = 7
steps = 300
[probes]
metrics = ["layer1", "gram"]
"#,
    ),
    (
        "misspecified-sgd-with-decay",
        r#"
name = "b"
[dataset]
kind = "misspecified-diagonal"
d = 4
r = 2
m = 40
sigma = 0.5
[network]
topology = "diagonal"
depth = 3
init = "iid-normal"
init_scale = 0.5
init_seed = 3
[optimizer]
algorithm = "sgd-with"
eta = 0.05
batch_size = 4
steps = 400
weight_decay = 0.001
seed = 9
[probes]
metrics = ["balancedness", "chains"]
"#,
    ),
    (
        "toy-gd",
        r#"
name = "c"
[dataset]
kind = "toy"
which = "d1"
[network]
topology = "diagonal"
depth = 2
params = [0.5, 1.5]
[optimizer]
eta = 0.05
steps = 200
[probes]
metrics = ["chains"]
"#,
    ),
    (
        "relu-synthetic",
        r#"
name = "d"
[dataset]
kind = "synthetic"
d = 6
r = 2
m = 30
target = "sine-of-sum"
[network]
activation = "relu"
widths = [6, 12, 1]
init = "kaiming-uniform"
[optimizer]
algorithm = "sgd-without"
eta = 0.02
batch_size = 8
steps = 150
"#,
    ),
];

const DETERMINISM_SWEEP: &str = r#"
seeds = [0, 1]
[axes]
"optimizer.eta" = [0.01, 0.03]
"optimizer.batch_size" = [3, 9]
[base]
name = "grid"
[base.dataset]
kind = "misspecified-diagonal"
m = 30
[base.network]
topology = "diagonal"
[base.optimizer]
algorithm = "sgd-without"
steps = 200
"#;

fn determinism() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut passed = true;
    for (label, text) in DETERMINISM_CONFIGS {
        let cfg = ExperimentConfig::from_toml_or_json(text).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        let same = sa == sb && sa.keys().any(|k| k.ends_with(".csv"));
        passed &= same;
        lines.push(format!("    [{}] {label}: {} files byte-identical", if same { "ok" } else { "FAIL" }, sa.len()));
    }
    let spec: SweepSpec = support_lab::runner::config::parse_config(DETERMINISM_SWEEP, "sweep").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&spec, a.path(), 1).unwrap();
    run_sweep(&spec, b.path(), 3).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let same = sa == sb;
    passed &= same;
    lines.push(format!("    [{}] sweep with 1 vs 3 workers: {} files byte-identical", if same { "ok" } else { "FAIL" }, sa.len()));
    Outcome { label: "determinism", passed, elapsed: t.elapsed(), budget: None, lines }
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Box<dyn FnOnce() -> Outcome>> = vec![
        Box::new(|| from_reports("oracle equivalence of per-entry shrink factors", 10, || {
            vec![ok(suites::shrink_factors(&Default::default()))]
        })),
        Box::new(|| from_reports("GD monotone, unspanned frozen, exact weight decay", 30, || {
            let p = suites::LinearRunParams::default();
            vec![ok(suites::gd_monotone(&p)), ok(suites::unspanned_frozen(&p)), ok(suites::weight_decay(&p))]
        })),
        Box::new(|| from_reports("two-parameter toy model", 20, || vec![ok(suites::toy_model(&Default::default()))])),
        Box::new(|| from_reports("GD zeroing-layer Monte Carlo", 300, || {
            vec![ok(suites::gd_zeroing_layer(&Default::default()))]
        })),
        Box::new(|| from_reports("linear scaling law of steps to zero", 600, || {
            vec![ok(suites::scaling_law(&Default::default()))]
        })),
        Box::new(|| from_reports("SGD dominance on two-batch fixtures", 60, || vec![ok(suites::two_step(&Default::default()))])),
        Box::new(|| from_reports("balancedness under SGD vs GD", 120, || vec![ok(suites::balancedness(&Default::default()))])),
        Box::new(|| from_reports("ReLU counterexample and weight decay", 10, || {
            vec![ok(suites::relu_counterexample(&Default::default()))]
        })),
        Box::new(|| from_reports("gradient correctness", 30, || vec![ok(suites::gradcheck_grid(&Default::default()))])),
        Box::new(determinism),
    ];

    // Written straight to stderr so the lines show even when libtest
    // captures the output of passing tests.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    let mut all = true;
    for (k, run) in criteria.into_iter().enumerate() {
        let o = run();
        all &= o.passed;
        let budget = o.budget.map_or(String::new(), |b| format!(" / budget {}s", b.as_secs()));
        writeln!(
            err,
            "{} criterion {:>2}: {} ({:.1}s{budget})",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            o.label,
            o.elapsed.as_secs_f64()
        )
        .unwrap();
        for l in o.lines {
            writeln!(err, "{l}").unwrap();
        }
    }
    assert!(all, "at least one acceptance criterion failed; see the lines above");
}
