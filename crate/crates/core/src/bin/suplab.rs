use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{error, info};

use support_lab::datagen::ToyData;
use support_lab::runner::{self, ExperimentConfig, PlotKind, PlotOptions, Suite, SweepSpec, OUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "suplab", version, about = "Support-identification training dynamics lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once from a config and write trajectory.csv, summary.json and spectra.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_ROOT_ENV, default_value = "runs")]
        out: PathBuf,
        /// Replaces both the sampling seed and the init seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Record every N steps.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run a grid of configs with replicate seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_ROOT_ENV, default_value = "runs")]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Check simulated dynamics against closed-form predictions.
    Verify {
        /// Suite name, or `all`.
        suite: String,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures from run outputs.
    Plot {
        /// norm-curves, gram-heatmap, eigen-histogram or landscape-2d.
        kind: PlotKind,
        /// Input CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, env = OUT_ROOT_ENV, default_value = "runs")]
        out: PathBuf,
        /// Toy dataset whose loss surface backs landscape-2d (d1 or d2).
        #[arg(long, default_value = "d1")]
        toy: String,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means the command completed but something it checked failed.
fn dispatch(cmd: Command) -> support_lab::Result<bool> {
    match cmd {
        Command::Run { config, out, seed_override, stride } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed_override {
                cfg.optimizer.seed = s;
                cfg.network.init_seed = s;
            }
            if let Some(s) = stride {
                cfg.probes.stride = s;
            }
            let dir = cfg.out_dir(&out);
            let outcome = runner::run_experiment(&cfg, &dir)?;
            let s = &outcome.summary;
            info!("{} steps, final loss {:?}, output in {}", s.steps_run, s.final_loss, dir.display());
            if let Some(d) = &s.divergence {
                error!("diverged at step {}: {}", d.step, d.what);
                return Ok(false);
            }
            Ok(true)
        }
        Command::Sweep { config, out, workers, stride } => {
            let mut spec = SweepSpec::load(&config)?;
            if let Some(s) = stride {
                spec.base.probes.stride = s;
            }
            let dir = out.join(&spec.base.name);
            let outcome = runner::run_sweep(&spec, &dir, workers)?;
            info!("{} cells, output in {}", outcome.cells.len(), dir.display());
            if let Some(fit) = &outcome.fit {
                info!("scaling fit: slope {:.3}, r2 {:.3}", fit.slope, fit.r2);
            }
            for f in &outcome.failures {
                error!("cell {} seed {}: {}", f.cell, f.seed, f.error);
            }
            Ok(outcome.failures.is_empty())
        }
        Command::Verify { suite, workers, out } => {
            let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
            let mut reports = Vec::new();
            for s in suites {
                let t = Instant::now();
                let r = s.run(workers)?;
                for c in &r.checks {
                    println!(
                        "{} {}: {}: {:.6e} (bound {:.3e}) {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        r.suite,
                        c.name,
                        c.value,
                        c.bound,
                        c.detail
                    );
                }
                println!("{} {} in {:.1}s", if r.passed() { "PASS" } else { "FAIL" }, r.suite, t.elapsed().as_secs_f64());
                reports.push(r);
            }
            if let Some(path) = out {
                runner::run::write_json(&path, &reports)?;
            }
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::Plot { kind, inputs, out, toy, bins } => {
            let toy = match toy.as_str() {
                "d1" => ToyData::D1,
                "d2" => ToyData::D2,
                other => return Err(support_lab::Error::Param(format!("--toy: expected d1 or d2, got `{other}`"))),
            };
            let written = runner::plot(&inputs, kind, &PlotOptions { toy, bins }, &out)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}
