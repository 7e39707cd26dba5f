//! Experiment orchestration: configs, single runs, sweeps, verification
//! suites and SVG plots.

pub mod config;
pub mod csv_io;
pub mod plot;
pub mod run;
pub mod suites;
pub mod sweep;

pub use config::{default_out_root, ExperimentConfig, OUT_ROOT_ENV};
pub use plot::{plot, PlotKind, PlotOptions};
pub use run::{run_experiment, RunOutcome, RunSummary};
pub use suites::{Suite, SuiteReport};
pub use sweep::{run_sweep, SweepOutcome, SweepSpec};
