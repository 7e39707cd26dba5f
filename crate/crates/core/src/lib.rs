//! Training-dynamics laboratory for deep linear, diagonal and ReLU networks.
//!
//! The crate simulates gradient descent, mini-batch SGD (with or without
//! replacement) and weight decay on datasets whose relevant and irrelevant
//! input directions are known, and compares the simulated trajectories with
//! closed-form predictions of how the first layer discards irrelevant inputs.
//!
//! Module map:
//!
//! - [`linalg`]: dense matrices, Jacobi eigensolver, top-eigenvalue estimation
//! - [`datagen`]: synthetic and toy datasets, relevance analysis, IDX loading
//! - [`models`]: network specs, forward/backward passes, checkpoints, gradient checks
//! - [`optim`]: batch schedules, update rule, step-size guard, training loop
//! - [`oracle`]: closed-form predictors used as ground truth
//! - [`instrument`]: trajectory metrics, phase and support detection, scaling fits
//! - [`runner`]: configs, sweeps, verification suites, CSV/JSON/SVG output

pub mod datagen;
pub mod error;
pub mod instrument;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod oracle;
pub mod runner;

pub use error::{Error, Result};
pub use linalg::Mat;
