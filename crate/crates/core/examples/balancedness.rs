//! Balancedness gap W_2² − W_1² of a misspecified chain: SGD with one
//! sample per step removes it, full-batch GD keeps it.

use support_lab::datagen::gen_misspecified_diagonal;
use support_lab::instrument::BalancednessProbe;
use support_lab::linalg::Mat;
use support_lab::models::{Activation, NetworkSpec, NetworkState};
use support_lab::optim::{run_training, OptimizerConfig, Probe, TrainOptions};

fn main() -> support_lab::Result<()> {
    let ds = gen_misspecified_diagonal(2, 1, 50, 1.0, 0)?;
    let spec = NetworkSpec::diagonal(2, 2, Activation::Identity)?;
    let init = NetworkState::from_weights(spec, vec![Mat::new(1, 2, vec![0.5, 1.0])?, Mat::new(1, 2, vec![0.5, 0.5])?])?;
    for (name, cfg) in [("gd", OptimizerConfig::gd(0.05, 20_000)), ("sgd-b1", OptimizerConfig::sgd_without(0.05, 1, 20_000, 0))] {
        let mut net = init.clone();
        let probes: Vec<Box<dyn Probe>> = vec![Box::new(BalancednessProbe { component: 1, depth: 2 })];
        let traj = run_training(&mut net, &ds, &cfg, TrainOptions { stride: 4000, probes, ..Default::default() })?.into_result()?;
        let gaps: Vec<String> = traj.records.iter().map(|r| format!("{:.3e}", r.extras[0])).collect();
        println!("{name:>7}: G = {}", gaps.join(", "));
    }
    Ok(())
}
