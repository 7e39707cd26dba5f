//! Largest stable step size 2/(λ_max + λ) from Hessian-vector products,
//! and what happens just below and above it.

use support_lab::datagen::{gen_synthetic, Target};
use support_lab::models::{Activation, InitScheme, NetworkSpec, NetworkState};
use support_lab::optim::{eta_max, run_training, OptimizerConfig, TrainOptions};

fn main() -> support_lab::Result<()> {
    let ds = gen_synthetic(10, 3, 200, Target::LinearSum, 0.01, 0)?;
    let net = NetworkState::init(&NetworkSpec::dense(vec![10, 16, 1], Activation::Identity)?, &InitScheme::KaimingNormal, 0)?;
    let em = eta_max(&net, &ds, 0.0)?;
    println!("lambda_max {:.4}, eta_max {:.4} (converged: {})", em.lambda_max, em.value, em.converged);
    for factor in [0.5, 0.95, 1.5, 3.0, 6.0] {
        let mut run = net.clone();
        let traj = run_training(&mut run, &ds, &OptimizerConfig::gd(factor * em.value, 300), TrainOptions { stride: 300, ..Default::default() })?;
        match (&traj.divergence, traj.records.last()) {
            (Some(d), _) => println!("{factor} x eta_max: diverged at step {} ({})", d.step, d.what),
            (None, Some(r)) => println!("{factor} x eta_max: loss {:.4e} after {} steps", r.loss, r.step),
            (None, None) => {}
        }
    }
    Ok(())
}
