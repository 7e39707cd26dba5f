//! A ReLU net where GD grows weights on an input the target ignores, and
//! weight decay that reverses it.

use support_lab::runner::suites::{relu_fixture, ReluParams};
use support_lab::optim::{eta_max, step};

fn main() -> support_lab::Result<()> {
    let (ds, init) = relu_fixture(&ReluParams::default())?;
    let eta = 0.25 * eta_max(&init, &ds, 0.0)?.value;
    for lambda in [0.0, 1e-2] {
        let mut net = init.clone();
        for _ in 0..100 {
            step(&mut net, &ds.x, &ds.y, &[0, 1], eta, lambda)?;
        }
        let before = init.weights[0].col(1);
        let after = net.weights[0].col(1);
        println!("lambda {lambda}:");
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            println!("  unit {i}: {b:.9} -> {a:.9}");
        }
    }
    Ok(())
}
