//! Steps for SGD noise to remove an irrelevant first-layer weight, across
//! step sizes and batch sizes, against the b/η² forecast.

use support_lab::instrument::scaling_fit;
use support_lab::oracle::convergence_forecast;
use support_lab::runner::suites::{scaling_grid, ScalingParams};

fn main() -> support_lab::Result<()> {
    let p = ScalingParams { etas: vec![0.05, 0.1], batches: vec![2, 5, 10], seeds: 5, ..Default::default() };
    let grid = scaling_grid(&p)?;
    println!("{:>6} {:>4} {:>10} {:>14}", "eta", "b", "median", "forecast/unit");
    for g in &grid {
        let f = convergence_forecast(g.batch_size, g.eta, p.sigma, 1.0, 1e-3, 1.0, 2);
        println!("{:>6} {:>4} {:>10.0} {:>14.1}", g.eta, g.batch_size, g.steps.unwrap_or(f64::NAN), f.steps);
    }
    let fit = scaling_fit(&grid)?;
    println!("log-log slope {:.3}, r2 {:.4}", fit.slope, fit.r2);
    Ok(())
}
