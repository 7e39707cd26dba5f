//! Two-parameter model f(x) = a·b·x on the two-point datasets.
//!
//! D2 shows the one-step SGD multipliers and the two-step GD/SGD gap; D1
//! shows GD stalling on the ab = 0 line while SGD with one sample per step
//! walks to the origin. The (a, b) paths are written to `toy/` and drawn
//! over the loss level sets.

use std::path::Path;

use support_lab::datagen::{toy_as_dataset, ToyData};
use support_lab::instrument::ChainProbe;
use support_lab::optim::{run_training, step, OptimizerConfig, TrainOptions};
use support_lab::oracle::toy_two_step_rates;
use support_lab::runner::csv_io::write_trajectory;
use support_lab::runner::suites::toy_net;
use support_lab::runner::{plot, PlotKind, PlotOptions};

fn main() -> support_lab::Result<()> {
    let d2 = toy_as_dataset(ToyData::D2);
    let (a, b, eta) = (1.0, 0.3, 0.01);
    for (row, x) in [(0, 1.0), (1, 3.0)] {
        let mut net = toy_net(a, b)?;
        step(&mut net, &d2.x, &d2.y, &[row], eta, 0.0)?;
        println!("D2 sample x={x}: b multiplier {:.6} (1 - eta a^2 x^2 = {:.6})", net.weights[0][(0, 0)] / b, 1.0 - eta * a * a * x * x);
    }
    let (gd, sgd) = toy_two_step_rates(1e-3, 1.0);
    println!("two-step rates at eta=1e-3: GD {gd:.10}, SGD {sgd:.10}");

    let out = Path::new("toy");
    let mut paths = Vec::new();
    for (name, cfg) in [
        ("gd", OptimizerConfig::gd(0.05, 5000)),
        ("sgd-b1", OptimizerConfig::sgd_without(0.05, 1, 5000, 0)),
    ] {
        let ds = toy_as_dataset(ToyData::D1);
        let mut net = toy_net(1.5, 0.5)?;
        let probes: Vec<Box<dyn support_lab::optim::Probe>> = vec![Box::new(ChainProbe { component: 0, depth: 2 })];
        let traj = run_training(&mut net, &ds, &cfg, TrainOptions { stride: 10, probes, ..Default::default() })?.into_result()?;
        println!("D1 {name}: (a, b) = ({:.4e}, {:.4e})", net.weights[1][(0, 0)], net.weights[0][(0, 0)]);
        std::fs::create_dir_all(out).map_err(|e| support_lab::Error::io(out, e))?;
        let p = out.join(format!("{name}.csv"));
        write_trajectory(&p, 2, &traj)?;
        paths.push(p);
    }
    for svg in plot(&paths, PlotKind::Landscape2d, &PlotOptions { toy: ToyData::D1, bins: 20 }, out)? {
        println!("wrote {}", svg.display());
    }
    Ok(())
}
