//! First-layer Gram matrix W_1ᵀW_1 after SGD on sparse-support data, with
//! its spectrum, as a heatmap and a histogram.

use std::path::Path;

use support_lab::instrument::gram_spectrum;
use support_lab::runner::{plot, run_experiment, ExperimentConfig, PlotKind, PlotOptions};

fn main() -> support_lab::Result<()> {
    let cfg = ExperimentConfig::from_toml_or_json(include_str!("configs/linear_sgd.toml"))?;
    let out = Path::new("gram");
    let run = run_experiment(&cfg, out)?;
    let w1 = run.network.dense_layer(0);
    let spec = gram_spectrum(&w1.transpose(), 10)?;
    let top: Vec<String> = spec.eigenvalues.iter().take(8).map(|v| format!("{v:.3e}")).collect();
    println!("leading eigenvalues: {}", top.join(" "));
    let inputs = [out.join("gram.csv"), out.join("eigen.csv")];
    for (kind, input) in [(PlotKind::GramHeatmap, &inputs[0]), (PlotKind::EigenHistogram, &inputs[1])] {
        for p in plot(std::slice::from_ref(input), kind, &PlotOptions::default(), out)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
