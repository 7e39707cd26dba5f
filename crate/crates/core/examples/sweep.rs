//! Grid over (η, b) with replicate seeds, run in parallel. Writes one
//! directory per cell plus aggregate.csv and the log-log scaling fit.

use std::path::Path;

use support_lab::runner::config::parse_config;
use support_lab::runner::{run_sweep, SweepSpec};

fn main() -> support_lab::Result<()> {
    let spec: SweepSpec = parse_config(include_str!("configs/scaling_sweep.toml"), "scaling_sweep.toml")?;
    spec.validate()?;
    let out = run_sweep(&spec, Path::new("sweep"), 0)?;
    for c in &out.cells {
        let vals: Vec<String> = c.cell.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<40} median steps {:?}", vals.join(" "), c.median_threshold_step);
    }
    if let Some(fit) = &out.fit {
        println!("slope {:.3}, r2 {:.4}", fit.slope, fit.r2);
    }
    Ok(())
}
