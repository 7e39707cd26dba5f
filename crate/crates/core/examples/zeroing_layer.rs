//! Which layer of a depth-3 diagonal chain GD drives to zero, over random
//! initialisations. Each layer should take about a third of the chains.

use support_lab::runner::suites::{gd_zeroing_layer, ZeroingLayerParams};

fn main() -> support_lab::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let report = gd_zeroing_layer(&ZeroingLayerParams { seeds, ..Default::default() })?;
    for c in &report.checks {
        println!("{:<60} {:.4}  {}", c.name, c.value, c.detail);
    }
    Ok(())
}
