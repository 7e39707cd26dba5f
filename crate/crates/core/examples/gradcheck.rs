//! Backprop against central differences on dense and diagonal nets with
//! both activations.

use support_lab::runner::suites::{gradcheck_grid, GradcheckParams};

fn main() -> support_lab::Result<()> {
    for c in gradcheck_grid(&GradcheckParams::default())?.checks {
        println!("{:<40} {:.3e}  {}", c.name, c.value, c.detail);
    }
    Ok(())
}
