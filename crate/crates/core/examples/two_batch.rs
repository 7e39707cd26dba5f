//! Two batches whose second moments differ by ±δ: averaged over both
//! orders, two SGD steps shrink the first-layer weight more than two GD
//! steps by about (η·a·δ)².

use rand::SeedableRng;
use support_lab::runner::suites::{random_two_batch, two_step_multipliers};

fn main() -> support_lab::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    println!("{:>8} {:>8} {:>12} {:>12}", "s", "delta", "measured", "predicted");
    for _ in 0..8 {
        let f = random_two_batch(&mut rng, false);
        let (gd, sgd) = two_step_multipliers(&f)?;
        println!("{:>8.4} {:>8.4} {:>12.4e} {:>12.4e}", f.s, f.delta, gd - sgd, f.predicted_excess());
    }
    Ok(())
}
