//! Save a trained network, reload it and continue training; the result is
//! bit-identical to an uninterrupted run.

use support_lab::datagen::gen_misspecified_diagonal;
use support_lab::models::{load_checkpoint, save_checkpoint};
use support_lab::models::{Activation, InitScheme, NetworkSpec, NetworkState};
use support_lab::optim::step;

fn main() -> support_lab::Result<()> {
    let ds = gen_misspecified_diagonal(3, 2, 20, 0.5, 0)?;
    let spec = NetworkSpec::diagonal(3, 3, Activation::Identity)?;
    let mut straight = NetworkState::init(&spec, &InitScheme::IidNormal { scale: 0.8 }, 1)?;
    let all: Vec<usize> = (0..ds.n()).collect();
    for _ in 0..50 {
        step(&mut straight, &ds.x, &ds.y, &all, 0.05, 0.0)?;
    }
    let path = std::env::temp_dir().join("suplab-checkpoint.json");
    save_checkpoint(&straight, &path)?;
    let mut resumed = load_checkpoint(&path)?;
    for _ in 0..50 {
        step(&mut straight, &ds.x, &ds.y, &all, 0.05, 0.0)?;
        step(&mut resumed, &ds.x, &ds.y, &all, 0.05, 0.0)?;
    }
    println!("identical after resume: {}", straight.params() == resumed.params());
    Ok(())
}
