//! Per-entry GD multipliers on the irrelevant block of a dense linear net,
//! compared with one simulated full-batch step.

use support_lab::datagen::{orthogonal_fixture, RelevanceDecomposition};
use support_lab::linalg::sym_eigen;
use support_lab::models::{Activation, InitScheme, NetworkSpec, NetworkState};
use support_lab::optim::step;
use support_lab::oracle::predict_gd_multiplier;

fn main() -> support_lab::Result<()> {
    // Columns: 2 relevant, 2 spanned irrelevant, 1 never excited.
    let ds = orthogonal_fixture(16, &[1.0, 1.5, 0.8, 1.8, 0.0], 2, 2, 7)?;
    let spec = NetworkSpec::dense(vec![5, 4, 3, 2], Activation::Identity)?;
    let mut net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 7)?;
    // Rotate the hidden basis so that W̃ᵀW̃ is diagonal; the per-entry
    // multipliers are exact in that basis.
    let v = sym_eigen(&net.downstream().t_matmul(&net.downstream())?)?.vectors;
    net.weights[0] = v.t_matmul(&net.weights[0])?;
    net.weights[1] = net.weights[1].matmul(&v)?;

    let dec = RelevanceDecomposition::from_ground_truth(&ds, &[0, 1], 1e-9)?;
    let eta = 0.05;
    let mut stepped = net.clone();
    step(&mut stepped, &ds.x, &ds.y, &(0..ds.n()).collect::<Vec<_>>(), eta, 0.0)?;
    println!("entry    predicted      simulated");
    for i in 0..net.weights[0].rows() {
        for j in 2..5 {
            let p = predict_gd_multiplier(&net, &dec, eta, (i, j))?;
            let sim = stepped.weights[0][(i, j)] / net.weights[0][(i, j)];
            println!("({i},{j})    {:.12}  {sim:.12}", p.gd_factor);
        }
    }
    Ok(())
}
