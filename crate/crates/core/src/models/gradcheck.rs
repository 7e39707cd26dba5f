//! Backprop versus central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::NetworkState;
use crate::error::Result;
use crate::linalg::Mat;

/// Denominator floor of the relative error. Below it the comparison is
/// effectively absolute, since finite differences of a loss of order one
/// carry roughly `ε_machine / h ≈ 1e-11` of rounding noise.
const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub checked: usize,
    /// Probes discarded because the perturbation flipped a ReLU mask.
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    /// Flat parameter index of the worst probe.
    pub worst_param: Option<usize>,
}

/// Compares backprop gradients with `(L(θ+h e_p) − L(θ−h e_p)) / 2h` on
/// `probes` randomly chosen parameters. Relative error is
/// `|g − fd| / max(|g|, |fd|, 1e-6)`.
pub fn gradcheck(net: &NetworkState, x: &Mat, y: &Mat, rows: &[usize], probes: usize, h: f64, seed: u64) -> Result<GradcheckReport> {
    let (grads, _) = net.backward_mse(x, y, rows)?;
    let g = grads.flatten();
    let theta = net.params();
    let base_masks = net.mask_signature(x, rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_net = net.clone();
    let mut report = GradcheckReport { checked: 0, skipped_kinks: 0, max_rel_err: 0.0, worst_param: None };
    let max_attempts = probes * 20 + 100;
    let mut attempts = 0;
    while report.checked < probes && attempts < max_attempts {
        attempts += 1;
        let p = rng.random_range(0..theta.len());
        let mut shifted = theta.clone();
        shifted[p] = theta[p] + h;
        probe_net.set_params(&shifted)?;
        let plus_masks = probe_net.mask_signature(x, rows);
        let plus = probe_net.loss(x, y, rows)?;
        shifted[p] = theta[p] - h;
        probe_net.set_params(&shifted)?;
        let minus_masks = probe_net.mask_signature(x, rows);
        let minus = probe_net.loss(x, y, rows)?;
        if plus_masks != base_masks || minus_masks != base_masks {
            report.skipped_kinks += 1;
            continue;
        }
        let fd = (plus - minus) / (2.0 * h);
        let err = (g[p] - fd).abs() / g[p].abs().max(fd.abs()).max(REL_FLOOR);
        report.checked += 1;
        if err > report.max_rel_err || report.worst_param.is_none() {
            report.max_rel_err = report.max_rel_err.max(err);
            report.worst_param = Some(p);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, InitScheme, NetworkSpec};
    use rand_distr::StandardNormal;

    #[test]
    fn dense_relu_three_layers_batch_of_eight() {
        let spec = NetworkSpec::dense(vec![5, 7, 6, 2], Activation::Relu).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::from_fn(8, 5, |_, _| rng.sample(StandardNormal));
        let y = Mat::from_fn(8, 2, |_, _| rng.sample(StandardNormal));
        let rows: Vec<usize> = (0..8).collect();
        let rep = gradcheck(&net, &x, &y, &rows, net.num_params(), 1e-5, 0).unwrap();
        assert_eq!(rep.checked, net.num_params());
        assert!(rep.max_rel_err < 1e-5, "{rep:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Sanity check of the checker itself: a loss evaluated on other
        // labels disagrees with the gradient.
        let spec = NetworkSpec::dense(vec![2, 3, 1], Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 1).unwrap();
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3]]).unwrap();
        let y = Mat::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let good = gradcheck(&net, &x, &y, &[0, 1], 9, 1e-5, 0).unwrap();
        assert!(good.max_rel_err < 1e-7);
        let (g_other, _) = net.backward_mse(&x, &Mat::from_rows(&[vec![5.0], vec![5.0]]).unwrap(), &[0, 1]).unwrap();
        let (g, _) = net.backward_mse(&x, &y, &[0, 1]).unwrap();
        assert_ne!(g_other, g);
    }
}
