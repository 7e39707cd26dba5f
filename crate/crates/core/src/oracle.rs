//! Closed-form predictions of the training dynamics, independent of the
//! simulator: per-entry shrink factors, the sufficient-statistic GD step,
//! two-step SGD cancellation, toy-model rates, balancedness contraction,
//! the residual-variance bound and convergence-time forecasts.

use serde::Serialize;

use crate::datagen::{Dataset, RelevanceDecomposition};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::models::{Activation, NetworkSpec, NetworkState, Topology};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkagePrediction {
    /// `(hidden unit i, input direction j)` of the first layer.
    pub entry: (usize, usize),
    /// `(W̃ᵀW̃)[i,i]` with `W̃ = W_L ⋯ W_2`.
    pub a: f64,
    /// `E[x_j²]` in the working basis.
    pub second_moment: f64,
    /// `1 − η·a·E[x_j²]`
    pub gd_factor: f64,
    /// Extra per-step shrink of SGD over GD. Not predicted in closed form;
    /// filled in only from a measurement.
    pub sgd_extra: Option<f64>,
}

fn require_linear(spec: &NetworkSpec) -> Result<()> {
    if spec.activation != Activation::Identity {
        return Err(Error::Unsupported("closed-form shrink factors hold for linear networks only".into()));
    }
    Ok(())
}

/// Predicted full-batch GD multiplier of one irrelevant first-layer weight,
/// read in the decomposition's basis (`W_1·B`). Exact when the data
/// satisfy the block structure exactly and `W̃ᵀW̃` is diagonal; otherwise
/// the true update mixes in neighbouring entries.
pub fn predict_gd_multiplier(
    net: &NetworkState,
    dec: &RelevanceDecomposition,
    eta: f64,
    entry: (usize, usize),
) -> Result<ShrinkagePrediction> {
    require_linear(&net.spec)?;
    let (i, j) = entry;
    let hidden = net.dense_layer(0).rows();
    if i >= hidden || j >= dec.d() {
        return Err(Error::Index(format!("entry ({i}, {j}) out of range for {hidden}x{}", dec.d())));
    }
    let w_tilde = net.downstream();
    let a: f64 = (0..w_tilde.rows()).map(|o| w_tilde[(o, i)] * w_tilde[(o, i)]).sum();
    let second_moment = dec.lambda_xx[(j, j)];
    Ok(ShrinkagePrediction { entry, a, second_moment, gd_factor: 1.0 - eta * a * second_moment, sgd_extra: None })
}

/// Full-batch GD change of the first layer's columns `r..d` computed from
/// data moments alone:
///
/// `ΔW_1[:,J] = −η·[A·(W_1[:,J]·Λ_xx[J,J] + W_1[:,R]·Λ_xx[R,J]) − W̃ᵀ·Λ_yx[:,J]]`
///
/// with `A = W̃ᵀW̃`, `R = 0..r`, `J = r..d`, all in the basis the moments
/// are expressed in. The last term vanishes when `J` is irrelevant.
pub fn sufficient_stat_gd_step(net: &NetworkState, lambda_xx: &Mat, lambda_yx: &Mat, eta: f64, r: usize) -> Result<Mat> {
    require_linear(&net.spec)?;
    let w1 = net.dense_layer(0);
    let d = w1.cols();
    if lambda_xx.shape() != (d, d) || lambda_yx.cols() != d || r > d {
        return Err(Error::Shape(format!(
            "moments {:?} / {:?} do not match a first layer with {d} inputs (r={r})",
            lambda_xx.shape(),
            lambda_yx.shape()
        )));
    }
    let w_tilde = net.downstream();
    if lambda_yx.rows() != w_tilde.rows() {
        return Err(Error::Shape(format!("label moment has {} rows, network outputs {}", lambda_yx.rows(), w_tilde.rows())));
    }
    let rel: Vec<usize> = (0..r).collect();
    let irr: Vec<usize> = (r..d).collect();
    let a = w_tilde.t_matmul(&w_tilde)?;
    let lxx_jj = lambda_xx.select_rows(&irr)?.select_cols(&irr)?;
    let lxx_rj = lambda_xx.select_rows(&rel)?.select_cols(&irr)?;
    let own = w1.select_cols(&irr)?.matmul(&lxx_jj)?;
    let cross = w1.select_cols(&rel)?.matmul(&lxx_rj)?;
    let label = w_tilde.t_matmul(&lambda_yx.select_cols(&irr)?)?;
    let grad = a.matmul(&own.add(&cross)?)?.sub(&label)?;
    Ok(grad.scale(-eta))
}

/// `((1−α+δ)(1−α−δ), (1−α)²)`: two steps whose curvatures oscillate by
/// `±δ` around their mean shrink more than two steps at the mean.
pub fn two_step_cancellation(alpha: f64, delta: f64) -> (f64, f64) {
    ((1.0 - alpha + delta) * (1.0 - alpha - delta), (1.0 - alpha) * (1.0 - alpha))
}

/// Two-step multipliers of the toy weight `b` on `{(1,0),(3,0)}` with the
/// other weight frozen at `a`: GD uses `E[x²] = 5` twice, single-sample
/// SGD uses `1` then `9`. Returns `(gd, sgd)`.
pub fn toy_two_step_rates(eta: f64, a: f64) -> (f64, f64) {
    let a2 = a * a;
    let gd = (1.0 - 5.0 * eta * a2).powi(2);
    let sgd = (1.0 - eta * a2) * (1.0 - 9.0 * eta * a2);
    (gd, sgd)
}

/// `R/b` with `R = E[y²x²] − E[yx]²` for scalar data.
///
/// This lower-bounds the variance of the batch residual correlation
/// `ε_B = E_B[(θx − y)x]` under with-replacement sampling for every `θ`
/// only when `x²` and `yx` are uncorrelated (e.g. labels that come in
/// `±` pairs on the same input); see [`min_batch_residual_variance`] for
/// the exact minimum.
pub fn residual_variance_bound(x: &[f64], y: &[f64], b: usize) -> f64 {
    let n = x.len() as f64;
    let eyx = x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>() / n;
    let ey2x2 = x.iter().zip(y).map(|(a, c)| a * a * c * c).sum::<f64>() / n;
    (ey2x2 - eyx * eyx) / b as f64
}

/// Variance of `ε_B` over batches of `b` rows drawn with replacement, for a
/// fixed scalar model `θ`: `Var_i[(θx_i − y_i)x_i] / b`.
pub fn batch_residual_variance(x: &[f64], y: &[f64], theta: f64, b: usize) -> f64 {
    let n = x.len() as f64;
    let z: Vec<f64> = x.iter().zip(y).map(|(a, c)| (theta * a - c) * a).collect();
    let mean = z.iter().sum::<f64>() / n;
    z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n / b as f64
}

/// `min_θ` of [`batch_residual_variance`]:
/// `(Var(yx) − Cov(x², yx)² / Var(x²)) / b`.
pub fn min_batch_residual_variance(x: &[f64], y: &[f64], b: usize) -> f64 {
    let n = x.len() as f64;
    let p: Vec<f64> = x.iter().map(|a| a * a).collect();
    let q: Vec<f64> = x.iter().zip(y).map(|(a, c)| a * c).collect();
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let vp = p.iter().map(|v| (v - mp).powi(2)).sum::<f64>() / n;
    let vq = q.iter().map(|v| (v - mq).powi(2)).sum::<f64>() / n;
    let cov = p.iter().zip(&q).map(|(a, c)| (a - mp) * (c - mq)).sum::<f64>() / n;
    let explained = if vp > 0.0 { cov * cov / vp } else { 0.0 };
    (vq - explained).max(0.0) / b as f64
}

/// Balancedness values of one diagonal chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalancednessState {
    pub component: usize,
    pub level: usize,
    pub values: Vec<f64>,
}

fn require_diagonal_linear(net: &NetworkState) -> Result<()> {
    if net.spec.topology != Topology::Diagonal || net.spec.activation != Activation::Identity {
        return Err(Error::Unsupported("balancedness is tracked on diagonal linear networks".into()));
    }
    Ok(())
}

/// Adjacent-pair gaps `G_i = W_{i+1}[j,j]² − W_i[j,j]²`, `i = 1..L−1`.
pub fn balancedness_gaps(net: &NetworkState, component: usize) -> Result<BalancednessState> {
    require_diagonal_linear(net)?;
    let chain = net.chain(component);
    Ok(BalancednessState { component, level: 2, values: chain.windows(2).map(|w| w[1] * w[1] - w[0] * w[0]).collect() })
}

/// Per-pair multipliers of the gaps under one update with step `eta` and
/// decay `lambda` on `batch`:
///
/// `G_i ← ((1−ηλ)² − η²·Q_i²·e²)·G_i`, `Q_i = ∏_{h∉{i,i+1}} W_h[j,j]`,
/// `e = P·E_B[x_j²] − E_B[y_j x_j]`, `P = ∏_h W_h[j,j]`.
pub fn balancedness_multipliers(
    net: &NetworkState,
    ds: &Dataset,
    batch: &[usize],
    eta: f64,
    lambda: f64,
    component: usize,
) -> Result<Vec<f64>> {
    require_diagonal_linear(net)?;
    if batch.is_empty() {
        return Err(Error::Param("empty batch".into()));
    }
    let j = component;
    let chain = net.chain(j);
    let p: f64 = chain.iter().product();
    let nb = batch.len() as f64;
    let exx = batch.iter().map(|&r| ds.x[(r, j)] * ds.x[(r, j)]).sum::<f64>() / nb;
    let eyx = batch.iter().map(|&r| ds.y[(r, j)] * ds.x[(r, j)]).sum::<f64>() / nb;
    let e = p * exx - eyx;
    let decay = 1.0 - eta * lambda;
    Ok((0..chain.len().saturating_sub(1))
        .map(|i| {
            let q: f64 = chain.iter().enumerate().filter(|(h, _)| *h != i && *h != i + 1).map(|(_, w)| w).product();
            decay * decay - eta * eta * q * q * e * e
        })
        .collect())
}

/// Predicted adjacent-pair gaps after one update on `batch`.
pub fn balancedness_update(
    state: &BalancednessState,
    net: &NetworkState,
    ds: &Dataset,
    batch: &[usize],
    eta: f64,
) -> Result<BalancednessState> {
    let mult = balancedness_multipliers(net, ds, batch, eta, 0.0, state.component)?;
    if mult.len() != state.values.len() {
        return Err(Error::Shape(format!("{} gaps for a chain with {} pairs", state.values.len(), mult.len())));
    }
    Ok(BalancednessState {
        component: state.component,
        level: state.level,
        values: state.values.iter().zip(&mult).map(|(g, m)| g * m).collect(),
    })
}

/// Hierarchy of a chain sorted by magnitude `|θ_1| ≤ … ≤ |θ_L|`:
/// `G_i^1 = θ_i`, `G_i^2 = θ_i² − θ_1²`,
/// `G_i^j = (G_i^{j−1})² − (G_{j−1}^{j−1})²`. Level `j` is at index `j−1`.
pub fn balancedness_hierarchy(chain: &[f64], component: usize) -> Vec<BalancednessState> {
    let mut theta = chain.to_vec();
    theta.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut levels = Vec::with_capacity(theta.len());
    if theta.is_empty() {
        return levels;
    }
    levels.push(BalancednessState { component, level: 1, values: theta.clone() });
    let first = theta[0] * theta[0];
    levels.push(BalancednessState { component, level: 2, values: theta.iter().map(|t| t * t - first).collect() });
    for j in 3..=theta.len() {
        let prev = &levels[j - 2].values;
        let pivot = prev[j - 2] * prev[j - 2];
        let values = prev.iter().map(|g| g * g - pivot).collect();
        levels.push(BalancednessState { component, level: j, values });
    }
    levels.truncate(theta.len().max(2));
    levels
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceForecast {
    /// Formula value with unit constant; meaningful only as a ratio between
    /// configurations.
    pub steps: f64,
    pub batch_size: f64,
    pub eta: f64,
    pub misspec: f64,
    pub g0_norm: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub level: usize,
}

/// Forecast number of steps for level `level` of a chain to fall below
/// threshold.
///
/// With `c = R_j/√b`, level 2 uses `(b/(η²R_j²))·(ln‖G_0‖ − ln δ2 − ln δ1)`;
/// any other level `j` uses
/// `(2^{j−1}·ln θ_j(0) − 2^j·ln δ1 − ln δ2) / (η·c)^{2^{j−1}}` with
/// `θ_j(0) = g0_norm`. Log terms are clamped at zero.
pub fn convergence_forecast(
    batch_size: f64,
    eta: f64,
    misspec: f64,
    g0_norm: f64,
    delta1: f64,
    delta2: f64,
    level: usize,
) -> ConvergenceForecast {
    let c = misspec / batch_size.sqrt();
    let steps = if level == 2 {
        let log_term = (g0_norm.ln() - delta2.ln() - delta1.ln()).max(0.0);
        batch_size / (eta * eta * misspec * misspec) * log_term
    } else {
        let k = 2f64.powi(level.max(1) as i32 - 1);
        let log_term = (k * g0_norm.ln() - 2.0 * k * delta1.ln() - delta2.ln()).max(0.0);
        log_term / (eta * c).powf(k)
    };
    ConvergenceForecast { steps, batch_size, eta, misspec, g0_norm, delta1, delta2, level }
}

/// Two equal batches of identical inputs whose second moments are
/// `s − δ` and `s + δ`, zero labels, and a depth-2 diagonal chain
/// `(w1, w2)` with `w1` the first-layer (irrelevant) weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoBatchFixture {
    pub s: f64,
    pub delta: f64,
    pub batch: usize,
    pub w1: f64,
    pub w2: f64,
    pub eta: f64,
}

impl TwoBatchFixture {
    pub fn dataset(&self) -> Dataset {
        let lo = (self.s - self.delta).sqrt();
        let hi = (self.s + self.delta).sqrt();
        let n = 2 * self.batch;
        let x = Mat::from_fn(n, 1, |r, _| if r < self.batch { lo } else { hi });
        Dataset::new(x, Mat::zeros(n, 1), Some(vec![]), "two-batch").expect("well formed")
    }

    pub fn network(&self) -> NetworkState {
        let spec = NetworkSpec::diagonal(2, 1, Activation::Identity).expect("valid");
        let w = |v: f64| Mat::new(1, 1, vec![v]).expect("finite");
        NetworkState::from_weights(spec, vec![w(self.w1), w(self.w2)]).expect("shapes match")
    }

    /// `a = W̃ᵀW̃ = w2²`
    pub fn a(&self) -> f64 {
        self.w2 * self.w2
    }

    /// Leading-order excess two-step shrink of SGD over GD, `(η·a·δ)²`.
    pub fn predicted_excess(&self) -> f64 {
        let (sgd, gd) = two_step_cancellation(self.eta * self.a() * self.s, self.eta * self.a() * self.delta);
        gd - sgd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{orthogonal_fixture, toy_as_dataset, ToyData};
    use crate::models::InitScheme;
    use crate::optim::step;

    #[test]
    fn toy_gd_factor() {
        let ds = toy_as_dataset(ToyData::D2);
        let spec = NetworkSpec::diagonal(2, 1, Activation::Identity).unwrap();
        let (a, b, eta) = (0.9, 0.3, 0.01);
        let net = NetworkState::from_weights(spec, vec![Mat::new(1, 1, vec![b]).unwrap(), Mat::new(1, 1, vec![a]).unwrap()]).unwrap();
        let dec = RelevanceDecomposition::from_ground_truth(&ds, &[], 1e-9).unwrap();
        let p = predict_gd_multiplier(&net, &dec, eta, (0, 0)).unwrap();
        assert_eq!(p.second_moment, 5.0);
        assert!((p.gd_factor - (1.0 - 5.0 * eta * a * a)).abs() < 1e-16);
    }

    #[test]
    fn unspanned_factor_is_one() {
        let ds = orthogonal_fixture(12, &[1.0, 2.0, 0.0], 1, 1, 3).unwrap();
        let spec = NetworkSpec::dense(vec![3, 2, 1], Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 0).unwrap();
        let dec = RelevanceDecomposition::from_ground_truth(&ds, &[0], 1e-9).unwrap();
        assert_eq!(predict_gd_multiplier(&net, &dec, 0.1, (1, 2)).unwrap().gd_factor, 1.0);
    }

    #[test]
    fn relu_is_rejected() {
        let ds = orthogonal_fixture(12, &[1.0, 2.0], 1, 1, 3).unwrap();
        let spec = NetworkSpec::dense(vec![2, 2, 1], Activation::Relu).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 0).unwrap();
        let dec = RelevanceDecomposition::from_ground_truth(&ds, &[0], 1e-9).unwrap();
        assert!(matches!(predict_gd_multiplier(&net, &dec, 0.1, (0, 1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sufficient_statistics_match_backprop() {
        // Arbitrary data: the formula holds without any block structure.
        let x = Mat::from_fn(9, 4, |r, c| ((r * 5 + c * 3) % 7) as f64 * 0.3 - 0.8);
        let y = Mat::from_fn(9, 2, |r, c| ((r + 4 * c) % 5) as f64 * 0.2 - 0.3);
        let ds = Dataset::new(x, y, Some(vec![0, 1]), "any").unwrap();
        let spec = NetworkSpec::dense(vec![4, 3, 5, 2], Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 8).unwrap();
        let eta = 0.03;
        let pred = sufficient_stat_gd_step(&net, &ds.second_moment(), &ds.cross_moment(), eta, 2).unwrap();
        let mut stepped = net.clone();
        step(&mut stepped, &ds.x, &ds.y, &(0..9).collect::<Vec<_>>(), eta, 0.0).unwrap();
        let actual = stepped.weights[0].sub(&net.weights[0]).unwrap().select_cols(&[2, 3]).unwrap();
        assert!(pred.sub(&actual).unwrap().frobenius_norm() <= 1e-10 * actual.frobenius_norm());
    }

    #[test]
    fn zero_cross_block_and_zero_downstream() {
        let ds = orthogonal_fixture(20, &[1.0, 0.5, 2.0, 0.7], 2, 1, 9).unwrap();
        let spec = NetworkSpec::dense(vec![4, 3, 1], Activation::Identity).unwrap();
        let mut net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 1).unwrap();
        let mut lxx = ds.second_moment();
        for a in 0..2 {
            for b in 2..4 {
                lxx[(a, b)] = 0.0;
                lxx[(b, a)] = 0.0;
            }
        }
        let with = sufficient_stat_gd_step(&net, &lxx, &ds.cross_moment(), 0.1, 2).unwrap();
        let mut no_rel = net.clone();
        for r in 0..3 {
            no_rel.weights[0][(r, 0)] = 0.0;
            no_rel.weights[0][(r, 1)] = 0.0;
        }
        let without = sufficient_stat_gd_step(&no_rel, &lxx, &ds.cross_moment(), 0.1, 2).unwrap();
        assert!(with.sub(&without).unwrap().max_abs() < 1e-15);

        net.weights[1] = Mat::zeros(1, 3);
        let delta = sufficient_stat_gd_step(&net, &lxx, &ds.cross_moment(), 0.1, 2).unwrap();
        assert!(delta.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_step_identity() {
        let (sgd, gd) = two_step_cancellation(0.1, 0.05);
        assert!((sgd - 0.8075).abs() < 1e-15 && (gd - 0.81).abs() < 1e-15);
        let (sgd, gd) = two_step_cancellation(0.3, 0.0);
        assert_eq!(sgd, gd);
    }

    #[test]
    fn toy_rates() {
        let (gd, sgd) = toy_two_step_rates(0.01, 1.0);
        assert!((gd - 0.9025).abs() < 1e-15);
        assert!((sgd - 0.9009).abs() < 1e-15);
        assert_eq!(toy_two_step_rates(0.0, 1.3), (1.0, 1.0));
    }

    #[test]
    fn residual_variance_with_paired_labels() {
        let x = [1.0, 1.0];
        let y = [1.0, -1.0];
        assert_eq!(residual_variance_bound(&x, &y, 1), 1.0);
        for k in -20..=20 {
            let theta = k as f64 * 0.25;
            assert!((batch_residual_variance(&x, &y, theta, 1) - 1.0).abs() < 1e-15);
        }
        assert_eq!(residual_variance_bound(&x, &[0.0, 0.0], 3), 0.0);
    }

    #[test]
    fn residual_variance_matches_batch_enumeration() {
        // Every ordered with-replacement batch of size 2 over 3 points.
        let x = [0.5, -1.0, 2.0];
        let y = [1.0, 0.3, -0.7];
        let theta = 0.4;
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, c)| (theta * a - c) * a).collect();
        let mut eps = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                eps.push(0.5 * (z[i] + z[j]));
            }
        }
        let m = eps.iter().sum::<f64>() / 9.0;
        let var = eps.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / 9.0;
        assert!((var - batch_residual_variance(&x, &y, theta, 2)).abs() < 1e-14);
    }

    #[test]
    fn full_batch_without_replacement_has_no_variance() {
        // Sampling all n points without replacement always gives the same batch.
        let x = [0.5, -1.0, 2.0];
        let y = [1.0, 0.3, -0.7];
        let theta = 0.4;
        let full = x.iter().zip(&y).map(|(a, c)| (theta * a - c) * a).sum::<f64>() / 3.0;
        let mut perms = vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let vals: Vec<f64> = perms.drain(..).map(|p| p.iter().map(|&i| (theta * x[i] - y[i]) * x[i]).sum::<f64>() / 3.0).collect();
        assert!(vals.iter().all(|v| (v - full).abs() < 1e-15));
        assert!(residual_variance_bound(&x, &y, 3) > 0.0);
    }

    #[test]
    fn bound_fails_without_symmetry() {
        // x ∈ {1, 2}, y = x: the label is perfectly fit by θ = 1, so the
        // batch residual never fluctuates, yet R > 0.
        let x = [1.0, 2.0];
        let y = [1.0, 2.0];
        assert!(residual_variance_bound(&x, &y, 1) > 0.5);
        assert!(batch_residual_variance(&x, &y, 1.0, 1) < 1e-15);
        assert!(min_batch_residual_variance(&x, &y, 1) < 1e-15);
    }

    fn diag_chain(chain: &[f64]) -> NetworkState {
        let spec = NetworkSpec::diagonal(chain.len(), 1, Activation::Identity).unwrap();
        NetworkState::from_weights(spec, chain.iter().map(|&v| Mat::new(1, 1, vec![v]).unwrap()).collect()).unwrap()
    }

    #[test]
    fn balanced_chain_stays_balanced() {
        let net = diag_chain(&[0.7, 0.7, 0.7]);
        let ds = Dataset::new(Mat::from_fn(4, 1, |r, _| r as f64 - 1.5), Mat::from_fn(4, 1, |r, _| r as f64), None, "x").unwrap();
        let g = balancedness_gaps(&net, 0).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0]);
        let next = balancedness_update(&g, &net, &ds, &[0, 1], 0.1).unwrap();
        assert_eq!(next.values, vec![0.0, 0.0]);
        let mut stepped = net.clone();
        step(&mut stepped, &ds.x, &ds.y, &[0, 1], 0.1, 0.0).unwrap();
        assert_eq!(balancedness_gaps(&stepped, 0).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_residual_keeps_gaps() {
        let net = diag_chain(&[0.5, 2.0]);
        // y = 1.0·x is fit exactly by the product 0.5·2.0.
        let ds = Dataset::new(Mat::from_fn(3, 1, |r, _| r as f64 + 1.0), Mat::from_fn(3, 1, |r, _| r as f64 + 1.0), None, "x").unwrap();
        assert_eq!(balancedness_multipliers(&net, &ds, &[0, 2], 0.3, 0.0, 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn gap_update_matches_one_step() {
        let spec = NetworkSpec::diagonal(2, 3, Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::IidNormal { scale: 1.0 }, 4).unwrap();
        let x = Mat::from_fn(6, 3, |r, c| ((r * 3 + c) % 5) as f64 * 0.4 - 0.7);
        let y = Mat::from_fn(6, 3, |r, c| ((r + c) % 3) as f64 - 1.0);
        let ds = Dataset::new(x, y, None, "x").unwrap();
        let eta = 1e-3;
        let batch = [1, 4];
        for j in 0..3 {
            let g = balancedness_gaps(&net, j).unwrap();
            let pred = balancedness_update(&g, &net, &ds, &batch, eta).unwrap();
            let mut stepped = net.clone();
            step(&mut stepped, &ds.x, &ds.y, &batch, eta, 0.0).unwrap();
            let sim = balancedness_gaps(&stepped, j).unwrap();
            assert!((pred.values[0] - sim.values[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn gap_update_with_decay_and_depth() {
        let net = diag_chain(&[0.3, -0.8, 1.1, 0.6]);
        let ds = Dataset::new(Mat::from_fn(3, 1, |r, _| [0.5, 1.5, -1.0][r]), Mat::from_fn(3, 1, |r, _| [1.0, -0.2, 0.4][r]), None, "x").unwrap();
        let (eta, lambda) = (0.05, 0.2);
        let mult = balancedness_multipliers(&net, &ds, &[0, 1, 2], eta, lambda, 0).unwrap();
        let g = balancedness_gaps(&net, 0).unwrap();
        let mut stepped = net.clone();
        step(&mut stepped, &ds.x, &ds.y, &[0, 1, 2], eta, lambda).unwrap();
        let sim = balancedness_gaps(&stepped, 0).unwrap();
        for i in 0..3 {
            assert!((g.values[i] * mult[i] - sim.values[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn hierarchy_levels() {
        let h = balancedness_hierarchy(&[0.9, -0.2, 0.5], 0);
        assert_eq!(h[0].values, vec![-0.2, 0.5, 0.9]);
        let l2: Vec<f64> = [0.04, 0.25, 0.81].iter().map(|v| v - 0.04).collect();
        for (a, b) in h[1].values.iter().zip(&l2) {
            assert!((a - b).abs() < 1e-15);
        }
        let pivot = l2[1] * l2[1];
        for (a, b) in h[2].values.iter().zip(l2.iter().map(|g| g * g - pivot)) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(h[2].values[1], 0.0);
    }

    #[test]
    fn forecast_scalings() {
        let base = convergence_forecast(5.0, 0.1, 1.0, 1.0, 0.1, 0.1, 2);
        let double_b = convergence_forecast(10.0, 0.1, 1.0, 1.0, 0.1, 0.1, 2);
        assert!((double_b.steps / base.steps - 2.0).abs() < 1e-12);
        let half_eta = convergence_forecast(5.0, 0.05, 1.0, 1.0, 0.1, 0.1, 2);
        assert!((half_eta.steps / base.steps - 4.0).abs() < 1e-12);
        // η·c = 0.1 with c = R/√b: b = 1, R = 1, η = 0.1.
        let l2 = convergence_forecast(1.0, 0.1, 1.0, 1.0, 0.1, 0.1, 2);
        let l3 = convergence_forecast(1.0, 0.1, 1.0, 1.0, 0.1, 0.1, 3);
        let rate_ratio = (0.1f64).powi(2) / (0.1f64).powi(4);
        let log2 = 1f64.ln() - 2.0 * 0.1f64.ln();
        let log3 = 4.0 * 1f64.ln() - 8.0 * 0.1f64.ln() - 0.1f64.ln();
        assert!((l3.steps / l2.steps - rate_ratio * log3 / log2).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn forecast_monotone(b in 1.0f64..100.0, eta in 1e-3f64..0.5, r in 0.1f64..5.0, level in 2usize..5) {
                let f = |b: f64, eta: f64, r: f64| convergence_forecast(b, eta, r, 2.0, 0.05, 0.05, level).steps;
                let t = f(b, eta, r);
                prop_assert!(f(b * 1.5, eta, r) > t);
                prop_assert!(f(b, eta * 1.5, r) < t);
                prop_assert!(f(b, eta, r * 1.5) < t);
            }

            #[test]
            fn sgd_product_never_exceeds_gd(alpha in -1.0f64..1.0, delta in -1.0f64..1.0) {
                let (sgd, gd) = two_step_cancellation(alpha, delta);
                prop_assert!(sgd <= gd);
            }

            #[test]
            fn bound_holds_for_sign_symmetric_labels(
                xs in proptest::collection::vec(-3.0f64..3.0, 1..12),
                ys in proptest::collection::vec(-3.0f64..3.0, 12),
                theta in -5.0f64..5.0,
                b in 1usize..6,
            ) {
                let mut x = xs.clone();
                x.extend_from_slice(&xs);
                let mut y: Vec<f64> = ys[..xs.len()].to_vec();
                y.extend(ys[..xs.len()].iter().map(|v| -v));
                let bound = residual_variance_bound(&x, &y, b);
                prop_assert!(batch_residual_variance(&x, &y, theta, b) >= bound - 1e-12 * (1.0 + bound.abs()));
            }
        }
    }
}
