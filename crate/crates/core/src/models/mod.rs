//! Bias-free fully connected networks: dense or diagonal layers, identity or
//! ReLU hidden activations, squared-error loss.

mod checkpoint;
mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradcheck, GradcheckReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Dense,
    /// Every layer is a diagonal `d×d` matrix, so each input coordinate
    /// flows through its own scalar chain.
    Diagonal,
}

/// Architecture: `widths = [d, h_1, …, h_{L−1}, k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub topology: Topology,
}

impl NetworkSpec {
    pub fn dense(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let s = Self { widths, activation, topology: Topology::Dense };
        s.validate()?;
        Ok(s)
    }

    pub fn diagonal(depth: usize, d: usize, activation: Activation) -> Result<Self> {
        let s = Self { widths: vec![d; depth + 1], activation, topology: Topology::Diagonal };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Param("network needs at least one layer".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Param(format!("zero layer width in {:?}", self.widths)));
        }
        if self.topology == Topology::Diagonal && self.widths.iter().any(|&w| w != self.widths[0]) {
            return Err(Error::Param(format!("diagonal network needs equal widths, got {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Stored shape of layer `l` (0-based). Diagonal layers are `1×d`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        match self.topology {
            Topology::Dense => (self.widths[l + 1], self.widths[l]),
            Topology::Diagonal => (1, self.widths[0]),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.activation == Activation::Identity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum InitScheme {
    /// `N(0, 2/fan_in)`
    KaimingNormal,
    /// `U(−√(6/fan_in), √(6/fan_in))`
    KaimingUniform,
    /// `N(0, scale²)` for every entry.
    IidNormal { scale: f64 },
    /// Weights copied verbatim, in stored layout.
    Explicit { weights: Vec<Mat> },
}

/// Spec plus layer weights `W_1 … W_L` (index 0 is the first layer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    pub weights: Vec<Mat>,
}

/// Per-hidden-layer 0/1 indicators of active units for one input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationMasks {
    pub layers: Vec<Vec<u8>>,
}

/// Per-layer gradients in stored layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Mat>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|g| g.data().iter().copied()).collect()
    }
}

impl NetworkState {
    pub fn init(spec: &NetworkSpec, scheme: &InitScheme, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = |l: usize| match spec.topology {
            Topology::Dense => spec.widths[l] as f64,
            Topology::Diagonal => 1.0,
        };
        let weights = match scheme {
            InitScheme::KaimingNormal => (0..spec.depth())
                .map(|l| {
                    let (r, c) = spec.layer_shape(l);
                    let sd = (2.0 / fan_in(l)).sqrt();
                    Mat::from_fn(r, c, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
                })
                .collect(),
            InitScheme::KaimingUniform => (0..spec.depth())
                .map(|l| {
                    let (r, c) = spec.layer_shape(l);
                    let bound = (6.0 / fan_in(l)).sqrt();
                    Mat::from_fn(r, c, |_, _| rng.random_range(-bound..bound))
                })
                .collect(),
            InitScheme::IidNormal { scale } => {
                if !scale.is_finite() {
                    return Err(Error::Param(format!("init scale must be finite, got {scale}")));
                }
                (0..spec.depth())
                    .map(|l| {
                        let (r, c) = spec.layer_shape(l);
                        Mat::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
                    })
                    .collect()
            }
            InitScheme::Explicit { weights } => weights.clone(),
        };
        Self::from_weights(spec.clone(), weights)
    }

    pub fn from_weights(spec: NetworkSpec, weights: Vec<Mat>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.depth() {
            return Err(Error::Shape(format!("{} weight matrices for a depth-{} network", weights.len(), spec.depth())));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.shape() != spec.layer_shape(l) {
                return Err(Error::Shape(format!(
                    "layer {} has shape {:?}, expected {:?}",
                    l + 1,
                    w.shape(),
                    spec.layer_shape(l)
                )));
            }
        }
        Ok(Self { spec, weights })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|w| w.data().iter().copied()).collect()
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Shape(format!("{} parameters, expected {}", theta.len(), self.num_params())));
        }
        let mut off = 0;
        for w in &mut self.weights {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&theta[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn params_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Layer `l` (0-based) as a full matrix, expanding diagonals.
    pub fn dense_layer(&self, l: usize) -> Mat {
        match self.spec.topology {
            Topology::Dense => self.weights[l].clone(),
            Topology::Diagonal => Mat::diag(self.weights[l].data()),
        }
    }

    /// Product `W_hi ⋯ W_lo` over 0-based layers `lo..=hi`, ignoring
    /// activations. Returns the identity of the matching size when empty.
    pub fn linear_product(&self, lo: usize, hi: usize) -> Mat {
        let mut acc = Mat::identity(self.spec.widths[lo]);
        for l in lo..=hi {
            acc = self.dense_layer(l).matmul(&acc).expect("adjacent layers compose");
        }
        acc
    }

    /// `W_L ⋯ W_2`, the map downstream of the first layer.
    pub fn downstream(&self) -> Mat {
        if self.depth() == 1 {
            return Mat::identity(self.spec.output_dim());
        }
        let mut acc = self.dense_layer(1);
        for l in 2..self.depth() {
            acc = self.dense_layer(l).matmul(&acc).expect("adjacent layers compose");
        }
        acc
    }

    /// Weights `(W_1[j,j], …, W_L[j,j])` of component `j` of a diagonal net.
    pub fn chain(&self, j: usize) -> Vec<f64> {
        debug_assert_eq!(self.spec.topology, Topology::Diagonal);
        self.weights.iter().map(|w| w[(0, j)]).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationMasks)> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::Shape(format!("input of length {}, expected {}", x.len(), self.spec.input_dim())));
        }
        let mut ws = Workspace::new(&self.spec);
        self.forward_into(x, &mut ws);
        let out = ws.acts[self.depth()].clone();
        let layers = ws.masks[..self.depth() - 1].to_vec();
        Ok((out, ActivationMasks { layers }))
    }

    fn forward_into(&self, x: &[f64], ws: &mut Workspace) {
        let depth = self.depth();
        ws.acts[0].copy_from_slice(x);
        for l in 0..depth {
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            match self.spec.topology {
                Topology::Dense => {
                    let w = &self.weights[l];
                    for (o, row) in out.iter_mut().zip(w.data().chunks_exact(w.cols())) {
                        *o = row.iter().zip(input.iter()).map(|(a, b)| a * b).sum();
                    }
                }
                Topology::Diagonal => {
                    for ((o, a), b) in out.iter_mut().zip(self.weights[l].data()).zip(input.iter()) {
                        *o = a * b;
                    }
                }
            }
            if l + 1 < depth {
                let mask = &mut ws.masks[l];
                match self.spec.activation {
                    Activation::Identity => mask.fill(1),
                    Activation::Relu => {
                        for (m, o) in mask.iter_mut().zip(out.iter_mut()) {
                            if *o > 0.0 {
                                *m = 1;
                            } else {
                                *m = 0;
                                *o = 0.0;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Half mean squared error over `rows`: `(1/2|B|) Σ ‖f(x)−y‖²`.
    pub fn loss(&self, x: &Mat, y: &Mat, rows: &[usize]) -> Result<f64> {
        self.check_batch(x, y, rows)?;
        let mut ws = Workspace::new(&self.spec);
        let mut total = 0.0;
        for &r in rows {
            self.forward_into(x.row(r), &mut ws);
            total += ws.acts[self.depth()].iter().zip(y.row(r)).map(|(f, t)| (f - t) * (f - t)).sum::<f64>();
        }
        Ok(0.5 * total / rows.len() as f64)
    }

    /// Loss over every row of `(x, y)`.
    pub fn full_loss(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let rows: Vec<usize> = (0..x.rows()).collect();
        self.loss(x, y, &rows)
    }

    /// Gradient of the half mean squared error over `rows`, and the loss.
    /// ReLU units with pre-activation `≤ 0` pass no gradient.
    pub fn backward_mse(&self, x: &Mat, y: &Mat, rows: &[usize]) -> Result<(Gradients, f64)> {
        self.check_batch(x, y, rows)?;
        let depth = self.depth();
        let mut grads: Vec<Mat> = self.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect();
        let mut ws = Workspace::new(&self.spec);
        let mut total = 0.0;
        for &r in rows {
            self.forward_into(x.row(r), &mut ws);
            let delta = &mut ws.delta[depth - 1];
            for ((dv, f), t) in delta.iter_mut().zip(&ws.acts[depth]).zip(y.row(r)) {
                *dv = f - t;
                total += *dv * *dv;
            }
            for l in (0..depth).rev() {
                let input = &ws.acts[l];
                let (lower, upper) = ws.delta.split_at_mut(l);
                let delta = &upper[0];
                let g = &mut grads[l];
                match self.spec.topology {
                    Topology::Dense => {
                        let cols = g.cols();
                        for (grow, &dv) in g.data_mut().chunks_exact_mut(cols).zip(delta.iter()) {
                            if dv == 0.0 {
                                continue;
                            }
                            for (gv, &iv) in grow.iter_mut().zip(input.iter()) {
                                *gv += dv * iv;
                            }
                        }
                    }
                    Topology::Diagonal => {
                        for ((gv, &dv), &iv) in g.data_mut().iter_mut().zip(delta.iter()).zip(input.iter()) {
                            *gv += dv * iv;
                        }
                    }
                }
                if l > 0 {
                    let prev = &mut lower[l - 1];
                    let mask = &ws.masks[l - 1];
                    match self.spec.topology {
                        Topology::Dense => {
                            let w = &self.weights[l];
                            prev.fill(0.0);
                            for (wrow, &dv) in w.data().chunks_exact(w.cols()).zip(delta.iter()) {
                                for (p, &wv) in prev.iter_mut().zip(wrow) {
                                    *p += wv * dv;
                                }
                            }
                        }
                        Topology::Diagonal => {
                            for ((p, &wv), &dv) in prev.iter_mut().zip(self.weights[l].data()).zip(delta.iter()) {
                                *p = wv * dv;
                            }
                        }
                    }
                    for (p, &m) in prev.iter_mut().zip(mask) {
                        if m == 0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        let inv = 1.0 / rows.len() as f64;
        for g in &mut grads {
            for v in g.data_mut() {
                *v *= inv;
            }
        }
        Ok((Gradients { layers: grads }, 0.5 * total * inv))
    }

    /// Full-batch gradient as a flat vector.
    pub fn full_gradient(&self, x: &Mat, y: &Mat) -> Result<Vec<f64>> {
        let rows: Vec<usize> = (0..x.rows()).collect();
        Ok(self.backward_mse(x, y, &rows)?.0.flatten())
    }

    fn check_batch(&self, x: &Mat, y: &Mat, rows: &[usize]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Param("empty batch".into()));
        }
        if x.cols() != self.spec.input_dim() || y.cols() != self.spec.output_dim() {
            return Err(Error::Shape(format!(
                "data is {}→{}, network is {}→{}",
                x.cols(),
                y.cols(),
                self.spec.input_dim(),
                self.spec.output_dim()
            )));
        }
        if x.rows() != y.rows() {
            return Err(Error::Shape("input and label row counts differ".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::Index(format!("row {bad} out of range for {} rows", x.rows())));
        }
        Ok(())
    }

    /// Masks of every hidden layer for every row, concatenated.
    pub(crate) fn mask_signature(&self, x: &Mat, rows: &[usize]) -> Vec<u8> {
        let mut ws = Workspace::new(&self.spec);
        let mut sig = Vec::new();
        for &r in rows {
            self.forward_into(x.row(r), &mut ws);
            for m in &ws.masks {
                sig.extend_from_slice(m);
            }
        }
        sig
    }
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    masks: Vec<Vec<u8>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(spec: &NetworkSpec) -> Self {
        let depth = spec.depth();
        Self {
            acts: spec.widths.iter().map(|&w| vec![0.0; w]).collect(),
            masks: spec.widths[1..depth].iter().map(|&w| vec![1; w]).collect(),
            delta: spec.widths[1..].iter().map(|&w| vec![0.0; w]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{toy_as_dataset, ToyData};

    pub(crate) fn toy_net(a: f64, b: f64) -> NetworkState {
        let spec = NetworkSpec::diagonal(2, 1, Activation::Identity).unwrap();
        let w = vec![Mat::new(1, 1, vec![b]).unwrap(), Mat::new(1, 1, vec![a]).unwrap()];
        NetworkState::init(&spec, &InitScheme::Explicit { weights: w }, 0).unwrap()
    }

    fn random_dense(widths: Vec<usize>, act: Activation, seed: u64) -> NetworkState {
        let spec = NetworkSpec::dense(widths, act).unwrap();
        NetworkState::init(&spec, &InitScheme::IidNormal { scale: 0.7 }, seed).unwrap()
    }

    #[test]
    fn toy_forward_is_product() {
        let net = toy_net(2.0, 3.0);
        assert_eq!(net.forward(&[1.0]).unwrap().0, vec![6.0]);
        let net = toy_net(0.9, 0.3);
        assert_eq!(net.forward(&[2.0]).unwrap().0, vec![0.9 * 0.3 * 2.0]);
    }

    #[test]
    fn zero_scale_init_is_zero_network() {
        let spec = NetworkSpec::dense(vec![4, 5, 3], Activation::Relu).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::IidNormal { scale: 0.0 }, 1).unwrap();
        assert!(net.params().iter().all(|v| *v == 0.0));
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn kaiming_variance() {
        let d = 64;
        let spec = NetworkSpec::dense(vec![d, 128, 1], Activation::Relu).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::KaimingNormal, 5).unwrap();
        let w = &net.weights[0];
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / w.data().len() as f64;
        assert!((var / (2.0 / d as f64) - 1.0).abs() < 0.2, "variance {var}");
        let u = NetworkState::init(&spec, &InitScheme::KaimingUniform, 5).unwrap();
        let var = u.weights[0].data().iter().map(|v| v * v).sum::<f64>() / w.data().len() as f64;
        assert!((var / (2.0 / d as f64) - 1.0).abs() < 0.2, "variance {var}");
    }

    #[test]
    fn explicit_shape_mismatch_is_rejected() {
        let spec = NetworkSpec::dense(vec![2, 3, 1], Activation::Identity).unwrap();
        let w = vec![Mat::zeros(3, 2), Mat::zeros(2, 1)];
        assert!(matches!(NetworkState::init(&spec, &InitScheme::Explicit { weights: w }, 0), Err(Error::Shape(_))));
        assert!(NetworkSpec::dense(vec![3], Activation::Identity).is_err());
        let bad = NetworkSpec { widths: vec![2, 3], activation: Activation::Identity, topology: Topology::Diagonal };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dead_relu_input() {
        let spec = NetworkSpec::dense(vec![2, 3, 1], Activation::Relu).unwrap();
        let w1 = Mat::from_fn(3, 2, |_, _| -1.0);
        let w2 = Mat::from_fn(1, 3, |_, _| 1.0);
        let net = NetworkState::from_weights(spec, vec![w1, w2]).unwrap();
        let (out, masks) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0]);
        assert_eq!(masks.layers, vec![vec![0, 0, 0]]);
    }

    #[test]
    fn zero_preactivation_is_masked() {
        let spec = NetworkSpec::dense(vec![1, 1, 1], Activation::Relu).unwrap();
        let net = NetworkState::from_weights(spec, vec![Mat::new(1, 1, vec![0.0]).unwrap(), Mat::new(1, 1, vec![1.0]).unwrap()]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap().1.layers, vec![vec![0]]);
    }

    #[test]
    fn linear_forward_matches_matrix_product() {
        let net = random_dense(vec![4, 6, 5, 3], Activation::Identity, 9);
        let prod = net.weights[2].matmul(&net.weights[1].matmul(&net.weights[0]).unwrap()).unwrap();
        let x = [0.3, -1.1, 2.0, 0.7];
        let want = prod.mul_vec(&x).unwrap();
        let (got, masks) = net.forward(&x).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(masks.layers.iter().all(|m| m.iter().all(|&v| v == 1)));
        let e2e = net.linear_product(0, 2);
        assert!(e2e.sub(&prod).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn toy_gradient_on_d2() {
        // ∂L/∂b = a²·b·E[x²] = 5a²b for D2.
        let ds = toy_as_dataset(ToyData::D2);
        let (a, b) = (0.8, 0.6);
        let net = toy_net(a, b);
        let (g, loss) = net.backward_mse(&ds.x, &ds.y, &[0, 1]).unwrap();
        assert!((g.layers[0][(0, 0)] - 5.0 * a * a * b).abs() < 1e-15);
        assert!((loss - 0.5 * a * a * b * b * 5.0).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let net = random_dense(vec![3, 4, 2], Activation::Relu, 2);
        let x = Mat::from_fn(5, 3, |r, c| (r as f64 - 2.0) * 0.3 + c as f64);
        let y = Mat::from_fn(5, 2, |r, c| net.forward(x.row(r)).unwrap().0[c]);
        let (g, loss) = net.backward_mse(&x, &y, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_chain_gradient_formula() {
        let spec = NetworkSpec::diagonal(3, 4, Activation::Identity).unwrap();
        let net = NetworkState::init(&spec, &InitScheme::IidNormal { scale: 1.0 }, 17).unwrap();
        let x = Mat::from_fn(6, 4, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let y = Mat::from_fn(6, 4, |r, c| ((r + 2 * c) % 3) as f64);
        let rows: Vec<usize> = (0..6).collect();
        let (g, _) = net.backward_mse(&x, &y, &rows).unwrap();
        for j in 0..4 {
            let chain = net.chain(j);
            let p: f64 = chain.iter().product();
            let e = rows.iter().map(|&r| (p * x[(r, j)] - y[(r, j)]) * x[(r, j)]).sum::<f64>() / 6.0;
            for h in 0..3 {
                let others: f64 = chain.iter().enumerate().filter(|(i, _)| *i != h).map(|(_, v)| v).product();
                assert!((g.layers[h][(0, j)] - others * e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let net = random_dense(vec![3, 2], Activation::Identity, 0);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape(_))));
        let x = Mat::zeros(2, 3);
        let y = Mat::zeros(2, 1);
        assert!(matches!(net.backward_mse(&x, &y, &[0]), Err(Error::Shape(_))));
        let y = Mat::zeros(2, 2);
        assert!(net.backward_mse(&x, &y, &[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn identity_nets_are_linear(seed in any::<u64>(), depth in 1usize..5) {
                let mut widths = vec![3];
                widths.extend(std::iter::repeat_n(4, depth - 1));
                widths.push(2);
                let net = random_dense(widths, Activation::Identity, seed);
                let x1 = [0.5, -0.2, 1.3];
                let x2 = [-1.0, 0.4, 0.9];
                let s: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
                let f1 = net.forward(&x1).unwrap().0;
                let f2 = net.forward(&x2).unwrap().0;
                let fs = net.forward(&s).unwrap().0;
                for i in 0..2 {
                    prop_assert!((fs[i] - f1[i] - f2[i]).abs() < 1e-10);
                }
            }

            #[test]
            fn masks_are_reproducible(seed in any::<u64>()) {
                let net = random_dense(vec![3, 5, 4, 1], Activation::Relu, seed);
                let x = [0.1, -0.7, 0.4];
                prop_assert_eq!(net.forward(&x).unwrap().1, net.forward(&x).unwrap().1);
            }
        }
    }
}
