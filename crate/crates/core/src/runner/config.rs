//! Experiment configuration.
//!
//! Configs are TOML (sectioned `key = value`) or JSON. Every key has a
//! default, listed on the field it sets; unknown keys are errors. A minimal
//! config:
//!
//! ```toml
//! name = "linear-gd"
//!
//! [dataset]
//! kind = "synthetic"
//! d = 15
//! r = 5
//!
//! [optimizer]
//! algorithm = "sgd-without"
//! eta = 0.05
//! batch_size = 10
//! steps = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{
    append_unspanned, decorrelate_irrelevant, gen_misspecified_diagonal, gen_synthetic, load_idx, orthogonal_fixture,
    toy_as_dataset, Dataset, Target, ToyData,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::models::{Activation, InitScheme, NetworkSpec, NetworkState, Topology};
use crate::optim::{Algorithm, OptimizerConfig};

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "SUPLAB_OUT";
const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Default `"experiment"`. Names the output directory.
    pub name: String,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub optimizer: OptimizerConfig,
    pub probes: ProbesConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: DatasetConfig::default(),
            network: NetworkConfig::default(),
            optimizer: OptimizerConfig::default(),
            probes: ProbesConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Selected by `kind`; default `synthetic`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    Synthetic(SyntheticConfig),
    MisspecifiedDiagonal(MisspecifiedConfig),
    Orthogonal(OrthogonalConfig),
    Toy(ToyConfig),
    Idx(IdxConfig),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticConfig::default())
    }
}

/// Sparse-support data. Defaults: `d = 15`, `r = 5`, `m = 500` (rows come
/// in `2m` noise-paired copies), `target = "linear-sum"`, `eps = 0.01`,
/// `seed = 0`, `decorrelate = false`, `unspanned = 0` extra zero columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub target: Target,
    pub eps: f64,
    pub seed: u64,
    /// Project irrelevant columns off the relevant ones and the constant.
    pub decorrelate: bool,
    pub unspanned: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { d: 15, r: 5, m: 500, target: Target::LinearSum, eps: 0.01, seed: 0, decorrelate: false, unspanned: 0 }
    }
}

/// Per-component labels for diagonal nets. Defaults: `d = 2`, `r = 1`,
/// `m = 100`, `sigma = 1`, `seed = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MisspecifiedConfig {
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for MisspecifiedConfig {
    fn default() -> Self {
        Self { d: 2, r: 1, m: 100, sigma: 1.0, seed: 0 }
    }
}

/// Mutually orthogonal columns. Defaults: `n = 32`,
/// `moments = [1, 1, 1, 1]`, `r = 2`, `k = 1`, `seed = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrthogonalConfig {
    pub n: usize,
    pub moments: Vec<f64>,
    pub r: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for OrthogonalConfig {
    fn default() -> Self {
        Self { n: 32, moments: vec![1.0; 4], r: 2, k: 1, seed: 0 }
    }
}

/// Two-point toy data. Default `which = "d1"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub which: ToyData,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { which: ToyData::D1 }
    }
}

/// IDX image/label pair. Relative paths resolve against the config file's
/// directory. Defaults: empty paths (must be set), `center = true`,
/// `limit = 0` (all rows).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdxConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub center: bool,
    pub limit: usize,
}

/// Defaults: `topology = "dense"`, `activation = "identity"`,
/// `widths = []` (dense: `[d, 16, k]`), `depth = 2` (diagonal only),
/// `init = "kaiming-normal"`, `init_scale = 1`, `init_seed = 0`,
/// `params = []` (when set, the flat weights of `W_1 … W_L` in row-major
/// stored layout, overriding `init`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub topology: Topology,
    pub activation: Activation,
    pub widths: Vec<usize>,
    pub depth: usize,
    pub init: InitKind,
    pub init_scale: f64,
    pub init_seed: u64,
    pub params: Vec<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            topology: Topology::Dense,
            activation: Activation::Identity,
            widths: Vec::new(),
            depth: 2,
            init: InitKind::KaimingNormal,
            init_scale: 1.0,
            init_seed: 0,
            params: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    KaimingNormal,
    KaimingUniform,
    IidNormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Adjacent-pair balancedness gaps of each listed diagonal chain.
    Balancedness,
    /// Raw weights of each listed diagonal chain.
    Chains,
    /// Every first-layer weight.
    Layer1,
    /// First-layer Gram matrix and its spectrum at the end of training.
    Gram,
}

/// Defaults: `stride = 1`, `metrics = []`, `components = []` (all
/// irrelevant inputs), `check_eta_max = true`, `phase_window = 0` (one
/// epoch), `plateau_tol = 1e-4`, `support_tol = 0` (`1e-3` of the initial
/// size), `stop_ratio = 0` (no early stop; otherwise stop once the
/// first-layer irrelevant norm is at most `stop_ratio` times its initial
/// value), `gram_bins = 20`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbesConfig {
    pub stride: usize,
    pub metrics: Vec<Metric>,
    pub components: Vec<usize>,
    pub check_eta_max: bool,
    pub phase_window: usize,
    pub plateau_tol: f64,
    pub support_tol: f64,
    pub stop_ratio: f64,
    pub gram_bins: usize,
}

impl Default for ProbesConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            metrics: Vec::new(),
            components: Vec::new(),
            check_eta_max: true,
            phase_window: 0,
            plateau_tol: 1e-4,
            support_tol: 0.0,
            stop_ratio: 0.0,
            gram_bins: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Defaults: `dir = ""` (`$SUPLAB_OUT/<name>`, or `runs/<name>`),
/// `formats = ["csv", "json"]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::new(), formats: vec![Format::Csv, Format::Json] }
    }
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

/// Parses TOML or JSON text; JSON is recognised by a leading `{`.
pub fn parse_config<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {}", e.to_string().trim_end())))
    }
}

/// Default output root: `$SUPLAB_OUT` if set, else `runs`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

impl ExperimentConfig {
    pub fn from_toml_or_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_config(text, "<config>")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative IDX paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = parse_config(&text, &path.display().to_string())?;
        if let DatasetConfig::Idx(idx) = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new(""));
            for p in [&mut idx.images, &mut idx.labels] {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks values that parse but make no sense; errors name the key.
    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        if !(o.eta.is_finite() && o.eta >= 0.0) {
            return Err(cfg_err("optimizer.eta", format!("must be finite and >= 0, got {}", o.eta)));
        }
        if !(o.weight_decay.is_finite() && o.weight_decay >= 0.0) {
            return Err(cfg_err("optimizer.weight_decay", format!("must be finite and >= 0, got {}", o.weight_decay)));
        }
        if o.algorithm != Algorithm::Gd && o.batch_size == 0 {
            return Err(cfg_err("optimizer.batch_size", "must be >= 1 for SGD"));
        }
        let p = &self.probes;
        if p.stride == 0 {
            return Err(cfg_err("probes.stride", "must be >= 1"));
        }
        if !(p.plateau_tol.is_finite() && p.plateau_tol >= 0.0) {
            return Err(cfg_err("probes.plateau_tol", "must be finite and >= 0"));
        }
        if !(p.support_tol.is_finite() && p.support_tol >= 0.0) {
            return Err(cfg_err("probes.support_tol", "must be finite and >= 0"));
        }
        if !(p.stop_ratio.is_finite() && (0.0..1.0).contains(&p.stop_ratio)) {
            return Err(cfg_err("probes.stop_ratio", "must be in [0, 1)"));
        }
        let n = &self.network;
        if n.topology == Topology::Diagonal && n.depth == 0 {
            return Err(cfg_err("network.depth", "must be >= 1"));
        }
        if !(n.init_scale.is_finite() && n.init_scale > 0.0) {
            return Err(cfg_err("network.init_scale", "must be finite and > 0"));
        }
        match &self.dataset {
            DatasetConfig::Synthetic(s) => {
                if s.r == 0 || s.r > s.d {
                    return Err(cfg_err("dataset.r", format!("need 1 <= r <= d = {}", s.d)));
                }
                if s.m < 2 {
                    return Err(cfg_err("dataset.m", "must be >= 2"));
                }
            }
            DatasetConfig::MisspecifiedDiagonal(s) => {
                if s.d == 0 || s.r > s.d {
                    return Err(cfg_err("dataset.r", format!("need r <= d = {} and d >= 1", s.d)));
                }
                if s.m == 0 {
                    return Err(cfg_err("dataset.m", "must be >= 1"));
                }
            }
            DatasetConfig::Orthogonal(s) => {
                if s.r > s.moments.len() {
                    return Err(cfg_err("dataset.r", "exceeds the number of moments"));
                }
                if s.n < s.moments.len() {
                    return Err(cfg_err("dataset.n", "must be at least the number of moments"));
                }
            }
            DatasetConfig::Toy(_) => {}
            DatasetConfig::Idx(s) => {
                if s.images.as_os_str().is_empty() {
                    return Err(cfg_err("dataset.images", "path is required"));
                }
                if s.labels.as_os_str().is_empty() {
                    return Err(cfg_err("dataset.labels", "path is required"));
                }
            }
        }
        Ok(())
    }

    pub fn build_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetConfig::Synthetic(s) => {
                let ds = gen_synthetic(s.d, s.r, s.m, s.target, s.eps, s.seed)?;
                let ds = if s.decorrelate { decorrelate_irrelevant(&ds)? } else { ds };
                append_unspanned(&ds, s.unspanned)
            }
            DatasetConfig::MisspecifiedDiagonal(s) => gen_misspecified_diagonal(s.d, s.r, s.m, s.sigma, s.seed),
            DatasetConfig::Orthogonal(s) => orthogonal_fixture(s.n, &s.moments, s.r, s.k, s.seed),
            DatasetConfig::Toy(s) => {
                let mut ds = toy_as_dataset(s.which);
                ds.ground_truth_relevant = Some(vec![]);
                Ok(ds)
            }
            DatasetConfig::Idx(s) => {
                let ds = load_idx(&s.images, &s.labels, s.center)?;
                if s.limit == 0 || s.limit >= ds.n() {
                    return Ok(ds);
                }
                let rows: Vec<usize> = (0..s.limit).collect();
                Dataset::new(ds.x.select_rows(&rows)?, ds.y.select_rows(&rows)?, None, ds.name)
            }
        }
    }

    pub fn network_spec(&self, ds: &Dataset) -> Result<NetworkSpec> {
        let n = &self.network;
        let spec = match n.topology {
            Topology::Diagonal => {
                if ds.k() != ds.d() {
                    return Err(cfg_err(
                        "network.topology",
                        format!("diagonal nets need one label per input, dataset has d={} k={}", ds.d(), ds.k()),
                    ));
                }
                NetworkSpec::diagonal(n.depth, ds.d(), n.activation)?
            }
            Topology::Dense => {
                let widths = if n.widths.is_empty() { vec![ds.d(), 16, ds.k()] } else { n.widths.clone() };
                if widths.first() != Some(&ds.d()) || widths.last() != Some(&ds.k()) {
                    return Err(cfg_err(
                        "network.widths",
                        format!("must start with d={} and end with k={}, got {widths:?}", ds.d(), ds.k()),
                    ));
                }
                NetworkSpec::dense(widths, n.activation)?
            }
        };
        Ok(spec)
    }

    pub fn build_network(&self, ds: &Dataset) -> Result<NetworkState> {
        let spec = self.network_spec(ds)?;
        let n = &self.network;
        if !n.params.is_empty() {
            let shapes: Vec<(usize, usize)> = (0..spec.depth()).map(|l| spec.layer_shape(l)).collect();
            let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
            if n.params.len() != total {
                return Err(cfg_err("network.params", format!("expected {total} values, got {}", n.params.len())));
            }
            let mut weights = Vec::with_capacity(shapes.len());
            let mut at = 0;
            for (r, c) in shapes {
                weights.push(Mat::new(r, c, n.params[at..at + r * c].to_vec())?);
                at += r * c;
            }
            return NetworkState::from_weights(spec, weights);
        }
        let scheme = match n.init {
            InitKind::KaimingNormal => InitScheme::KaimingNormal,
            InitKind::KaimingUniform => InitScheme::KaimingUniform,
            InitKind::IidNormal => InitScheme::IidNormal { scale: n.init_scale },
        };
        NetworkState::init(&spec, &scheme, n.init_seed)
    }

    /// Output directory: `output.dir` if set, else `<root>/<name>`.
    pub fn out_dir(&self, root: &Path) -> PathBuf {
        if self.output.dir.as_os_str().is_empty() {
            root.join(&self.name)
        } else {
            self.output.dir.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = ExperimentConfig::from_toml_or_json("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = DatasetConfig::Toy(ToyConfig { which: ToyData::D2 });
        cfg.network.topology = Topology::Diagonal;
        cfg.optimizer = OptimizerConfig::sgd_without(0.1, 1, 10, 3);
        cfg.probes.metrics = vec![Metric::Chains];
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml_or_json(&text).unwrap(), cfg);
    }

    #[test]
    fn json_is_accepted() {
        let cfg = ExperimentConfig::from_toml_or_json(r#"{"name": "j", "optimizer": {"eta": 0.2}}"#).unwrap();
        assert_eq!(cfg.name, "j");
        assert_eq!(cfg.optimizer.eta, 0.2);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = "name = \"x\"\n\n[optimizer]\neta = 0.1\nbatchsize = 4\n";
        let msg = ExperimentConfig::from_toml_or_json(text).unwrap_err().to_string();
        assert!(msg.contains("batchsize"), "{msg}");
        assert!(msg.contains("line 5"), "{msg}");
    }

    #[test]
    fn unknown_dataset_key_is_rejected() {
        let text = "[dataset]\nkind = \"synthetic\"\nd = 4\nrr = 2\n";
        let msg = ExperimentConfig::from_toml_or_json(text).unwrap_err().to_string();
        assert!(msg.contains("rr"), "{msg}");
    }

    #[test]
    fn bad_values_name_their_key() {
        let msg = ExperimentConfig::from_toml_or_json("[optimizer]\neta = -1.0\n").unwrap_err().to_string();
        assert!(msg.contains("optimizer.eta"), "{msg}");
        let msg = ExperimentConfig::from_toml_or_json("[optimizer]\nalgorithm = \"sgd-with\"\n").unwrap_err().to_string();
        assert!(msg.contains("optimizer.batch_size"), "{msg}");
        let msg = ExperimentConfig::from_toml_or_json("[dataset]\nkind = \"synthetic\"\nd = 3\nr = 4\n").unwrap_err().to_string();
        assert!(msg.contains("dataset.r"), "{msg}");
    }

    #[test]
    fn widths_must_match_data() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = DatasetConfig::Synthetic(SyntheticConfig { m: 10, ..Default::default() });
        cfg.network.widths = vec![3, 4, 1];
        let ds = cfg.build_dataset().unwrap();
        let msg = cfg.build_network(&ds).unwrap_err().to_string();
        assert!(msg.contains("network.widths"), "{msg}");
    }

    #[test]
    fn explicit_params_fill_layers_in_order() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = DatasetConfig::Toy(ToyConfig::default());
        cfg.network.topology = Topology::Diagonal;
        cfg.network.params = vec![0.5, 1.5];
        let ds = cfg.build_dataset().unwrap();
        let net = cfg.build_network(&ds).unwrap();
        assert_eq!(net.chain(0), vec![0.5, 1.5]);
        cfg.network.params = vec![0.5];
        assert!(cfg.build_network(&ds).is_err());
    }

    #[test]
    fn out_dir_defaults_under_root() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.out_dir(Path::new("/tmp/r")), PathBuf::from("/tmp/r/experiment"));
    }
}
