//! Datasets with known relevant and irrelevant input coordinates.

mod idx;
mod relevance;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub use idx::{load_idx, write_idx_images, write_idx_labels};
pub use relevance::{check_assumption1, compute_relevance, RelevanceDecomposition};

/// Inputs `x` (n×d), labels `y` (n×k) and optional ground-truth support.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Mat,
    pub y: Mat,
    /// Input coordinates the target depends on, when known by construction.
    pub ground_truth_relevant: Option<Vec<usize>>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Mat, y: Mat, ground_truth_relevant: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Param("dataset needs at least one row".into()));
        }
        if x.rows() != y.rows() {
            return Err(Error::Shape(format!("{} input rows vs {} label rows", x.rows(), y.rows())));
        }
        if let Some(gt) = &ground_truth_relevant {
            if let Some(&bad) = gt.iter().find(|&&c| c >= x.cols()) {
                return Err(Error::Index(format!("relevant coordinate {bad} out of range for d={}", x.cols())));
            }
        }
        Ok(Self { x, y, ground_truth_relevant, name: name.into() })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn k(&self) -> usize {
        self.y.cols()
    }

    /// Complement of the ground-truth relevant set, if one is recorded.
    pub fn ground_truth_irrelevant(&self) -> Option<Vec<usize>> {
        let gt = self.ground_truth_relevant.as_ref()?;
        Some((0..self.d()).filter(|c| !gt.contains(c)).collect())
    }

    /// `E[x xᵀ]` over all rows (d×d).
    pub fn second_moment(&self) -> Mat {
        self.x.t_matmul(&self.x).expect("same row count").scale(1.0 / self.n() as f64)
    }

    /// `E[y xᵀ]` over all rows (k×d).
    pub fn cross_moment(&self) -> Mat {
        self.y.t_matmul(&self.x).expect("same row count").scale(1.0 / self.n() as f64)
    }

    /// Second moment restricted to the given rows.
    pub fn batch_second_moment(&self, rows: &[usize]) -> Mat {
        let d = self.d();
        let mut m = Mat::zeros(d, d);
        for &r in rows {
            let x = self.x.row(r);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += x[i] * x[j];
                }
            }
        }
        m.scale(1.0 / rows.len() as f64)
    }

    pub fn column_mean(&self, c: usize) -> f64 {
        (0..self.n()).map(|r| self.x[(r, c)]).sum::<f64>() / self.n() as f64
    }
}

/// Target of the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `y = Σ_{i<r} x_i`
    LinearSum,
    /// `y = sin(Σ_{i<r} x_i)`
    SineOfSum,
}

impl Target {
    fn eval(self, s: f64) -> f64 {
        match self {
            Target::LinearSum => s,
            Target::SineOfSum => s.sin(),
        }
    }
}

/// Sparse-support synthetic data.
///
/// Draws `m` standard-normal inputs, centres the irrelevant columns
/// (`r..d`) to exactly zero mean, and emits every input twice: once with
/// label `y + eps·g` and once with `y − eps·g` for a shared per-row draw
/// `g`. Rows `0..m` carry the `+` copy and rows `m..2m` the `−` copy.
pub fn gen_synthetic(d: usize, r: usize, m: usize, target: Target, eps: f64, seed: u64) -> Result<Dataset> {
    if r == 0 || r > d {
        return Err(Error::Param(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }
    if m < 2 {
        return Err(Error::Param(format!("need m >= 2 samples, got {m}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Param(format!("noise level must be finite and >= 0, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    for c in r..d {
        center_column(&mut base, c);
    }
    let noise: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();

    let mut x = Mat::zeros(2 * m, d);
    let mut y = Mat::zeros(2 * m, 1);
    for i in 0..m {
        let clean = target.eval(base.row(i)[..r].iter().sum());
        for (copy, sign) in [(i, 1.0), (i + m, -1.0)] {
            x.row_mut(copy).copy_from_slice(base.row(i));
            y[(copy, 0)] = clean + sign * eps * noise[i];
        }
    }
    let name = format!("synthetic-{target:?}-d{d}-r{r}-m{m}").to_lowercase();
    Dataset::new(x, y, Some((0..r).collect()), name)
}

/// Subtracts the column mean, then removes any residual mean left by
/// rounding so that the column sums to zero as closely as floats allow.
fn center_column(m: &mut Mat, c: usize) {
    let n = m.rows() as f64;
    for _ in 0..2 {
        let mean = (0..m.rows()).map(|r| m[(r, c)]).sum::<f64>() / n;
        for r in 0..m.rows() {
            m[(r, c)] -= mean;
        }
    }
}

/// Removes from every irrelevant column its projection on the constant
/// vector and on the relevant columns, so all relevant/irrelevant cross
/// moments vanish to rounding. Relevant columns and labels are unchanged,
/// hence `E[y x_j]` for irrelevant `j` vanishes too whenever the labels are
/// a function of the relevant columns plus pairwise-cancelling noise.
pub fn decorrelate_irrelevant(ds: &Dataset) -> Result<Dataset> {
    let relevant = ds
        .ground_truth_relevant
        .clone()
        .ok_or_else(|| Error::Param("decorrelation needs a ground-truth relevant set".into()))?;
    let irrelevant = ds.ground_truth_irrelevant().unwrap_or_default();
    let n = ds.n();
    let mut span: Vec<Vec<f64>> = Vec::new();
    let ones = vec![1.0; n];
    for v in std::iter::once(ones).chain(relevant.iter().map(|&c| ds.x.col(c))) {
        if let Some(q) = orthonormalize_against(&v, &span) {
            span.push(q);
        }
    }
    let mut x = ds.x.clone();
    for &c in &irrelevant {
        let mut col = x.col(c);
        for _ in 0..2 {
            for q in &span {
                let p = crate::linalg::dot(q, &col);
                for (ci, qi) in col.iter_mut().zip(q) {
                    *ci -= p * qi;
                }
            }
        }
        x.set_col(c, &col);
    }
    Dataset::new(x, ds.y.clone(), Some(relevant), format!("{}-decorrelated", ds.name))
}

fn orthonormalize_against(v: &[f64], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let scale = crate::linalg::norm(v);
    let mut w = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let p = crate::linalg::dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= p * qi;
            }
        }
    }
    let nw = crate::linalg::norm(&w);
    (nw > 1e-10 * scale.max(f64::MIN_POSITIVE)).then(|| w.iter().map(|x| x / nw).collect())
}

/// Appends `count` all-zero input columns. They are never excited by any
/// row, so their first-layer weights receive no gradient.
pub fn append_unspanned(ds: &Dataset, count: usize) -> Result<Dataset> {
    let d = ds.d();
    let x = Mat::from_fn(ds.n(), d + count, |r, c| if c < d { ds.x[(r, c)] } else { 0.0 });
    let name = if count == 0 { ds.name.clone() } else { format!("{}-u{count}", ds.name) };
    Dataset::new(x, ds.y.clone(), ds.ground_truth_relevant.clone(), name)
}

/// Exact-Assumption-1 fixture: `n` rows whose `d` input columns are
/// mutually orthogonal with prescribed second moments `E[x_j²]`, and whose
/// labels are a random linear map of the first `r` columns. Columns with a
/// zero prescribed moment are identically zero (unspanned).
pub fn orthogonal_fixture(n: usize, moments: &[f64], r: usize, k: usize, seed: u64) -> Result<Dataset> {
    let d = moments.len();
    if r > d {
        return Err(Error::Param(format!("r={r} exceeds d={d}")));
    }
    if n < d {
        return Err(Error::Param(format!("need n >= d for orthogonal columns, got n={n}, d={d}")));
    }
    if moments.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::Param("second moments must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut x = Mat::zeros(n, d);
    for (c, &mom) in moments.iter().enumerate() {
        if mom == 0.0 {
            continue;
        }
        let q = loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            if let Some(q) = orthonormalize_against(&v, &basis) {
                break q;
            }
        };
        let s = (mom * n as f64).sqrt();
        x.set_col(c, &q.iter().map(|v| v * s).collect::<Vec<_>>());
        basis.push(q);
    }
    let coef = Mat::from_fn(r, k, |_, _| rng.sample(StandardNormal));
    let xr = x.select_cols(&(0..r).collect::<Vec<_>>())?;
    let y = xr.matmul(&coef)?;
    Dataset::new(x, y, Some((0..r).collect()), format!("orthogonal-fixture-d{d}-r{r}"))
}

/// Per-component data for diagonal networks (`k = d` outputs).
///
/// Inputs are standard normal and each drawn row appears twice. Relevant
/// components (`j < r`) have label `y[j] = x[j]` on both copies. Irrelevant
/// components have label `+sigma·g` on the first copy and `−sigma·g` on the
/// second, so `E[y[j] x[j]] = 0` exactly while `E[y[j]² x[j]²] > 0`: no
/// linear model can fit these labels and mini-batch residuals keep
/// fluctuating.
pub fn gen_misspecified_diagonal(d: usize, r: usize, m: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if r > d || d == 0 {
        return Err(Error::Param(format!("need r <= d and d >= 1, got r={r}, d={d}")));
    }
    if m == 0 {
        return Err(Error::Param("need m >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    let noise = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    let mut x = Mat::zeros(2 * m, d);
    let mut y = Mat::zeros(2 * m, d);
    for i in 0..m {
        for (copy, sign) in [(i, 1.0), (i + m, -1.0)] {
            x.row_mut(copy).copy_from_slice(base.row(i));
            for j in 0..d {
                y[(copy, j)] = if j < r { base[(i, j)] } else { sign * sigma * noise[(i, j)] };
            }
        }
    }
    Dataset::new(x, y, Some((0..r).collect()), format!("misspecified-diagonal-d{d}-r{r}"))
}

/// Scalar data point of the two-parameter toy model `f(x) = a·b·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyData {
    D1,
    D2,
}

pub fn toy_dataset(which: ToyData) -> Vec<ToyPoint> {
    let pts: &[(f64, f64)] = match which {
        ToyData::D1 => &[(1.0, -1.0), (1.0, 1.0)],
        ToyData::D2 => &[(1.0, 0.0), (3.0, 0.0)],
    };
    pts.iter().map(|&(x, y)| ToyPoint { x, y }).collect()
}

/// Toy points as a 1-input, 1-output dataset.
pub fn toy_as_dataset(which: ToyData) -> Dataset {
    let pts = toy_dataset(which);
    let x = Mat::from_fn(pts.len(), 1, |r, _| pts[r].x);
    let y = Mat::from_fn(pts.len(), 1, |r, _| pts[r].y);
    Dataset::new(x, y, None, format!("toy-{which:?}").to_lowercase()).expect("toy data is well formed")
}
