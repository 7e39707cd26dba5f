use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Mat};

/// Split of input space into relevant, spanned-irrelevant and unspanned
/// directions, with the data moments expressed in that basis.
///
/// Basis columns are ordered `[relevant (r) | irrelevant (i) | unspanned (u)]`.
#[derive(Clone, Debug, Serialize)]
pub struct RelevanceDecomposition {
    pub basis: Mat,
    pub r: usize,
    pub i: usize,
    pub u: usize,
    /// `Bᵀ E[x xᵀ] B`
    pub lambda_xx: Mat,
    /// `E[y xᵀ] B`
    pub lambda_yx: Mat,
    /// Misspecification level of each spanned irrelevant direction, in basis
    /// order: `sqrt(E[‖y‖² z²] − ‖E[y z]‖²)` with `z = ⟨v, x⟩`.
    pub misspec: Vec<f64>,
    pub ground_truth_relevant: Option<Vec<usize>>,
}

impl RelevanceDecomposition {
    pub fn d(&self) -> usize {
        self.r + self.i + self.u
    }

    /// Basis indices of every non-relevant direction (spanned and unspanned).
    pub fn irrelevant(&self) -> std::ops::Range<usize> {
        self.r..self.d()
    }

    pub fn unspanned(&self) -> std::ops::Range<usize> {
        self.r + self.i..self.d()
    }

    /// Coordinate-basis decomposition using the given relevant coordinates.
    ///
    /// Basis columns are the relevant coordinates first, then the remaining
    /// coordinates, with coordinates of zero second moment (at most
    /// `tol × largest diagonal moment`) moved to the unspanned block.
    pub fn from_ground_truth(ds: &Dataset, relevant: &[usize], tol: f64) -> Result<Self> {
        let d = ds.d();
        if let Some(&bad) = relevant.iter().find(|&&c| c >= d) {
            return Err(Error::Index(format!("relevant coordinate {bad} out of range for d={d}")));
        }
        let xx = ds.second_moment();
        let scale = (0..d).map(|j| xx[(j, j)]).fold(0.0, f64::max);
        let rest: Vec<usize> = (0..d).filter(|c| !relevant.contains(c)).collect();
        let (spanned, unspanned): (Vec<usize>, Vec<usize>) =
            rest.iter().partition(|&&c| xx[(c, c)] > tol * scale);
        let order: Vec<usize> = relevant.iter().chain(&spanned).chain(&unspanned).copied().collect();
        let basis = Mat::from_fn(d, d, |row, col| if order[col] == row { 1.0 } else { 0.0 });
        Self::assemble(ds, basis, relevant.len(), spanned.len(), unspanned.len())
    }

    fn assemble(ds: &Dataset, basis: Mat, r: usize, i: usize, u: usize) -> Result<Self> {
        let lambda_xx = basis.t_matmul(&ds.second_moment().matmul(&basis)?)?;
        let lambda_yx = ds.cross_moment().matmul(&basis)?;
        let z = ds.x.matmul(&basis)?;
        let n = ds.n() as f64;
        let misspec = (r..r + i)
            .map(|j| {
                let mut energy = 0.0;
                let mut mean = vec![0.0; ds.k()];
                for row in 0..ds.n() {
                    let zj = z[(row, j)];
                    let yrow = ds.y.row(row);
                    energy += yrow.iter().map(|v| v * v).sum::<f64>() * zj * zj;
                    for (m, v) in mean.iter_mut().zip(yrow) {
                        *m += v * zj;
                    }
                }
                let mean_sq: f64 = mean.iter().map(|m| (m / n) * (m / n)).sum();
                (energy / n - mean_sq).max(0.0).sqrt()
            })
            .collect();
        Ok(Self { basis, r, i, u, lambda_xx, lambda_yx, misspec, ground_truth_relevant: ds.ground_truth_relevant.clone() })
    }
}

/// Relevance analysis in the eigen sense.
///
/// Relevant directions are the right singular directions of `E[y xᵀ]`
/// whose singular value exceeds `tol × σ_max`. The orthogonal complement is
/// diagonalised against `E[x xᵀ]`; directions whose second moment is at
/// most `tol × λ_max(E[x xᵀ])` are unspanned. `tol` is relative.
pub fn compute_relevance(ds: &Dataset, tol: f64) -> Result<RelevanceDecomposition> {
    if ds.n() == 0 || ds.d() == 0 {
        return Err(Error::Param("relevance analysis needs a non-empty dataset".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Param(format!("tolerance must be > 0, got {tol}")));
    }
    let d = ds.d();
    let yx = ds.cross_moment();
    let xx = ds.second_moment();

    let yty = yx.t_matmul(&yx)?;
    let row_space = sym_eigen(&yty)?;
    let sigma_max = row_space.values[0].max(0.0).sqrt();
    let r = if sigma_max == 0.0 {
        0
    } else {
        row_space.values.iter().filter(|&&v| v.max(0.0).sqrt() > tol * sigma_max).count()
    };

    let complement = row_space.vectors.select_cols(&(r..d).collect::<Vec<_>>())?;
    let projected = complement.t_matmul(&xx.matmul(&complement)?)?;
    let projected = projected.add(&projected.transpose())?.scale(0.5);
    let inner = sym_eigen(&projected)?;
    let xx_top = sym_eigen(&xx)?.values[0].max(0.0);
    let spanned = inner.values.iter().filter(|&&v| v > tol * xx_top).count();
    let irrelevant_basis = complement.matmul(&inner.vectors)?;

    let mut basis = Mat::zeros(d, d);
    for c in 0..r {
        basis.set_col(c, &row_space.vectors.col(c));
    }
    for c in 0..d - r {
        basis.set_col(r + c, &irrelevant_basis.col(c));
    }
    RelevanceDecomposition::assemble(ds, basis, r, spanned, d - r - spanned)
}

/// Largest relevant/irrelevant cross moment `|E[⟨v,x⟩⟨w,x⟩]|` in the
/// decomposition's basis, and whether it is within `tol`.
pub fn check_assumption1(ds: &Dataset, dec: &RelevanceDecomposition, tol: f64) -> (bool, f64) {
    let z = match ds.x.matmul(&dec.basis) {
        Ok(z) => z,
        Err(_) => return (false, f64::INFINITY),
    };
    let n = ds.n() as f64;
    let mut worst: f64 = 0.0;
    for a in 0..dec.r {
        for b in dec.irrelevant() {
            let m = (0..ds.n()).map(|row| z[(row, a)] * z[(row, b)]).sum::<f64>() / n;
            worst = worst.max(m.abs());
        }
    }
    (worst <= tol, worst)
}
