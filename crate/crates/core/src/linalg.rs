//! Dense row-major matrices, cyclic Jacobi eigendecomposition and a Krylov
//! estimator for the top eigenvalue of a symmetric linear operator.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMat")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMat> for Mat {
    type Error = Error;

    fn try_from(raw: RawMat) -> Result<Self> {
        Mat::new(raw.rows, raw.cols, raw.data)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Mat {
    /// Builds a matrix from row-major data. Rejects wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, values: &[f64]) {
        for (r, v) in values.iter().enumerate() {
            self[(r, c)] = *v;
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materialising the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let rrow = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    pub fn add(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Mat) -> Result<Mat> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != rhs.shape() {
            return Err(Error::Shape(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Columns `idx` of `self`, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Result<Mat> {
        if let Some(&bad) = idx.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Index(format!("column {bad} out of range for {} columns", self.cols)));
        }
        Ok(Mat::from_fn(self.rows, idx.len(), |r, c| self[(r, idx[c])]))
    }

    /// Rows `idx` of `self`, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Mat> {
        if let Some(&bad) = idx.iter().find(|&&r| r >= self.rows) {
            return Err(Error::Index(format!("row {bad} out of range for {} rows", self.rows)));
        }
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Ok(Mat { rows: idx.len(), cols: self.cols, data })
    }

    /// Contiguous block `[r0, r1) × [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        Mat::from_fn(r1 - r0, c1 - c0, |r, c| self[(r0 + r, c0 + c)])
    }

    /// `self · selfᵀ`. Bitwise symmetric.
    pub fn gram(&self) -> Mat {
        let n = self.rows;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Largest absolute asymmetry `|m_ij − m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenpairs of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in non-increasing order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Mat,
}

impl SymEigen {
    /// `V · diag(λ) · Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.values.len();
        Mat::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)]).sum()
        })
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen(m: &Mat) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::Shape(format!("eigendecomposition needs a square matrix, got {:?}", m.shape())));
    }
    let scale = m.max_abs().max(1.0);
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.rows();
    // Work on the exactly symmetrised copy.
    let mut a = Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = Mat::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let total = a.frobenius_norm();
        if off.sqrt() <= f64::EPSILON * 1e-2 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Result of [`dominant_eigenvalue`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominantEigen {
    /// Largest (algebraic) eigenvalue estimate.
    pub value: f64,
    pub converged: bool,
    /// Number of operator applications used.
    pub iterations: usize,
}

/// Estimates the largest eigenvalue of a symmetric operator given only its
/// action on vectors.
///
/// Runs Lanczos with full reorthogonalisation from the normalised all-ones
/// vector, which reduces to power iteration's Krylov space but converges on
/// small spectral gaps in far fewer applications. An invariant subspace
/// found early is extended deterministically with the coordinate vector
/// least represented in the current basis. Convergence is declared when the
/// Ritz residual bound drops below `tol · |λ|`, or once the Krylov space
/// fills the whole domain.
pub fn dominant_eigenvalue(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    dim: usize,
    iters: usize,
    tol: f64,
) -> DominantEigen {
    if dim == 0 {
        return DominantEigen { value: 0.0, converged: true, iterations: 0 };
    }
    let max_steps = iters.min(dim).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);

    let start = vec![1.0 / (dim as f64).sqrt(); dim];
    basis.push(start);
    let mut last = 0.0;
    let mut operator_scale: f64 = 0.0;

    for step in 0..max_steps {
        let q = basis[step].clone();
        let mut w = apply(&q);
        if w.len() != dim || w.iter().any(|v| !v.is_finite()) {
            return DominantEigen { value: f64::NAN, converged: false, iterations: step + 1 };
        }
        operator_scale = operator_scale.max(norm(&w));
        let alpha = dot(&q, &w);
        alphas.push(alpha);
        // Full reorthogonalisation, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let beta = norm(&w);

        let t = tridiagonal(&alphas, &betas);
        let eig = sym_eigen(&t).expect("tridiagonal matrix is symmetric");
        let theta = eig.values[0];
        last = theta;
        let k = alphas.len();
        let residual = beta * eig.vectors[(k - 1, 0)].abs();
        let filled = k == dim;
        let breakdown = beta <= 1e-14 * operator_scale.max(f64::MIN_POSITIVE);
        if filled || (!breakdown && residual <= tol * theta.abs()) {
            return DominantEigen { value: theta, converged: true, iterations: k };
        }
        if operator_scale == 0.0 && k == dim {
            return DominantEigen { value: 0.0, converged: true, iterations: k };
        }
        if step + 1 == max_steps {
            break;
        }
        if breakdown {
            // Invariant subspace reached; restart with a fresh direction.
            match fresh_direction(&basis, dim) {
                Some(next) => {
                    betas.push(0.0);
                    basis.push(next);
                }
                None => return DominantEigen { value: theta, converged: true, iterations: k },
            }
        } else {
            betas.push(beta);
            basis.push(w.iter().map(|v| v / beta).collect());
        }
    }
    let value = if operator_scale == 0.0 { 0.0 } else { last };
    DominantEigen { value, converged: operator_scale == 0.0, iterations: alphas.len() }
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> Mat {
    let k = alphas.len();
    let mut t = Mat::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

fn fresh_direction(basis: &[Vec<f64>], dim: usize) -> Option<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let n = norm(&v);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, v));
        }
    }
    let (n, v) = best?;
    (n > 1e-8).then(|| v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.add(&a.transpose()).unwrap().scale(0.5)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn det(m: &Mat) -> f64 {
        let n = m.rows();
        let mut a = m.clone();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
            if a[(p, c)] == 0.0 {
                return 0.0;
            }
            if p != c {
                for k in 0..n {
                    let tmp = a[(c, k)];
                    a[(c, k)] = a[(p, k)];
                    a[(p, k)] = tmp;
                }
                d = -d;
            }
            d *= a[(c, c)];
            for r in (c + 1)..n {
                let f = a[(r, c)] / a[(c, c)];
                for k in c..n {
                    a[(r, k)] -= f * a[(c, k)];
                }
            }
        }
        d
    }

    /// Roots of det(m − λI) located by a sign-change scan over the
    /// Gershgorin interval and refined by bisection.
    fn char_poly_roots(m: &Mat) -> Vec<f64> {
        let n = m.rows();
        let radius = (0..n)
            .map(|i| m[(i, i)].abs() + (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1e-3;
        let p = |lambda: f64| det(&m.sub(&Mat::identity(n).scale(lambda)).unwrap());
        let grid = 200_000;
        let mut roots = Vec::new();
        let mut prev_x = -radius;
        let mut prev = p(prev_x);
        for k in 1..=grid {
            let x = -radius + 2.0 * radius * k as f64 / grid as f64;
            let v = p(x);
            if prev == 0.0 {
                roots.push(prev_x);
            } else if prev.signum() != v.signum() && v != 0.0 {
                let (mut lo, mut hi) = (prev_x, x);
                let mut flo = prev;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = p(mid);
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = v;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eigen(&Mat::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_input_is_axis_aligned() {
        let e = sym_eigen(&Mat::diag(&[1.0, 4.0])).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
        assert_eq!(e.vectors[(1, 0)].abs(), 1.0);
        assert_eq!(e.vectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn matches_characteristic_polynomial_roots() {
        for seed in 0..3 {
            let m = random_symmetric(6, seed);
            let roots = char_poly_roots(&m);
            assert_eq!(roots.len(), 6, "seed {seed}: roots {roots:?}");
            let e = sym_eigen(&m).unwrap();
            for (a, b) in e.values.iter().zip(&roots) {
                assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_non_symmetric_and_non_square() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::NotSymmetric(_))));
        assert!(matches!(sym_eigen(&Mat::zeros(2, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn dominant_of_diagonal_and_zero() {
        let d = Mat::diag(&[3.0, 1.0]);
        let r = dominant_eigenvalue(|v| d.mul_vec(v).unwrap(), 2, 200, 1e-12);
        assert!((r.value - 3.0).abs() < 1e-12 && r.converged);
        let z = dominant_eigenvalue(|v| vec![0.0; v.len()], 4, 200, 1e-6);
        assert_eq!(z.value, 0.0);
        assert!(z.converged);
    }

    #[test]
    fn dominant_matches_jacobi_on_random_8x8() {
        for seed in 10..20 {
            let m = random_symmetric(8, seed);
            let top = sym_eigen(&m).unwrap().values[0];
            let r = dominant_eigenvalue(|v| m.mul_vec(v).unwrap(), 8, 200, 1e-10);
            assert!((r.value - top).abs() < 1e-6 * top.abs().max(1.0), "seed {seed}");
        }
    }

    #[test]
    fn dominant_finds_top_eigenvector_orthogonal_to_start() {
        // Top eigenvector (1,-1)/√2 is orthogonal to the all-ones start.
        let m = Mat::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
        let r = dominant_eigenvalue(|v| m.mul_vec(v).unwrap(), 2, 200, 1e-10);
        assert!((r.value - 3.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn negative_dominant_magnitude_still_returns_algebraic_top() {
        let m = Mat::diag(&[-5.0, 0.5, 0.2]);
        let r = dominant_eigenvalue(|v| m.mul_vec(v).unwrap(), 3, 200, 1e-10);
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn reconstruction_and_orthonormality(n in 1usize..12, seed in any::<u64>()) {
                let m = random_symmetric(n, seed);
                let e = sym_eigen(&m).unwrap();
                let err = e.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm().max(1e-300);
                prop_assert!(err < 1e-8);
                let vtv = e.vectors.t_matmul(&e.vectors).unwrap();
                prop_assert!(vtv.sub(&Mat::identity(n)).unwrap().max_abs() < 1e-10);
                prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            }

            #[test]
            fn dominant_agrees_with_jacobi_given_gap(n in 2usize..64, seed in any::<u64>()) {
                // Planted spectrum with a guaranteed top gap ≥ 1e-3.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut vals: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let second = vals.iter().cloned().fold(f64::MIN, f64::max);
                vals[0] = second + rng.random_range(1e-3..0.5);
                let q = sym_eigen(&random_symmetric(n, seed ^ 0xabcdef)).unwrap().vectors;
                let m = Mat::from_fn(n, n, |i, j| (0..n).map(|k| q[(i, k)] * vals[k] * q[(j, k)]).sum());
                let m = m.add(&m.transpose()).unwrap().scale(0.5);
                let top = sym_eigen(&m).unwrap().values[0];
                let r = dominant_eigenvalue(|v| m.mul_vec(v).unwrap(), n, 200, 1e-12);
                prop_assert!((r.value - top).abs() < 1e-6, "{} vs {}", r.value, top);
            }
        }
    }
}
