//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are stored row-major. Decompositions (SVD, Hermitian eigen) are
//! delegated to `nalgebra`; everything else is written out directly because
//! the matrices involved are at most a few thousand entries.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{LabError, Result};
use crate::rng::SeededRng;

pub type C64 = Complex<f64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Upper limit on the number of entries a single dense matrix may hold.
pub const MAX_ENTRIES: usize = 1 << 27;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITERS: usize = 10_000;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| {
                    let z = self.get(r, c);
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition `M = U · diag(s) · Vh`, `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub vh: ComplexMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LabError::Shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::Numerical("matrix entry is not finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| if r == c { C64::new(values[r], 0.0) } else { ZERO })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Rows `start .. start + len` as a new matrix.
    pub fn row_block(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.rows, "row block out of range");
        Self {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Matrix product. Panics on an inner-dimension mismatch; public entry
    /// points validate shapes before reaching here.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul {}x{} by {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.dim(), "matvec dimension mismatch");
        let mut out = vec![ZERO; self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o = row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum();
        }
        ComplexVector::new(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: C64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(ONE, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-ONE, other);
        out
    }

    pub fn fro_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sqr().sqrt()
    }

    /// Hilbert-Schmidt inner product `Σ conj(self_ij) other_ij`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.shape(), other.shape(), "inner shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn svd(&self) -> Result<Svd> {
        if !self.is_finite() {
            return Err(LabError::Numerical("SVD of a non-finite matrix".into()));
        }
        let p = self.rows.min(self.cols);
        if p == 0 {
            return Ok(Svd {
                u: Self::zeros(self.rows, 0),
                s: vec![],
                vh: Self::zeros(0, self.cols),
            });
        }
        let svd = self
            .to_nalgebra()
            .try_svd(true, true, SVD_EPS, SVD_MAX_ITERS)
            .ok_or_else(|| LabError::Numerical("SVD did not converge".into()))?;
        let u = svd.u.as_ref().expect("u requested");
        let vt = svd.v_t.as_ref().expect("v_t requested");
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = Self::from_fn(self.rows, p, |r, c| u[(r, order[c])]);
        let vh = Self::from_fn(p, self.cols, |r, c| vt[(order[r], c)]);
        Ok(Svd { u, s, vh })
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(self.svd()?.s)
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().sum())
    }

    pub fn rank(&self) -> Result<usize> {
        let s = self.singular_values()?;
        let smax = s.first().copied().unwrap_or(0.0);
        Ok(s.iter().filter(|&&x| x > RANK_TOL * smax && x > 0.0).count())
    }

    /// Partial isometry `U·Vh` built from the numerically nonzero singular
    /// triples. It maximizes `Re⟨self, X⟩` over the operator-norm unit ball.
    pub fn polar_factor(&self) -> Result<Self> {
        let svd = self.svd()?;
        let smax = svd.s.first().copied().unwrap_or(0.0);
        let keep = svd.s.iter().filter(|&&x| x > RANK_TOL * smax && x > 0.0).count();
        let mut out = Self::zeros(self.rows, self.cols);
        for k in 0..keep {
            for r in 0..self.rows {
                let ur = svd.u.get(r, k);
                for c in 0..self.cols {
                    out.add_at(r, c, ur * svd.vh.get(k, c));
                }
            }
        }
        Ok(out)
    }

    /// Nearest point of the operator-norm unit ball in Frobenius distance
    /// (singular values clipped at one).
    pub fn project_to_ball(&self) -> Result<Self> {
        let svd = self.svd()?;
        if svd.s.first().copied().unwrap_or(0.0) <= 1.0 {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(self.rows, self.cols);
        for (k, &s) in svd.s.iter().enumerate() {
            let s = s.min(1.0);
            if s == 0.0 {
                continue;
            }
            for r in 0..self.rows {
                let ur = svd.u.get(r, k) * s;
                for c in 0..self.cols {
                    out.add_at(r, c, ur * svd.vh.get(k, c));
                }
            }
        }
        Ok(out)
    }

    /// Top singular value with its left and right singular vectors.
    pub fn top_singular_triple(&self) -> Result<(f64, ComplexVector, ComplexVector)> {
        let svd = self.svd()?;
        if svd.s.is_empty() {
            return Ok((0.0, ComplexVector::zeros(self.rows), ComplexVector::zeros(self.cols)));
        }
        let u = ComplexVector::new((0..self.rows).map(|r| svd.u.get(r, 0)).collect());
        let v = ComplexVector::new((0..self.cols).map(|c| svd.vh.get(0, c).conj()).collect());
        Ok((svd.s[0], u, v))
    }
}

pub fn schatten_norm(m: &ComplexMatrix, p: SchattenP) -> Result<f64> {
    match p {
        SchattenP::Two => Ok(m.fro_norm()),
        SchattenP::Inf => m.op_norm(),
        SchattenP::One => m.trace_norm(),
    }
}

/// Kronecker product `a ⊗ b`; row index of the result is `ra * b.rows + rb`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|n| n <= MAX_ENTRIES) => (r, c),
        _ => {
            return Err(LabError::Shape(format!(
                "kron of {}x{} and {}x{} exceeds {} entries",
                a.rows, a.cols, b.rows, b.cols, MAX_ENTRIES
            )))
        }
    };
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ra in 0..a.rows {
        for ca in 0..a.cols {
            let x = a.get(ra, ca);
            if x == ZERO {
                continue;
            }
            for rb in 0..b.rows {
                for cb in 0..b.cols {
                    out.set(ra * b.rows + rb, ca * b.cols + cb, x * b.get(rb, cb));
                }
            }
        }
    }
    Ok(out)
}

/// Complex matrix with i.i.d. standard complex Gaussian entries (E|z|² = 1).
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &SeededRng) -> ComplexMatrix {
    let mut g = rng.generator();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = g.sample(StandardNormal);
        let im: f64 = g.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    })
}

/// Seeded element of the operator-norm unit ball: an isometry (orthonormal
/// Gaussian columns) when `rows >= cols`, otherwise the adjoint of one.
pub fn random_contraction(rows: usize, cols: usize, rng: &SeededRng) -> ComplexMatrix {
    assert!(rows >= 1 && cols >= 1, "random_contraction needs positive dimensions");
    if rows < cols {
        return random_contraction(cols, rows, rng).adjoint();
    }
    let mut g = gaussian_matrix(rows, cols, rng);
    if orthonormalize_columns(&mut g) {
        g
    } else {
        // Degenerate draw (probability zero); move to a fresh stream.
        random_contraction(rows, cols, &rng.child(u64::MAX))
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns false if
/// the columns are numerically dependent.
fn orthonormalize_columns(m: &mut ComplexMatrix) -> bool {
    let (rows, cols) = m.shape();
    for c in 0..cols {
        for _pass in 0..2 {
            for prev in 0..c {
                let mut dot = ZERO;
                for r in 0..rows {
                    dot += m.get(r, prev).conj() * m.get(r, c);
                }
                for r in 0..rows {
                    let v = m.get(r, c) - dot * m.get(r, prev);
                    m.set(r, c, v);
                }
            }
        }
        let norm: f64 = (0..rows).map(|r| m.get(r, c).norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return false;
        }
        for r in 0..rows {
            let v = m.get(r, c) / norm;
            m.set(r, c, v);
        }
    }
    true
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub fn hermitian_top_eigen(m: &ComplexMatrix) -> Result<(f64, ComplexVector)> {
    if m.rows != m.cols {
        return Err(LabError::Shape("Hermitian eigenproblem needs a square matrix".into()));
    }
    if !m.is_finite() {
        return Err(LabError::Numerical("eigenproblem of a non-finite matrix".into()));
    }
    // Symmetrize to remove rounding asymmetry before handing to the solver.
    let herm = ComplexMatrix::from_fn(m.rows, m.cols, |r, c| (m.get(r, c) + m.get(c, r).conj()) * 0.5);
    let eig = SymmetricEigen::try_new(herm.to_nalgebra(), SVD_EPS, SVD_MAX_ITERS)
        .ok_or_else(|| LabError::Numerical("Hermitian eigensolver did not converge".into()))?;
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| LabError::Shape("empty eigenproblem".into()))?;
    let v = ComplexVector::new((0..m.rows).map(|r| eig.eigenvectors[(r, idx)]).collect());
    let n = v.norm();
    Ok((val, v.scale_real(1.0 / n)))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, Vec<ComplexVector>)> {
    if m.rows != m.cols {
        return Err(LabError::Shape("Hermitian eigenproblem needs a square matrix".into()));
    }
    let herm = ComplexMatrix::from_fn(m.rows, m.cols, |r, c| (m.get(r, c) + m.get(c, r).conj()) * 0.5);
    let eig = SymmetricEigen::try_new(herm.to_nalgebra(), SVD_EPS, SVD_MAX_ITERS)
        .ok_or_else(|| LabError::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| ComplexVector::new((0..m.rows).map(|r| eig.eigenvectors[(r, i)]).collect()))
        .collect();
    Ok((vals, vecs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    data: Vec<C64>,
}

impl ComplexVector {
    pub fn new(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: vec![ZERO; dim] }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[i] = ONE;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn dot(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "dot dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::new(self.data.iter().map(|z| z * s).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Reshape into a `rows x cols` matrix (row-major).
    pub fn to_matrix(&self, rows: usize, cols: usize) -> ComplexMatrix {
        assert_eq!(rows * cols, self.dim(), "reshape dimension mismatch");
        ComplexMatrix {
            rows,
            cols,
            data: self.data.clone(),
        }
    }

    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), other.dim(), |r, c| self.data[r] * other.data[c].conj())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Serialized as `{rows, cols, data}` with row-major `[re, im]` entries.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            data: self.data.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        ComplexMatrix::from_vec(r.rows, r.cols, r.data).map_err(serde::de::Error::custom)
    }
}

/// Serialized as a plain array of `[re, im]` pairs.
impl Serialize for ComplexVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.data.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = Vec::<C64>::deserialize(d)?;
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(serde::de::Error::custom("vector entry is not finite"));
        }
        Ok(ComplexVector::new(data))
    }
}

impl From<ComplexMatrix> for ComplexVector {
    fn from(m: ComplexMatrix) -> Self {
        ComplexVector::new(m.data)
    }
}
