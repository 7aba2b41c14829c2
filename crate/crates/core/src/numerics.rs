//! Dense linear algebra for the beam model: row-major matrices over real or
//! complex scalars, LU factorization with partial pivoting, and a determinant
//! sign probe used to bracket natural frequencies.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot threshold below which a factorization is declared singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Field scalar the dense routines operate on.
pub trait Scalar:
    Copy
    + PartialEq
    + core::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    /// Modulus.
    fn magnitude(self) -> f64;
    fn is_finite(self) -> bool;
    /// `self / d`. For complex values this avoids forming `|d|²`, so a
    /// purely real division gives the same bits as the `f64` one.
    fn quotient(self, d: Self) -> Self {
        self / d
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn magnitude(self) -> f64 {
        libm::fabs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn magnitude(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn quotient(self, d: Self) -> Self {
        // Smith's algorithm.
        if libm::fabs(d.re) >= libm::fabs(d.im) {
            let r = d.im / d.re;
            let den = d.re + d.im * r;
            Complex64::new((self.re + self.im * r) / den, (self.im - self.re * r) / den)
        } else {
            let r = d.re / d.im;
            let den = d.re * r + d.im;
            Complex64::new((self.re * r + self.im) / den, (self.im * r - self.re) / den)
        }
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = DenseMatrix<f64>;
pub type ComplexMatrix = DenseMatrix<Complex64>;

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.magnitude()))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).magnitude());
            }
        }
        worst
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out[(i, j)] + a * other[(k, j)];
                    out[(i, j)] = v;
                }
            }
        }
        Ok(out)
    }

    /// `self + factor * other`, elementwise.
    pub fn add_scaled(&self, factor: T, other: &Self) -> Result<Self, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + factor * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| factor * a).collect(),
        }
    }

    /// Submatrix keeping the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (oi, &i) in rows.iter().enumerate() {
            for (oj, &j) in cols.iter().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Checks positive definiteness by Gaussian elimination without row
    /// exchanges; every pivot must be strictly positive.
    pub fn has_positive_pivots(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut a = self.data.clone();
        for k in 0..n {
            let pivot = a[k * n + k];
            if !(pivot > 0.0) {
                return false;
            }
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
        true
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Packed `PA = LU`: strict lower triangle holds L (unit diagonal implied),
/// upper triangle holds U. `perm[i]` is the original row now in position `i`.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    odd: bool,
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `+1` for an even permutation, `-1` for odd.
    pub fn parity(&self) -> i8 {
        if self.odd {
            -1
        } else {
            1
        }
    }

    pub fn lower(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.lu[(i, i)]).collect()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        lu_solve(self, b)
    }
}

pub fn lu_factor<T: Scalar>(a: &DenseMatrix<T>) -> Result<LuFactors<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if let Some(pos) = a.data.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            row: pos / n,
            col: pos % n,
        });
    }
    let row_scale: Vec<f64> = (0..n)
        .map(|i| a.row(i).iter().fold(0.0, |m: f64, v| m.max(v.magnitude())))
        .collect();

    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut odd = false;

    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].magnitude();
        for i in (k + 1)..n {
            let m = lu[(i, k)].magnitude();
            if m > best {
                best = m;
                p = i;
            }
        }
        if best <= SINGULAR_PIVOT_RATIO * row_scale[perm[p]] {
            return Err(LinalgError::Singular {
                column: k,
                pivot: best,
            });
        }
        if p != k {
            let (head, tail) = lu.data.split_at_mut(p * n);
            head[k * n..(k + 1) * n].swap_with_slice(&mut tail[..n]);
            perm.swap(k, p);
            odd = !odd;
        }
        let pivot = lu[(k, k)];
        let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n..(k + 1) * n];
        for row in lower.chunks_exact_mut(n) {
            let factor = row[k].quotient(pivot);
            row[k] = factor;
            if factor == T::zero() {
                continue;
            }
            for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *x = *x - factor * u;
            }
        }
    }
    Ok(LuFactors { lu, perm, odd })
}

pub fn lu_solve<T: Scalar>(f: &LuFactors<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let n = f.dim();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut x: Vec<T> = f.perm.iter().map(|&i| b[i]).collect();
    for i in 0..n {
        let row = f.lu.row(i);
        let mut acc = x[i];
        for j in 0..i {
            acc = acc - row[j] * x[j];
        }
        x[i] = acc;
    }
    for i in (0..n).rev() {
        let row = f.lu.row(i);
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc = acc - row[j] * x[j];
        }
        x[i] = acc.quotient(row[i]);
    }
    Ok(x)
}

/// Sign of `det(a)`; `0` when the factorization reports a singular pivot or
/// the matrix is not square.
pub fn det_sign(a: &RealMatrix) -> i8 {
    match lu_factor(a) {
        Ok(f) => {
            let negatives = f.diagonal().iter().filter(|&&d| d < 0.0).count();
            let sign = if negatives % 2 == 0 { 1 } else { -1 };
            sign * f.parity()
        }
        Err(_) => 0,
    }
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    let scale = x.iter().fold(0.0, |m: f64, v| m.max(v.magnitude()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = x
        .iter()
        .map(|v| {
            let r = v.magnitude() / scale;
            r * r
        })
        .sum();
    scale * libm::sqrt(sum)
}
