//! Dense linear algebra for the small, tall systems this crate solves.
//!
//! Only what the estimators need: a row-major matrix, Householder QR with
//! rank detection, and pivoted Cholesky for small positive semidefinite
//! systems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pivots (or column residual norms) below this fraction of the largest
/// column norm declare rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            axpy(xr, self.row(r), &mut out);
        }
        out
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y = a * x + y
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// Householder QR of a tall matrix, `A = Q R`, with `Q` kept implicitly as
/// reflectors.
///
/// Construction fails if any column's residual norm, after projecting out
/// the earlier columns, falls below [`RANK_TOLERANCE`] times the largest
/// column norm. The error lists every such column.
#[derive(Debug, Clone)]
pub struct Qr {
    rows: usize,
    cols: usize,
    // column-major; reflector j lives in rows j.. of column j, R above it
    packed: Vec<f64>,
    beta: Vec<f64>,
    diag: Vec<f64>,
}

impl Qr {
    pub fn factor(a: &Matrix) -> Result<Qr> {
        let (n, k) = (a.rows, a.cols);
        let mut packed = vec![0.0; n * k];
        for r in 0..n {
            for c in 0..k {
                packed[c * n + r] = a.get(r, c);
            }
        }
        let scale = (0..k)
            .map(|c| norm2(&packed[c * n..(c + 1) * n]))
            .fold(0.0_f64, f64::max);
        let tol = RANK_TOLERANCE * scale;

        let mut beta = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut dependent = Vec::new();
        let mut pivot = 0;
        for j in 0..k {
            let (head, tail) = packed.split_at_mut((j + 1) * n);
            let col = &mut head[j * n..];
            let norm = norm2(&col[pivot..]);
            if pivot >= n || norm <= tol || norm == 0.0 {
                dependent.push(j);
                continue;
            }
            let x0 = col[pivot];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            col[pivot] -= alpha;
            let vtv = norm2(&col[pivot..]);
            let b = 2.0 / (vtv * vtv);
            for c in 0..(k - j - 1) {
                let other = &mut tail[c * n..(c + 1) * n];
                let s = dot(&col[pivot..], &other[pivot..]);
                axpy(-b * s, &col[pivot..], &mut other[pivot..]);
            }
            beta[j] = b;
            diag[j] = alpha;
            pivot += 1;
        }
        if !dependent.is_empty() {
            return Err(Error::RankDeficient { columns: dependent });
        }
        Ok(Qr {
            rows: n,
            cols: k,
            packed,
            beta,
            diag,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn reflector(&self, j: usize) -> &[f64] {
        &self.packed[j * self.rows + j..(j + 1) * self.rows]
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[j]
        } else {
            self.packed[j * self.rows + i]
        }
    }

    /// y ← Qᵀ y
    pub fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.cols {
            let v = self.reflector(j);
            let s = dot(v, &y[j..]);
            axpy(-self.beta[j] * s, v, &mut y[j..]);
        }
    }

    /// z ← Q z
    pub fn apply_q(&self, z: &mut [f64]) {
        for j in (0..self.cols).rev() {
            let v = self.reflector(j);
            let s = dot(v, &z[j..]);
            axpy(-self.beta[j] * s, v, &mut z[j..]);
        }
    }

    /// Solves `R x = b` in place (first `cols` entries of `b`).
    pub fn solve_r(&self, b: &mut [f64]) {
        for i in (0..self.cols).rev() {
            let mut s = b[i];
            for j in i + 1..self.cols {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// Solves `Rᵀ x = b` in place.
    pub fn solve_rt(&self, b: &mut [f64]) {
        for i in 0..self.cols {
            let mut s = b[i];
            for j in 0..i {
                s -= self.r(j, i) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// Least-squares coefficients minimizing `‖A x − y‖`.
    pub fn least_squares(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut t = y.to_vec();
        self.apply_qt(&mut t);
        t.truncate(self.cols);
        self.solve_r(&mut t);
        t
    }

    /// The vector `a` with `cᵀ x̂(y) = aᵀ y` for every right-hand side `y`,
    /// where `x̂(y)` is the least-squares solution. Equals `A (AᵀA)⁻¹ c`.
    pub fn functional(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.cols);
        let mut z = vec![0.0; self.rows];
        z[..self.cols].copy_from_slice(c);
        self.solve_rt(&mut z[..self.cols]);
        self.apply_q(&mut z);
        z
    }
}

/// Pivoted Cholesky of a symmetric positive semidefinite matrix.
///
/// Pivots smaller than `rel_tol` times the largest diagonal entry end the
/// factorization; the indices left over are reported as redundant.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    // lower factor of the permuted leading block, row-major n×n
    l: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedCholesky {
    pub fn factor(m: &Matrix, rel_tol: f64) -> PivotedCholesky {
        let n = m.rows;
        debug_assert_eq!(n, m.cols);
        let mut a = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let max_diag = (0..n).map(|i| m.get(i, i)).fold(0.0_f64, f64::max);
        let tol = rel_tol * max_diag;
        let mut rank = 0;
        for k in 0..n {
            // largest remaining diagonal; ties go to the lower index
            let mut best = k;
            for i in k + 1..n {
                if a[i * n + i] > a[best * n + best] {
                    best = i;
                }
            }
            if a[best * n + best] <= tol || a[best * n + best] <= 0.0 {
                break;
            }
            if best != k {
                swap_sym(&mut a, n, k, best);
                perm.swap(k, best);
            }
            let pivot = libm::sqrt(a[k * n + k]);
            a[k * n + k] = pivot;
            for i in k + 1..n {
                a[i * n + k] /= pivot;
            }
            for j in k + 1..n {
                let ljk = a[j * n + k];
                for i in j..n {
                    a[i * n + j] -= a[i * n + k] * ljk;
                }
                for i in j..n {
                    a[j * n + i] = a[i * n + j];
                }
            }
            rank += 1;
        }
        PivotedCholesky {
            n,
            l: a,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Original indices not used by the factorization (numerically redundant).
    pub fn redundant(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.perm[self.rank..].to_vec();
        out.sort_unstable();
        out
    }

    /// Solves `M x = b` restricted to the independent indices; redundant
    /// coordinates of `x` are zero.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let r = self.rank;
        let mut z: Vec<f64> = (0..r).map(|i| b[self.perm[i]]).collect();
        for i in 0..r {
            let mut s = z[i];
            for j in 0..i {
                s -= self.l[i * n + j] * z[j];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..r).rev() {
            let mut s = z[i];
            for j in i + 1..r {
                s -= self.l[j * n + i] * z[j];
            }
            z[i] = s / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in 0..r {
            x[self.perm[i]] = z[i];
        }
        x
    }

    /// Solves `L y = b` for the permuted lower factor (full rank only).
    /// Used to whiten vectors: `‖L⁻¹ P b‖² = bᵀ M⁻¹ b`.
    pub fn whiten(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z: Vec<f64> = (0..self.rank).map(|i| b[self.perm[i]]).collect();
        for i in 0..self.rank {
            let mut s = z[i];
            for j in 0..i {
                s -= self.l[i * n + j] * z[j];
            }
            z[i] = s / self.l[i * n + i];
        }
        z
    }
}

fn swap_sym(a: &mut [f64], n: usize, p: usize, q: usize) {
    for c in 0..n {
        a.swap(p * n + c, q * n + c);
    }
    for r in 0..n {
        a.swap(r * n + p, r * n + q);
    }
}
