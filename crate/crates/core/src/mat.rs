//! Dense row-major matrices and the accumulate-style kernels used by the
//! network engine and the integrators.
//!
//! The multiply kernels are written in the `c[i] += a * b[k]` (axpy) form
//! on contiguous rows: that shape auto-vectorizes without any floating-point
//! reassociation, so results are deterministic and identical across runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from a flat row-major buffer. Panics if the length mismatches.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat buffer length mismatch");
        Mat { rows, cols, data }
    }

    /// n×n diagonal matrix from its diagonal entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Mat::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Stack a slice of equally long rows into a matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { rows: rows.len(), cols, data }
    }

    pub fn is_finite(&self) -> bool {
        math::all_finite(&self.data)
    }
}

/// y += a * x over contiguous slices.
#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// c += a · b with shapes (m×k)·(k×n) → (m×n).
pub fn gemm_acc(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.cols, b.rows, "gemm_acc: inner dimensions");
    assert_eq!(c.rows, a.rows, "gemm_acc: output rows");
    assert_eq!(c.cols, b.cols, "gemm_acc: output cols");
    for i in 0..a.rows {
        let arow = a.row(i);
        let crow = c.row_mut(i);
        for (kk, &aik) in arow.iter().enumerate() {
            axpy(crow, aik, b.row(kk));
        }
    }
}

/// c += aᵀ · b with shapes (k×m)ᵀ·(k×n) → (m×n).
pub fn gemm_tn_acc(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.rows, b.rows, "gemm_tn_acc: inner dimensions");
    assert_eq!(c.rows, a.cols, "gemm_tn_acc: output rows");
    assert_eq!(c.cols, b.cols, "gemm_tn_acc: output cols");
    for r in 0..a.rows {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &ari) in arow.iter().enumerate() {
            axpy(c.row_mut(i), ari, brow);
        }
    }
}

/// y = A x for a small dense matrix.
pub fn matvec(a: &Mat, x: &[f64], y: &mut [f64]) {
    assert_eq!(a.cols, x.len(), "matvec: input length");
    assert_eq!(a.rows, y.len(), "matvec: output length");
    for i in 0..a.rows {
        y[i] = math::dot(a.row(i), x);
    }
}

/// Largest singular value by power iteration on AᵀA.
///
/// The start vector is a fixed, non-axis-aligned direction so the estimate is
/// deterministic. Returns 0 for an all-zero matrix.
pub fn spectral_norm(a: &Mat, iters: usize, tol: f64) -> f64 {
    if a.data.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    let n = a.cols;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
    let nv = math::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows];
    let mut atav = vec![0.0; n];
    let mut sigma = 0.0;
    for _ in 0..iters {
        matvec(a, &v, &mut av);
        // atav = Aᵀ (A v)
        atav.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..a.rows {
            axpy(&mut atav, av[i], a.row(i));
        }
        let norm = math::norm2(&atav);
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, ai) in v.iter_mut().zip(&atav) {
            *vi = ai / norm;
        }
        let new_sigma = math::sqrt(norm);
        if math::abs(new_sigma - sigma) <= tol * new_sigma.max(1.0) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}
