//! Small dense linear algebra for the regression blocks (J, ℓ, k are tiny).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{log, sqrt};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, d: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(alloc::format!("matrix data has {} entries, expected {rows}x{cols}", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return invalid(alloc::format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Symmetric positive-definite check via Cholesky.
    pub fn is_spd(&self) -> bool {
        self.is_symmetric(1e-12 * self.max_abs().max(1.0)) && Cholesky::new(self, "matrix").is_ok()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inverse_spd(&self, what: &'static str) -> Result<Matrix> {
        Cholesky::new(self, what).map(|c| c.inverse())
    }

    /// Determinant by partial-pivot LU.
    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap_or(k);
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        det
    }

    /// Solve `A x = b` by partial-pivot Gaussian elimination. `None` when a
    /// pivot vanishes.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "solve with a non-square matrix");
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap_or(k);
            if a[p * n + k] == 0.0 || !a[p * n + k].is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Some(x)
    }

    /// Numerical rank from the Gram matrix eigen-free test: column-pivoted
    /// Gram–Schmidt with relative tolerance.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let scale = self.max_abs().max(1.0) * sqrt(self.rows as f64);
        for j in 0..self.cols {
            let mut c = self.column(j);
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(&c, b);
                    for (ci, bi) in c.iter_mut().zip(b) {
                        *ci -= proj * bi;
                    }
                }
            }
            let norm = sqrt(dot(&c, &c));
            if norm > rel_tol * scale {
                basis.push(c.into_iter().map(|x| x / norm).collect());
            }
        }
        basis.len()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &Matrix, what: &'static str) -> Result<Self> {
        if a.rows != a.cols {
            return invalid("Cholesky of a non-square matrix");
        }
        let n = a.rows;
        let mut l = vec![0.0; n * n];
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                let condition = if dmin.is_finite() && dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
                return Err(Error::NotPositiveDefinite { what, condition });
            }
            let djj = sqrt(d);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `ln det A`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * log(self.l[i * self.n + i])).sum()
    }

    /// `L z`.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| (0..=i).map(|k| self.l[i * n + k] * z[k]).sum()).collect()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.l[k * n + i] * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = Matrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..self.n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// `xᵀ A x` computed as `‖Lᵀx‖²`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| {
                let s: f64 = (i..n).map(|k| self.l[k * n + i] * x[k]).sum();
                s * s
            })
            .sum()
    }

    /// `xᵀ A⁻¹ x` computed as `‖L⁻¹x‖²`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let y = self.forward(x);
        dot(&y, &y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Matrix {
        Matrix::from_rows(&[vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]]).unwrap()
    }

    #[test]
    fn solve_with_pivoting() {
        // Zero leading entry forces a row swap.
        let a = Matrix::from_row_major(3, 3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 3.0]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| dot(a.row(i), &x)).collect();
        let got = a.solve(&b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-14);
        }
        let singular = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(singular.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn cholesky_solves_and_inverts() {
        let a = spd3();
        let c = Cholesky::new(&a, "a").unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((c.log_det() - a.determinant().ln()).abs() < 1e-12);
        assert!((c.quad_form(&b) - crate::linalg::dot(&b, &a.mul_vec(&b))).abs() < 1e-12);
        assert!((c.inv_quad_form(&b) - crate::linalg::dot(&b, &x)).abs() < 1e-12);
    }

    #[test]
    fn non_spd_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::new(&a, "a"), Err(Error::NotPositiveDefinite { .. })));
        assert!(!a.is_spd());
        assert!(spd3().is_spd());
    }

    #[test]
    fn rank_detects_dependent_columns() {
        let m =
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 1.0], vec![1.0, 5.0, 6.0], vec![1.0, 1.0, 2.0]])
                .unwrap();
        assert_eq!(m.rank(1e-10), 2);
        assert_eq!(Matrix::identity(4).rank(1e-10), 4);
    }
}
