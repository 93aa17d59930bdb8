//! Small dense linear algebra: Householder least squares over the reals and
//! Gaussian elimination over the complex numbers.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot size below which a column is treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Solves `min ||A x - b||` for a row-major `rows x cols` matrix `A` by
/// Householder QR. Fails if `A` is (numerically) rank deficient.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::shape("least squares system dimensions"));
    }
    if rows < cols {
        return Err(Error::DegenerateTrajectory(alloc::format!(
            "{rows} equations for {cols} unknowns"
        )));
    }
    let mut r = a.to_vec();
    let mut rhs = b.to_vec();
    let mut col_norms = vec![0.0; cols];
    for (j, n) in col_norms.iter_mut().enumerate() {
        *n = libm::sqrt((0..rows).map(|i| r[i * cols + j] * r[i * cols + j]).sum());
    }
    let scale = col_norms.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateTrajectory("all regressors are zero".into()));
    }

    let mut v = vec![0.0; rows];
    for k in 0..cols {
        let norm = libm::sqrt((k..rows).map(|i| r[i * cols + k] * r[i * cols + k]).sum());
        if norm <= RANK_TOL * scale {
            return Err(Error::DegenerateTrajectory(alloc::format!(
                "regression matrix is rank deficient at column {k}"
            )));
        }
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        for i in k..rows {
            v[i] = r[i * cols + k];
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..rows).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i] * r[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= f * v[i];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i] * rhs[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            rhs[i] -= f * v[i];
        }
    }

    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut acc = rhs[k];
        for j in k + 1..cols {
            acc -= r[k * cols + j] * x[j];
        }
        x[k] = acc / r[k * cols + k];
    }
    Ok(x)
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(alloc::format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] += value;
    }

    /// Extracts the sub-matrix at the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = ComplexMatrix::zeros(rows.len(), cols.len());
        for (oi, &i) in rows.iter().enumerate() {
            for (oj, &j) in cols.iter().enumerate() {
                out.set(oi, oj, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape("complex matmul inner dimension"));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape("complex subtraction dimensions"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Solves `self * X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.rows;
        if self.cols != n || rhs.rows != n {
            return Err(Error::shape("complex solve requires a square system"));
        }
        let m = rhs.cols;
        let mut a = self.clone();
        let mut x = rhs.clone();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a.get(i, k).norm().total_cmp(&a.get(j, k).norm()))
                .unwrap_or(k);
            if a.get(pivot, k).norm() == 0.0 {
                return Err(Error::Input("singular admittance matrix".into()));
            }
            if pivot != k {
                for j in 0..n {
                    a.data.swap(k * n + j, pivot * n + j);
                }
                for j in 0..m {
                    x.data.swap(k * m + j, pivot * m + j);
                }
            }
            let inv = a.get(k, k).inv();
            for i in k + 1..n {
                let f = a.get(i, k) * inv;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k..n {
                    let v = a.get(k, j);
                    a.add(i, j, -f * v);
                }
                for j in 0..m {
                    let v = x.get(k, j);
                    x.add(i, j, -f * v);
                }
            }
        }
        for k in (0..n).rev() {
            let inv = a.get(k, k).inv();
            for j in 0..m {
                let mut acc = x.get(k, j);
                for p in k + 1..n {
                    acc -= a.get(k, p) * x.get(p, j);
                }
                x.set(k, j, acc * inv);
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_solution() {
        // rows [t, sin t, 1]
        let truth = [0.7, -2.0, 0.25];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            let row = [t, libm::sin(t), 1.0];
            b.push(row.iter().zip(&truth).map(|(r, c)| r * c).sum());
            a.extend_from_slice(&row);
        }
        let x = least_squares(&a, 20, 3, &b).unwrap();
        for (got, want) in x.iter().zip(&truth) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_rejects_collinear_columns() {
        let a = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let err = least_squares(&a, 3, 2, &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateTrajectory(_)));
    }

    #[test]
    fn complex_solve_inverts_product() {
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(1.0, -3.0),
                Complex64::new(0.5, 1.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(4.0, 0.0),
            ],
        )
        .unwrap();
        let x = ComplexMatrix::from_vec(2, 1, vec![Complex64::new(1.0, 1.0), Complex64::new(-2.0, 0.5)])
            .unwrap();
        let b = a.matmul(&x).unwrap();
        let solved = a.solve(&b).unwrap();
        for (s, t) in solved.data.iter().zip(&x.data) {
            assert!((s - t).norm() < 1e-12);
        }
    }
}
