//! Square dense matrices at reduced-network scale, and the operator trait
//! shared with the implicit scattering block.

use crate::error::{Error, Result};

/// Linear map on `R^dim` with access to its transpose.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `y = Aᵀ x`
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

/// Row-major `n × n` matrix of finite `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite matrix entry {x}"
            )));
        }
        Ok(DenseMatrix { n, values })
    }

    /// Convenience constructor for literals; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            values.extend_from_slice(row);
        }
        DenseMatrix { n, values }
    }

    /// Builds a matrix column by column.
    pub fn from_columns<F: FnMut(usize) -> Vec<f64>>(n: usize, mut column: F) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            let col = column(j);
            assert_eq!(col.len(), n);
            for (i, v) in col.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.values.chunks_exact(self.n.max(1)) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Scales every column to sum 1. Zero columns are left untouched.
    pub fn normalize_columns(&mut self) {
        let sums = self.column_sums();
        for i in 0..self.n {
            for (j, &s) in sums.iter().enumerate() {
                if s != 0.0 {
                    self.values[i * self.n + j] /= s;
                }
            }
        }
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        DenseMatrix {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }
}

pub(crate) fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stationary vector of a column-stochastic dense matrix by power iteration
/// from the uniform vector, stopping once `‖M p − p‖₁ ≤ tol`.
pub fn stationary(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = m.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        m.apply(&p, &mut next);
        let mass: f64 = next.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::Numerical(format!("iterate lost its mass ({mass})")));
        }
        next.iter_mut().for_each(|x| *x /= mass);
        residual = l1_dist(&next, &p);
        std::mem::swap(&mut p, &mut next);
        if residual <= tol {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence {
        what: "dense stationary iteration",
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_closed_forms() {
        let p = stationary(
            &DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]),
            1e-12,
            100,
        )
        .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        // p1/p2 = 0.5/0.4
        let p = stationary(
            &DenseMatrix::from_rows(&[&[0.6, 0.5], &[0.4, 0.5]]),
            1e-14,
            1000,
        )
        .unwrap();
        assert!((p[0] - 5.0 / 9.0).abs() < 1e-13, "{p:?}");
        assert!((p[1] - 4.0 / 9.0).abs() < 1e-13, "{p:?}");
    }

    #[test]
    fn oscillating_iteration_reports_non_convergence() {
        // Uniform start lands on the 2-cycle {0, 1} and alternates forever.
        let m = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]);
        match stationary(&m, 1e-12, 50) {
            Err(Error::NoConvergence {
                iterations: 50,
                residual,
                ..
            }) => assert!(residual > 0.1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transpose_apply_matches_transpose_matrix() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0, 0.5], &[0.0, -1.0, 3.0], &[4.0, 0.25, 1.0]]);
        let x = [0.3, -0.7, 1.1];
        let mut a = [0.0; 3];
        m.apply_transpose(&x, &mut a);
        let b = m.transpose().matvec(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_columns_skips_zero_columns() {
        let mut m = DenseMatrix::from_rows(&[&[1.0, 0.0], &[3.0, 0.0]]);
        m.normalize_columns();
        assert_eq!(m.values(), &[0.25, 0.0, 0.75, 0.0]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::from_row_major(1, vec![f64::NAN]).is_err());
        assert!(DenseMatrix::from_row_major(2, vec![0.0; 3]).is_err());
    }
}
