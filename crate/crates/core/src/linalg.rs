//! Small dense matrices. Factorizations are delegated to nalgebra.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidProblem("ragged matrix rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in product");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn scale(&self, f: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| f * self[(i, j)])
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Numerical rank: singular values above `rel_tol` times the largest.
    pub fn rank(&self, rel_tol: f64) -> usize {
        if self.rows == 0 || self.cols == 0 || self.max_abs() == 0.0 {
            return 0;
        }
        let sv = self.to_nalgebra().singular_values();
        let top = sv.max();
        sv.iter().filter(|&&x| x > rel_tol * top).count()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: LU<f64, Dyn, Dyn>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        Lu { lu: a.to_nalgebra().lu() }
    }

    pub fn det(&self) -> f64 {
        self.lu.determinant()
    }

    pub fn is_singular(&self) -> bool {
        !self.lu.is_invertible()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self
            .lu
            .solve(&DVector::from_column_slice(b))
            .ok_or(Error::SingularMatrix)?;
        Ok(x.iter().copied().collect())
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let inv = self.lu.try_inverse().ok_or(Error::SingularMatrix)?;
        Ok(Matrix::from_nalgebra(&inv))
    }
}

pub fn det(a: &Matrix) -> f64 {
    Lu::new(a).det()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn det_of_known_matrices() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_relative_eq!(det(&a), 1.0);
        let b = Matrix::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        assert_relative_eq!(det(&b), 4.0, epsilon = 1e-14);
        let swap = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_relative_eq!(det(&swap), -1.0);
    }

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::from_rows(&[vec![4.0, 3.0], vec![6.0, 3.0]]).unwrap();
        let lu = Lu::new(&a);
        let x = lu.solve(&[10.0, 12.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-14);
        let inv = lu.inverse().unwrap();
        let id = a.mul(&inv);
        assert!(id.sub(&Matrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let lu = Lu::new(&a);
        assert_eq!(lu.det(), 0.0);
        assert_eq!(lu.solve(&[1.0, 1.0]), Err(Error::SingularMatrix));
    }

    #[test]
    fn rank_cases() {
        let periodic = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert_eq!(periodic.rank(1e-12), 1);
        assert_eq!(Matrix::zeros(2, 4).rank(1e-12), 0);
        let dup = Matrix::from_rows(&[vec![1.0, 0.0, 2.0, 0.0], vec![1.0, 0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(dup.rank(1e-12), 1);
        let dirichlet =
            Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(dirichlet.rank(1e-12), 2);
    }
}
