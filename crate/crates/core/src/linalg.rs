//! Small dense matrices over a [`Scalar`].

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Float pivots below this magnitude are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::<S>::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if *a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * other[(k, j)].clone();
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix<S>) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    /// Row vector times matrix: `x · self`.
    pub fn left_mul(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.rows, "dimension mismatch");
        (0..self.cols)
            .map(|j| dot_iter(x.iter(), (0..self.rows).map(|i| &self[(i, j)])))
            .collect()
    }

    pub fn column_sums(&self) -> Vec<S> {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(S::zero(), |acc, i| acc + self[(i, j)].clone()))
            .collect()
    }

    /// Gauss-Jordan inverse; `None` when singular. Float mode uses partial
    /// pivoting and declares pivots below [`PIVOT_THRESHOLD`] singular.
    pub fn inverse(&self) -> Option<Matrix<S>> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::<S>::identity(n);
        for col in 0..n {
            let pivot_row = if S::EXACT {
                (col..n).find(|&r| a[(r, col)] != S::zero())?
            } else {
                let best = (col..n)
                    .max_by(|&r, &s| {
                        a[(r, col)]
                            .abs()
                            .partial_cmp(&a[(s, col)].abs())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("non-empty range");
                if a[(best, col)].abs() < S::tol(PIVOT_THRESHOLD) {
                    return None;
                }
                best
            };
            a.swap_rows(col, pivot_row);
            inv.swap_rows(col, pivot_row);
            let pivot = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / pivot.clone();
                inv[(col, j)] = inv[(col, j)].clone() / pivot.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)] == S::zero() {
                    continue;
                }
                let factor = a[(r, col)].clone();
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - factor.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - factor.clone() * inv[(col, j)].clone();
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix<S>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
            .fold(0.0, f64::max)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    dot_iter(a.iter(), b.iter())
}

fn dot_iter<'a, S: Scalar>(a: impl Iterator<Item = &'a S>, b: impl Iterator<Item = &'a S>) -> S {
    a.zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Ratio};

    #[test]
    fn exact_inverse_of_two_by_two() {
        let m = Matrix::from_rows(vec![
            vec![ratio(1, 1), ratio(-2, 5)],
            vec![ratio(-1, 6), ratio(5, 6)],
        ]);
        let inv = m.inverse().unwrap();
        assert_eq!(inv.mul(&m), Matrix::<Ratio>::identity(2));
        assert_eq!(inv[(0, 0)], ratio(25, 23));
    }

    #[test]
    fn singular_is_none() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.inverse().is_none());
        let m = Matrix::from_rows(vec![vec![ratio(0, 1)]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn float_inverse_pivots() {
        let m = Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let inv = m.inverse().unwrap();
        assert!(inv.max_abs_diff(&m) < 1e-15);
    }

    #[test]
    fn left_mul_and_column_sums() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.left_mul(&[1.0, 1.0]), vec![4.0, 6.0]);
        assert_eq!(m.column_sums(), vec![4.0, 6.0]);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }
}
