//! Small dense linear algebra over any [`Field`].

use std::collections::BTreeMap;
use std::ops::{Index, IndexMut};

use crate::scalar::Field;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Field> Matrix<T> {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "vector length must match column count");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| {
                acc + self[(i, k)].clone() * other[(k, j)].clone()
            })
        })
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Rank by Gaussian elimination with partial pivoting.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            if rank == a.rows {
                break;
            }
            let pivot = (rank..a.rows)
                .filter(|&r| !a[(r, col)].negligible())
                .max_by(|&r, &s| {
                    a[(r, col)]
                        .magnitude()
                        .partial_cmp(&a[(s, col)].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            let Some(p) = pivot else { continue };
            a.swap_rows(p, rank);
            let pv = a[(rank, col)].clone();
            for r in rank + 1..a.rows {
                if a[(r, col)].negligible() {
                    continue;
                }
                let factor = a[(r, col)].clone() / pv.clone();
                for c in col..a.cols {
                    let delta = factor.clone() * a[(rank, c)].clone();
                    a[(r, c)] = a[(r, c)].clone() - delta;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix<T>) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).magnitude())
            .fold(0.0, f64::max)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Sparse vector keyed by coordinate.
pub type SparseVec<T> = BTreeMap<usize, T>;

pub fn sparse_dot<T: Field>(a: &SparseVec<T>, b: &SparseVec<T>) -> T {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().fold(T::zero(), |acc, (k, v)| match large.get(k) {
        Some(w) => acc + v.clone() * w.clone(),
        None => acc,
    })
}

/// Gram–Schmidt without normalization; vectors with negligible residual are
/// dropped. Exact over rationals.
pub fn orthogonalize<T: Field>(vectors: impl IntoIterator<Item = SparseVec<T>>) -> Vec<SparseVec<T>> {
    let mut basis: Vec<(SparseVec<T>, T)> = Vec::new();
    for v in vectors {
        let mut r = v;
        for (b, bb) in &basis {
            let coeff = sparse_dot(&r, b) / bb.clone();
            if coeff.negligible() {
                continue;
            }
            for (k, bv) in b {
                let entry = r.entry(*k).or_insert_with(T::zero);
                *entry = entry.clone() - coeff.clone() * bv.clone();
            }
            r.retain(|_, x| !x.negligible());
        }
        let norm = sparse_dot(&r, &r);
        if !norm.negligible() && !r.is_empty() {
            basis.push((r, norm));
        }
    }
    basis.into_iter().map(|(b, _)| b).collect()
}
