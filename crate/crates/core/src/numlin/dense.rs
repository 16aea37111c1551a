use super::lu::LuFactorization;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::ops::{Index, IndexMut};

/// Small row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
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

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: T) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn lu(&self) -> LuFactorization<T> {
        assert_eq!(self.rows, self.cols);
        LuFactorization::from_dense(self.rows, &self.data)
    }

    /// `B M^{-1}` for this matrix `B`, via one factorization of `M^T`.
    pub fn solve_right(&self, m: &Self) -> Result<Self> {
        assert_eq!(self.cols, m.rows);
        let f = m.transpose().lu();
        if f.is_singular() {
            return Err(Error::Singular(format!("{}x{} block is singular", m.rows, m.cols)));
        }
        let mut out = Self::zeros(self.rows, m.cols);
        for i in 0..self.rows {
            let x = f.solve(self.row(i))?;
            out.data[i * m.cols..(i + 1) * m.cols].copy_from_slice(&x);
        }
        Ok(out)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Least-squares solution of `A x = b` (`A` with at least as many rows as
/// columns) by Householder QR. Fails when `A` is numerically rank deficient.
pub fn least_squares<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "least squares needs rows >= cols");
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut y = b.to_vec();
    let scale = a.data().iter().fold(T::zero(), |s, v| s.max(v.abs()));
    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::of(2.0);
        for j in k..n {
            let dot: T = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = two * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
        let dot: T = (k..m).map(|i| v[i - k] * y[i]).sum();
        let f = two * dot / vnorm2;
        for i in k..m {
            y[i] -= f * v[i - k];
        }
    }
    let floor = T::of(T::PIVOT_FLOOR) * scale * T::of(m.max(1) as f64);
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let d = r[(k, k)];
        if d.abs() <= floor {
            return Err(Error::Singular(format!("least-squares system is rank deficient at column {k}")));
        }
        let mut s = y[k];
        for j in k + 1..n {
            s -= r[(k, j)] * x[j];
        }
        x[k] = s / d;
    }
    Ok(x)
}
