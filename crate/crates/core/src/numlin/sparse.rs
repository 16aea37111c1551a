use crate::scalar::Scalar;

/// Compressed-row sparse matrix; column indices strictly increase within a row
/// and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Duplicate entries are summed; entries that end up zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut t: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        let mut k = 0;
        while k < t.len() {
            let (r, c, mut v) = t[k];
            k += 1;
            while k < t.len() && t[k].0 == r && t[k].1 == c {
                v += t[k].2;
                k += 1;
            }
            if v != T::zero() {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one())))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j])).collect()
    }

    /// `x^T A`, as a vector.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                for (j, v) in self.row(i) {
                    out[j] += xi * v;
                }
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.row(i).fold(T::zero(), |acc, (_, v)| acc + v)).collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub fn map(&self, f: impl Fn(usize, usize, T) -> T) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(i, j, v)| (i, j, f(i, j, v))))
    }
}
