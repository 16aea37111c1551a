use super::lu::band_order;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `-Q = LU` for a sub-generator `Q` (off-diagonal entries nonnegative, row `i`
/// summing to `-out[i]`), by Grassmann-Taksar-Heyman elimination: each pivot is
/// recomputed from the remaining off-diagonal entries and the accumulated
/// out-rates, so neither the factorization nor the left solves subtract.
/// Componentwise relative accuracy survives even when `Q` is badly conditioned,
/// e.g. for metastable chains.
#[derive(Debug, Clone)]
pub struct GthFactorization<T> {
    n: usize,
    perm: Vec<usize>,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<T>,
    singular: bool,
}

/// The stored diagonal of `q` is ignored; `out` supplies the row deficits.
pub fn gth_factor<T: Scalar>(q: &SparseMatrix<T>, out: &[T]) -> GthFactorization<T> {
    assert_eq!(q.nrows(), q.ncols(), "GTH elimination needs a square matrix");
    assert_eq!(out.len(), q.nrows());
    let n = q.nrows();
    let (perm, inv, kl, ku) = band_order(q);
    let width = kl + ku + 1;
    let at = |i: usize, j: usize| i * width + (j + kl - i);
    let mut ab = vec![T::zero(); n * width];
    for (i, j, v) in q.triplets() {
        if i != j {
            // -Q off the diagonal
            ab[at(inv[i], inv[j])] = -v;
        }
    }
    let mut deficit: Vec<T> = (0..n).map(|i| out[perm[i]].max(T::zero())).collect();
    let mut singular = false;
    for k in 0..n {
        let right = (n - 1).min(k + ku);
        let mut pivot = deficit[k];
        for j in k + 1..=right {
            pivot -= ab[at(k, j)];
        }
        if !(pivot > T::zero()) || !pivot.is_finite() {
            singular = true;
            break;
        }
        ab[at(k, k)] = pivot;
        for i in k + 1..=(n - 1).min(k + kl) {
            let m = ab[at(i, k)];
            if m == T::zero() {
                continue;
            }
            let l = m / pivot;
            ab[at(i, k)] = l;
            for j in k + 1..=right {
                if j != i {
                    let u = ab[at(k, j)];
                    ab[at(i, j)] -= l * u;
                }
            }
            let dk = deficit[k];
            deficit[i] -= l * dk;
        }
    }
    GthFactorization { n, perm, kl, ku, width, ab, singular }
}

impl<T: Scalar> GthFactorization<T> {
    /// Some remaining block cannot leave: `Q` restricted to it is a generator.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `x` with `x^T (-Q) = b^T`; nonnegative whenever `b` is.
    pub fn solve_left(&self, b: &[T]) -> Result<Vec<T>> {
        self.solve_left_impl(b, false)
    }

    /// A positive multiple of [`Self::solve_left`], rescaled on the way so that
    /// nearly closed chains with huge expected sojourns do not overflow.
    pub fn solve_left_direction(&self, b: &[T]) -> Result<Vec<T>> {
        self.solve_left_impl(b, true)
    }

    fn solve_left_impl(&self, b: &[T], rescale: bool) -> Result<Vec<T>> {
        if self.singular {
            return Err(Error::Singular("sub-generator has a closed block".into()));
        }
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        let big = T::of(1e150);
        let shrink = |x: &mut [T]| x.iter_mut().for_each(|v| *v = *v / big);
        // U^T w = b
        for k in 0..n {
            let row = k * width;
            let mut wk = x[k] / self.ab[row + kl];
            if rescale && wk.abs() > big {
                shrink(&mut x);
                wk = x[k] / self.ab[row + kl];
            }
            x[k] = wk;
            if wk != T::zero() {
                for j in k + 1..=(n - 1).min(k + ku) {
                    x[j] -= self.ab[row + (j + kl - k)] * wk;
                }
            }
        }
        // L^T x = w
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(n - 1).min(k + kl) {
                s -= self.ab[i * width + (k + kl - i)] * x[i];
            }
            x[k] = s;
            if rescale && s.abs() > big {
                shrink(&mut x);
            }
        }
        let mut res = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            res[p] = x[i];
        }
        Ok(res)
    }
}
