use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::VecDeque;

/// Below this order a factorization is stored densely.
pub const DENSE_CUTOFF: usize = 64;

/// LU factorization with partial pivoting.
///
/// Large matrices are reordered by reverse Cuthill-McKee and factored in band
/// storage (row interchanges widen the upper band by `kl`). Small ones use the
/// same kernel with full bandwidth.
#[derive(Debug, Clone)]
pub struct LuFactorization<T> {
    n: usize,
    perm: Vec<usize>,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<T>,
    piv: Vec<usize>,
    singular: bool,
    pivot_floor: T,
}

fn rcm_order(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // returns (a least-degree node of the last BFS layer, eccentricity)
    let bfs_last = |start: usize, seen: &[bool]| -> (usize, usize) {
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut far = (start, 0);
        while let Some(v) = q.pop_front() {
            let d = dist[v];
            if d > far.1 || (d == far.1 && degree[v] < degree[far.0]) {
                far = (v, d);
            }
            for &w in &adj[v] {
                if dist[w] == usize::MAX && !seen[w] {
                    dist[w] = d + 1;
                    q.push_back(w);
                }
            }
        }
        far
    };
    for s in 0..n {
        if placed[s] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = s;
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, e) = bfs_last(start, &placed);
            if e <= ecc && start != s {
                break;
            }
            start = far;
            ecc = e;
        }
        let begin = order.len();
        placed[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                if !placed[w] {
                    placed[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order.reverse();
    order
}

impl<T: Scalar> LuFactorization<T> {
    fn factor_band(n: usize, perm: Vec<usize>, kl: usize, ku: usize, entries: impl Iterator<Item = (usize, usize, T)>, scale: T) -> Self {
        let width = 2 * kl + ku + 1;
        let mut ab = vec![T::zero(); n * width];
        for (i, j, v) in entries {
            ab[i * width + (j + kl - i)] = v;
        }
        let pivot_floor = T::of(T::PIVOT_FLOOR) * scale;
        let mut piv = vec![0; n];
        let mut singular = n > 0 && scale == T::zero();
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let last = (n - 1).min(k + kl);
            let right = (n - 1).min(k + kl + ku);
            let mut p = k;
            let mut best = ab[at(k, k)].abs();
            for i in k + 1..=last {
                let v = ab[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if !(best >= pivot_floor) || best == T::zero() {
                singular = true;
                continue;
            }
            if p != k {
                for j in k..=right {
                    ab.swap(at(k, j), at(p, j));
                }
            }
            let pivot = ab[at(k, k)];
            for i in k + 1..=last {
                let l = ab[at(i, k)] / pivot;
                ab[at(i, k)] = l;
                if l != T::zero() {
                    let (ri, rk) = (i * width, k * width);
                    for j in k + 1..=right {
                        let u = ab[rk + (j + kl - k)];
                        ab[ri + (j + kl - i)] -= l * u;
                    }
                }
            }
        }
        LuFactorization { n, perm, kl, ku, width, ab, piv, singular, pivot_floor }
    }

    /// Factors a dense row-major `n x n` matrix.
    pub fn from_dense(n: usize, a: &[T]) -> Self {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let k = n.saturating_sub(1);
        let entries = (0..n).flat_map(move |i| (0..n).map(move |j| (i, j, a[i * n + j])));
        Self::factor_band(n, (0..n).collect(), k, k, entries, scale)
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn pivot_floor(&self) -> T {
        self.pivot_floor
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if self.singular {
            return Err(Error::Singular("cannot solve with a singular factorization".into()));
        }
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let (kl, ku, width) = (self.kl, self.ku, self.width);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != T::zero() {
                for i in k + 1..=(n - 1).min(k + kl) {
                    x[i] -= self.ab[i * width + (k + kl - i)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = k * width;
            let mut s = x[k];
            for j in k + 1..=(n - 1).min(k + kl + ku) {
                s -= self.ab[row + (j + kl - k)] * x[j];
            }
            x[k] = s / self.ab[row + kl];
        }
        let mut out = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }
}

/// Reverse Cuthill-McKee order of a square matrix: `(perm, inverse, kl, ku)`.
pub(crate) fn band_order<T: Scalar>(a: &SparseMatrix<T>) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let perm = rcm_order(n, &adj);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for (i, j, _) in a.triplets() {
        let (pi, pj) = (inv[i], inv[j]);
        if pi > pj {
            kl = kl.max(pi - pj);
        } else {
            ku = ku.max(pj - pi);
        }
    }
    (perm, inv, kl, ku)
}

/// Factors a square sparse matrix; singularity is reported by the flag.
pub fn lu_factor<T: Scalar>(a: &SparseMatrix<T>) -> LuFactorization<T> {
    assert_eq!(a.nrows(), a.ncols(), "LU factorization needs a square matrix");
    let n = a.nrows();
    let scale = a.max_abs();
    if n < DENSE_CUTOFF {
        let mut d = vec![T::zero(); n * n];
        for (i, j, v) in a.triplets() {
            d[i * n + j] = v;
        }
        let mut f = LuFactorization::from_dense(n, &d);
        f.pivot_floor = T::of(T::PIVOT_FLOOR) * scale;
        return f;
    }
    let (perm, inv, kl, ku) = band_order(a);
    let entries = a.triplets().map(|(i, j, v)| (inv[i], inv[j], v));
    LuFactorization::factor_band(n, perm, kl, ku, entries, scale)
}
