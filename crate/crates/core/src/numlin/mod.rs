//! Sparse assembly, LU and GTH factorizations, and least squares.

mod dense;
mod gth;
mod lu;
mod sparse;

pub use dense::{least_squares, DenseMatrix};
pub use gth::{gth_factor, GthFactorization};
pub use lu::{lu_factor, LuFactorization, DENSE_CUTOFF};
pub use sparse::SparseMatrix;

use crate::error::Result;
use crate::model::ReactionNetwork;
use crate::statespace::Truncation;

/// The truncated rate matrix together with the per-state rates it is built from.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    /// `q(x, y)` for `x, y` in the truncation; the diagonal holds the full `-q(x)`.
    pub q: SparseMatrix<f64>,
    /// Full exit rate `q(x)`.
    pub exit: Vec<f64>,
    /// Rate of leaving the truncation, `q_o(x)`.
    pub q_out: Vec<f64>,
}

pub fn truncated_generator(net: &ReactionNetwork, t: &Truncation) -> Result<TruncatedGenerator> {
    let n = t.len();
    let mut trip = Vec::with_capacity(5 * n);
    let mut exit = Vec::with_capacity(n);
    let mut q_out = Vec::with_capacity(n);
    for (i, x) in t.states().iter().enumerate() {
        let row = net.rate_row(x)?;
        let q: f64 = row.iter().map(|(_, r)| r).sum();
        let mut out = 0.0;
        for (y, r) in row {
            match t.index_of(&y) {
                Some(j) => trip.push((i, j, r)),
                None => out += r,
            }
        }
        trip.push((i, i, -q));
        exit.push(q);
        q_out.push(out);
    }
    Ok(TruncatedGenerator { q: SparseMatrix::from_triplets(n, n, trip), exit, q_out })
}

/// `Q_r`: rate matrix restricted to the truncation, full exit rates on the diagonal.
pub fn assemble_qr(net: &ReactionNetwork, t: &Truncation) -> Result<SparseMatrix<f64>> {
    Ok(truncated_generator(net, t)?.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::statespace::{build_sublevel_truncation, NormLikeFn, DEFAULT_STATE_CAP};

    #[test]
    fn bdp_assembly_by_hand() {
        let net = parse_model("species X\nreaction 0 -> X : 2\nreaction X -> 0 : X\n").unwrap();
        let w = NormLikeFn::parse(&net, "X").unwrap();
        let t = build_sublevel_truncation(&net, &w, 3.0, &[], DEFAULT_STATE_CAP).unwrap();
        let q = assemble_qr(&net, &t).unwrap();
        assert_eq!(q.to_dense(), vec![vec![-2.0, 2.0, 0.0], vec![1.0, -3.0, 2.0], vec![0.0, 2.0, -4.0]]);
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let f = lu_factor(&SparseMatrix::<f64>::identity(3));
        assert_eq!(f.solve(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let f = lu_factor(&SparseMatrix::from_triplets(1, 1, [(0, 0, 2.0)]));
        assert_eq!(f.solve(&[4.0]).unwrap(), vec![2.0]);
        let f = lu_factor(&SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]));
        assert!(f.is_singular());
        assert!(f.solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn single_precision_kernel() {
        let a = SparseMatrix::<f32>::from_triplets(2, 2, [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let x = lu_factor(&a).solve(&[1.0, 2.0]).unwrap();
        assert!((x[0] - 0.1).abs() < 1e-6 && (x[1] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn banded_path_matches_dense_path() {
        // tridiagonal 200x200, scrambled by a permutation so RCM has work to do
        let n = 200;
        let p: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((p[i], p[i], 4.0 + i as f64 * 0.01));
            if i + 1 < n {
                trip.push((p[i], p[i + 1], -1.0));
                trip.push((p[i + 1], p[i], -1.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, trip);
        let f = lu_factor(&a);
        assert!(f.bandwidth().0 <= 2 && f.bandwidth().1 <= 2, "{:?}", f.bandwidth());
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        let r = a.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn least_squares_consistent_system() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]);
        let x = least_squares(&a, &[1.0, 4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        assert!(least_squares(&a, &[1.0, 2.0, 3.0]).is_err());
    }
}
