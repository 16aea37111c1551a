//! Matrix-analytic scheme for level-dependent quasi-birth-death processes.

use crate::dist::TruncatedDistribution;
use crate::error::{Error, Result};
use crate::model::ReactionNetwork;
use crate::numlin::{least_squares, truncated_generator, DenseMatrix, SparseMatrix};
use crate::statespace::{LevelStructure, Truncation};
use std::sync::Arc;

/// Block-tridiagonal pieces of `Q_r`, indexed by level.
#[derive(Debug, Clone)]
pub struct QbdBlocks {
    pub truncation: Arc<Truncation>,
    pub levels: LevelStructure,
    /// `Q^l`, within level `l`.
    pub diag: Vec<DenseMatrix<f64>>,
    /// `Q^l_+`, from level `l` to `l + 1` (absent for the top level).
    pub up: Vec<DenseMatrix<f64>>,
    /// `Q^l_-`, from level `l` to `l - 1`; `down[0]` is an empty `|L_0| x 0` block.
    pub down: Vec<DenseMatrix<f64>>,
}

pub fn extract_blocks(net: &ReactionNetwork, t: &Arc<Truncation>, levels: &LevelStructure) -> Result<QbdBlocks> {
    let q = truncated_generator(net, t)?.q;
    blocks_from_matrix(t.clone(), &q, levels)
}

pub fn blocks_from_matrix(t: Arc<Truncation>, q: &SparseMatrix<f64>, levels: &LevelStructure) -> Result<QbdBlocks> {
    let nl = levels.n_levels();
    if nl == 0 {
        return Err(Error::Invalid("no levels".into()));
    }
    let mut pos = vec![0; t.len()];
    for lv in &levels.levels {
        for (p, &i) in lv.iter().enumerate() {
            pos[i] = p;
        }
    }
    let size = |l: usize| levels.levels[l].len();
    let mut diag: Vec<_> = (0..nl).map(|l| DenseMatrix::zeros(size(l), size(l))).collect();
    let mut up: Vec<_> = (0..nl - 1).map(|l| DenseMatrix::zeros(size(l), size(l + 1))).collect();
    let mut down: Vec<_> = (0..nl).map(|l| DenseMatrix::zeros(size(l), if l == 0 { 0 } else { size(l - 1) })).collect();
    for (i, j, v) in q.triplets() {
        let (li, lj) = (levels.level_of[i], levels.level_of[j]);
        let (a, b) = (pos[i], pos[j]);
        if li == lj {
            diag[li][(a, b)] = v;
        } else if lj == li + 1 {
            up[li][(a, b)] = v;
        } else if li == lj + 1 {
            down[li][(a, b)] = v;
        } else {
            return Err(Error::Invalid(format!(
                "rate {v:e} from {} (level {li}) to {} (level {lj}) skips a level",
                t.state(i),
                t.state(j)
            )));
        }
    }
    Ok(QbdBlocks { truncation: t, levels: levels.clone(), diag, up, down })
}

impl QbdBlocks {
    pub fn n_levels(&self) -> usize {
        self.diag.len()
    }

    /// Puts the blocks back into a sparse matrix over truncation indices.
    pub fn reassemble(&self) -> SparseMatrix<f64> {
        let lv = &self.levels.levels;
        let mut trip = Vec::new();
        let mut push = |m: &DenseMatrix<f64>, rows: &[usize], cols: &[usize]| {
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in cols.iter().enumerate() {
                    if m[(a, b)] != 0.0 {
                        trip.push((i, j, m[(a, b)]));
                    }
                }
            }
        };
        for l in 0..self.n_levels() {
            push(&self.diag[l], &lv[l], &lv[l]);
            if l + 1 < self.n_levels() {
                push(&self.up[l], &lv[l], &lv[l + 1]);
            }
            if l > 0 {
                push(&self.down[l], &lv[l], &lv[l - 1]);
            }
        }
        let n = self.truncation.len();
        SparseMatrix::from_triplets(n, n, trip)
    }
}

/// `mats[l - 1]` holds `R^l`, `l = 1..L_r - 1`.
#[derive(Debug, Clone)]
pub struct RMatrixSequence {
    pub mats: Vec<DenseMatrix<f64>>,
    /// How the top of the recursion was seeded.
    pub terminal: &'static str,
}

impl RMatrixSequence {
    /// Supplied matrices, e.g. exact limits.
    pub fn from_matrices(mats: Vec<DenseMatrix<f64>>) -> Self {
        RMatrixSequence { mats, terminal: "supplied" }
    }
}

fn clip_negatives(m: &mut DenseMatrix<f64>, l: usize) -> Result<()> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m[(i, j)];
            if v < 0.0 {
                if v < -1e-12 {
                    return Err(Error::Numerical(format!("R^{l} has a negative entry {v:e}")));
                }
                m[(i, j)] = 0.0;
            }
        }
    }
    Ok(())
}

/// `R^l = -Q^{l-1}_+ (Q^l + R^{l+1} Q^{l+1}_-)^{-1}` downwards from `R^{L_r} = 0`.
pub fn r_matrix_recursion(blocks: &QbdBlocks, l_r: usize) -> Result<RMatrixSequence> {
    if l_r < 2 {
        return Err(Error::Invalid("the recursion needs at least two levels".into()));
    }
    if l_r > blocks.n_levels() {
        return Err(Error::Invalid(format!("level cut-off {l_r} exceeds the {} levels available", blocks.n_levels())));
    }
    let mut mats = vec![DenseMatrix::zeros(0, 0); l_r - 1];
    let mut next: Option<DenseMatrix<f64>> = None;
    for l in (1..l_r).rev() {
        let m = match &next {
            Some(r) => blocks.diag[l].add(&r.matmul(&blocks.down[l + 1])),
            None => blocks.diag[l].clone(),
        };
        let mut r = blocks.up[l - 1].scale(-1.0).solve_right(&m).map_err(|_| {
            Error::Singular(format!("level {l} block of the R-recursion is singular"))
        })?;
        clip_negatives(&mut r, l)?;
        mats[l - 1] = r.clone();
        next = Some(r);
    }
    Ok(RMatrixSequence { mats, terminal: "zero" })
}

/// Level-0 equations stacked with the normalization and solved in the least-squares
/// sense, then `pi_l = rho_0 Gamma^l`, rescaled to unit mass.
pub fn ldqbdp_solve(blocks: &QbdBlocks, rs: &RMatrixSequence) -> Result<TruncatedDistribution> {
    let l_r = rs.mats.len() + 1;
    if l_r < 2 {
        return Err(Error::Invalid("the recursion needs at least two levels".into()));
    }
    let n0 = blocks.diag[0].rows();
    // Gamma^l, l = 0..L_r-1
    let mut gammas = vec![DenseMatrix::identity(n0)];
    for r in &rs.mats {
        let g = gammas.last().unwrap().matmul(r);
        gammas.push(g);
    }
    let mut s = vec![0.0; n0];
    for g in &gammas {
        for (a, v) in g.row_sums().into_iter().enumerate() {
            s[a] += v;
        }
    }
    let a0 = blocks.diag[0].add(&rs.mats[0].matmul(&blocks.down[1]));
    // rows of [A0^T; s^T]
    let mut rows: Vec<Vec<f64>> = (0..n0).map(|j| (0..n0).map(|i| a0[(i, j)]).collect()).collect();
    rows.push(s);
    let mut b = vec![0.0; n0 + 1];
    b[n0] = 1.0;
    let rho0 = least_squares(&DenseMatrix::from_rows(&rows), &b).map_err(|_| {
        Error::Singular("level-0 system is rank deficient; the chain is probably reducible".into())
    })?;
    let t = &blocks.truncation;
    let mut values = vec![0.0; t.len()];
    for (l, g) in gammas.iter().enumerate() {
        let pl = g.vec_mul(&rho0);
        for (p, &i) in blocks.levels.levels[l].iter().enumerate() {
            values[i] = pl[p];
        }
    }
    // the stacked system is inconsistent at finite cut-offs; impose the normalization
    TruncatedDistribution::normalized(t.clone(), values)
}

/// `floor(r^(1/6))`, exact for perfect sixth powers.
pub fn level_cutoff(r: f64) -> usize {
    let mut l = r.max(0.0).powf(1.0 / 6.0).round() as u64;
    while l > 0 && (l as f64).powi(6) > r {
        l -= 1;
    }
    while ((l + 1) as f64).powi(6) <= r {
        l += 1;
    }
    l as usize
}
