//! Truncation and augmentation: the stationary distribution of the chain that is
//! redirected back into the truncation whenever it would leave it.

use crate::dist::TruncatedDistribution;
use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, State};
use crate::numlin::{gth_factor, lu_factor, truncated_generator, SparseMatrix};
use crate::statespace::{classes_of_graph, in_boundary, StateFn, Truncation};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Where the augmented chain re-enters the truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum ReentrySpec {
    FixedState(State),
    /// Uniform over the in-boundary.
    Uniform,
    /// Median-index state of the sorted in-boundary.
    BoundaryMid,
    /// Re-entry rows keyed by out-boundary state.
    Custom(BTreeMap<State, Vec<(State, f64)>>),
    /// Truncated conditional re-entry series with `N + 1` terms.
    ConditionalSeries(usize),
}

impl ReentrySpec {
    /// `state:<counts>`, `uniform`, `boundary-mid` or `conditional:<N>`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "uniform" {
            return Ok(ReentrySpec::Uniform);
        }
        if t == "boundary-mid" {
            return Ok(ReentrySpec::BoundaryMid);
        }
        if let Some(rest) = t.strip_prefix("state:") {
            let counts: std::result::Result<Vec<u32>, _> = rest.split(',').map(|s| s.trim().parse()).collect();
            return counts
                .map(|c| ReentrySpec::FixedState(State(c)))
                .map_err(|_| Error::Invalid(format!("bad re-entry state `{rest}`")));
        }
        if let Some(rest) = t.strip_prefix("conditional:") {
            return rest
                .trim()
                .parse()
                .map(ReentrySpec::ConditionalSeries)
                .map_err(|_| Error::Invalid(format!("bad series depth `{rest}`")));
        }
        Err(Error::Invalid(format!(
            "unknown re-entry `{t}` (expected state:<counts>, uniform, boundary-mid or conditional:<N>)"
        )))
    }
}

/// `Q^e = Q_r + diag(q_o) E` on a truncation.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub truncation: Arc<Truncation>,
    pub q: SparseMatrix<f64>,
    pub q_r: SparseMatrix<f64>,
    pub q_out: Vec<f64>,
    pub exit: Vec<f64>,
    /// Re-entry index when every exit returns to the same state.
    pub fixed: Option<usize>,
    /// The re-entry rule as supplied.
    pub reentry: ReentrySpec,
}

fn uniform_row(targets: &[usize]) -> Vec<(usize, f64)> {
    let p = 1.0 / targets.len() as f64;
    targets.iter().map(|&j| (j, p)).collect()
}

/// Fallback target set: the in-boundary, or the whole truncation when it is empty.
fn entry_targets(net: &ReactionNetwork, t: &Truncation) -> Result<Vec<usize>> {
    let b = in_boundary(net, t)?;
    Ok(if b.is_empty() { (0..t.len()).collect() } else { b })
}

pub fn build_augmented(net: &ReactionNetwork, t: &Arc<Truncation>, spec: &ReentrySpec) -> Result<AugmentedSystem> {
    let g = truncated_generator(net, t)?;
    let n = t.len();
    let fixed_index = |x: &State| {
        t.index_of(x).ok_or_else(|| Error::Invalid(format!("re-entry state {x} is not in the truncation")))
    };
    let (rows, fixed): (Vec<Vec<(usize, f64)>>, Option<usize>) = match spec {
        ReentrySpec::FixedState(x) => {
            let z = fixed_index(x)?;
            (vec![vec![(z, 1.0)]; n], Some(z))
        }
        ReentrySpec::BoundaryMid => {
            let b = entry_targets(net, t)?;
            let z = b[b.len() / 2];
            (vec![vec![(z, 1.0)]; n], Some(z))
        }
        ReentrySpec::Uniform => (vec![uniform_row(&entry_targets(net, t)?); n], None),
        ReentrySpec::Custom(map) => (custom_rows(t, &g.q_out, map)?, None),
        ReentrySpec::ConditionalSeries(depth) => {
            let ReentrySpec::Custom(map) = conditional_reentry_approx(net, t, *depth, crate::statespace::DEFAULT_STATE_CAP)?
            else {
                unreachable!()
            };
            (custom_rows(t, &g.q_out, &map)?, None)
        }
    };
    build_augmented_from_parts(t.clone(), g.q, g.q_out, g.exit, &rows, fixed, spec.clone())
}

fn custom_rows(
    t: &Truncation,
    q_out: &[f64],
    map: &BTreeMap<State, Vec<(State, f64)>>,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut rows = vec![Vec::new(); t.len()];
    for (i, x) in t.states().iter().enumerate() {
        if q_out[i] == 0.0 {
            continue;
        }
        let src = map.get(x).ok_or_else(|| Error::Invalid(format!("no re-entry row for out-boundary state {x}")))?;
        let mut sum = 0.0;
        for (y, p) in src {
            let j = t.index_of(y).ok_or_else(|| Error::Invalid(format!("re-entry target {y} outside the truncation")))?;
            if !(*p >= 0.0) {
                return Err(Error::Invalid(format!("negative re-entry probability in row {x}")));
            }
            sum += p;
            rows[i].push((j, *p));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("re-entry row {x} sums to {sum}")));
        }
    }
    Ok(rows)
}

/// Assembles `Q^e` from a truncated rate matrix and per-state re-entry rows.
/// Rows of states without out-flow are ignored.
pub fn build_augmented_from_parts(
    truncation: Arc<Truncation>,
    q_r: SparseMatrix<f64>,
    q_out: Vec<f64>,
    exit: Vec<f64>,
    rows: &[Vec<(usize, f64)>],
    fixed: Option<usize>,
    reentry: ReentrySpec,
) -> Result<AugmentedSystem> {
    let n = truncation.len();
    if q_r.nrows() != n || q_out.len() != n || exit.len() != n || rows.len() != n {
        return Err(Error::Invalid("augmented system parts disagree in size".into()));
    }
    let mut trip: Vec<(usize, usize, f64)> = q_r.triplets().collect();
    for (i, row) in rows.iter().enumerate() {
        if q_out[i] > 0.0 {
            trip.extend(row.iter().map(|&(j, p)| (i, j, q_out[i] * p)));
        }
    }
    let q = SparseMatrix::from_triplets(n, n, trip);
    Ok(AugmentedSystem { truncation, q, q_r, q_out, exit, fixed, reentry })
}

impl AugmentedSystem {
    /// `max_x |(p Q^e)(x)|`.
    pub fn residual(&self, p: &[f64]) -> f64 {
        self.q.vec_mul(p).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn row_scale(&self) -> f64 {
        self.exit.iter().fold(1.0f64, |m, &v| m.max(v))
    }

    fn failure(&self, msg: &str) -> Error {
        let succ: Vec<Vec<usize>> = (0..self.q.nrows())
            .map(|i| self.q.row(i).filter(|&(j, v)| j != i && v > 0.0).map(|(j, _)| j).collect())
            .collect();
        let classes = classes_of_graph(&succ);
        if classes.closed_classes.len() > 1 {
            let shown: Vec<String> = classes
                .closed_classes
                .iter()
                .take(4)
                .map(|c| self.truncation.state(c[0]).to_string())
                .collect();
            Error::NonUnique(format!(
                "augmented chain has {} closed classes (containing {}, ...); every mixture of their \
                 stationary distributions is stationary",
                classes.closed_classes.len(),
                shown.join(", ")
            ))
        } else {
            Error::Singular(msg.to_string())
        }
    }
}

/// Normalized `-Q_r^{-T} e_z`, if the solve is sign-consistent.
pub(crate) fn fixed_state_solution(y: Vec<f64>) -> Option<Vec<f64>> {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let s: f64 = y.iter().sum();
    let sign = s.signum();
    if y.iter().any(|&v| v * sign < -1e-10 * scale) {
        return None;
    }
    Some(y.into_iter().map(|v| (v / s).max(0.0)).collect())
}

/// Stationary distribution of the augmented chain.
pub fn ta_solve(sys: &AugmentedSystem) -> Result<TruncatedDistribution> {
    let n = sys.truncation.len();
    if n == 0 {
        return Err(Error::Invalid("empty truncation".into()));
    }
    if let Some(z) = sys.fixed {
        let f = gth_factor(&sys.q_r, &sys.q_out);
        if !f.is_singular() {
            let mut e = vec![0.0; n];
            e[z] = 1.0;
            if let Some(p) = f.solve_left_direction(&e).ok().and_then(fixed_state_solution) {
                return TruncatedDistribution::new(sys.truncation.clone(), p);
            }
        }
    }
    general_solve(sys)
}

fn general_solve(sys: &AugmentedSystem) -> Result<TruncatedDistribution> {
    let n = sys.truncation.len();
    let k = (0..n).fold(0, |b, i| if sys.exit[i] > sys.exit[b] { i } else { b });
    // transpose of Q^e with equation k replaced by the normalization
    let trip = sys.q.triplets().filter(|&(_, j, _)| j != k).map(|(i, j, v)| (j, i, v)).chain((0..n).map(|i| (k, i, 1.0)));
    let a = SparseMatrix::from_triplets(n, n, trip);
    let f = lu_factor(&a);
    if f.is_singular() {
        return Err(sys.failure("augmented generator is singular"));
    }
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    let p = f.solve(&e)?;
    let scale = sys.row_scale();
    let r = sys.q.vec_mul(&p);
    if r[k].abs() > 1e-8 * scale {
        return Err(sys.failure(&format!("replaced equation has residual {:e}", r[k].abs())));
    }
    let max = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.iter().any(|&v| v < -1e-10 * max) {
        return Err(sys.failure("solution of the augmented system changes sign"));
    }
    TruncatedDistribution::normalized(sys.truncation.clone(), p.into_iter().map(|v| v.max(0.0)).collect())
}

/// Partial sums of the conditional re-entry series over `n = 0..=depth`, with each
/// out-boundary row rescaled to sum one. Rows that see no return within the
/// horizon fall back to the uniform rule.
pub fn conditional_reentry_approx(
    net: &ReactionNetwork,
    t: &Truncation,
    depth: usize,
    cap: usize,
) -> Result<ReentrySpec> {
    let mut probs: HashMap<State, Vec<(State, f64)>> = HashMap::new();
    let mut jump = |z: &State| -> Result<Vec<(State, f64)>> {
        if let Some(p) = probs.get(z) {
            return Ok(p.clone());
        }
        let p = net.jump_probs(z)?;
        if probs.len() >= cap {
            return Err(Error::StateCap { cap });
        }
        probs.insert(z.clone(), p.clone());
        Ok(p)
    };
    let fallback = entry_targets(net, t)?;
    let mut map = BTreeMap::new();
    for x in t.states() {
        let row = net.rate_row(x)?;
        let q_o: f64 = row.iter().filter(|(y, _)| !t.contains(y)).map(|(_, r)| r).sum();
        if q_o == 0.0 {
            continue;
        }
        let mut front: BTreeMap<State, f64> = BTreeMap::new();
        for (z, r) in row {
            if !t.contains(&z) {
                *front.entry(z).or_default() += r / q_o;
            }
        }
        let mut hits: BTreeMap<usize, f64> = BTreeMap::new();
        for _ in 0..=depth {
            let mut next: BTreeMap<State, f64> = BTreeMap::new();
            for (z, m) in &front {
                for (y, p) in jump(z)? {
                    match t.index_of(&y) {
                        Some(j) => *hits.entry(j).or_default() += m * p,
                        None => *next.entry(y).or_default() += m * p,
                    }
                }
            }
            front = next;
            if front.is_empty() {
                break;
            }
        }
        let total: f64 = hits.values().sum();
        let entries: Vec<(State, f64)> = if total > 0.0 {
            hits.into_iter().map(|(j, v)| (t.state(j).clone(), v / total)).collect()
        } else {
            uniform_row(&fallback).into_iter().map(|(j, p)| (t.state(j).clone(), p)).collect()
        };
        map.insert(x.clone(), entries);
    }
    Ok(ReentrySpec::Custom(map))
}

/// Outflow `O_r = sum_x p(x) q_o(x)` and, with a fixed re-entry state and a
/// Lyapunov function, the convergence factor `(v(z) + max_{B_o} v) O_r`.
/// Both are indicators only, not error bounds.
pub fn ta_diagnostics(sys: &AugmentedSystem, p: &TruncatedDistribution, v: Option<&dyn StateFn>) -> (f64, Option<f64>) {
    let outflow: f64 = p.values().iter().zip(&sys.q_out).map(|(a, b)| a * b).sum();
    let factor = match (v, sys.fixed) {
        (Some(v), Some(z)) => {
            let t = &sys.truncation;
            let vmax = (0..t.len()).filter(|&i| sys.q_out[i] > 0.0).map(|i| v.at(t.state(i))).fold(None, |m: Option<f64>, x| {
                Some(m.map_or(x, |m| m.max(x)))
            });
            Some(vmax.map_or(0.0, |vm| (v.at(t.state(z)) + vm) * outflow))
        }
        _ => None,
    };
    (outflow, factor)
}
