//! Linear programs over the outer approximation of the stationary distributions'
//! restrictions to a truncation.

use super::ita::{assemble_average_bounds, assemble_marginal_bounds, marginal_cells, AverageBounds, AverageCase, MarginalBounds};
use crate::dist::{BoundsPair, TruncatedDistribution, Validity};
use crate::error::{Error, Result};
use crate::lpsolve::{prepare, LinearProgram, LpSolution, LpStatus, Prepared, Relation, Sense};
use crate::model::{ReactionNetwork, State};
use crate::numlin::truncated_generator;
use crate::statespace::{interior_set, StateFn, Truncation};
use rayon::prelude::*;
use std::sync::{Arc, OnceLock};

/// Objectives handled per warm-started chain.
const CHAIN: usize = 32;

/// `{p >= 0 : (pQ)(x) = 0 on the interior, 1 - c/r <= p(S_r) <= 1, p(w) <= c}`,
/// stored in the scaled variables `s(x) p(x)` with `s(x) = max(q(x), 1)`.
#[derive(Debug)]
pub struct OuterPolytope {
    pub truncation: Arc<Truncation>,
    pub c: f64,
    pub r: f64,
    pub w_values: Vec<f64>,
    pub interior: Vec<usize>,
    pub scale: Vec<f64>,
    pub program: LinearProgram<f64>,
    prepared: OnceLock<Prepared<f64>>,
}

pub fn build_polytope(net: &ReactionNetwork, t: &Arc<Truncation>, w: &dyn StateFn, c: f64) -> Result<OuterPolytope> {
    let r = t.threshold();
    if !(c >= 0.0) {
        return Err(Error::Invalid("moment bound must be nonnegative".into()));
    }
    if r <= c {
        return Err(Error::Invalid(format!("threshold r = {r} does not exceed the moment bound c = {c}; the mass window is empty")));
    }
    let g = truncated_generator(net, t)?;
    let n = t.len();
    let scale: Vec<f64> = g.exit.iter().map(|&q| q.max(1.0)).collect();
    let interior = interior_set(net, t)?;
    let qt = g.q.transpose();
    let mut p = LinearProgram::new(n);
    for &x in &interior {
        let coeffs = qt.row(x).map(|(y, v)| (y, v / scale[y])).collect();
        p.add_constraint(coeffs, Relation::Eq, 0.0);
    }
    let mass: Vec<(usize, f64)> = (0..n).map(|y| (y, 1.0 / scale[y])).collect();
    p.add_constraint(mass.clone(), Relation::Le, 1.0);
    p.add_constraint(mass, Relation::Ge, 1.0 - c / r);
    let w_values: Vec<f64> = t.states().iter().map(|x| w.at(x)).collect();
    let moment = w_values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(y, &v)| (y, v / scale[y])).collect();
    p.add_constraint(moment, Relation::Le, c);
    Ok(OuterPolytope { truncation: t.clone(), c, r, w_values, interior, scale, program: p, prepared: OnceLock::new() })
}

impl OuterPolytope {
    pub fn len(&self) -> usize {
        self.truncation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truncation.is_empty()
    }

    pub fn tail_bound(&self) -> f64 {
        self.c / self.r
    }

    /// Largest violation of any constraint by the (unscaled) vector `p`.
    pub fn max_violation(&self, p: &[f64]) -> f64 {
        let sigma: Vec<f64> = p.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        self.program.max_violation(&sigma)
    }

    fn prepared(&self) -> &Prepared<f64> {
        self.prepared.get_or_init(|| prepare(&self.program))
    }

    /// Scaled objective for `sum_x f(x) p(x)`.
    fn objective(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }

    fn unscale(&self, sigma: &[f64]) -> Vec<f64> {
        sigma.iter().zip(&self.scale).map(|(v, s)| (v / s).max(0.0)).collect()
    }

    fn optimize(&self, f: &[f64], sense: Sense) -> Result<LpSolution<f64>> {
        let sol = match self.prepared() {
            Prepared::Ready(p) => p.solve(&self.objective(f), sense),
            Prepared::Failed(s) => s.clone(),
        };
        match sol.status {
            LpStatus::Optimal => Ok(sol),
            LpStatus::Infeasible => Err(Error::Infeasible(format!(
                "the outer polytope is empty; the moment bound may be inconsistent with the truncation ({})",
                sol.diagnostics
            ))),
            LpStatus::Unbounded => Err(Error::Numerical("outer polytope program reported unbounded".into())),
            LpStatus::NumericalFailure => Err(Error::Numerical(sol.diagnostics)),
        }
    }

    fn distribution(&self, sol: &LpSolution<f64>) -> Result<TruncatedDistribution> {
        TruncatedDistribution::new(self.truncation.clone(), self.unscale(&sol.point))
    }
}

/// The point of largest mass.
pub fn lp_approximate(poly: &OuterPolytope) -> Result<TruncatedDistribution> {
    let sol = poly.optimize(&vec![1.0; poly.len()], Sense::Maximize)?;
    poly.distribution(&sol)
}

/// The point maximizing `p(x)` and the indices it charges above `1e-10`.
pub fn lp_ergodic_probe(poly: &OuterPolytope, x: &State) -> Result<(TruncatedDistribution, Vec<usize>)> {
    let i = poly.truncation.index_of(x).ok_or_else(|| Error::Invalid(format!("{x} is not in the truncation")))?;
    let mut f = vec![0.0; poly.len()];
    f[i] = 1.0;
    let d = poly.distribution(&poly.optimize(&f, Sense::Maximize)?)?;
    let support = (0..d.len()).filter(|&j| d.value(j) > 1e-10).collect();
    Ok((d, support))
}

/// A linear functional `sum_x f(x) p(x)` on the truncation.
#[derive(Debug, Clone)]
pub struct Objective {
    pub label: String,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundEntry {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    /// Solver diagnostics when either program failed; the bounds are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StationaryBoundsReport {
    pub entries: Vec<BoundEntry>,
    /// Some statewise lower bound is positive, so the stationary distribution is unique.
    pub unique: bool,
}

fn chain_values(prep: &crate::lpsolve::PreparedLp<f64>, objs: &[Vec<f64>], sense: Sense) -> Vec<std::result::Result<f64, String>> {
    let list: Vec<(Vec<f64>, Sense)> = objs.iter().map(|c| (c.clone(), sense)).collect();
    prep.solve_chain(&list)
        .into_iter()
        .map(|s| match s.status {
            LpStatus::Optimal => Ok(s.objective),
            st => Err(format!("{st:?}: {}", s.diagnostics)),
        })
        .collect()
}

/// Minimum and maximum of every objective over the polytope. Objectives are
/// solved in fixed chunks, each chunk warm-starting from the previous optimum.
pub fn ilp_bounds(poly: &OuterPolytope, objectives: &[Objective]) -> Result<StationaryBoundsReport> {
    let prep = match poly.prepared() {
        Prepared::Ready(p) => p,
        Prepared::Failed(s) => {
            return Err(match s.status {
                LpStatus::Infeasible => Error::Infeasible(format!("outer polytope is empty ({})", s.diagnostics)),
                _ => Error::Numerical(s.diagnostics.clone()),
            })
        }
    };
    let chunks: Vec<&[Objective]> = objectives.chunks(CHAIN).collect();
    let results: Vec<Vec<BoundEntry>> = chunks
        .par_iter()
        .map(|chunk| {
            let objs: Vec<Vec<f64>> = chunk.iter().map(|o| poly.objective(&o.f)).collect();
            let lo = chain_values(prep, &objs, Sense::Minimize);
            let hi = chain_values(prep, &objs, Sense::Maximize);
            chunk
                .iter()
                .zip(lo.into_iter().zip(hi))
                .map(|(o, pair)| match pair {
                    (Ok(l), Ok(u)) => {
                        let nonneg = o.f.iter().all(|&v| v >= 0.0);
                        let l = if nonneg { l.max(0.0) } else { l };
                        BoundEntry { label: o.label.clone(), lower: l, upper: u.max(l), failure: None }
                    }
                    (a, b) => BoundEntry {
                        label: o.label.clone(),
                        lower: f64::NAN,
                        upper: f64::NAN,
                        failure: Some([a.err(), b.err()].into_iter().flatten().collect::<Vec<_>>().join("; ")),
                    },
                })
                .collect()
        })
        .collect();
    let entries: Vec<BoundEntry> = results.into_iter().flatten().collect();
    Ok(StationaryBoundsReport { entries, unique: false })
}

fn indicator(n: usize, members: &[usize]) -> Vec<f64> {
    let mut f = vec![0.0; n];
    for &i in members {
        f[i] = 1.0;
    }
    f
}

/// Statewise bounds `min/max p(x)` for every state. Failed states fall back to `[0, 1]`.
pub fn ilp_statewise_bounds(poly: &OuterPolytope) -> Result<(BoundsPair, StationaryBoundsReport)> {
    let t = &poly.truncation;
    let n = t.len();
    let objs: Vec<Objective> =
        (0..n).map(|i| Objective { label: t.state(i).to_string(), f: indicator(n, &[i]) }).collect();
    let mut report = ilp_bounds(poly, &objs)?;
    let lower: Vec<f64> = report.entries.iter().map(|e| if e.failure.is_some() { 0.0 } else { e.lower }).collect();
    let upper: Vec<f64> = report.entries.iter().map(|e| if e.failure.is_some() { 1.0 } else { e.upper }).collect();
    report.unique = lower.iter().any(|&l| l > 1e-9);
    let pair = BoundsPair {
        lower: Some(TruncatedDistribution::new(t.clone(), lower)?),
        upper: TruncatedDistribution::new(t.clone(), upper)?,
        tail_bound: Some(poly.tail_bound()),
        validity: Validity::StatewiseOnPi,
    };
    Ok((pair, report))
}

/// Bounds on `pi(f)`, with `f` given on the truncation.
pub fn ilp_average_bounds(poly: &OuterPolytope, f: &[f64], case: AverageCase) -> Result<AverageBounds> {
    if f.len() != poly.len() {
        return Err(Error::Invalid("f must be given on every state of the truncation".into()));
    }
    let report = ilp_bounds(poly, &[Objective { label: "f".into(), f: f.to_vec() }])?;
    let e = &report.entries[0];
    if let Some(msg) = &e.failure {
        return Err(Error::Numerical(msg.clone()));
    }
    // the programs bound the restriction directly, so no tail factor enters
    assemble_average_bounds(e.lower, e.upper, 0.0, case)
}

pub fn ilp_marginal_bounds(poly: &OuterPolytope, k: usize) -> Result<MarginalBounds> {
    let n = poly.len();
    let cells = marginal_cells(&poly.truncation, k)?;
    let objs: Vec<Objective> = cells.iter().map(|(i, m)| Objective { label: i.to_string(), f: indicator(n, m) }).collect();
    let report = ilp_bounds(poly, &objs)?;
    let index: Vec<u32> = cells.keys().copied().collect();
    let lower = report.entries.iter().map(|e| if e.failure.is_some() { 0.0 } else { e.lower }).collect();
    let upper = report.entries.iter().map(|e| if e.failure.is_some() { 1.0 } else { e.upper }).collect();
    Ok(assemble_marginal_bounds(k, index, lower, upper, poly.tail_bound()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::schemes::bdp::{bdp_conditional, bdp_truncation, BirthDeathSpec};

    fn bdp() -> ReactionNetwork {
        parse_model("species X\nreaction 0 -> X : 3\nreaction X -> 0 : X\n").unwrap()
    }

    fn x(s: &State) -> f64 {
        s.0[0] as f64
    }

    #[test]
    fn mass_optimum_is_the_conditional_distribution() {
        let net = bdp();
        let t = bdp_truncation(30);
        let poly = build_polytope(&net, &t, &x, 4.0).unwrap();
        assert_eq!(poly.interior.len(), 29);
        let p = lp_approximate(&poly).unwrap();
        let exact = bdp_conditional(&BirthDeathSpec::from_network(&net).unwrap(), 30).unwrap();
        let d: f64 = p.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).sum();
        assert!(d < 1e-9, "{d}");
        assert!(poly.max_violation(exact.values()) < 1e-9);
    }

    #[test]
    fn constant_objective_recovers_the_mass_window() {
        let net = bdp();
        let t = bdp_truncation(30);
        let poly = build_polytope(&net, &t, &x, 4.0).unwrap();
        let r = ilp_bounds(&poly, &[Objective { label: "mass".into(), f: vec![1.0; 30] }]).unwrap();
        assert!((r.entries[0].lower - (1.0 - 4.0 / 30.0)).abs() < 1e-9);
        assert!((r.entries[0].upper - 1.0).abs() < 1e-9);
    }

    #[test]
    fn statewise_bounds_on_bdp() {
        let net = bdp();
        let t = bdp_truncation(30);
        let poly = build_polytope(&net, &t, &x, 4.0).unwrap();
        let (b, rep) = ilp_statewise_bounds(&poly).unwrap();
        assert!(rep.unique);
        let exact = bdp_conditional(&BirthDeathSpec::from_network(&net).unwrap(), 30).unwrap();
        for i in 0..30 {
            let u = exact.value(i);
            assert!((b.upper.value(i) - u).abs() < 1e-9);
            assert!((b.lower_at(i) - (1.0 - 4.0 / 30.0) * u).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_must_exceed_moment_bound() {
        let t = bdp_truncation(5);
        assert!(build_polytope(&bdp(), &t, &x, 5.0).is_err());
    }

    #[test]
    fn too_small_moment_bound_is_infeasible() {
        let t = bdp_truncation(30);
        let poly = build_polytope(&bdp(), &t, &x, 0.01).unwrap();
        assert!(matches!(lp_approximate(&poly), Err(Error::Infeasible(_))));
    }

    #[test]
    fn probe_separates_parity_classes() {
        // 2 X <-> 0 preserves the parity of X
        let net = parse_model("species X\nreaction 0 -> 2 X : 1\nreaction 2 X -> 0 : mass_action(1)\n").unwrap();
        let t = bdp_truncation(20);
        let poly = build_polytope(&net, &t, &x, 5.0).unwrap();
        let (_, support) = lp_ergodic_probe(&poly, &State(vec![3])).unwrap();
        assert!(!support.is_empty() && support.iter().all(|&i| i % 2 == 1));
        let (_, support) = lp_ergodic_probe(&poly, &State(vec![2])).unwrap();
        assert!(support.iter().all(|&i| i % 2 == 0));
    }
}
