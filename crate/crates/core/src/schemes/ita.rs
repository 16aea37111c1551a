//! Iterated truncation and augmentation: bounds from sweeping the re-entry state
//! over the in-boundary.

use super::ta::{build_augmented, fixed_state_solution, ta_solve, ReentrySpec};
use crate::dist::{BoundsPair, TruncatedDistribution, Validity};
use crate::error::{Error, Result};
use crate::model::ReactionNetwork;
use crate::numlin::{gth_factor, truncated_generator};
use crate::statespace::{in_boundary, Truncation};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// One TA solution per in-boundary re-entry state.
#[derive(Debug, Clone)]
pub struct ItaSweep {
    pub truncation: Arc<Truncation>,
    /// Truncation indices of the re-entry states, ascending.
    pub reentry_states: Vec<usize>,
    pub dists: Vec<TruncatedDistribution>,
}

/// Factors `Q_r` once and solves from the left for every in-boundary state.
pub fn ita_sweep(net: &ReactionNetwork, t: &Arc<Truncation>) -> Result<ItaSweep> {
    let zs = in_boundary(net, t)?;
    if zs.is_empty() {
        // no way in from outside: the sweep collapses to the finite chain
        let sys = build_augmented(net, t, &ReentrySpec::Uniform)?;
        return Ok(ItaSweep { truncation: t.clone(), reentry_states: vec![], dists: vec![ta_solve(&sys)?] });
    }
    let g = truncated_generator(net, t)?;
    let f = gth_factor(&g.q, &g.q_out);
    if f.is_singular() {
        return Err(Error::Singular(
            "Q_r is singular; the truncation likely contains a closed class (see the classes subcommand)".into(),
        ));
    }
    let n = t.len();
    let dists = zs
        .par_iter()
        .map(|&z| {
            let mut e = vec![0.0; n];
            e[z] = 1.0;
            let y = f.solve_left_direction(&e)?;
            let p = fixed_state_solution(y).ok_or_else(|| {
                Error::Numerical(format!("re-entry at {} gives a sign-inconsistent solve", t.state(z)))
            })?;
            TruncatedDistribution::new(t.clone(), p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ItaSweep { truncation: t.clone(), reentry_states: zs, dists })
}

impl ItaSweep {
    /// Statewise minimum and maximum over the sweep.
    pub fn envelope(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.truncation.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for d in &self.dists {
            for (i, &v) in d.values().iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        (lo, hi)
    }

    /// `(min_z p^z(f), max_z p^z(f))` for `f` given on the truncation.
    pub fn average_range(&self, f: &[f64]) -> (f64, f64) {
        self.dists.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            let m: f64 = d.values().iter().zip(f).map(|(p, v)| p * v).sum();
            (lo.min(m), hi.max(m))
        })
    }
}

/// The tail bound entering the lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// `c / r` from the moment bound `pi(w) <= c` on `{w < r}`.
    Moment { c: f64, r: f64 },
    /// `1 / (r + 1)` on a superlevel truncation of a Lyapunov function.
    Lyapunov { r: f64 },
}

impl TailBound {
    pub fn value(&self) -> f64 {
        match *self {
            TailBound::Moment { c, r } => c / r,
            TailBound::Lyapunov { r } => 1.0 / (r + 1.0),
        }
    }

    /// The bound a truncation carries, else the moment route.
    pub fn for_truncation(t: &Truncation, c: Option<f64>) -> Result<Self> {
        if t.attached_tail_bound().is_some() {
            return Ok(TailBound::Lyapunov { r: t.threshold() });
        }
        match c {
            Some(c) => Ok(TailBound::Moment { c, r: t.threshold() }),
            None => Err(Error::Invalid("a moment bound is needed for this truncation".into())),
        }
    }
}

fn check_tail(tail: &TailBound) -> Result<f64> {
    let m = tail.value();
    if let TailBound::Moment { c, r } = *tail {
        if !(c >= 0.0) {
            return Err(Error::Invalid("moment bound must be nonnegative".into()));
        }
        if r <= c {
            return Err(Error::Invalid(format!("threshold r = {r} does not exceed the moment bound c = {c}")));
        }
    }
    Ok(m)
}

/// `l(x) = (1 - tail) min_z p^z(x)`, `u(x) = max_z p^z(x)`.
pub fn ita_bounds(sweep: &ItaSweep, tail: &TailBound) -> Result<BoundsPair> {
    let m = check_tail(tail)?;
    let (lo, hi) = sweep.envelope();
    let t = sweep.truncation.clone();
    Ok(BoundsPair {
        lower: Some(TruncatedDistribution::new(t.clone(), lo.iter().map(|v| (1.0 - m) * v).collect())?),
        upper: TruncatedDistribution::new(t, hi)?,
        tail_bound: Some(m),
        validity: Validity::StatewiseOnPi,
    })
}

/// What is known about `f` off the truncation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageCase {
    /// `f >= 0` outside: only the lower bound holds.
    NonnegOutside,
    /// `f <= 0` outside: only the upper bound holds.
    NonposOutside,
    /// `sup_{x outside} |f(x)| / w(x)` is finite and supplied.
    GrowthControlled { c: f64, sup_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AverageBounds {
    pub lower: f64,
    pub upper: f64,
    pub case: AverageCase,
}

/// Turns `l^f <= pi_{|r}(f) <= u^f` style raw extremes into bounds on `pi(f)`.
/// Holds for any valid pair of extremes, not only ITA ones. Missing sides are infinite.
pub fn assemble_average_bounds(min_f: f64, max_f: f64, tail: f64, case: AverageCase) -> Result<AverageBounds> {
    let a = 1.0 - tail;
    let lf = min_f.min(a * min_f);
    let uf = max_f.max(a * max_f);
    let (lower, upper) = match case {
        AverageCase::NonnegOutside => (lf, f64::INFINITY),
        AverageCase::NonposOutside => (f64::NEG_INFINITY, uf),
        AverageCase::GrowthControlled { c, sup_ratio } => {
            if !(sup_ratio >= 0.0) || !sup_ratio.is_finite() {
                return Err(Error::Invalid("growth ratio must be finite and nonnegative".into()));
            }
            (lf - c * sup_ratio, uf + c * sup_ratio)
        }
    };
    Ok(AverageBounds { lower, upper, case })
}

/// Bounds on `pi(f)`; `f_values` are `f` on the truncation.
pub fn ita_average_bounds(sweep: &ItaSweep, f_values: &[f64], tail: &TailBound, case: AverageCase) -> Result<AverageBounds> {
    let m = check_tail(tail)?;
    if f_values.len() != sweep.truncation.len() {
        return Err(Error::Invalid("f must be given on every state of the truncation".into()));
    }
    let (lo, hi) = sweep.average_range(f_values);
    assemble_average_bounds(lo, hi, m, case)
}

/// Lower and upper marginal bounds of species `k` with their error figures.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MarginalBounds {
    pub species: usize,
    /// Marginal indices `i` with `A_i` meeting the truncation, ascending.
    pub index: Vec<u32>,
    pub lower: Vec<f64>,
    /// Not necessarily an upper bound on the marginal itself.
    pub upper: Vec<f64>,
    pub tail_bound: f64,
    /// `1 - sum lower`, exact in TV and l1.
    pub lower_error: f64,
    pub upper_tv_bracket: (f64, f64),
    pub upper_l1_bracket: (f64, f64),
}

/// Groups truncation indices by the count of species `k`.
pub fn marginal_cells(t: &Truncation, k: usize) -> Result<BTreeMap<u32, Vec<usize>>> {
    let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, x) in t.states().iter().enumerate() {
        let v = *x.0.get(k).ok_or_else(|| Error::Invalid(format!("species index {k} out of range")))?;
        cells.entry(v).or_default().push(i);
    }
    Ok(cells)
}

/// Assembles marginal bounds from per-cell extremes.
pub fn assemble_marginal_bounds(k: usize, index: Vec<u32>, lower: Vec<f64>, upper: Vec<f64>, tail: f64) -> MarginalBounds {
    let l: f64 = lower.iter().sum();
    let u: f64 = upper.iter().sum();
    MarginalBounds {
        species: k,
        index,
        lower,
        upper,
        tail_bound: tail,
        lower_error: 1.0 - l,
        upper_tv_bracket: (u - 1.0, (u - 1.0 + tail).max(tail)),
        upper_l1_bracket: (u - 1.0, u - 1.0 + 2.0 * tail),
    }
}

pub fn ita_marginal_bounds(sweep: &ItaSweep, k: usize, tail: &TailBound) -> Result<MarginalBounds> {
    let m = check_tail(tail)?;
    let cells = marginal_cells(&sweep.truncation, k)?;
    let mut index = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i, members) in cells {
        let (lo, hi) = sweep.dists.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
            let s: f64 = members.iter().map(|&j| d.value(j)).sum();
            (lo.min(s), hi.max(s))
        });
        index.push(i);
        lower.push((1.0 - m) * lo);
        upper.push(hi);
    }
    Ok(assemble_marginal_bounds(k, index, lower, upper, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::schemes::bdp::{bdp_bounds, bdp_truncation, BirthDeathSpec};
    use crate::statespace::{build_sublevel_truncation, NormLikeFn};

    fn toggle_small() -> ReactionNetwork {
        parse_model(
            "species P1 P2\nreaction 0 -> P1 : 20 / (1 + P2)\nreaction P1 -> 0 : P1\n\
             reaction 0 -> P2 : 20 / (1 + P1)\nreaction P2 -> 0 : P2\n",
        )
        .unwrap()
    }

    #[test]
    fn bdp_sweep_has_one_element_matching_product_formula() {
        let net = parse_model("species X\nreaction 0 -> X : 2\nreaction X -> 0 : X\n").unwrap();
        let t = bdp_truncation(20);
        let s = ita_sweep(&net, &t).unwrap();
        assert_eq!(s.reentry_states, vec![19]);
        let b = ita_bounds(&s, &TailBound::Moment { c: 2.0, r: 20.0 }).unwrap();
        let exact = bdp_bounds(&BirthDeathSpec::from_network(&net).unwrap(), 20, 2.0).unwrap();
        for i in 0..20 {
            assert!((b.upper.value(i) - exact.upper.value(i)).abs() < 1e-14);
            assert!((b.lower_at(i) - exact.lower_at(i)).abs() < 1e-14);
        }
        assert!(ita_bounds(&s, &TailBound::Moment { c: 20.0, r: 20.0 }).is_err());
    }

    #[test]
    fn toggle_sweep_structure() {
        let net = toggle_small();
        let w = NormLikeFn::parse(&net, "(P1 + P2)^6").unwrap();
        let r = 12f64.powi(6);
        let t = Arc::new(build_sublevel_truncation(&net, &w, r, &[], 10_000).unwrap());
        assert_eq!(t.len(), 78);
        let s = ita_sweep(&net, &t).unwrap();
        assert_eq!(s.dists.len(), 12);
        for d in &s.dists {
            assert!((d.mass() - 1.0).abs() < 1e-10);
        }
        let (lo, hi) = s.envelope();
        for (pos, &z) in s.reentry_states.iter().enumerate() {
            // Courtois-Semal: p^z(x) <= p^x(x) for x in the in-boundary
            assert!(hi[z] <= s.dists[pos].value(z) * (1.0 + 1e-12));
        }
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }

    #[test]
    fn average_cases() {
        let b = assemble_average_bounds(0.4, 0.6, 0.1, AverageCase::NonnegOutside).unwrap();
        assert!((b.lower - 0.36).abs() < 1e-15 && b.upper.is_infinite());
        let b = assemble_average_bounds(-0.4, 0.6, 0.1, AverageCase::NonposOutside).unwrap();
        assert!((b.upper - 0.6).abs() < 1e-15 && b.lower == f64::NEG_INFINITY);
        let b = assemble_average_bounds(-0.4, 0.6, 0.1, AverageCase::GrowthControlled { c: 2.0, sup_ratio: 0.01 }).unwrap();
        assert!((b.lower - (-0.4 - 0.02)).abs() < 1e-15 && (b.upper - 0.62).abs() < 1e-15);
    }

    #[test]
    fn indicator_average_reduces_to_statewise_bounds() {
        let net = toggle_small();
        let w = NormLikeFn::parse(&net, "(P1 + P2)^6").unwrap();
        let t = Arc::new(build_sublevel_truncation(&net, &w, 10f64.powi(6), &[], 10_000).unwrap());
        let s = ita_sweep(&net, &t).unwrap();
        let tail = TailBound::Moment { c: 1.8e4, r: 1e6 };
        let b = ita_bounds(&s, &tail).unwrap();
        let x = t.index_of(&crate::model::State(vec![2, 3])).unwrap();
        let mut f = vec![0.0; t.len()];
        f[x] = 1.0;
        let a = ita_average_bounds(&s, &f, &tail, AverageCase::NonnegOutside).unwrap();
        assert!((a.lower - b.lower_at(x)).abs() < 1e-16);
    }

    #[test]
    fn single_species_marginal_is_the_distribution() {
        let net = parse_model("species X\nreaction 0 -> X : 2\nreaction X -> 0 : X\n").unwrap();
        let t = bdp_truncation(20);
        let s = ita_sweep(&net, &t).unwrap();
        let tail = TailBound::Moment { c: 2.0, r: 20.0 };
        let m = ita_marginal_bounds(&s, 0, &tail).unwrap();
        let b = ita_bounds(&s, &tail).unwrap();
        assert_eq!(m.index.len(), 20);
        for i in 0..20 {
            assert!((m.lower[i] - b.lower_at(i)).abs() < 1e-16);
        }
        assert!((m.lower_error - 0.1).abs() < 1e-12);
    }
}
