//! Error measures, tail bounds, drift certificates and computable TA error bounds.

use crate::dist::{BoundsPair, TruncatedDistribution};
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::model::{ReactionNetwork, State};
use crate::numlin::{lu_factor, truncated_generator, SparseMatrix};
use crate::schemes::ta::{build_augmented, ta_diagnostics, ta_solve, ReentrySpec};
use crate::statespace::{StateFn, Truncation, TruncationKind};
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Distances {
    pub tv: f64,
    pub l1: f64,
    /// `sum_x w(x) |a(x) - b(x)|`; NaN without a weight.
    pub wnorm: f64,
}

/// Distances between two zero-padded distributions over the union of their truncations.
/// TV is `max(sum of positive parts, sum of negative parts)`, which is half the l1
/// distance when both have equal mass.
pub fn distances(a: &TruncatedDistribution, b: &TruncatedDistribution, w: Option<&dyn StateFn>) -> Distances {
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut wn = 0.0;
    let mut add = |x: &State, d: f64| {
        if d > 0.0 {
            pos += d;
        } else {
            neg -= d;
        }
        if let Some(w) = w {
            if d != 0.0 {
                wn += w.at(x) * d.abs();
            }
        }
    };
    for (x, va) in a.iter() {
        add(x, va - b.get(x));
    }
    for (x, vb) in b.iter() {
        if !a.truncation().contains(x) {
            add(x, -vb);
        }
    }
    Distances { tv: pos.max(neg), l1: pos + neg, wnorm: if w.is_some() { wn } else { f64::NAN } }
}

/// `m_r <= c / r` for `r > 0`.
pub fn tail_bound(c: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Invalid("tail bound needs r > 0".into()));
    }
    Ok(c / r)
}

/// Either the exact tail mass (from an oracle) or a bound on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailInfo {
    Known(f64),
    Bound(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundErrors {
    /// `1 - l(S_r)`, the exact TV and l1 error of the lower bound.
    pub lower_error: Option<f64>,
    pub upper_tv: (f64, f64),
    pub upper_l1: (f64, f64),
}

/// Full errors of statewise bounds; brackets collapse to points when the tail mass is known.
pub fn bound_errors(pair: &BoundsPair, tail: TailInfo) -> BoundErrors {
    let u = pair.upper.mass() - 1.0;
    let lower_error = pair.lower.as_ref().map(|l| 1.0 - l.mass());
    match tail {
        TailInfo::Known(m) => {
            let tv = (u + m).max(m);
            let l1 = u + 2.0 * m;
            BoundErrors { lower_error, upper_tv: (tv, tv), upper_l1: (l1, l1) }
        }
        TailInfo::Bound(b) => BoundErrors { lower_error, upper_tv: (u, (u + b).max(b)), upper_l1: (u, u + 2.0 * b) },
    }
}

/// `max_x |a(x) - pi(x)| / a(x)` over the truncation, and the TV error.
pub fn conditional_metrics(approx: &TruncatedDistribution, oracle: &TruncatedDistribution) -> (f64, f64) {
    let mut rel = 0.0f64;
    for (x, a) in approx.iter() {
        let p = oracle.get(x);
        if a == 0.0 {
            if p > 0.0 {
                rel = f64::INFINITY;
            }
        } else {
            rel = rel.max((a - p).abs() / a);
        }
    }
    (rel, distances(approx, oracle, None).tv)
}

/// `Qv <= d 1_F - f`, verified on a finite check set only.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DriftCertificate {
    pub v: String,
    pub f: String,
    pub d: f64,
    pub set: Vec<State>,
    pub check_size: usize,
    /// `max(Qv + f - d 1_F)` over the check set; nonpositive.
    pub max_residual: f64,
    /// `pi(f) <= d`.
    pub mean_bound: f64,
    /// `pi(F^c) <= 1 - 1/d`.
    pub tail_bound: f64,
    pub scope: &'static str,
}

pub const FINITE_SET_ONLY: &str = "finite-set verification only: the inequality was checked on the listed check set, not on the whole state space";

/// Smallest `d` with `Qv(x) <= d 1_F(x) - f(x)` for every `x` in `check`.
pub fn drift_apply(
    net: &ReactionNetwork,
    v: &dyn StateFn,
    f: &dyn StateFn,
    set: &[State],
    check: &[State],
) -> Result<DriftCertificate> {
    let in_f: HashSet<&State> = set.iter().collect();
    let mut d = f64::NEG_INFINITY;
    let mut slack = Vec::with_capacity(check.len());
    for x in check {
        let qv = net.generator_apply(&|y: &State| v.at(y), x)?;
        let fx = f.at(x);
        let g = qv + fx;
        if in_f.contains(x) {
            d = d.max(g);
        } else if g > 1e-12 * (qv.abs() + fx.abs()) {
            return Err(Error::Numerical(format!(
                "drift inequality fails outside F at {x}: Qv + f = {g:e} > 0"
            )));
        }
        slack.push((in_f.contains(x), g));
    }
    if d == f64::NEG_INFINITY {
        return Err(Error::Invalid("no state of F lies in the check set".into()));
    }
    if !(d > 0.0) {
        return Err(Error::Numerical(format!("drift constant d = {d:e} is not positive")));
    }
    let max_residual = slack.iter().map(|&(inf, g)| if inf { g - d } else { g }).fold(f64::NEG_INFINITY, f64::max);
    Ok(DriftCertificate {
        v: "v".into(),
        f: "f".into(),
        d,
        set: set.to_vec(),
        check_size: check.len(),
        max_residual,
        mean_bound: d,
        tail_bound: 1.0 - 1.0 / d,
        scope: FINITE_SET_ONLY,
    })
}

impl DriftCertificate {
    pub fn with_labels(mut self, v: &str, f: &str) -> Self {
        self.v = v.to_string();
        self.f = f.to_string();
        self
    }
}

/// `phi_bar = max_x min_{y in F} phi(x, y)` with `phi = (I - Q_r / beta)^{-1}`.
pub fn phi_bar(q_r: &SparseMatrix<f64>, t: &Truncation, set: &[State], beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Invalid("beta must be positive".into()));
    }
    let n = t.len();
    let idx: Vec<usize> = set
        .iter()
        .map(|y| t.index_of(y).ok_or_else(|| Error::Invalid(format!("F contains {y}, which is outside the truncation"))))
        .collect::<Result<_>>()?;
    let a = q_r.map(|i, j, v| if i == j { 1.0 - v / beta } else { -v / beta });
    let lu = lu_factor(&a);
    if lu.is_singular() {
        return Err(Error::Singular("I - Q_r / beta is singular".into()));
    }
    let mut mins = vec![f64::INFINITY; n];
    for &y in &idx {
        let mut e = vec![0.0; n];
        e[y] = 1.0;
        let col = lu.solve(&e)?;
        for (m, c) in mins.iter_mut().zip(col) {
            *m = m.min(c);
        }
    }
    Ok(mins.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LiuBound {
    pub bound: f64,
    pub phi_bar: f64,
    pub beta: f64,
    pub outflow: f64,
    pub v_at_z: f64,
    #[serde(skip)]
    pub approximation: TruncatedDistribution,
}

/// `(v(z) + d / (beta phi_bar)) O_r`, a bound on the TV error of TA with re-entry at `z`.
pub fn liu_bound(
    net: &ReactionNetwork,
    t: &Arc<Truncation>,
    z: &State,
    cert: &DriftCertificate,
    v: &dyn StateFn,
    beta: f64,
) -> Result<LiuBound> {
    let sys = build_augmented(net, t, &ReentrySpec::FixedState(z.clone()))?;
    let pb = phi_bar(&sys.q_r, t, &cert.set, beta)?;
    if !(pb > 0.0) {
        return Err(Error::Numerical(format!("phi_bar = {pb:e} is not positive; the bound does not apply at this truncation")));
    }
    let p = ta_solve(&sys)?;
    let (outflow, _) = ta_diagnostics(&sys, &p, None);
    let vz = v.at(z);
    Ok(LiuBound { bound: (vz + cert.d / (beta * pb)) * outflow, phi_bar: pb, beta, outflow, v_at_z: vz, approximation: p })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TightenedBound {
    pub refined: f64,
    pub naive: f64,
    pub c_r: f64,
    pub e: f64,
    /// Modified Lyapunov values on `F_o`.
    pub w: Vec<(State, f64)>,
}

/// Re-optimizes `v` inside `F_o` (states of `F` that cannot leave `F` in one jump)
/// by a linear program and returns the refined bound alongside the naive one.
pub fn tighten_bound_lp(
    net: &ReactionNetwork,
    z: &State,
    cert: &DriftCertificate,
    v: &dyn StateFn,
    liu: &LiuBound,
) -> Result<TightenedBound> {
    let in_f: HashSet<&State> = cert.set.iter().collect();
    let mut rows = Vec::with_capacity(cert.set.len());
    for x in &cert.set {
        rows.push(net.rate_row(x)?);
    }
    let f_o: Vec<&State> =
        cert.set.iter().zip(&rows).filter(|(_, row)| row.iter().all(|(y, _)| in_f.contains(y))).map(|(x, _)| x).collect();
    let pos: BTreeMap<&State, usize> = f_o.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let bp = liu.beta * liu.phi_bar;
    let ne = f_o.len();
    let mut lp = LinearProgram::<f64>::new(ne + 1);
    lp.bounds[ne] = (f64::NEG_INFINITY, f64::INFINITY);
    for (x, row) in cert.set.iter().zip(&rows) {
        // sum_y q(x,y)[1_{F_o}(y) w(y) + 1_{F_o^c}(y) v(y)] - e <= -1
        let q: f64 = row.iter().map(|(_, r)| r).sum();
        let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
        let mut fixed = 0.0;
        let mut put = |y: &State, r: f64| match pos.get(y) {
            Some(&k) => *coeffs.entry(k).or_default() += r,
            None => fixed += r * v.at(y),
        };
        for (y, r) in row {
            put(y, *r);
        }
        put(x, -q);
        let mut c: Vec<(usize, f64)> = coeffs.into_iter().filter(|(_, a)| *a != 0.0).collect();
        c.push((ne, -1.0));
        lp.add_constraint(c, Relation::Le, -1.0 - fixed);
    }
    // objective scaled by beta phi_bar: beta phi_bar 1_{F_o}(z) w(z) + e
    let mut obj = vec![0.0; ne + 1];
    obj[ne] = 1.0;
    if let Some(&k) = pos.get(z) {
        obj[k] = bp;
    }
    lp.set_objective(obj, Sense::Minimize);
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("tightening program ended {:?}: {}", sol.status, sol.diagnostics)));
    }
    let c_r = sol.objective / bp;
    let refined = if pos.contains_key(z) { c_r * liu.outflow } else { (liu.v_at_z + c_r) * liu.outflow };
    let naive = liu.bound;
    if refined > naive * (1.0 + 1e-9) {
        return Err(Error::Numerical(format!("refined bound {refined:e} exceeds the naive bound {naive:e}")));
    }
    Ok(TightenedBound {
        refined: refined.min(naive),
        naive,
        c_r,
        e: sol.point[ne],
        w: f_o.iter().enumerate().map(|(k, &x)| (x.clone(), sol.point[k])).collect(),
    })
}

/// `max_x |(rho Q)(x)|` over `states`, with `rho` zero outside its truncation.
pub fn stationary_residual(net: &ReactionNetwork, rho: &TruncatedDistribution, states: &[State]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in states {
        let mut s = -rho.get(x) * net.exit_rate(x)?;
        for (j, r) in net.reactions.iter().enumerate() {
            if r.nu.iter().all(|&d| d == 0) {
                continue;
            }
            let back: Vec<i64> = r.nu.iter().map(|d| -d).collect();
            let Some(y) = x.shifted(&back) else { continue };
            let p = rho.get(&y);
            if p != 0.0 {
                s += p * net.propensity(j, &y)?;
            }
        }
        worst = worst.max(s.abs());
    }
    Ok(worst)
}

/// Log-spaced search for the `beta` maximizing `beta phi_bar`.
pub fn beta_grid_search(net: &ReactionNetwork, t: &Truncation, set: &[State], lo: f64, hi: f64, n: usize) -> Result<(f64, f64)> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(Error::Invalid("beta grid needs 0 < lo <= hi and at least one point".into()));
    }
    let q = truncated_generator(net, t)?.q;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..n {
        let beta = if n == 1 { lo } else { lo * (hi / lo).powf(k as f64 / (n - 1) as f64) };
        let score = beta * phi_bar(&q, t, set, beta)?;
        if score > best.1 {
            best = (beta, score);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rigor {
    Rigorous,
    OracleBased,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Quantity {
    pub value: f64,
    pub rigor: Rigor,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub rigor: Rigor,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TruncationInfo {
    pub kind: TruncationKind,
    pub threshold: f64,
    pub states: usize,
}

/// JSON-serializable error summary; fields are emitted in declaration order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ErrorReport {
    pub scheme: String,
    pub truncation: TruncationInfo,
    pub tail_mass: Option<Quantity>,
    pub tail_bound: Option<Quantity>,
    pub scheme_error_l1: Option<Quantity>,
    pub scheme_error_tv: Option<Quantity>,
    pub full_error_tv: Option<Quantity>,
    pub lower_bound_error: Option<Quantity>,
    pub upper_tv_bracket: Option<Bracket>,
    pub upper_l1_bracket: Option<Bracket>,
    pub diagnostics: BTreeMap<String, Quantity>,
    pub notes: Vec<String>,
}

impl ErrorReport {
    pub fn new(scheme: &str, t: &Truncation) -> Self {
        ErrorReport {
            scheme: scheme.to_string(),
            truncation: TruncationInfo { kind: t.kind(), threshold: t.threshold(), states: t.len() },
            tail_mass: None,
            tail_bound: None,
            scheme_error_l1: None,
            scheme_error_tv: None,
            full_error_tv: None,
            lower_bound_error: None,
            upper_tv_bracket: None,
            upper_l1_bracket: None,
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn diagnostic(&mut self, name: &str, value: f64, rigor: Rigor) {
        self.diagnostics.insert(name.to_string(), Quantity { value, rigor });
    }

    /// Lower error and upper brackets of statewise bounds.
    pub fn attach_bounds(&mut self, pair: &BoundsPair, tail: TailInfo) {
        let e = bound_errors(pair, tail);
        let rigor = match tail {
            TailInfo::Known(_) => Rigor::OracleBased,
            TailInfo::Bound(b) => {
                self.tail_bound = Some(Quantity { value: b, rigor: Rigor::Rigorous });
                Rigor::Rigorous
            }
        };
        if let TailInfo::Known(m) = tail {
            self.tail_mass = Some(Quantity { value: m, rigor: Rigor::OracleBased });
        }
        self.lower_bound_error = e.lower_error.map(|v| Quantity { value: v, rigor: Rigor::Rigorous });
        self.upper_tv_bracket = Some(Bracket { lo: e.upper_tv.0, hi: e.upper_tv.1, rigor });
        self.upper_l1_bracket = Some(Bracket { lo: e.upper_l1.0, hi: e.upper_l1.1, rigor });
    }

    /// Scheme-specific and full errors of an approximation against an oracle.
    pub fn attach_oracle(&mut self, approx: &TruncatedDistribution, oracle: &TruncatedDistribution) -> Result<()> {
        let t = approx.truncation();
        let restricted = oracle.restrict_to(t)?;
        let scheme = distances(approx, &restricted, None);
        let full = distances(approx, oracle, None);
        self.tail_mass = Some(Quantity { value: (oracle.mass() - restricted.mass()).max(0.0), rigor: Rigor::OracleBased });
        self.scheme_error_l1 = Some(Quantity { value: scheme.l1, rigor: Rigor::OracleBased });
        self.scheme_error_tv = Some(Quantity { value: scheme.tv, rigor: Rigor::OracleBased });
        self.full_error_tv = Some(Quantity { value: full.tv, rigor: Rigor::OracleBased });
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
