//! Built-in benchmark models (Schlögl, toggle switch), their references, and the
//! scheme comparison harness behind `compare`.

use crate::dist::{BoundsPair, TruncatedDistribution};
use crate::error::{Error, Result};
use crate::errors::{bound_errors, stationary_residual, TailInfo};
use crate::model::{parse_model, ReactionNetwork, State};
use crate::schemes::bdp::{bdp_conditional, bdp_truncation, BirthDeathSpec};
use crate::schemes::ita::{ita_bounds, ita_sweep, TailBound};
use crate::schemes::ldqbdp::{extract_blocks, ldqbdp_solve, r_matrix_recursion};
use crate::schemes::lp::{build_polytope, ilp_statewise_bounds, lp_approximate};
use crate::schemes::ta::{build_augmented, ta_solve, ReentrySpec};
use crate::statespace::{build_sublevel_truncation, detect_levels, interior_set, NormLikeFn, Truncation, DEFAULT_STATE_CAP};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchloglParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl SchloglParams {
    pub const BIMODAL: SchloglParams = SchloglParams { k1: 0.025, k2: 4.17e-5, k3: 60.0, k4: 3.127 };
    pub const UNIMODAL: SchloglParams = SchloglParams { k1: 6.0, k2: 1.0 / 3.0, k3: 50.0, k4: 3.0 };
}

pub fn schlogl_model_text(p: &SchloglParams) -> String {
    format!(
        "species S\n\
         param k1 = {:e}\nparam k2 = {:e}\nparam k3 = {:e}\nparam k4 = {:e}\n\
         reaction 2 S -> 3 S : mass_action(k1)\n\
         reaction 3 S -> 2 S : mass_action(k2)\n\
         reaction 0 -> S : k3\n\
         reaction S -> 0 : mass_action(k4)\n",
        p.k1, p.k2, p.k3, p.k4
    )
}

pub fn schlogl_network(p: &SchloglParams) -> Result<ReactionNetwork> {
    parse_model(&schlogl_model_text(p))
}

pub const TOGGLE_MODEL: &str = "species P1 P2\n\
reaction 0 -> P1 : 20 / (1 + P2)\n\
reaction P1 -> 0 : P1\n\
reaction 0 -> P2 : 20 / (1 + P1)\n\
reaction P2 -> 0 : P2\n";

/// Moment bound `pi((P1 + P2)^6) <= c` used for the toggle switch.
pub const TOGGLE_C: f64 = 1.8e7;
/// Levels of the reference truncation `{(P1 + P2)^6 < 238^6}`.
pub const TOGGLE_REF_LEVELS: usize = 238;
pub const TOGGLE_W: &str = "(P1 + P2)^6";

pub fn toggle_network() -> Result<ReactionNetwork> {
    parse_model(TOGGLE_MODEL)
}

/// `{x : (x1 + x2)^6 < L^6}`, i.e. the first `L` levels.
pub fn toggle_truncation(net: &ReactionNetwork, levels: usize) -> Result<Arc<Truncation>> {
    let w = NormLikeFn::parse(net, TOGGLE_W)?;
    let r = (levels as f64).powi(6);
    Ok(Arc::new(build_sublevel_truncation(net, &w, r, &[], DEFAULT_STATE_CAP)?))
}

const SCHLOGL_STATE_CAP: usize = 1_000_000;
const TAIL_RUN: usize = 50;

/// Stationary distribution of the Schlögl model from the product formula, cut
/// where `TAIL_RUN` consecutive weights fall below `tol` relative to the total
/// while the birth/death ratio stays below one.
pub fn schlogl_reference(p: &SchloglParams, tol: f64) -> Result<TruncatedDistribution> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Invalid("tolerance must lie in (0, 1)".into()));
    }
    if [p.k2, p.k3, p.k4].iter().any(|&k| !(k > 0.0)) || p.k1 < 0.0 {
        return Err(Error::Invalid("Schlögl rate constants must be positive".into()));
    }
    let spec = BirthDeathSpec::from_network(&schlogl_network(p)?)?;
    let ln_tol = tol.ln();
    let mut lw = vec![0.0f64];
    let mut top = 0.0f64;
    // running log of the total weight
    let mut lsum = 0.0f64;
    let mut run = 0usize;
    let mut x = 0u32;
    loop {
        let b = spec.birth(x)?;
        if b == 0.0 {
            break;
        }
        if lw.len() >= SCHLOGL_STATE_CAP {
            return Err(Error::Numerical(format!("series did not converge within {SCHLOGL_STATE_CAP} states")));
        }
        let d = spec.death(x + 1)?;
        let next = lw[x as usize] + b.ln() - d.ln();
        lw.push(next);
        top = top.max(next);
        lsum = lsum.max(next) + ((lsum - lsum.max(next)).exp() + (next - lsum.max(next)).exp()).ln();
        x += 1;
        let ratio = spec.birth(x)? / spec.death(x + 1)?;
        if next - lsum < ln_tol && ratio < 1.0 {
            run += 1;
        } else {
            run = 0;
        }
        if run >= TAIL_RUN && next + (ratio / (1.0 - ratio)).ln() - lsum < ln_tol {
            break;
        }
    }
    let w: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
    TruncatedDistribution::normalized(bdp_truncation(w.len()), w)
}

/// Mass a one-species distribution puts on `{x >= r}`, summed from the tail.
pub fn tail_mass_1d(d: &TruncatedDistribution, r: u32) -> f64 {
    let mut s = 0.0;
    for (x, v) in d.iter().collect::<Vec<_>>().into_iter().rev() {
        if x.0[0] >= r {
            s += v;
        }
    }
    s
}

/// States of a one-species distribution that beat both neighbours.
pub fn local_maxima_1d(d: &TruncatedDistribution) -> Vec<u32> {
    let pts: Vec<(u32, f64)> = d.iter().map(|(x, v)| (x.0[0], v)).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() {
        let left = if i > 0 && pts[i - 1].0 + 1 == pts[i].0 { pts[i - 1].1 } else { 0.0 };
        let right = if i + 1 < pts.len() && pts[i + 1].0 == pts[i].0 + 1 { pts[i + 1].1 } else { 0.0 };
        if pts[i].1 > left && pts[i].1 >= right && pts[i].1 > 0.0 {
            out.push(pts[i].0);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ToggleReference {
    pub bounds: BoundsPair,
    /// Midpoint of the bounds.
    pub reference: TruncatedDistribution,
    /// `1 - l(S)`, a guaranteed TV error of the lower bound.
    pub guarantee: f64,
    /// Stationary residual of the midpoint over the interior states.
    pub residual: f64,
}

/// ITA bounds on `{(P1 + P2)^6 < r_ref}`. With `target`, errors unless `1 - l(S) < target`.
pub fn toggle_reference(c: f64, r_ref: f64, target: Option<f64>) -> Result<ToggleReference> {
    let net = toggle_network()?;
    let w = NormLikeFn::parse(&net, TOGGLE_W)?;
    let t = Arc::new(build_sublevel_truncation(&net, &w, r_ref, &[], DEFAULT_STATE_CAP)?);
    let sweep = ita_sweep(&net, &t)?;
    let bounds = ita_bounds(&sweep, &TailBound::Moment { c, r: r_ref })?;
    let guarantee = 1.0 - bounds.lower.as_ref().map_or(0.0, |l| l.mass());
    if let Some(target) = target {
        if !(guarantee < target) {
            return Err(Error::Numerical(format!("reference guarantee {guarantee:e} misses the target {target:e}")));
        }
    }
    let reference = bounds.midpoint()?;
    let interior: Vec<State> = interior_set(&net, &t)?.into_iter().map(|i| t.state(i).clone()).collect();
    let residual = stationary_residual(&net, &reference, &interior)?;
    Ok(ToggleReference { bounds, reference, guarantee, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    SchloglBimodal,
    SchloglUnimodal,
    Toggle,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "schlogl-bimodal" => Ok(CaseId::SchloglBimodal),
            "schlogl-unimodal" => Ok(CaseId::SchloglUnimodal),
            "toggle" => Ok(CaseId::Toggle),
            _ => Err(Error::Invalid(format!("unknown case `{s}` (expected schlogl-bimodal, schlogl-unimodal or toggle)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::SchloglBimodal => "schlogl-bimodal",
            CaseId::SchloglUnimodal => "schlogl-unimodal",
            CaseId::Toggle => "toggle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareScheme {
    Bdp,
    Ldqbdp,
    /// Re-entry at the middle of the in-boundary.
    Ta,
    /// Re-entry at the lowest state.
    TaFirst,
    /// Re-entry at the highest state of a one-dimensional truncation.
    TaLast,
    Ita,
    Lp,
    Ilp,
}

impl CompareScheme {
    pub fn name(self) -> &'static str {
        match self {
            CompareScheme::Bdp => "bdp",
            CompareScheme::Ldqbdp => "ldqbdp",
            CompareScheme::Ta => "ta",
            CompareScheme::TaFirst => "ta-first",
            CompareScheme::TaLast => "ta-last",
            CompareScheme::Ita => "ita",
            CompareScheme::Lp => "lp",
            CompareScheme::Ilp => "ilp",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub id: CaseId,
    pub schemes: Vec<CompareScheme>,
    /// Truncation thresholds `r`.
    pub grid: Vec<f64>,
    pub c: Option<f64>,
}

impl BenchmarkCase {
    pub fn toggle() -> Self {
        BenchmarkCase {
            id: CaseId::Toggle,
            schemes: vec![CompareScheme::Ldqbdp, CompareScheme::Ta, CompareScheme::Lp, CompareScheme::Ita, CompareScheme::Ilp],
            grid: (1..=7).map(|k| ((6 * k) as f64).powi(6)).collect(),
            c: Some(TOGGLE_C),
        }
    }

    pub fn schlogl(id: CaseId) -> Self {
        BenchmarkCase {
            id,
            schemes: vec![CompareScheme::Bdp, CompareScheme::Ldqbdp, CompareScheme::TaFirst, CompareScheme::TaLast],
            grid: (0..13).map(|k| (100 + 50 * k) as f64).collect(),
            c: None,
        }
    }

    pub fn named(id: CaseId) -> Self {
        match id {
            CaseId::Toggle => Self::toggle(),
            _ => Self::schlogl(id),
        }
    }

    pub fn network(&self) -> Result<ReactionNetwork> {
        match self.id {
            CaseId::SchloglBimodal => schlogl_network(&SchloglParams::BIMODAL),
            CaseId::SchloglUnimodal => schlogl_network(&SchloglParams::UNIMODAL),
            CaseId::Toggle => toggle_network(),
        }
    }

    fn truncation(&self, net: &ReactionNetwork, r: f64) -> Result<Arc<Truncation>> {
        match self.id {
            CaseId::Toggle => {
                let w = NormLikeFn::parse(net, TOGGLE_W)?;
                Ok(Arc::new(build_sublevel_truncation(net, &w, r, &[], DEFAULT_STATE_CAP)?))
            }
            _ => Ok(bdp_truncation(r as usize)),
        }
    }

    fn level_fn(&self) -> &'static str {
        match self.id {
            CaseId::Toggle => "P1 + P2",
            _ => "S",
        }
    }

    fn moment_fn(&self) -> &'static str {
        match self.id {
            CaseId::Toggle => TOGGLE_W,
            _ => "S",
        }
    }
}

/// One cell of the comparison table; `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: &'static str,
    pub r: f64,
    pub states: usize,
    pub l1_scheme_error: Option<f64>,
    pub tv_lower_error: Option<f64>,
    pub tv_upper_bracket: Option<(f64, f64)>,
    pub tail_bound: Option<f64>,
    pub wall_ms: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompareTable {
    pub case: CaseId,
    pub rows: Vec<CompareRow>,
}

pub const COMPARE_HEADER: [&str; 9] =
    ["scheme", "r", "states", "l1_scheme_error", "tv_lower_error", "tv_upper_bracket_lo", "tv_upper_bracket_hi", "tail_bound", "wall_ms"];

impl CompareTable {
    pub fn row(&self, scheme: CompareScheme, r: f64) -> Option<&CompareRow> {
        self.rows.iter().find(|c| c.scheme == scheme.name() && c.r == r)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(|c| c.failure.is_some())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARE_HEADER)?;
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        for c in &self.rows {
            w.write_record([
                c.scheme.to_string(),
                format!("{}", c.r),
                c.states.to_string(),
                f(c.l1_scheme_error),
                f(c.tv_lower_error),
                f(c.tv_upper_bracket.map(|b| b.0)),
                f(c.tv_upper_bracket.map(|b| b.1)),
                f(c.tail_bound),
                f(c.wall_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

enum Outcome {
    Point(TruncatedDistribution),
    Bounds(BoundsPair),
}

fn run_scheme(case: &BenchmarkCase, net: &ReactionNetwork, t: &Arc<Truncation>, s: CompareScheme) -> Result<Outcome> {
    let r = t.threshold();
    let moment = || -> Result<(NormLikeFn, f64)> {
        let c = case.c.ok_or_else(|| Error::Invalid(format!("{} needs a moment bound", s.name())))?;
        Ok((NormLikeFn::parse(net, case.moment_fn())?, c))
    };
    Ok(match s {
        CompareScheme::Bdp => Outcome::Point(bdp_conditional(&BirthDeathSpec::from_network(net)?, t.len())?),
        CompareScheme::Ldqbdp => {
            let f = NormLikeFn::parse(net, case.level_fn())?;
            let levels = detect_levels(net, t, &f)?;
            let blocks = extract_blocks(net, t, &levels)?;
            let rs = r_matrix_recursion(&blocks, levels.n_levels())?;
            Outcome::Point(ldqbdp_solve(&blocks, &rs)?)
        }
        CompareScheme::Ta | CompareScheme::TaFirst | CompareScheme::TaLast => {
            let spec = match s {
                CompareScheme::Ta => ReentrySpec::BoundaryMid,
                CompareScheme::TaFirst => ReentrySpec::FixedState(t.state(0).clone()),
                _ => ReentrySpec::FixedState(t.state(t.len() - 1).clone()),
            };
            Outcome::Point(ta_solve(&build_augmented(net, t, &spec)?)?)
        }
        CompareScheme::Ita => {
            let c = case.c.ok_or_else(|| Error::Invalid("ita needs a moment bound".into()))?;
            Outcome::Bounds(ita_bounds(&ita_sweep(net, t)?, &TailBound::Moment { c, r })?)
        }
        CompareScheme::Lp => {
            let (w, c) = moment()?;
            Outcome::Point(lp_approximate(&build_polytope(net, t, &w, c)?)?)
        }
        CompareScheme::Ilp => {
            let (w, c) = moment()?;
            Outcome::Bounds(ilp_statewise_bounds(&build_polytope(net, t, &w, c)?)?.0)
        }
    })
}

/// `sum_{x in S_r} |p(x) - reference(x)|`.
fn l1_on(p: &TruncatedDistribution, reference: &TruncatedDistribution) -> f64 {
    p.iter().map(|(x, v)| (v - reference.get(x)).abs()).sum()
}

fn cell(case: &BenchmarkCase, net: &ReactionNetwork, reference: &TruncatedDistribution, s: CompareScheme, r: f64, timing: bool) -> CompareRow {
    let mut row = CompareRow {
        scheme: s.name(),
        r,
        states: 0,
        l1_scheme_error: None,
        tv_lower_error: None,
        tv_upper_bracket: None,
        tail_bound: case.c.map(|c| c / r),
        wall_ms: None,
        failure: None,
    };
    let t = match case.truncation(net, r) {
        Ok(t) => t,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    row.states = t.len();
    let start = Instant::now();
    let out = run_scheme(case, net, &t, s);
    if timing {
        row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    match out {
        Ok(Outcome::Point(p)) => row.l1_scheme_error = Some(l1_on(&p, reference)),
        Ok(Outcome::Bounds(b)) => {
            row.l1_scheme_error = Some(l1_on(&b.upper, reference));
            let tail = match case.c {
                Some(c) => TailInfo::Bound(c / r),
                None => TailInfo::Known(1.0 - l1_mass_on(&t, reference)),
            };
            let e = bound_errors(&b, tail);
            row.tv_lower_error = e.lower_error;
            row.tv_upper_bracket = Some(e.upper_tv);
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

fn l1_mass_on(t: &Truncation, reference: &TruncatedDistribution) -> f64 {
    t.states().iter().map(|x| reference.get(x)).sum()
}

/// Every scheme of `case` at every threshold of its grid, scored against `reference`.
/// Cells run concurrently unless `timing` is set, so wall times are not inflated
/// by sharing cores; rows come out in grid-major order either way.
pub fn compare_schemes(case: &BenchmarkCase, reference: &TruncatedDistribution, timing: bool) -> Result<CompareTable> {
    let net = case.network()?;
    let jobs: Vec<(f64, CompareScheme)> = case.grid.iter().flat_map(|&r| case.schemes.iter().map(move |&s| (r, s))).collect();
    let rows = if timing {
        jobs.iter().map(|&(r, s)| cell(case, &net, reference, s, r, true)).collect()
    } else {
        jobs.par_iter().map(|&(r, s)| cell(case, &net, reference, s, r, false)).collect()
    };
    Ok(CompareTable { case: case.id, rows })
}
