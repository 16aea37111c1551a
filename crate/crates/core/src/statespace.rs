//! Truncations of the state space and their boundary, level and class structure.

use crate::error::{Error, Result};
use crate::model::{parse_expr, Expr, ReactionNetwork, State};
use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

/// A real function on states.
pub trait StateFn: Sync {
    fn at(&self, x: &State) -> f64;
}

impl<F: Fn(&State) -> f64 + Sync> StateFn for F {
    fn at(&self, x: &State) -> f64 {
        self(x)
    }
}

/// Expression over species counts, e.g. `(S1 + S2)^6`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormLikeFn {
    expr: Expr,
    params: Vec<f64>,
    text: String,
}

impl NormLikeFn {
    pub fn parse(net: &ReactionNetwork, text: &str) -> Result<Self> {
        Ok(NormLikeFn { expr: parse_expr(net, text)?, params: net.param_values.clone(), text: text.trim().to_string() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, x: &State) -> f64 {
        self.expr.eval(&x.0, &self.params)
    }
}

impl StateFn for NormLikeFn {
    fn at(&self, x: &State) -> f64 {
        self.eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationKind {
    Sublevel,
    Superlevel,
    Levels,
    Explicit,
}

/// Finite, lexicographically ordered set of states with a reverse index.
#[derive(Debug, Clone)]
pub struct Truncation {
    states: Vec<State>,
    index: HashMap<State, usize>,
    threshold: f64,
    kind: TruncationKind,
    tail_bound: Option<f64>,
}

impl Truncation {
    /// Sorts and deduplicates `states`.
    pub fn from_states(mut states: Vec<State>, kind: TruncationKind, threshold: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Invalid("a truncation must contain at least one state".into()));
        }
        states.sort();
        states.dedup();
        let n = states[0].0.len();
        if states.iter().any(|s| s.0.len() != n) {
            return Err(Error::Invalid("states of a truncation must have equal length".into()));
        }
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Truncation { states, index, threshold, kind, tail_bound: None })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &State {
        &self.states[i]
    }

    pub fn index_of(&self, x: &State) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &State) -> bool {
        self.index.contains_key(x)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn kind(&self) -> TruncationKind {
        self.kind
    }

    /// Tail bound carried by the construction (superlevel sets only).
    pub fn attached_tail_bound(&self) -> Option<f64> {
        self.tail_bound
    }

    /// One row per state: the counts, then the index.
    pub fn write_csv<W: Write>(&self, species: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = species.iter().map(String::as_str).collect();
        header.push("index");
        w.write_record(&header)?;
        for (i, s) in self.states.iter().enumerate() {
            let mut rec: Vec<String> = s.0.iter().map(u32::to_string).collect();
            rec.push(i.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn lattice_fill(n: usize, seeds: &[State], inside: &dyn Fn(&State) -> bool, cap: usize) -> Result<Vec<State>> {
    let mut seen: HashSet<State> = HashSet::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if s.0.len() != n {
            return Err(Error::Invalid(format!("seed state {s} has the wrong number of species")));
        }
        if !inside(s) {
            return Err(Error::Invalid(format!("seed state {s} lies outside the requested set")));
        }
        if seen.insert(s.clone()) {
            queue.push_back(s.clone());
        }
    }
    while let Some(x) = queue.pop_front() {
        for i in 0..n {
            for d in [-1i64, 1] {
                let mut step = vec![0i64; n];
                step[i] = d;
                let Some(y) = x.shifted(&step) else { continue };
                if !seen.contains(&y) && inside(&y) {
                    if seen.len() >= cap {
                        return Err(Error::StateCap { cap });
                    }
                    seen.insert(y.clone());
                    queue.push_back(y);
                }
            }
        }
    }
    Ok(seen.into_iter().collect())
}

/// `{x : w(x) < r}` by unit-step lattice expansion from `seeds` (the origin when empty).
pub fn build_sublevel_truncation(
    net: &ReactionNetwork,
    w: &dyn StateFn,
    r: f64,
    seeds: &[State],
    cap: usize,
) -> Result<Truncation> {
    let origin = [State::zeros(net.n_species())];
    let seeds = if seeds.is_empty() { &origin[..] } else { seeds };
    let states = lattice_fill(net.n_species(), seeds, &|x| w.at(x) < r, cap)?;
    Truncation::from_states(states, TruncationKind::Sublevel, r)
}

/// `{x : Qu(x) > -r * qu_max}`, carrying the tail bound `1/(r+1)`.
pub fn build_superlevel_truncation(
    net: &ReactionNetwork,
    u: &dyn StateFn,
    r: f64,
    qu_max: f64,
    seeds: &[State],
    cap: usize,
) -> Result<Truncation> {
    if !(qu_max > 0.0) || !qu_max.is_finite() {
        return Err(Error::Invalid(format!("qu_max must be positive and finite, got {qu_max}")));
    }
    if r < 0.0 {
        return Err(Error::Invalid("superlevel threshold must be nonnegative".into()));
    }
    let origin = [State::zeros(net.n_species())];
    let seeds = if seeds.is_empty() { &origin[..] } else { seeds };
    let failure = std::cell::RefCell::new(None);
    let inside = |x: &State| match net.generator_apply(&|y: &State| u.at(y), x) {
        Ok(qu) => qu > -r * qu_max,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            false
        }
    };
    let states = lattice_fill(net.n_species(), seeds, &inside, cap);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut t = Truncation::from_states(states?, TruncationKind::Superlevel, r)?;
    t.tail_bound = Some(1.0 / (r + 1.0));
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct OutBoundary {
    /// Indices with positive out-rate, ascending.
    pub states: Vec<usize>,
    /// `q_o(x)` for every index of the truncation.
    pub q_out: Vec<f64>,
}

pub fn out_boundary(net: &ReactionNetwork, t: &Truncation) -> Result<OutBoundary> {
    let mut q_out = vec![0.0; t.len()];
    let mut states = Vec::new();
    for (i, x) in t.states().iter().enumerate() {
        let mut q = 0.0;
        for (y, rate) in net.rate_row(x)? {
            if !t.contains(&y) {
                q += rate;
            }
        }
        q_out[i] = q;
        if q > 0.0 {
            states.push(i);
        }
    }
    Ok(OutBoundary { states, q_out })
}

/// States of `t` reachable in one jump from outside `t`, ascending by index.
pub fn in_boundary(net: &ReactionNetwork, t: &Truncation) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, y) in t.states().iter().enumerate() {
        let mut hit = false;
        for (j, r) in net.reactions.iter().enumerate() {
            if r.nu.iter().all(|&d| d == 0) {
                continue;
            }
            let back: Vec<i64> = r.nu.iter().map(|d| -d).collect();
            let Some(pre) = y.shifted(&back) else { continue };
            if !t.contains(&pre) && net.propensity(j, &pre)? > 0.0 {
                hit = true;
                break;
            }
        }
        if hit {
            out.push(i);
        }
    }
    Ok(out)
}

/// States of `t` that cannot be entered in one jump from outside.
pub fn interior_set(net: &ReactionNetwork, t: &Truncation) -> Result<Vec<usize>> {
    let inb: HashSet<usize> = in_boundary(net, t)?.into_iter().collect();
    Ok((0..t.len()).filter(|i| !inb.contains(i)).collect())
}

#[derive(Debug, Clone)]
pub struct LevelStructure {
    /// `levels[l]` lists the truncation indices with level value `l`.
    pub levels: Vec<Vec<usize>>,
    pub level_of: Vec<usize>,
}

impl LevelStructure {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Groups states by the integer value of `f`, checking every jump moves at most one level.
pub fn detect_levels(net: &ReactionNetwork, t: &Truncation, f: &dyn StateFn) -> Result<LevelStructure> {
    let mut level_of = Vec::with_capacity(t.len());
    for x in t.states() {
        let v = f.at(x);
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::Invalid(format!("level function is {v} at {x}; expected a nonnegative integer")));
        }
        level_of.push(v as usize);
    }
    for x in t.states() {
        let fx = f.at(x);
        for (j, r) in net.reactions.iter().enumerate() {
            if net.propensity(j, x)? == 0.0 {
                continue;
            }
            let Some(y) = x.shifted(&r.nu) else {
                return Err(Error::NegativeTarget { reaction: j, state: x.to_string() });
            };
            let step = f.at(&y) - fx;
            if step.abs() > 1.0 || step.fract() != 0.0 {
                return Err(Error::LevelStep { state: x.to_string(), reaction: j, step });
            }
        }
    }
    let n_levels = level_of.iter().max().map_or(0, |m| m + 1);
    let mut levels = vec![Vec::new(); n_levels];
    for (i, &l) in level_of.iter().enumerate() {
        levels[l].push(i);
    }
    if let Some(l) = levels.iter().position(Vec::is_empty) {
        return Err(Error::Invalid(format!("level {l} contains no state of the truncation")));
    }
    Ok(LevelStructure { levels, level_of })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecomposition {
    /// Closed classes, each ascending, ordered by smallest member.
    pub closed_classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

impl ClassDecomposition {
    /// Closedness ignores edges that leave the analysed set.
    pub const CAVEAT: &'static str =
        "closedness is relative to the truncation: transitions leaving it are ignored";
}

/// Strongly connected components by an iterative Tarjan search; `succ[v]` lists successors.
pub fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge < succ[v].len() {
                let w = succ[v][*edge];
                *edge += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Closed classes and transient states of the directed graph `succ`.
pub fn classes_of_graph(succ: &[Vec<usize>]) -> ClassDecomposition {
    let comps = strongly_connected_components(succ);
    let mut comp_of = vec![0; succ.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut closed = Vec::new();
    let mut transient = Vec::new();
    for (c, members) in comps.into_iter().enumerate() {
        let leaves = members.iter().any(|&v| succ[v].iter().any(|&w| comp_of[w] != c));
        if leaves {
            transient.extend(members);
        } else {
            closed.push(members);
        }
    }
    closed.sort();
    transient.sort_unstable();
    ClassDecomposition { closed_classes: closed, transient }
}

pub fn communicating_classes(net: &ReactionNetwork, t: &Truncation) -> Result<ClassDecomposition> {
    let mut succ = Vec::with_capacity(t.len());
    for x in t.states() {
        let mut out: Vec<usize> = net.rate_row(x)?.iter().filter_map(|(y, _)| t.index_of(y)).collect();
        out.sort_unstable();
        succ.push(out);
    }
    Ok(classes_of_graph(&succ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn bdp(birth: &str, death: &str) -> ReactionNetwork {
        parse_model(&format!("species X\nreaction 0 -> X : {birth}\nreaction X -> 0 : {death}\n")).unwrap()
    }

    #[test]
    fn one_dimensional_sublevel() {
        let net = bdp("1", "X");
        let w = NormLikeFn::parse(&net, "X").unwrap();
        let t = build_sublevel_truncation(&net, &w, 5.0, &[], DEFAULT_STATE_CAP).unwrap();
        let got: Vec<u32> = t.states().iter().map(|s| s.0[0]).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
        assert_eq!(out_boundary(&net, &t).unwrap().states, vec![4]);
        assert_eq!(out_boundary(&net, &t).unwrap().q_out[4], 1.0);
        assert_eq!(in_boundary(&net, &t).unwrap(), vec![4]);
        assert_eq!(interior_set(&net, &t).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn superlevel_example() {
        let net = bdp("1", "X");
        let u = |x: &State| x.0[0] as f64;
        let t = build_superlevel_truncation(&net, &u, 9.0, 1.0, &[], DEFAULT_STATE_CAP).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.state(9).0, vec![9]);
        assert_eq!(t.attached_tail_bound(), Some(0.1));
        let t0 = build_superlevel_truncation(&net, &u, 0.0, 1.0, &[], DEFAULT_STATE_CAP).unwrap();
        assert_eq!(t0.len(), 1);
        assert!(build_superlevel_truncation(&net, &u, 1.0, 0.0, &[], DEFAULT_STATE_CAP).is_err());
    }

    #[test]
    fn state_cap_is_enforced() {
        let net = bdp("1", "X");
        let w = NormLikeFn::parse(&net, "X").unwrap();
        assert!(matches!(build_sublevel_truncation(&net, &w, 1e9, &[], 1000), Err(Error::StateCap { .. })));
    }

    #[test]
    fn level_step_violation() {
        let net = parse_model("species A\nreaction 0 -> 2 A : 1\n").unwrap();
        let w = NormLikeFn::parse(&net, "A").unwrap();
        let t = build_sublevel_truncation(&net, &w, 10.0, &[], DEFAULT_STATE_CAP).unwrap();
        assert!(matches!(detect_levels(&net, &t, &w), Err(Error::LevelStep { step, .. }) if step == 2.0));
    }

    #[test]
    fn mass_levels_of_dimerization() {
        let net = parse_model(
            "species S1 S2\nreaction 2 S1 -> S2 : mass_action(1)\nreaction S2 -> 2 S1 : mass_action(1)\n\
             reaction 0 -> S1 : 1\nreaction S1 -> 0 : mass_action(1)\n",
        )
        .unwrap();
        let w = NormLikeFn::parse(&net, "S1 + 2 * S2").unwrap();
        let t = build_sublevel_truncation(&net, &w, 12.0, &[], DEFAULT_STATE_CAP).unwrap();
        let ls = detect_levels(&net, &t, &w).unwrap();
        assert_eq!(ls.n_levels(), 12);
    }

    #[test]
    fn tarjan_on_small_graphs() {
        // 0 -> 1 -> 2 -> 0, 3 -> 0, 4 isolated
        let succ = vec![vec![1], vec![2], vec![0], vec![0], vec![]];
        let d = classes_of_graph(&succ);
        assert_eq!(d.closed_classes, vec![vec![0, 1, 2], vec![4]]);
        assert_eq!(d.transient, vec![3]);
    }
}
