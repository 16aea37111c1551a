//! Exact stochastic simulation (Gillespie) and time-average distributions.
//!
//! Random numbers come from `ChaCha8Rng` seeded with `seed_from_u64(seed)`, so a
//! run is bitwise reproducible on every platform.

use crate::dist::TruncatedDistribution;
use crate::error::{Error, Result};
use crate::model::{ReactionNetwork, State};
use crate::statespace::{Truncation, TruncationKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

pub const DEFAULT_JUMP_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub seed: u64,
    pub t_final: f64,
    pub x0: State,
    pub jump_cap: u64,
    /// Fraction of `[0, t_final]` discarded before recording dwell times.
    pub burn_in: f64,
    pub jumps: u64,
    /// Visited states in order of first visit after burn-in.
    pub states: Vec<State>,
    /// Time spent in each state after burn-in; sums to `(1 - burn_in) t_final`.
    pub dwell: Vec<f64>,
}

const UNRESOLVED: usize = usize::MAX;

struct Node {
    q: f64,
    cum: Vec<f64>,
    targets: Vec<State>,
    ids: Vec<usize>,
}

struct Graph<'a> {
    net: &'a ReactionNetwork,
    ids: HashMap<State, usize>,
    states: Vec<State>,
    nodes: Vec<Option<Node>>,
}

impl Graph<'_> {
    fn id(&mut self, x: &State) -> usize {
        if let Some(&i) = self.ids.get(x) {
            return i;
        }
        let i = self.states.len();
        self.ids.insert(x.clone(), i);
        self.states.push(x.clone());
        self.nodes.push(None);
        i
    }

    fn node(&mut self, i: usize) -> Result<&mut Node> {
        if self.nodes[i].is_none() {
            let row = self.net.rate_row(&self.states[i])?;
            let mut cum = Vec::with_capacity(row.len());
            let mut acc = 0.0;
            for (_, r) in &row {
                acc += r;
                cum.push(acc);
            }
            let n = row.len();
            self.nodes[i] = Some(Node { q: acc, cum, targets: row.into_iter().map(|(y, _)| y).collect(), ids: vec![UNRESOLVED; n] });
        }
        Ok(self.nodes[i].as_mut().unwrap())
    }
}

/// One exact trajectory on `[0, t_final]`.
pub fn gillespie(net: &ReactionNetwork, x0: &State, t_final: f64, seed: u64, jump_cap: u64) -> Result<SimulationRun> {
    gillespie_with_burn_in(net, x0, t_final, seed, jump_cap, 0.0)
}

pub fn gillespie_with_burn_in(
    net: &ReactionNetwork,
    x0: &State,
    t_final: f64,
    seed: u64,
    jump_cap: u64,
    burn_in: f64,
) -> Result<SimulationRun> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Invalid("t_final must be positive and finite".into()));
    }
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::Invalid("burn-in fraction must lie in [0, 1)".into()));
    }
    if x0.0.len() != net.n_species() {
        return Err(Error::Invalid(format!("initial state {x0} has the wrong number of species")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph { net, ids: HashMap::new(), states: Vec::new(), nodes: Vec::new() };
    let mut dwell: Vec<f64> = Vec::new();
    let t_start = burn_in * t_final;
    let mut cur = g.id(x0);
    let mut t = 0.0;
    let mut jumps = 0u64;
    loop {
        let node = g.node(cur)?;
        let q = node.q;
        let hold = if q > 0.0 { -(1.0 - rng.gen::<f64>()).ln() / q } else { f64::INFINITY };
        let t_next = t + hold;
        let (a, b) = (t.max(t_start), t_next.min(t_final));
        if b > a {
            if dwell.len() <= cur {
                dwell.resize(cur + 1, 0.0);
            }
            dwell[cur] += b - a;
        }
        if t_next >= t_final {
            break;
        }
        if jumps >= jump_cap {
            return Err(Error::Numerical(format!(
                "jump cap {jump_cap} reached at t = {t:e} before t_final = {t_final:e}; the chain may be exploding"
            )));
        }
        let u = rng.gen::<f64>() * q;
        let k = node.cum.iter().position(|&c| u < c).unwrap_or(node.cum.len() - 1);
        let mut next = node.ids[k];
        if next == UNRESOLVED {
            let y = node.targets[k].clone();
            next = g.id(&y);
            g.nodes[cur].as_mut().unwrap().ids[k] = next;
        }
        cur = next;
        t = t_next;
        jumps += 1;
    }
    // keep states with recorded time, in order of first visit
    let mut states = Vec::new();
    let mut kept = Vec::new();
    for (i, &d) in dwell.iter().enumerate() {
        if d > 0.0 {
            states.push(g.states[i].clone());
            kept.push(d);
        }
    }
    Ok(SimulationRun { seed, t_final, x0: x0.clone(), jump_cap, burn_in, jumps, states, dwell: kept })
}

/// Independent runs, one per seed, in seed order.
pub fn gillespie_batch(net: &ReactionNetwork, x0: &State, t_final: f64, seeds: &[u64], jump_cap: u64) -> Result<Vec<SimulationRun>> {
    seeds.par_iter().map(|&s| gillespie(net, x0, t_final, s, jump_cap)).collect()
}

/// Fraction of the recorded time spent in each visited state.
pub fn empirical_distribution(run: &SimulationRun) -> Result<TruncatedDistribution> {
    let mut pairs: Vec<(State, f64)> = run.states.iter().cloned().zip(run.dwell.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let t = Arc::new(Truncation::from_states(pairs.iter().map(|p| p.0.clone()).collect(), TruncationKind::Explicit, 0.0)?);
    TruncatedDistribution::new(t, pairs.into_iter().map(|p| p.1 / total).collect())
}
