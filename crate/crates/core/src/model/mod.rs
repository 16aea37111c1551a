//! Reaction networks and the rate matrix they induce.

mod expr;
mod parse;

pub use expr::Expr;
pub use parse::{parse_expr, parse_model};

use crate::error::{Error, Result};
use std::fmt;

/// Molecule counts, one entry per species.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, serde::Serialize)]
#[serde(transparent)]
pub struct State(pub Vec<u32>);

impl State {
    pub fn new(counts: Vec<u32>) -> Self {
        State(counts)
    }

    pub fn zeros(n: usize) -> Self {
        State(vec![0; n])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// `self + nu`, or `None` when some count would become negative.
    pub fn shifted(&self, nu: &[i64]) -> Option<State> {
        let mut out = Vec::with_capacity(self.0.len());
        for (&c, &d) in self.0.iter().zip(nu) {
            let v = c as i64 + d;
            if v < 0 || v > u32::MAX as i64 {
                return None;
            }
            out.push(v as u32);
        }
        Some(State(out))
    }
}

impl From<Vec<u32>> for State {
    fn from(v: Vec<u32>) -> Self {
        State(v)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Propensity {
    /// `k * prod_i x_i (x_i - 1) ... (x_i - nu_minus_i + 1)`, no factorial division.
    MassAction(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub nu_minus: Vec<u32>,
    pub nu_plus: Vec<u32>,
    pub nu: Vec<i64>,
    pub propensity: Propensity,
}

impl Reaction {
    pub fn new(nu_minus: Vec<u32>, nu_plus: Vec<u32>, propensity: Propensity) -> Self {
        let nu = nu_plus.iter().zip(&nu_minus).map(|(&p, &m)| p as i64 - m as i64).collect();
        Reaction { nu_minus, nu_plus, nu, propensity }
    }

    fn raw_propensity(&self, x: &[u32], params: &[f64]) -> f64 {
        match &self.propensity {
            Propensity::Expr(e) => e.eval(x, params),
            Propensity::MassAction(k) => {
                let mut a = k.eval(x, params);
                for (&xi, &m) in x.iter().zip(&self.nu_minus) {
                    for l in 0..m {
                        a *= xi as f64 - l as f64;
                    }
                }
                a
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<String>,
    pub param_names: Vec<String>,
    pub param_values: Vec<f64>,
    pub reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|p| p == name).map(|i| self.param_values[i])
    }

    /// Propensity `a_j(x)`, rejecting negative and non-finite values.
    pub fn propensity(&self, j: usize, x: &State) -> Result<f64> {
        let a = self.reactions[j].raw_propensity(&x.0, &self.param_values);
        if !a.is_finite() || a < 0.0 {
            return Err(Error::BadPropensity { reaction: j, state: x.to_string(), value: a });
        }
        Ok(a)
    }

    /// Off-diagonal entries `q(x, y)`, with reactions sharing a net change aggregated.
    pub fn rate_row(&self, x: &State) -> Result<Vec<(State, f64)>> {
        let mut row: Vec<(State, f64)> = Vec::with_capacity(self.reactions.len());
        for (j, r) in self.reactions.iter().enumerate() {
            let a = self.propensity(j, x)?;
            if a == 0.0 || r.nu.iter().all(|&d| d == 0) {
                continue;
            }
            let y = x.shifted(&r.nu).ok_or_else(|| Error::NegativeTarget { reaction: j, state: x.to_string() })?;
            match row.iter_mut().find(|(t, _)| *t == y) {
                Some(entry) => entry.1 += a,
                None => row.push((y, a)),
            }
        }
        Ok(row)
    }

    pub fn exit_rate(&self, x: &State) -> Result<f64> {
        Ok(self.rate_row(x)?.iter().map(|(_, q)| q).sum())
    }

    /// Jump-chain transition probabilities; an absorbing state jumps to itself.
    pub fn jump_probs(&self, x: &State) -> Result<Vec<(State, f64)>> {
        let row = self.rate_row(x)?;
        let q: f64 = row.iter().map(|(_, q)| q).sum();
        if q == 0.0 {
            return Ok(vec![(x.clone(), 1.0)]);
        }
        Ok(row.into_iter().map(|(y, r)| (y, r / q)).collect())
    }

    /// `Qv(x) = sum_j a_j(x) (v(x + nu_j) - v(x))`.
    pub fn generator_apply(&self, v: &dyn Fn(&State) -> f64, x: &State) -> Result<f64> {
        let vx = v(x);
        let mut acc = 0.0;
        for (y, q) in self.rate_row(x)? {
            acc += q * (v(&y) - vx);
        }
        Ok(acc)
    }
}

fn write_side(f: &mut fmt::Formatter<'_>, coeffs: &[u32], species: &[String]) -> fmt::Result {
    let mut first = true;
    for (i, &k) in coeffs.iter().enumerate() {
        if k == 0 {
            continue;
        }
        if !first {
            f.write_str(" + ")?;
        }
        first = false;
        if k > 1 {
            write!(f, "{k} ")?;
        }
        f.write_str(&species[i])?;
    }
    if first {
        f.write_str("0")?;
    }
    Ok(())
}

/// Pretty-prints in the model-file grammar; the output parses back to an equal network.
impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.species.is_empty() {
            writeln!(f, "species {}", self.species.join(" "))?;
        }
        for (name, v) in self.param_names.iter().zip(&self.param_values) {
            writeln!(f, "param {name} = {v:?}")?;
        }
        for r in &self.reactions {
            f.write_str("reaction ")?;
            write_side(f, &r.nu_minus, &self.species)?;
            f.write_str(" -> ")?;
            write_side(f, &r.nu_plus, &self.species)?;
            f.write_str(" : ")?;
            match &r.propensity {
                Propensity::MassAction(k) => {
                    write!(f, "mass_action({})", k.to_text(&self.species, &self.param_names))?
                }
                Propensity::Expr(e) => f.write_str(&e.to_text(&self.species, &self.param_names))?,
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
