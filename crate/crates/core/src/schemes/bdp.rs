//! One-dimensional birth-death processes: exact conditional distributions by the
//! product formula, and bounds from a mean bound.

use crate::dist::{BoundsPair, TruncatedDistribution, Validity};
use crate::error::{Error, Result};
use crate::model::{parse_model, ReactionNetwork, State};
use crate::statespace::{Truncation, TruncationKind};
use std::sync::Arc;

/// Birth rate `a+(x)` and death rate `a-(x)` of a one-species, one-step network.
#[derive(Debug, Clone)]
pub struct BirthDeathSpec {
    net: ReactionNetwork,
    births: Vec<usize>,
    deaths: Vec<usize>,
}

impl BirthDeathSpec {
    /// Accepts one-species networks whose reactions change the count by -1, 0 or +1.
    pub fn from_network(net: &ReactionNetwork) -> Result<Self> {
        if net.n_species() != 1 {
            return Err(Error::Invalid(format!("a birth-death process has one species, not {}", net.n_species())));
        }
        let mut births = Vec::new();
        let mut deaths = Vec::new();
        for (j, r) in net.reactions.iter().enumerate() {
            match r.nu[0] {
                1 => births.push(j),
                -1 => deaths.push(j),
                0 => {}
                d => return Err(Error::Invalid(format!("reaction {j} changes the count by {d}"))),
            }
        }
        Ok(BirthDeathSpec { net: net.clone(), births, deaths })
    }

    /// Builds the spec from two propensity expressions in the species `X`.
    pub fn from_exprs(birth: &str, death: &str) -> Result<Self> {
        let net = parse_model(&format!("species X\nreaction 0 -> X : {birth}\nreaction X -> 0 : {death}\n"))?;
        Self::from_network(&net)
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.net
    }

    fn sum(&self, js: &[usize], x: u32) -> Result<f64> {
        let s = State(vec![x]);
        let mut a = 0.0;
        for &j in js {
            a += self.net.propensity(j, &s)?;
        }
        Ok(a)
    }

    pub fn birth(&self, x: u32) -> Result<f64> {
        self.sum(&self.births, x)
    }

    pub fn death(&self, x: u32) -> Result<f64> {
        if x == 0 {
            return Ok(0.0);
        }
        self.sum(&self.deaths, x)
    }
}

/// `{0, ..., r-1}` as a sublevel truncation of `w(x) = x`.
pub fn bdp_truncation(r: usize) -> Arc<Truncation> {
    let states = (0..r as u32).map(|x| State(vec![x])).collect();
    Arc::new(Truncation::from_states(states, TruncationKind::Sublevel, r as f64).expect("r >= 1"))
}

const BLOCK: i32 = 512;

/// `gamma(x) = m[x] * 2^(512 * e[x])`: the product formula with exact power-of-two
/// rescaling, so neither overflow nor underflow occurs along the way.
fn scaled_gamma(spec: &BirthDeathSpec, r: usize) -> Result<(Vec<f64>, Vec<i32>)> {
    if r == 0 {
        return Err(Error::Invalid("truncation size must be positive".into()));
    }
    let up = 2f64.powi(BLOCK);
    let down = 2f64.powi(-BLOCK);
    let mut m = Vec::with_capacity(r);
    let mut e = Vec::with_capacity(r);
    let (mut cur, mut exp) = (1.0f64, 0i32);
    m.push(cur);
    e.push(exp);
    for x in 1..r as u32 {
        let dm = spec.death(x)?;
        if !(dm > 0.0) {
            return Err(Error::Invalid(format!("death rate vanishes at x = {x}")));
        }
        cur *= spec.birth(x - 1)? / dm;
        if cur > up {
            cur *= down;
            exp += 1;
        } else if cur > 0.0 && cur < down {
            cur *= up;
            exp -= 1;
        }
        m.push(cur);
        e.push(exp);
    }
    Ok((m, e))
}

/// `ln gamma(x)` for `x < r`; `-inf` where the product vanishes.
pub fn bdp_log_gamma(spec: &BirthDeathSpec, r: usize) -> Result<Vec<f64>> {
    let (m, e) = scaled_gamma(spec, r)?;
    let l2 = std::f64::consts::LN_2;
    Ok(m.iter().zip(&e).map(|(&m, &e)| m.ln() + (BLOCK as f64) * (e as f64) * l2).collect())
}

/// `gamma(x) = prod_{k=1}^{x} a+(k-1)/a-(k)`; entries beyond the `f64` range saturate.
pub fn bdp_gamma(spec: &BirthDeathSpec, r: usize) -> Result<Vec<f64>> {
    let (m, e) = scaled_gamma(spec, r)?;
    Ok(m.iter().zip(&e).map(|(&m, &e)| m * 2f64.powi(BLOCK * e)).collect())
}

/// Unnormalized weights sharing a common power-of-two factor with the largest.
fn relative_weights(m: &[f64], e: &[i32]) -> Vec<f64> {
    let top = e.iter().zip(m).filter(|(_, &m)| m > 0.0).map(|(&e, _)| e).max().unwrap_or(0);
    m.iter()
        .zip(e)
        .map(|(&m, &e)| {
            let d = e - top;
            if d < -3 {
                0.0
            } else {
                m * 2f64.powi(BLOCK * d)
            }
        })
        .collect()
}

/// `pi(x | {0..r-1}) = gamma(x) / sum_k gamma(k)`.
pub fn bdp_conditional(spec: &BirthDeathSpec, r: usize) -> Result<TruncatedDistribution> {
    let (m, e) = scaled_gamma(spec, r)?;
    TruncatedDistribution::normalized(bdp_truncation(r), relative_weights(&m, &e))
}

/// Upper bound = conditional distribution; lower bound = `(1 - c/r)` times it when `r > c`.
pub fn bdp_bounds(spec: &BirthDeathSpec, r: usize, c: f64) -> Result<BoundsPair> {
    if c < 0.0 {
        return Err(Error::Invalid("mean bound must be nonnegative".into()));
    }
    let upper = bdp_conditional(spec, r)?;
    let tail = c / r as f64;
    let lower = if tail < 1.0 { Some(upper.scaled(1.0 - tail)?) } else { None };
    Ok(BoundsPair { lower, upper, tail_bound: Some(tail), validity: Validity::StatewiseOnPi })
}
