//! Distributions on truncations, implicitly zero outside them.

use crate::error::{Error, Result};
use crate::model::State;
use crate::statespace::Truncation;
use std::io::Write;
use std::sync::Arc;

/// Nonnegative values over a truncation; zero-padded elsewhere.
#[derive(Debug, Clone)]
pub struct TruncatedDistribution {
    truncation: Arc<Truncation>,
    values: Vec<f64>,
    mass: f64,
}

impl TruncatedDistribution {
    /// Entries above `-1e-14` relative to the largest are clipped to zero; more
    /// negative entries are rejected.
    pub fn new(truncation: Arc<Truncation>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != truncation.len() {
            return Err(Error::Invalid(format!(
                "{} values for a truncation of {} states",
                values.len(),
                truncation.len()
            )));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite value at {}", truncation.state(i))));
            }
            if *v < 0.0 {
                if *v < -1e-14 * scale {
                    return Err(Error::Numerical(format!("negative value {v:e} at {}", truncation.state(i))));
                }
                *v = 0.0;
            }
        }
        let mass = values.iter().sum();
        Ok(TruncatedDistribution { truncation, values, mass })
    }

    /// Rescales `values` to unit mass.
    pub fn normalized(truncation: Arc<Truncation>, values: Vec<f64>) -> Result<Self> {
        let d = Self::new(truncation, values)?;
        if !(d.mass > 0.0) {
            return Err(Error::Numerical("cannot normalize a vector with zero mass".into()));
        }
        let m = d.mass;
        Self::new(d.truncation, d.values.into_iter().map(|v| v / m).collect())
    }

    pub fn truncation(&self) -> &Arc<Truncation> {
        &self.truncation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at any state, zero outside the truncation.
    pub fn get(&self, x: &State) -> f64 {
        self.truncation.index_of(x).map_or(0.0, |i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, f64)> {
        self.truncation.states().iter().zip(self.values.iter().copied())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.truncation.clone(), self.values.iter().map(|v| v * s).collect())
    }

    /// Re-expresses the distribution on another truncation, dropping mass outside it.
    pub fn restrict_to(&self, t: &Arc<Truncation>) -> Result<Self> {
        Self::new(t.clone(), t.states().iter().map(|x| self.get(x)).collect())
    }

    /// Sum over a predicate on states.
    pub fn sum_where(&self, pred: impl Fn(&State) -> bool) -> f64 {
        self.iter().filter(|(x, _)| pred(x)).map(|(_, v)| v).sum()
    }

    /// `sum_x f(x) p(x)`.
    pub fn expectation(&self, f: impl Fn(&State) -> f64) -> f64 {
        self.iter().map(|(x, v)| if v == 0.0 { 0.0 } else { f(x) * v }).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validity {
    /// `lower <= pi <= upper` statewise on the stationary distribution itself.
    StatewiseOnPi,
    /// Only the conditional distribution on the truncation is bounded.
    ConditionalOnly,
}

/// Statewise lower and upper bounds.
#[derive(Debug, Clone)]
pub struct BoundsPair {
    /// Absent when the tail bound is not below one.
    pub lower: Option<TruncatedDistribution>,
    pub upper: TruncatedDistribution,
    /// Tail bound used to scale the lower bound (`c/r` or `1/(r+1)`).
    pub tail_bound: Option<f64>,
    pub validity: Validity,
}

impl BoundsPair {
    pub fn truncation(&self) -> &Arc<Truncation> {
        self.upper.truncation()
    }

    /// Lower-bound value at index `i` (zero when no lower bound is available).
    pub fn lower_at(&self, i: usize) -> f64 {
        self.lower.as_ref().map_or(0.0, |l| l.value(i))
    }

    /// Midpoint of the two bounds.
    pub fn midpoint(&self) -> Result<TruncatedDistribution> {
        let vals = (0..self.upper.len()).map(|i| 0.5 * (self.lower_at(i) + self.upper.value(i))).collect();
        TruncatedDistribution::new(self.truncation().clone(), vals)
    }
}

/// Writes `species..., <columns...>` rows for every state of `t`.
pub fn write_state_table<W: Write>(
    out: W,
    species: &[String],
    t: &Truncation,
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = species.iter().map(String::as_str).collect();
    header.extend(columns.iter().map(|c| c.0));
    w.write_record(&header)?;
    for (i, x) in t.states().iter().enumerate() {
        let mut rec: Vec<String> = x.0.iter().map(u32::to_string).collect();
        for (_, col) in columns {
            rec.push(format!("{:e}", col[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
