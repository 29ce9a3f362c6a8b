//! Payoff distributions with exact analytic moments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;

/// The law of a single arm's i.i.d. payoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PayoffDistribution {
    /// `hi` with probability `p_hi`, otherwise `lo`.
    TwoPoint { lo: f64, hi: f64, p_hi: f64 },
    DiscreteFinite { values: Vec<f64>, probs: Vec<f64> },
    Normal { mu: f64, sigma2: f64 },
    Uniform { a: f64, b: f64 },
    Constant { c: f64 },
}

impl PayoffDistribution {
    /// Canonical realisation of a mean-variance pair.
    pub fn from_moments(mean: f64, variance: f64) -> Self {
        if variance == 0.0 {
            PayoffDistribution::Constant { c: mean }
        } else {
            PayoffDistribution::Normal { mu: mean, sigma2: variance }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            PayoffDistribution::TwoPoint { lo, hi, p_hi } => {
                finite(*lo, "lo")?;
                finite(*hi, "hi")?;
                if !(0.0..=1.0).contains(p_hi) {
                    return Err(Error::invalid(format!("p_hi must lie in [0, 1], got {p_hi}")));
                }
            }
            PayoffDistribution::DiscreteFinite { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::invalid(
                        "discrete distribution needs equally many (>0) values and probs",
                    ));
                }
                for v in values {
                    finite(*v, "value")?;
                }
                if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::invalid("probabilities must lie in [0, 1]"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::invalid(format!(
                        "probabilities sum to {total}, expected 1 within {PROB_SUM_TOL:e}"
                    )));
                }
            }
            PayoffDistribution::Normal { mu, sigma2 } => {
                finite(*mu, "mu")?;
                finite(*sigma2, "sigma2")?;
                if *sigma2 < 0.0 {
                    return Err(Error::invalid(format!("sigma2 must be >= 0, got {sigma2}")));
                }
            }
            PayoffDistribution::Uniform { a, b } => {
                finite(*a, "a")?;
                finite(*b, "b")?;
                if a > b {
                    return Err(Error::invalid(format!("uniform needs a <= b, got [{a}, {b}]")));
                }
            }
            PayoffDistribution::Constant { c } => finite(*c, "c")?,
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            PayoffDistribution::TwoPoint { lo, hi, p_hi } => lo + p_hi * (hi - lo),
            PayoffDistribution::DiscreteFinite { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            PayoffDistribution::Normal { mu, .. } => *mu,
            PayoffDistribution::Uniform { a, b } => 0.5 * (a + b),
            PayoffDistribution::Constant { c } => *c,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            PayoffDistribution::TwoPoint { lo, hi, p_hi } => {
                let d = hi - lo;
                p_hi * (1.0 - p_hi) * d * d
            }
            PayoffDistribution::DiscreteFinite { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
            PayoffDistribution::Normal { sigma2, .. } => *sigma2,
            PayoffDistribution::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            PayoffDistribution::Constant { .. } => 0.0,
        }
    }

    /// Finite support as `(value, probability)` pairs, zero-probability atoms dropped.
    /// `None` for continuous laws.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        let atoms = match self {
            PayoffDistribution::TwoPoint { lo, hi, p_hi } => {
                if lo == hi {
                    vec![(*lo, 1.0)]
                } else {
                    vec![(*lo, 1.0 - p_hi), (*hi, *p_hi)]
                }
            }
            PayoffDistribution::DiscreteFinite { values, probs } => {
                values.iter().copied().zip(probs.iter().copied()).collect()
            }
            PayoffDistribution::Constant { c } => vec![(*c, 1.0)],
            PayoffDistribution::Normal { .. } | PayoffDistribution::Uniform { .. } => return None,
        };
        Some(atoms.into_iter().filter(|&(_, p)| p > 0.0).collect())
    }

    /// One draw. With `mirror` set, the underlying variate is reflected
    /// (`U -> 1 - U`, `Z -> -Z`), which is how antithetic paths are produced.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, mirror: bool) -> f64 {
        let uniform = |rng: &mut R| {
            let u: f64 = rng.random();
            if mirror {
                1.0 - u
            } else {
                u
            }
        };
        match self {
            PayoffDistribution::TwoPoint { lo, hi, p_hi } => {
                if uniform(rng) < *p_hi {
                    *hi
                } else {
                    *lo
                }
            }
            PayoffDistribution::DiscreteFinite { values, probs } => {
                let u = uniform(rng);
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // u landed in the rounding gap above the last cumulative sum
                values[probs.iter().rposition(|&p| p > 0.0).unwrap_or(values.len() - 1)]
            }
            PayoffDistribution::Normal { mu, sigma2 } => {
                let z: f64 = StandardNormal.sample(rng);
                let z = if mirror { -z } else { z };
                mu + sigma2.sqrt() * z
            }
            PayoffDistribution::Uniform { a, b } => a + (b - a) * uniform(rng),
            PayoffDistribution::Constant { c } => *c,
        }
    }
}
