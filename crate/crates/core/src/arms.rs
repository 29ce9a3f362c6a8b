//! Arms, their mean-variance summary, and the quantities derived from it:
//! bounds, extreme arms, the HJB driver `G`, and the two-arm risk/reward
//! thresholds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hull;
use crate::simulate::PayoffDistribution;

/// Tolerance for user-supplied mean/variance overrides.
pub const MOMENT_OVERRIDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arm {
    pub id: usize,
    pub distribution: PayoffDistribution,
    pub mean: f64,
    pub variance: f64,
}

impl Arm {
    pub fn new(id: usize, distribution: PayoffDistribution) -> Result<Self> {
        distribution.validate()?;
        let mean = distribution.mean();
        let variance = distribution.variance().max(0.0);
        Ok(Arm { id, distribution, mean, variance })
    }

    /// Arm whose payoffs realise the pair `(mean, variance)`; only the pair
    /// matters for limiting values.
    pub fn from_moments(id: usize, mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::invalid(format!(
                "arm {id}: need finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Arm::new(id, PayoffDistribution::from_moments(mean, variance))
    }

    /// Checks declared moments against the analytic ones.
    pub fn with_declared_moments(self, mean: Option<f64>, variance: Option<f64>) -> Result<Self> {
        if let Some(m) = mean {
            if (m - self.mean).abs() > MOMENT_OVERRIDE_TOL {
                return Err(Error::config(format!(
                    "arm {}: declared mean {m} differs from analytic mean {}",
                    self.id, self.mean
                )));
            }
        }
        if let Some(v) = variance {
            if (v - self.variance).abs() > MOMENT_OVERRIDE_TOL {
                return Err(Error::config(format!(
                    "arm {}: declared variance {v} differs from analytic variance {}",
                    self.id, self.variance
                )));
            }
        }
        Ok(self)
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pair(&self) -> (f64, f64) {
        (self.mean, self.variance)
    }
}

/// A feasible set of arms together with its bounds and extreme arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSet {
    pub arms: Vec<Arm>,
    pub mu_max: f64,
    pub mu_min: f64,
    pub var_max: f64,
    pub var_min: f64,
    /// Positions (into `arms`) of the extreme points of the hull of pairs.
    pub extreme_indices: Vec<usize>,
}

/// Value and maximiser of the driver `G(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverValue {
    pub value: f64,
    pub argmax: usize,
}

pub fn compute_bounds(arms: Vec<Arm>) -> Result<ArmSet> {
    if arms.is_empty() {
        return Err(Error::invalid("arm set must contain at least one arm"));
    }
    for a in &arms {
        if !a.mean.is_finite() || !a.variance.is_finite() || a.variance < 0.0 {
            return Err(Error::invalid(format!("arm {} has invalid moments", a.id)));
        }
    }
    let fold = |f: fn(f64, f64) -> f64, g: fn(&Arm) -> f64, init: f64| arms.iter().map(g).fold(init, f);
    let mu_max = fold(f64::max, |a| a.mean, f64::NEG_INFINITY);
    let mu_min = fold(f64::min, |a| a.mean, f64::INFINITY);
    let var_max = fold(f64::max, |a| a.variance, f64::NEG_INFINITY);
    let var_min = fold(f64::min, |a| a.variance, f64::INFINITY);
    let pairs: Vec<(f64, f64)> = arms.iter().map(Arm::pair).collect();
    let extreme_indices = hull::extreme_points(&pairs);
    Ok(ArmSet { arms, mu_max, mu_min, var_max, var_min, extreme_indices })
}

impl ArmSet {
    pub fn new(arms: Vec<Arm>) -> Result<Self> {
        compute_bounds(arms)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let arms = pairs
            .iter()
            .enumerate()
            .map(|(i, &(m, v))| Arm::from_moments(i, m, v))
            .collect::<Result<Vec<_>>>()?;
        compute_bounds(arms)
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.arms.iter().map(Arm::pair).collect()
    }

    /// Sub-set of extreme arms only (ids preserved).
    pub fn extremes(&self) -> ArmSet {
        let arms = self.extreme_indices.iter().map(|&i| self.arms[i].clone()).collect();
        compute_bounds(arms).expect("extreme subset of a valid set is valid")
    }

    /// The four corners `(mu_max, var_max), (mu_max, var_min), (mu_min, var_max), (mu_min, var_min)`.
    pub fn rectangle(&self) -> ArmSet {
        ArmSet::from_pairs(&[
            (self.mu_max, self.var_max),
            (self.mu_max, self.var_min),
            (self.mu_min, self.var_max),
            (self.mu_min, self.var_min),
        ])
        .expect("bounds of a valid set are valid")
    }

    /// Same means, every variance raised by `epsilon^2`.
    pub fn perturbed(&self, epsilon: f64) -> Result<ArmSet> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("perturbation epsilon must be >= 0, got {epsilon}")));
        }
        if epsilon == 0.0 {
            return Ok(self.clone());
        }
        let eps2 = epsilon * epsilon;
        let arms = self
            .arms
            .iter()
            .map(|a| Arm::from_moments(a.id, a.mean, a.variance + eps2))
            .collect::<Result<Vec<_>>>()?;
        compute_bounds(arms)
    }

    /// `G(p, q) = max_k mu_k p + sigma_k^2 q / 2`, ties to the lowest position.
    /// `argmax` is a position into `arms`.
    pub fn g_driver(&self, p: f64, q: f64, restrict_to_extremes: bool) -> DriverValue {
        let candidates: Box<dyn Iterator<Item = usize>> = if restrict_to_extremes {
            Box::new(self.extreme_indices.iter().copied())
        } else {
            Box::new(0..self.arms.len())
        };
        let mut best = DriverValue { value: f64::NEG_INFINITY, argmax: 0 };
        for i in candidates {
            let a = &self.arms[i];
            let v = a.mean * p + 0.5 * a.variance * q;
            if v > best.value {
                best = DriverValue { value: v, argmax: i };
            }
        }
        best
    }
}

/// The perturbed driver set used when the smallest variance is zero.
pub fn perturbed_driver(arm_set: &ArmSet, epsilon: f64) -> Result<ArmSet> {
    arm_set.perturbed(epsilon)
}

/// Risk/reward critical values for a two-arm problem with
/// `mu1 > mu2` and `sigma1 > sigma2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// `(mu1 - mu2) / (sigma1^2 - sigma2^2)`
    pub ratio: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub alpha_low_prime: f64,
}

/// Checks the two-arm ordering `mu1 > mu2`, `sigma1 > sigma2 > 0`.
pub fn check_two_arm_order(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64) -> Result<()> {
    if [mu1, mu2, sigma1, sigma2].iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("two-arm parameters must be finite"));
    }
    if !(mu1 > mu2) {
        return Err(Error::invalid(format!("requires mu1 > mu2, got mu1={mu1}, mu2={mu2}")));
    }
    if !(sigma1 > sigma2) {
        return Err(Error::invalid(format!(
            "requires sigma1 > sigma2, got sigma1={sigma1}, sigma2={sigma2}"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("requires sigma2 > 0, got sigma2={sigma2}")));
    }
    Ok(())
}

pub fn thresholds_from_params(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64) -> Result<Thresholds> {
    check_two_arm_order(mu1, mu2, sigma1, sigma2)?;
    let dm = mu1 - mu2;
    let ds = sigma1 - sigma2;
    Ok(Thresholds {
        ratio: dm / ((sigma1 + sigma2) * ds),
        alpha_low: 2.0 * dm / ((sigma1 + 2.0 * sigma2) * ds),
        alpha_high: 2.0 * dm / (sigma2 * ds),
        alpha_low_prime: 2.0 * dm * sigma1 / ds,
    })
}

pub fn thresholds(arm1: &Arm, arm2: &Arm) -> Result<Thresholds> {
    thresholds_from_params(arm1.mean, arm2.mean, arm1.sigma(), arm2.sigma())
}
