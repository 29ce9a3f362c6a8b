use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// What a policy may look at before choosing the arm for `stage`:
/// only sums over stages already played.
#[derive(Debug, Clone, Copy)]
pub struct PolicyState<'a> {
    /// 1-based index of the stage about to be played.
    pub stage: u64,
    /// Pulls of each arm so far.
    pub pulls: &'a [u64],
    pub payoff_sum: f64,
    /// Running sum of `Z_i - mu_{theta_i}`.
    pub deviation_sum: f64,
}

pub type PolicyFn = Arc<dyn Fn(&PolicyState<'_>) -> usize + Send + Sync>;

/// Arm-selection rules. Arms are referred to by position in the arm set.
#[derive(Clone)]
pub enum Strategy {
    Specialize(usize),
    /// Cycle through the listed arms.
    Alternate(Vec<usize>),
    /// `first` at stage 1; afterwards `first` at stage `i + 1` iff
    /// `psi_i / i <= lambda`, with `psi_i` the pulls of `first` so far.
    LambdaFraction { lambda: f64, first: usize, second: usize },
    /// `arm_pos` iff the running deviation sum is `>= 0`.
    SignSwitch { arm_pos: usize, arm_neg: usize },
    Custom { name: String, policy: PolicyFn },
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Specialize(k) => write!(f, "Specialize({k})"),
            Strategy::Alternate(seq) => write!(f, "Alternate({seq:?})"),
            Strategy::LambdaFraction { lambda, first, second } => {
                write!(f, "LambdaFraction(lambda={lambda}, {first}, {second})")
            }
            Strategy::SignSwitch { arm_pos, arm_neg } => write!(f, "SignSwitch(+{arm_pos}, -{arm_neg})"),
            Strategy::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Strategy {
    pub fn custom(name: impl Into<String>, policy: impl Fn(&PolicyState<'_>) -> usize + Send + Sync + 'static) -> Self {
        Strategy::Custom { name: name.into(), policy: Arc::new(policy) }
    }

    /// Lambda-fraction rule whose long-run average payoff is `x_star`,
    /// for `x_star` between `mu_second` and `mu_first`.
    pub fn lambda_for_target(x_star: f64, mu_first: f64, mu_second: f64, first: usize, second: usize) -> Result<Self> {
        if mu_first == mu_second {
            return Err(Error::invalid("lambda target needs distinct means"));
        }
        let lambda = (x_star - mu_second) / (mu_first - mu_second);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("target {x_star} lies outside [{mu_second}, {mu_first}]")));
        }
        Ok(Strategy::LambdaFraction { lambda, first, second })
    }

    /// Structural check against the number of arms, before any stage is played.
    pub fn validate(&self, arms: usize) -> Result<()> {
        let check = |k: usize| {
            if k < arms {
                Ok(())
            } else {
                Err(Error::Policy(format!("strategy refers to arm {k} but only {arms} arms exist")))
            }
        };
        match self {
            Strategy::Specialize(k) => check(*k),
            Strategy::Alternate(seq) => {
                if seq.is_empty() {
                    return Err(Error::Policy("alternating sequence is empty".into()));
                }
                seq.iter().try_for_each(|&k| check(k))
            }
            Strategy::LambdaFraction { lambda, first, second } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(Error::Policy(format!("lambda must lie in [0, 1], got {lambda}")));
                }
                check(*first)?;
                check(*second)
            }
            Strategy::SignSwitch { arm_pos, arm_neg } => {
                check(*arm_pos)?;
                check(*arm_neg)
            }
            Strategy::Custom { .. } => Ok(()),
        }
    }

    #[inline]
    pub fn choose(&self, state: &PolicyState<'_>) -> usize {
        match self {
            Strategy::Specialize(k) => *k,
            Strategy::Alternate(seq) => seq[((state.stage - 1) % seq.len() as u64) as usize],
            Strategy::LambdaFraction { lambda, first, second } => {
                let played = state.stage - 1;
                if played == 0 || state.pulls[*first] as f64 <= lambda * played as f64 {
                    *first
                } else {
                    *second
                }
            }
            Strategy::SignSwitch { arm_pos, arm_neg } => {
                if state.deviation_sum >= 0.0 {
                    *arm_pos
                } else {
                    *arm_neg
                }
            }
            Strategy::Custom { policy, .. } => policy(state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(strategy: &Strategy, n: u64) -> Vec<usize> {
        let mut pulls = vec![0u64; 2];
        (1..=n)
            .map(|stage| {
                let k = strategy.choose(&PolicyState { stage, pulls: &pulls, payoff_sum: 0.0, deviation_sum: 0.0 });
                pulls[k] += 1;
                k
            })
            .collect()
    }

    #[test]
    fn lambda_half_alternates() {
        let s = Strategy::LambdaFraction { lambda: 0.5, first: 0, second: 1 };
        assert_eq!(trace(&s, 4), vec![0, 1, 0, 1]);
    }

    #[test]
    fn alternate_cycles() {
        assert_eq!(trace(&Strategy::Alternate(vec![1, 1, 0]), 5), vec![1, 1, 0, 1, 1]);
    }

    #[test]
    fn validation_catches_bad_ids() {
        assert!(matches!(Strategy::Specialize(2).validate(2), Err(Error::Policy(_))));
        assert!(Strategy::Alternate(vec![]).validate(2).is_err());
        assert!(Strategy::SignSwitch { arm_pos: 0, arm_neg: 1 }.validate(2).is_ok());
    }

    #[test]
    fn sign_switch_weak_inequality() {
        let s = Strategy::SignSwitch { arm_pos: 0, arm_neg: 1 };
        let pulls = [0, 0];
        let at = |d: f64| s.choose(&PolicyState { stage: 1, pulls: &pulls, payoff_sum: 0.0, deviation_sum: d });
        assert_eq!((at(0.0), at(-1e-300), at(2.0)), (0, 1, 0));
    }

    #[test]
    fn lambda_target() {
        match Strategy::lambda_for_target(0.5, 1.0, 0.0, 0, 1).unwrap() {
            Strategy::LambdaFraction { lambda, .. } => assert_eq!(lambda, 0.5),
            other => panic!("{other:?}"),
        }
        assert!(Strategy::lambda_for_target(2.0, 1.0, 0.0, 0, 1).is_err());
    }
}
