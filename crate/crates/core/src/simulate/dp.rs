//! Exact finite-horizon values by backward induction.
//!
//! Payoffs are i.i.d. per arm and `u` sees the history only through the
//! payoff and deviation sums, which are affine in the outcome tallies. The
//! state after `m` stages is therefore the vector of tallies (one entry per
//! `(arm, outcome)` atom), a composition of `m` into `D = Σ s_k` parts. These
//! are ranked with the combinatorial number system so each stage is a flat
//! table.

use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::arms::ArmSet;
use crate::error::{Error, Result};
use crate::utility::{shortfall_ramp, Phi, UtilityIndex};

pub const MAX_HORIZON: u64 = 24;
pub const MAX_SUPPORT: usize = 4;
pub const MAX_STATES: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DpArithmetic {
    /// Exact rationals whenever the utility is rational in the sums, else floats.
    #[default]
    Auto,
    Float,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpValue {
    pub value: f64,
    /// Exact value as `numerator/denominator` when rational arithmetic was used.
    pub exact: Option<String>,
    /// Position of the optimal first arm (lowest on ties).
    pub first_action: usize,
    pub states: u64,
}

trait DpScalar: Clone + PartialOrd + Zero + Send + Sync + for<'a> Add<&'a Self, Output = Self> {
    fn mul_ref(&self, other: &Self) -> Self;
}

impl DpScalar for f64 {
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
}

impl DpScalar for BigRational {
    fn mul_ref(&self, other: &Self) -> Self {
        Mul::mul(self, other)
    }
}

struct Atom {
    arm: usize,
    value: f64,
}

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    r
}

struct Ranker {
    /// `table[a][b] = C(a, b)`
    table: Vec<Vec<usize>>,
}

impl Ranker {
    fn new(max_a: usize, max_b: usize) -> Self {
        let mut table = vec![vec![0usize; max_b + 1]; max_a + 1];
        for a in 0..=max_a {
            table[a][0] = 1;
            for b in 1..=max_b.min(a) {
                table[a][b] = table[a - 1][b - 1] + if b <= a - 1 { table[a - 1][b] } else { 0 };
            }
        }
        Ranker { table }
    }

    /// Colex rank of the bar positions `b_i = c_0 + ... + c_i + i`.
    fn rank(&self, c: &[u32]) -> usize {
        let mut acc = 0usize;
        let mut pos = 0usize;
        for (i, &ci) in c[..c.len() - 1].iter().enumerate() {
            pos += ci as usize;
            acc += self.table[pos + i][i + 1];
        }
        acc
    }
}

/// Advances `c` to the next composition of the same total, starting from
/// `(m, 0, ..., 0)` and ending at `(0, ..., 0, m)`; false when done.
fn next_composition(c: &mut [u32]) -> bool {
    let d = c.len();
    // find the last nonzero entry before the final slot
    let Some(i) = c[..d - 1].iter().rposition(|&v| v > 0) else {
        return false;
    };
    let tail = c[d - 1];
    c[d - 1] = 0;
    c[i] -= 1;
    c[i + 1] = tail + 1;
    true
}

fn rational(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::invalid(format!("value {v} is not finite")))
}

/// Terminal utility on exact sums, when `u` is rational in them.
fn exact_terminal(u: &UtilityIndex, n: u64, s: &BigRational, dev: &BigRational) -> Option<BigRational> {
    let nr = BigRational::from_integer(BigInt::from(n));
    let x = s / &nr;
    let neg = dev < &BigRational::zero();
    match u {
        UtilityIndex::MeanVariance { alpha } => Some(x - rational(*alpha).ok()? * dev * dev / &nr),
        UtilityIndex::MeanSemivariance { alpha } => {
            Some(if neg { x - rational(*alpha).ok()? * dev * dev / &nr } else { x })
        }
        UtilityIndex::Shortfall { alpha, delta } if *delta == 0.0 => {
            Some(if neg { x - rational(*alpha).ok()? } else { x })
        }
        UtilityIndex::Additive { phi, alpha } if *alpha == 0.0 => match phi {
            Phi::Identity => Some(x),
            Phi::Polynomial(a) => {
                let mut acc = BigRational::zero();
                for ai in a.iter().rev() {
                    acc = acc * &x + rational(*ai).ok()?;
                }
                Some(acc)
            }
            _ => None,
        },
        _ => None,
    }
}

fn supports_exact(u: &UtilityIndex) -> bool {
    let zero = BigRational::zero();
    exact_terminal(u, 1, &zero, &zero).is_some()
}

/// Exact `V_n = sup_theta E[u(S_n / n, Sbar_n / sqrt(n))]` over all admissible
/// strategies, for arms with finite support.
pub fn exact_value_dp(arm_set: &ArmSet, u: &UtilityIndex, n: u64, arithmetic: DpArithmetic) -> Result<DpValue> {
    if n == 0 || n > MAX_HORIZON {
        return Err(Error::invalid(format!("dp horizon must lie in 1..={MAX_HORIZON}, got {n}")));
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut probs: Vec<Vec<(usize, f64)>> = Vec::with_capacity(arm_set.len());
    for (k, arm) in arm_set.arms.iter().enumerate() {
        let support = arm.distribution.support().ok_or_else(|| {
            Error::invalid(format!("arm {} does not have finite support; dp needs discrete arms", arm.id))
        })?;
        if support.len() > MAX_SUPPORT {
            return Err(Error::invalid(format!(
                "arm {} has {} support points, dp allows at most {MAX_SUPPORT}",
                arm.id,
                support.len()
            )));
        }
        let mut row = Vec::with_capacity(support.len());
        for (value, p) in support {
            row.push((atoms.len(), p));
            atoms.push(Atom { arm: k, value });
        }
        probs.push(row);
    }
    let d = atoms.len();
    let total = binom(n + d as u64, d as u64);
    if total > MAX_STATES {
        return Err(Error::Resource(format!(
            "dp needs {total} states (horizon {n}, {d} outcome atoms), bound is {MAX_STATES}"
        )));
    }

    let means: Vec<f64> = arm_set.arms.iter().map(|a| a.mean).collect();
    let (value, exact, first_action) = if arithmetic == DpArithmetic::Auto && supports_exact(u) {
        let vals: Vec<BigRational> = atoms.iter().map(|a| rational(a.value)).collect::<Result<_>>()?;
        let devs: Vec<BigRational> =
            atoms.iter().map(|a| rational(a.value).and_then(|v| Ok(v - rational(means[a.arm])?))).collect::<Result<_>>()?;
        let p_exact: Vec<Vec<(usize, BigRational)>> = probs
            .iter()
            .map(|row| row.iter().map(|&(j, p)| rational(p).map(|r| (j, r))).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let (v, a) = backward(d, n, &p_exact, |c| {
            let mut s = BigRational::zero();
            let mut dev = BigRational::zero();
            for (j, &cj) in c.iter().enumerate() {
                if cj > 0 {
                    let w = BigRational::from_integer(BigInt::from(cj));
                    s += &vals[j] * &w;
                    dev += &devs[j] * &w;
                }
            }
            exact_terminal(u, n, &s, &dev).expect("checked rational")
        });
        let f = v.to_f64().unwrap_or(f64::NAN);
        (f, Some(v.to_string()), a)
    } else {
        let sqrt_n = (n as f64).sqrt();
        let nf = n as f64;
        let (v, a) = backward(d, n, &probs, |c| {
            let mut s = 0.0;
            let mut dev = 0.0;
            for (j, &cj) in c.iter().enumerate() {
                let w = cj as f64;
                s += atoms[j].value * w;
                dev += (atoms[j].value - means[atoms[j].arm]) * w;
            }
            let x = s / nf;
            let y = dev / sqrt_n;
            match u {
                // keep the indicator exact at y = 0 despite rounding in dev
                UtilityIndex::Shortfall { alpha, delta } => x - alpha * shortfall_ramp(y, *delta),
                _ => u.eval(x, y),
            }
        });
        (v, None, a)
    };
    if !value.is_finite() {
        return Err(Error::numerical(format!("dp value is not finite: {value}")));
    }
    Ok(DpValue { value, exact, first_action, states: total as u64 })
}

fn backward<T: DpScalar>(
    d: usize,
    n: u64,
    probs: &[Vec<(usize, T)>],
    terminal: impl Fn(&[u32]) -> T,
) -> (T, usize) {
    let n = n as usize;
    let ranker = Ranker::new(n + d, d);
    let count = |m: usize| ranker.table[m + d - 1][d - 1];

    let mut c = vec![0u32; d];
    let mut next: Vec<T> = vec![T::zero(); count(n)];
    c[0] = n as u32;
    loop {
        next[ranker.rank(&c)] = terminal(&c);
        if !next_composition(&mut c) {
            break;
        }
    }

    let mut first_action = 0;
    for m in (0..n).rev() {
        let mut cur: Vec<T> = vec![T::zero(); count(m)];
        c.iter_mut().for_each(|v| *v = 0);
        c[0] = m as u32;
        loop {
            let mut best: Option<(T, usize)> = None;
            for (k, row) in probs.iter().enumerate() {
                let mut acc = T::zero();
                for (j, p) in row {
                    c[*j] += 1;
                    acc = acc + &p.mul_ref(&next[ranker.rank(&c)]);
                    c[*j] -= 1;
                }
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, k));
                }
            }
            let (v, k) = best.expect("at least one arm");
            if m == 0 {
                first_action = k;
            }
            cur[ranker.rank(&c)] = v;
            if !next_composition(&mut c) {
                break;
            }
        }
        next = cur;
    }
    (next.swap_remove(0), first_action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arms::Arm;
    use crate::simulate::PayoffDistribution;

    fn two_point_set() -> ArmSet {
        ArmSet::new(vec![
            Arm::new(0, PayoffDistribution::TwoPoint { lo: -1.0, hi: 3.0, p_hi: 0.5 }).unwrap(),
            Arm::new(1, PayoffDistribution::TwoPoint { lo: -1.0, hi: 1.0, p_hi: 0.5 }).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn ranks_are_a_bijection() {
        let d = 4;
        let r = Ranker::new(12, d);
        for m in 0..6 {
            let mut c = vec![0u32; d];
            c[0] = m;
            let mut seen = Vec::new();
            loop {
                seen.push(r.rank(&c));
                if !next_composition(&mut c) {
                    break;
                }
            }
            let expected = r.table[m as usize + d - 1][d - 1];
            seen.sort_unstable();
            assert_eq!(seen, (0..expected).collect::<Vec<_>>());
        }
    }

    #[test]
    fn one_stage_mean_variance() {
        let v = exact_value_dp(&two_point_set(), &UtilityIndex::MeanVariance { alpha: 0.25 }, 1, DpArithmetic::Auto)
            .unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.first_action, 0);
        assert!(v.exact.is_some());
    }

    #[test]
    fn one_stage_risk_neutral() {
        let u = UtilityIndex::Additive { phi: Phi::Identity, alpha: 0.0 };
        let v = exact_value_dp(&two_point_set(), &u, 1, DpArithmetic::Auto).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn eight_stages_mean_variance_exact() {
        let u = UtilityIndex::MeanVariance { alpha: 0.3 };
        let v = exact_value_dp(&two_point_set(), &u, 8, DpArithmetic::Auto).unwrap();
        // max(1 - 0.3*4, 0 - 0.3*1) = -0.2 computed in rationals of the float inputs
        let oracle = BigRational::from_float(1.0).unwrap()
            - BigRational::from_float(0.3).unwrap() * BigRational::from_float(4.0).unwrap();
        let alt = -BigRational::from_float(0.3).unwrap();
        let best = if oracle > alt { oracle } else { alt };
        assert_eq!(v.exact.unwrap(), best.to_string());
    }

    #[test]
    fn float_and_exact_agree() {
        let u = UtilityIndex::MeanSemivariance { alpha: 1.0 };
        let a = exact_value_dp(&two_point_set(), &u, 6, DpArithmetic::Auto).unwrap();
        let b = exact_value_dp(&two_point_set(), &u, 6, DpArithmetic::Float).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        assert_eq!(a.first_action, b.first_action);
    }

    #[test]
    fn bounds_enforced() {
        let u = UtilityIndex::MeanVariance { alpha: 0.25 };
        assert!(matches!(exact_value_dp(&two_point_set(), &u, 25, DpArithmetic::Auto), Err(Error::InvalidInput(_))));
        let normal = ArmSet::from_pairs(&[(1.0, 4.0)]).unwrap();
        assert!(exact_value_dp(&normal, &u, 2, DpArithmetic::Auto).is_err());
        let wide: Vec<Arm> = (0..4)
            .map(|i| {
                Arm::new(
                    i,
                    PayoffDistribution::DiscreteFinite {
                        values: vec![0.0, 1.0, 2.0, 3.0 + i as f64],
                        probs: vec![0.25; 4],
                    },
                )
                .unwrap()
            })
            .collect();
        let wide = ArmSet::new(wide).unwrap();
        assert!(matches!(exact_value_dp(&wide, &u, 24, DpArithmetic::Float), Err(Error::Resource(_))));
    }
}
