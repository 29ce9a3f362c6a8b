//! Which strategies are asymptotically optimal in a two-arm problem.
//!
//! Arms are labelled so that arm 1 has the larger mean; for the risk indices
//! arm 1 must also have the larger standard deviation and arm 2 a positive
//! one.

use std::fmt;

use serde::Serialize;

use crate::arms::{check_two_arm_order, thresholds, Arm, Thresholds};
use crate::error::{Error, Result};
use crate::obm::switch_value_semivariance;
use crate::utility::{specialization_certificate, ProbeGrid, SpecializationCertificate, UtilityIndex, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    SpecializeArm1,
    SpecializeArm2,
    /// Both specializations are optimal.
    Both,
    /// Neither specialization is optimal; `alpha` lies in `(lo, hi)`.
    Switching { lo: f64, hi: f64 },
    /// The lambda-fraction rule targeting `x_star` is optimal and no
    /// specialization is.
    LambdaFraction { x_star: f64, lambda: f64 },
    Undetermined,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::SpecializeArm1 => write!(f, "specialize arm 1"),
            Regime::SpecializeArm2 => write!(f, "specialize arm 2"),
            Regime::Both => write!(f, "specialize either arm"),
            Regime::Switching { lo, hi } => write!(f, "switching region: alpha in ({lo}, {hi})"),
            Regime::LambdaFraction { x_star, lambda } => {
                write!(f, "lambda-fraction: x* = {x_star}, lambda = {lambda}")
            }
            Regime::Undetermined => write!(f, "undetermined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub thresholds: Option<Thresholds>,
    pub certificate: Option<SpecializationCertificate>,
    /// Limit value of a feasible switching control, when known in closed form.
    pub switching_value: Option<f64>,
}

/// `argmax` of `phi` over `[lo, hi]` by a dense scan refined with golden
/// section around the best sample.
fn maximize_on_interval(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const SAMPLES: usize = 10_000;
    let h = (hi - lo) / SAMPLES as f64;
    let (mut bx, mut bv) = (lo, f(lo));
    for i in 1..=SAMPLES {
        let x = lo + i as f64 * h;
        let v = f(x);
        if v > bv {
            bx = x;
            bv = v;
        }
    }
    let (mut a, mut b) = ((bx - h).max(lo), (bx + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let m = 0.5 * (a + b);
    if f(m) > bv {
        (m, f(m))
    } else {
        (bx, bv)
    }
}

pub fn classify(u: &UtilityIndex, arm1: &Arm, arm2: &Arm) -> Result<RegimeReport> {
    if let UtilityIndex::Additive { phi, .. } = u {
        if !(arm1.mean > arm2.mean) {
            return Err(Error::invalid(format!(
                "requires mu1 > mu2, got mu1={}, mu2={}",
                arm1.mean, arm2.mean
            )));
        }
        let (x_star, best) = maximize_on_interval(|x| phi.eval(x), arm2.mean, arm1.mean);
        let (v1, v2) = (phi.eval(arm1.mean), phi.eval(arm2.mean));
        let tol = 1e-12 * best.abs().max(1.0);
        let regime = match (v1 >= best - tol, v2 >= best - tol) {
            (true, true) => Regime::Both,
            (true, false) => Regime::SpecializeArm1,
            (false, true) => Regime::SpecializeArm2,
            (false, false) => Regime::LambdaFraction {
                x_star,
                lambda: (x_star - arm2.mean) / (arm1.mean - arm2.mean),
            },
        };
        return Ok(RegimeReport { regime, thresholds: None, certificate: None, switching_value: None });
    }

    check_two_arm_order(arm1.mean, arm2.mean, arm1.sigma(), arm2.sigma())?;
    let th = thresholds(arm1, arm2)?;
    let alpha = u.alpha();
    let mut report = RegimeReport { regime: Regime::Undetermined, thresholds: Some(th), certificate: None, switching_value: None };
    match u {
        UtilityIndex::MeanSemivariance { .. } => {
            report.switching_value =
                Some(switch_value_semivariance(arm1.mean, arm2.mean, arm1.sigma(), arm2.sigma(), alpha)?);
            report.regime = if alpha <= th.ratio {
                Regime::SpecializeArm1
            } else if th.alpha_low < alpha && alpha < th.alpha_high {
                Regime::Switching { lo: th.alpha_low, hi: th.alpha_high }
            } else {
                Regime::Undetermined
            };
        }
        UtilityIndex::Shortfall { .. } => {
            report.regime = if alpha > th.alpha_low_prime {
                Regime::Switching { lo: th.alpha_low_prime, hi: f64::INFINITY }
            } else {
                Regime::Undetermined
            };
        }
        _ => {
            let cert = specialization_certificate(u, arm1, arm2, ProbeGrid::default())?;
            report.regime = match (cert.holds_for_arm1, cert.holds_for_arm2) {
                (Verdict::Yes, Verdict::Yes) => Regime::Both,
                (Verdict::Yes, _) => Regime::SpecializeArm1,
                (_, Verdict::Yes) => Regime::SpecializeArm2,
                _ => Regime::Undetermined,
            };
            report.certificate = Some(cert);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::Phi;

    fn arms() -> (Arm, Arm) {
        (Arm::from_moments(0, 1.0, 4.0).unwrap(), Arm::from_moments(1, 0.0, 1.0).unwrap())
    }

    #[test]
    fn mean_variance_regimes() {
        let (a, b) = arms();
        let r = |alpha| classify(&UtilityIndex::MeanVariance { alpha }, &a, &b).unwrap().regime;
        assert_eq!(r(0.25), Regime::SpecializeArm1);
        assert_eq!(r(0.5), Regime::SpecializeArm2);
        assert_eq!(r(1.0 / 3.0), Regime::Both);
    }

    #[test]
    fn semivariance_window() {
        let (a, b) = arms();
        let rep = classify(&UtilityIndex::MeanSemivariance { alpha: 1.0 }, &a, &b).unwrap();
        assert_eq!(rep.regime, Regime::Switching { lo: 0.5, hi: 2.0 });
        assert!((rep.switching_value.unwrap() + 1.0 / 3.0).abs() < 1e-15);
        let low = classify(&UtilityIndex::MeanSemivariance { alpha: 0.3 }, &a, &b).unwrap();
        assert_eq!(low.regime, Regime::SpecializeArm1);
    }

    #[test]
    fn shortfall_above_prime_threshold() {
        let (a, b) = arms();
        let r = classify(&UtilityIndex::Shortfall { alpha: 5.0, delta: 0.0 }, &a, &b).unwrap();
        assert!(matches!(r.regime, Regime::Switching { lo, .. } if lo == 4.0));
    }

    #[test]
    fn interior_maximum_needs_mixing() {
        let (a, b) = arms();
        let u = UtilityIndex::Additive { phi: Phi::NegQuadraticAround(0.5), alpha: 0.0 };
        match classify(&u, &a, &b).unwrap().regime {
            Regime::LambdaFraction { x_star, lambda } => {
                assert!((x_star - 0.5).abs() < 1e-8);
                assert!((lambda - 0.5).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
        let inc = UtilityIndex::Additive { phi: Phi::NegExp, alpha: 0.3 };
        assert_eq!(classify(&inc, &a, &b).unwrap().regime, Regime::SpecializeArm1);
    }

    #[test]
    fn ordering_errors() {
        let (a, b) = arms();
        assert!(classify(&UtilityIndex::MeanVariance { alpha: 0.1 }, &b, &a).is_err());
    }
}
