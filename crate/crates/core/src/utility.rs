//! Two-attribute utility indices `u(x, y)` and the functionals built on them.
//!
//! `x` is the sample-average payoff and `y` the `sqrt(n)`-scaled cumulative
//! deviation from conditional means. The built-in families are
//!
//! | kind                | `u(x, y)`                      |
//! |---------------------|--------------------------------|
//! | `Additive`          | `phi(x) + alpha y`             |
//! | `Blend`             | `phi((1 - alpha) x + alpha y)` |
//! | `MeanVariance`      | `x - alpha y^2`                |
//! | `MeanSemivariance`  | `x - alpha y^2 1{y < 0}`       |
//! | `Shortfall`         | `x - alpha 1{y < 0}`           |
//!
//! `Shortfall` carries a ramp width `delta`: for `delta > 0` the indicator is
//! replaced by `clamp(-y / delta, 0, 1)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arms::Arm;
use crate::error::{Error, Result};
use crate::quadrature::{normal_cdf, normal_pdf, GaussHermite};

/// Callback for `phi`. Must be safe to call from many threads at once.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Callback for a fully custom `u(x, y)`. Same concurrency contract as [`ScalarFn`].
pub type BivariateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `|u(x, y)| <= c (1 + |(x, y)|^(g - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBound {
    pub c: f64,
    pub g: f64,
}

impl GrowthBound {
    fn merge_with_linear(self, extra: f64) -> GrowthBound {
        GrowthBound { c: 2.0 * (self.c + extra), g: self.g.max(2.0) }
    }
}

#[derive(Clone)]
pub enum Phi {
    Identity,
    /// `-exp(-x)`
    NegExp,
    /// `-(x - c)^2`
    NegQuadraticAround(f64),
    /// `a0 + a1 x + a2 x^2 + ...`
    Polynomial(Vec<f64>),
    Custom(ScalarFn),
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Identity => write!(f, "identity"),
            Phi::NegExp => write!(f, "-exp(-x)"),
            Phi::NegQuadraticAround(c) => write!(f, "neg-quadratic-around({c})"),
            Phi::Polynomial(a) => write!(f, "polynomial({a:?})"),
            Phi::Custom(_) => write!(f, "custom"),
        }
    }
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phi::Identity => x,
            Phi::NegExp => -(-x).exp(),
            Phi::NegQuadraticAround(c) => -(x - c) * (x - c),
            Phi::Polynomial(a) => a.iter().rev().fold(0.0, |acc, &ai| acc * x + ai),
            Phi::Custom(f) => f(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            Phi::Identity => 1.0,
            Phi::NegExp => (-x).exp(),
            Phi::NegQuadraticAround(c) => -2.0 * (x - c),
            Phi::Polynomial(a) => a
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &ai)| acc * x + i as f64 * ai),
            Phi::Custom(_) => {
                let h = fd_step(x);
                (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            Phi::Identity => 0.0,
            Phi::NegExp => -(-x).exp(),
            Phi::NegQuadraticAround(_) => -2.0,
            Phi::Polynomial(a) => a
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, &ai)| acc * x + (i * (i - 1)) as f64 * ai),
            Phi::Custom(_) => {
                let h = fd_step(x);
                (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h)
            }
        }
    }

    fn growth(&self) -> Option<GrowthBound> {
        match self {
            Phi::Identity => Some(GrowthBound { c: 1.0, g: 2.0 }),
            Phi::NegExp | Phi::Custom(_) => None,
            Phi::NegQuadraticAround(c) => Some(GrowthBound { c: 2.0 * (1.0 + c * c), g: 3.0 }),
            Phi::Polynomial(a) => {
                let degree = a.iter().rposition(|&ai| ai != 0.0).unwrap_or(0);
                Some(GrowthBound { c: a.iter().map(|ai| ai.abs()).sum::<f64>().max(1e-300), g: degree as f64 + 1.0 })
            }
        }
    }

    /// Whether `phi' > 0` everywhere is known analytically.
    fn strictly_increasing(&self) -> bool {
        matches!(self, Phi::Identity | Phi::NegExp)
    }
}

/// Central-difference step used wherever derivatives are not analytic.
pub fn fd_step(coord: f64) -> f64 {
    1e-4 * (1.0 + coord.abs())
}

#[derive(Clone)]
pub enum UtilityIndex {
    Additive { phi: Phi, alpha: f64 },
    Blend { phi: Phi, alpha: f64 },
    MeanVariance { alpha: f64 },
    MeanSemivariance { alpha: f64 },
    Shortfall { alpha: f64, delta: f64 },
    Custom { f: BivariateFn, growth: Option<GrowthBound>, label: String },
}

impl fmt::Debug for UtilityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityIndex::Additive { phi, alpha } => write!(f, "Additive(phi={phi:?}, alpha={alpha})"),
            UtilityIndex::Blend { phi, alpha } => write!(f, "Blend(phi={phi:?}, alpha={alpha})"),
            UtilityIndex::MeanVariance { alpha } => write!(f, "MeanVariance(alpha={alpha})"),
            UtilityIndex::MeanSemivariance { alpha } => write!(f, "MeanSemivariance(alpha={alpha})"),
            UtilityIndex::Shortfall { alpha, delta } => write!(f, "Shortfall(alpha={alpha}, delta={delta})"),
            UtilityIndex::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// Piecewise-linear stand-in for `1{y < 0}`; exact indicator at `delta = 0`.
pub fn shortfall_ramp(y: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        (-y / delta).clamp(0.0, 1.0)
    } else if y < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `E[shortfall_ramp(Y, delta)]` for `Y ~ N(0, sigma2)`.
pub fn expected_shortfall_ramp(sigma2: f64, delta: f64) -> f64 {
    if sigma2 <= 0.0 {
        return shortfall_ramp(0.0, delta);
    }
    if delta <= 0.0 {
        return 0.5;
    }
    let s = sigma2.sqrt();
    let r = delta / s;
    normal_cdf(-r) + (normal_pdf(0.0) - normal_pdf(r)) / r
}

impl UtilityIndex {
    pub fn custom(label: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        UtilityIndex::Custom { f: Arc::new(f), growth: None, label: label.into() }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha();
        if !a.is_finite() {
            return Err(Error::config(format!("alpha must be finite, got {a}")));
        }
        match self {
            UtilityIndex::Blend { alpha, .. } if !(*alpha > 0.0 && *alpha <= 1.0) => {
                Err(Error::config(format!("blend utility needs 0 < alpha <= 1, got {alpha}")))
            }
            UtilityIndex::Shortfall { delta, .. } if !(*delta >= 0.0) => {
                Err(Error::config(format!("shortfall ramp width must be >= 0, got {delta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilityIndex::Additive { .. } => "additive",
            UtilityIndex::Blend { .. } => "blend",
            UtilityIndex::MeanVariance { .. } => "mean-variance",
            UtilityIndex::MeanSemivariance { .. } => "mean-semivariance",
            UtilityIndex::Shortfall { .. } => "shortfall",
            UtilityIndex::Custom { .. } => "custom",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            UtilityIndex::Additive { alpha, .. }
            | UtilityIndex::Blend { alpha, .. }
            | UtilityIndex::MeanVariance { alpha }
            | UtilityIndex::MeanSemivariance { alpha }
            | UtilityIndex::Shortfall { alpha, .. } => *alpha,
            UtilityIndex::Custom { .. } => 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            UtilityIndex::Additive { phi, alpha } => phi.eval(x) + alpha * y,
            UtilityIndex::Blend { phi, alpha } => phi.eval((1.0 - alpha) * x + alpha * y),
            UtilityIndex::MeanVariance { alpha } => x - alpha * y * y,
            UtilityIndex::MeanSemivariance { alpha } => {
                if y < 0.0 {
                    x - alpha * y * y
                } else {
                    x
                }
            }
            UtilityIndex::Shortfall { alpha, delta } => x - alpha * shortfall_ramp(y, *delta),
            UtilityIndex::Custom { f, .. } => f(x, y),
        }
    }

    /// Shortfall indices get ramp width `delta` unless one is already set;
    /// other kinds are returned unchanged.
    pub fn smoothed(&self, delta: f64) -> UtilityIndex {
        match self {
            UtilityIndex::Shortfall { alpha, delta: d } if *d == 0.0 => {
                UtilityIndex::Shortfall { alpha: *alpha, delta }
            }
            other => other.clone(),
        }
    }

    pub fn smoothing_width(&self) -> f64 {
        match self {
            UtilityIndex::Shortfall { delta, .. } => *delta,
            _ => 0.0,
        }
    }

    /// Declared growth constants, when `u` is polynomially bounded.
    pub fn growth_bound(&self) -> Option<GrowthBound> {
        match self {
            UtilityIndex::Additive { phi, alpha } => phi.growth().map(|b| b.merge_with_linear(alpha.abs())),
            UtilityIndex::Blend { phi, .. } => phi.growth(),
            UtilityIndex::MeanVariance { alpha } | UtilityIndex::MeanSemivariance { alpha } => {
                Some(GrowthBound { c: 1.0 + alpha.abs(), g: 3.0 })
            }
            UtilityIndex::Shortfall { alpha, .. } => Some(GrowthBound { c: 1.0 + alpha.abs(), g: 2.0 }),
            UtilityIndex::Custom { growth, .. } => *growth,
        }
    }

    /// `∂u/∂x`, analytic where available.
    pub fn dx(&self, x: f64, y: f64) -> f64 {
        match self {
            UtilityIndex::Additive { phi, .. } => phi.d1(x),
            UtilityIndex::Blend { phi, alpha } => (1.0 - alpha) * phi.d1((1.0 - alpha) * x + alpha * y),
            UtilityIndex::MeanVariance { .. } | UtilityIndex::MeanSemivariance { .. } => 1.0,
            UtilityIndex::Shortfall { .. } | UtilityIndex::Custom { .. } => {
                let h = fd_step(x);
                (self.eval(x + h, y) - self.eval(x - h, y)) / (2.0 * h)
            }
        }
    }

    /// `∂²u/∂y²`, analytic where available.
    pub fn dyy(&self, x: f64, y: f64) -> f64 {
        match self {
            UtilityIndex::Additive { .. } => 0.0,
            UtilityIndex::Blend { phi, alpha } => alpha * alpha * phi.d2((1.0 - alpha) * x + alpha * y),
            UtilityIndex::MeanVariance { alpha } => -2.0 * alpha,
            UtilityIndex::MeanSemivariance { alpha } if y != 0.0 => {
                if y < 0.0 {
                    -2.0 * alpha
                } else {
                    0.0
                }
            }
            _ => {
                let h = fd_step(y);
                (self.eval(x, y + h) - 2.0 * self.eval(x, y) + self.eval(x, y - h)) / (h * h)
            }
        }
    }

    /// Global range of `-½ u_yy / u_x` when it is known in closed form and
    /// `u_x > 0` holds everywhere.
    pub fn risk_ratio_range(&self) -> Option<RatioRange> {
        match self {
            UtilityIndex::MeanVariance { alpha } => Some(RatioRange::constant(*alpha)),
            UtilityIndex::MeanSemivariance { alpha } => Some(RatioRange {
                inf: 0.0_f64.min(*alpha),
                sup: 0.0_f64.max(*alpha),
                at_inf: (0.0, if *alpha >= 0.0 { 1.0 } else { -1.0 }),
                at_sup: (0.0, if *alpha >= 0.0 { -1.0 } else { 1.0 }),
            }),
            UtilityIndex::Additive { phi, .. } if phi.strictly_increasing() => Some(RatioRange::constant(0.0)),
            UtilityIndex::Blend { phi: Phi::Identity, alpha } if *alpha < 1.0 => Some(RatioRange::constant(0.0)),
            UtilityIndex::Blend { phi: Phi::NegExp, alpha } if *alpha < 1.0 => {
                Some(RatioRange::constant(alpha * alpha / (2.0 * (1.0 - alpha))))
            }
            _ => None,
        }
    }
}

/// Range of the risk ratio `-½ u_yy / u_x`, with points attaining each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRange {
    pub inf: f64,
    pub sup: f64,
    pub at_inf: (f64, f64),
    pub at_sup: (f64, f64),
}

impl RatioRange {
    fn constant(r: f64) -> Self {
        RatioRange { inf: r, sup: r, at_inf: (0.0, 0.0), at_sup: (0.0, 0.0) }
    }
}

/// Per-path statistics entering the finite-horizon functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryStatistics {
    /// `S_n / n`
    pub sample_mean: f64,
    /// `(Σ Z_i - μ_{θ_i}) / sqrt(n)`
    pub scaled_deviation: f64,
    pub n: u64,
}

impl TrajectoryStatistics {
    pub fn from_sums(payoff_sum: f64, deviation_sum: f64, n: u64) -> Self {
        let nf = n as f64;
        TrajectoryStatistics { sample_mean: payoff_sum / nf, scaled_deviation: deviation_sum / nf.sqrt(), n }
    }
}

pub fn eval_index(u: &UtilityIndex, x: f64, y: f64) -> f64 {
    u.eval(x, y)
}

/// Sample mean of `u` over a collection of trajectories sharing one horizon.
pub fn finite_horizon_utility(u: &UtilityIndex, stats: &[TrajectoryStatistics]) -> Result<f64> {
    let first = stats.first().ok_or_else(|| Error::invalid("no trajectories supplied"))?;
    if stats.iter().any(|s| s.n != first.n) {
        return Err(Error::invalid("trajectories have different horizons"));
    }
    let total: f64 = stats.iter().map(|s| u.eval(s.sample_mean, s.scaled_deviation)).sum();
    Ok(total / stats.len() as f64)
}

/// `∫ u(mu, ·) dN(0, sigma2)`: closed forms for the quadratic, semivariance,
/// shortfall and additive kinds, Gauss–Hermite otherwise.
///
/// For a zero-variance arm under the shortfall index this returns `mu`:
/// the deviation is identically zero and `1{0 < 0} = 0`.
pub fn single_arm_limit(u: &UtilityIndex, mu: f64, sigma2: f64, quadrature_order: usize) -> Result<f64> {
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid(format!("variance must be >= 0, got {sigma2}")));
    }
    if quadrature_order == 0 {
        return Err(Error::invalid("quadrature order must be >= 1"));
    }
    match u {
        UtilityIndex::MeanVariance { alpha } => Ok(mu - alpha * sigma2),
        UtilityIndex::MeanSemivariance { alpha } => Ok(mu - 0.5 * alpha * sigma2),
        UtilityIndex::Shortfall { alpha, delta } => Ok(mu - alpha * expected_shortfall_ramp(sigma2, *delta)),
        UtilityIndex::Additive { phi, .. } => Ok(phi.eval(mu)),
        _ if sigma2 == 0.0 => Ok(u.eval(mu, 0.0)),
        _ => quadrature_limit(u, mu, sigma2, quadrature_order),
    }
}

/// Gauss–Hermite evaluation of `∫ u(mu, ·) dN(0, sigma2)` regardless of kind.
pub fn quadrature_limit(u: &UtilityIndex, mu: f64, sigma2: f64, quadrature_order: usize) -> Result<f64> {
    let rule = GaussHermite::new(quadrature_order)?;
    rule.normal_expectation(0.0, sigma2, |y| u.eval(mu, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

/// Rectangle of `(x, y)` points on which the curvature condition is probed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub points: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { x_range: (-10.0, 10.0), y_range: (-10.0, 10.0), points: 201 }
    }
}

/// Outcome of checking `u_x (mu1 - mu2) + ½ u_yy (s1² - s2²) >= 0` (arm 1)
/// and its reverse (arm 2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecializationCertificate {
    pub holds_for_arm1: Verdict,
    pub holds_for_arm2: Verdict,
    /// A point where the arm-1 condition fails.
    pub witness: Option<(f64, f64)>,
    /// A point where the reversed (arm-2) condition fails.
    pub reverse_witness: Option<(f64, f64)>,
    /// Supremum of `-½ u_yy / u_x` (exact when analytic, else over the probe grid).
    pub ratio_bound: Option<f64>,
    /// True when the verdicts come from a closed-form ratio rather than the grid.
    pub analytic: bool,
}

pub fn specialization_certificate(
    u: &UtilityIndex,
    arm1: &Arm,
    arm2: &Arm,
    probe: ProbeGrid,
) -> Result<SpecializationCertificate> {
    crate::arms::check_two_arm_order(arm1.mean, arm2.mean, arm1.sigma(), arm2.sigma())?;
    let dm = arm1.mean - arm2.mean;
    let dv = arm1.variance - arm2.variance;
    let r12 = dm / dv;

    if let Some(range) = u.risk_ratio_range() {
        let arm1_ok = range.sup <= r12;
        let arm2_ok = range.inf >= r12;
        return Ok(SpecializationCertificate {
            holds_for_arm1: if arm1_ok { Verdict::Yes } else { Verdict::No },
            holds_for_arm2: if arm2_ok { Verdict::Yes } else { Verdict::No },
            witness: (!arm1_ok).then_some(range.at_sup),
            reverse_witness: (!arm2_ok).then_some(range.at_inf),
            ratio_bound: Some(range.sup),
            analytic: true,
        });
    }

    if probe.points < 2 {
        return Err(Error::invalid("probe grid needs at least 2 points per axis"));
    }
    let axis = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (probe.points - 1) as f64;
    let mut worst_arm1: Option<((f64, f64), f64)> = None;
    let mut worst_arm2: Option<((f64, f64), f64)> = None;
    let mut ratio_sup: Option<f64> = None;
    for i in 0..probe.points {
        let x = axis(probe.x_range, i);
        for j in 0..probe.points {
            let y = axis(probe.y_range, j);
            let ux = u.dx(x, y);
            let uyy = u.dyy(x, y);
            let c = ux * dm + 0.5 * uyy * dv;
            if c < 0.0 && worst_arm1.is_none_or(|(_, w)| c < w) {
                worst_arm1 = Some(((x, y), c));
            }
            if c > 0.0 && worst_arm2.is_none_or(|(_, w)| c > w) {
                worst_arm2 = Some(((x, y), c));
            }
            if ux > 0.0 {
                let r = -0.5 * uyy / ux;
                ratio_sup = Some(ratio_sup.map_or(r, |s: f64| s.max(r)));
            }
        }
    }
    Ok(SpecializationCertificate {
        holds_for_arm1: if worst_arm1.is_some() { Verdict::No } else { Verdict::Inconclusive },
        holds_for_arm2: if worst_arm2.is_some() { Verdict::No } else { Verdict::Inconclusive },
        witness: worst_arm1.map(|(p, _)| p),
        reverse_witness: worst_arm2.map(|(p, _)| p),
        ratio_bound: ratio_sup,
        analytic: false,
    })
}

/// Declarative description of a utility index, as read from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub kind: UtilityKindTag,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub phi: Option<PhiSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKindTag {
    Additive,
    Blend,
    MeanVariance,
    MeanSemivariance,
    Shortfall,
    Custom,
}

/// `phi` either by name (`"identity"`, `"-exp(-x)"`/`"neg-exp"`,
/// `"neg-quadratic-around(c)"`) or by polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Named(String),
    Polynomial { poly: Vec<f64> },
}

impl PhiSpec {
    pub fn build(&self) -> Result<Phi> {
        match self {
            PhiSpec::Polynomial { poly } => {
                if poly.is_empty() || poly.iter().any(|a| !a.is_finite()) {
                    return Err(Error::config("polynomial phi needs finite coefficients"));
                }
                Ok(Phi::Polynomial(poly.clone()))
            }
            PhiSpec::Named(name) => {
                let n: String = name.chars().filter(|c| !c.is_whitespace()).collect();
                match n.as_str() {
                    "identity" | "x" => Ok(Phi::Identity),
                    "-exp(-x)" | "neg-exp" | "exp(-x)" => Ok(Phi::NegExp),
                    _ => {
                        let inner = n
                            .strip_prefix("neg-quadratic-around(")
                            .and_then(|s| s.strip_suffix(')'))
                            .ok_or_else(|| Error::config(format!("unknown phi '{name}'")))?;
                        let c: f64 = inner
                            .parse()
                            .map_err(|_| Error::config(format!("bad centre in phi '{name}'")))?;
                        Ok(Phi::NegQuadraticAround(c))
                    }
                }
            }
        }
    }
}

impl UtilitySpec {
    pub fn build(&self) -> Result<UtilityIndex> {
        let phi = || -> Result<Phi> {
            self.phi
                .as_ref()
                .ok_or_else(|| Error::config(format!("{:?} utility requires phi", self.kind)))?
                .build()
        };
        let u = match self.kind {
            UtilityKindTag::Additive => UtilityIndex::Additive { phi: phi()?, alpha: self.alpha },
            UtilityKindTag::Blend => UtilityIndex::Blend { phi: phi()?, alpha: self.alpha },
            UtilityKindTag::MeanVariance => UtilityIndex::MeanVariance { alpha: self.alpha },
            UtilityKindTag::MeanSemivariance => UtilityIndex::MeanSemivariance { alpha: self.alpha },
            UtilityKindTag::Shortfall => UtilityIndex::Shortfall { alpha: self.alpha, delta: self.delta },
            UtilityKindTag::Custom => {
                return Err(Error::config("custom utility has no callback; supply one through the library API"))
            }
        };
        u.validate()?;
        Ok(u)
    }
}
