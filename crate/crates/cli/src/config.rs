//! Experiment files. One TOML document holds the arms, the utility and one
//! optional section per command; see the README for the full schema.

use std::path::Path;

use bandit_core::arms::{Arm, ArmSet};
use bandit_core::simulate::{PayoffDistribution, Strategy};
use bandit_core::utility::UtilitySpec;
use bandit_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arms: Vec<ArmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obm: Option<ObmSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// An arm given either by its payoff law (`kind = ...`) or only by
/// `mean`/`variance`. With a law, `mean`/`variance` are checked against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct ArmSpec {
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub law: Option<PayoffDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

fn as_f64(key: &str, v: &toml::Value) -> std::result::Result<f64, String> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("arm field '{key}' must be a number, got {other}")),
    }
}

impl TryFrom<toml::Table> for ArmSpec {
    type Error = String;

    fn try_from(mut t: toml::Table) -> std::result::Result<Self, String> {
        let mean = t.remove("mean").map(|v| as_f64("mean", &v)).transpose()?;
        let variance = t.remove("variance").map(|v| as_f64("variance", &v)).transpose()?;
        if !t.contains_key("kind") {
            if let Some(k) = t.keys().next() {
                return Err(format!("unknown arm field '{k}' (a payoff law needs 'kind')"));
            }
            if mean.is_none() || variance.is_none() {
                return Err("an arm needs 'kind' or both 'mean' and 'variance'".into());
            }
            return Ok(ArmSpec { law: None, mean, variance });
        }
        let law: PayoffDistribution = toml::Value::Table(t.clone()).try_into().map_err(|e| e.to_string())?;
        // the law ignores unknown keys on its own, so compare against its echo
        let echo = toml::Table::try_from(&law).map_err(|e| e.to_string())?;
        if let Some(k) = t.keys().find(|k| !echo.contains_key(*k)) {
            return Err(format!("unknown field '{k}' for arm kind {}", t["kind"]));
        }
        Ok(ArmSpec { law: Some(law), mean, variance })
    }
}

impl ArmSpec {
    pub fn build(&self, id: usize) -> Result<Arm> {
        match &self.law {
            Some(law) => Arm::new(id, law.clone())?.with_declared_moments(self.mean, self.variance),
            None => Arm::from_moments(id, self.mean.unwrap_or(f64::NAN), self.variance.unwrap_or(f64::NAN)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    #[default]
    SecondDerivativeZero,
    OneSidedUpwind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x_points: usize,
    pub y_points: usize,
    /// Overrides the step count chosen from the stability bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    pub epsilon: f64,
    pub boundary: BoundaryName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_width: Option<f64>,
    pub stability_factor: f64,
    pub quadrature_order: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x_points: 200,
            y_points: 200,
            t_steps: None,
            epsilon: 0.0,
            boundary: BoundaryName::default(),
            smoothing_width: None,
            stability_factor: bandit_core::pde::MAX_STABILITY_FACTOR,
            quadrature_order: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Specialize,
    Alternate,
    LambdaFraction,
    SignSwitch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub strategy: StrategyName,
    /// Arm played by `specialize`.
    pub arm: usize,
    /// Cycle played by `alternate`; all arms in order when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<usize>,
    /// Fraction of stages given to `first` under `lambda-fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Alternative to `lambda`: the long-run average payoff to aim for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub first: usize,
    pub second: usize,
    pub arm_pos: usize,
    pub arm_neg: usize,
    /// Horizons to estimate at.
    pub horizons: Vec<u64>,
    pub paths: u64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            strategy: StrategyName::Specialize,
            arm: 0,
            sequence: Vec::new(),
            lambda: None,
            target: None,
            first: 0,
            second: 1,
            arm_pos: 0,
            arm_neg: 1,
            horizons: vec![1000],
            paths: 10_000,
            seed: 0,
            antithetic: false,
        }
    }
}

impl SimulationSection {
    pub fn build_strategy(&self, arms: &ArmSet) -> Result<Strategy> {
        let s = match self.strategy {
            StrategyName::Specialize => Strategy::Specialize(self.arm),
            StrategyName::Alternate if self.sequence.is_empty() => Strategy::Alternate((0..arms.len()).collect()),
            StrategyName::Alternate => Strategy::Alternate(self.sequence.clone()),
            StrategyName::LambdaFraction => match (self.lambda, self.target) {
                (Some(lambda), None) => Strategy::LambdaFraction { lambda, first: self.first, second: self.second },
                (None, Some(x)) => {
                    let mean = |k: usize| {
                        arms.arms
                            .get(k)
                            .map(|a| a.mean)
                            .ok_or_else(|| Error::Config(format!("lambda-fraction arm {k} does not exist")))
                    };
                    Strategy::lambda_for_target(x, mean(self.first)?, mean(self.second)?, self.first, self.second)?
                }
                _ => return Err(Error::Config("lambda-fraction needs exactly one of 'lambda' and 'target'".into())),
            },
            StrategyName::SignSwitch => Strategy::SignSwitch { arm_pos: self.arm_pos, arm_neg: self.arm_neg },
        };
        s.validate(arms.len())?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArithmeticName {
    #[default]
    Auto,
    Float,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSection {
    pub horizons: Vec<u64>,
    pub arithmetic: ArithmeticName,
}

impl Default for DpSection {
    fn default() -> Self {
        DpSection { horizons: vec![8], arithmetic: ArithmeticName::Auto }
    }
}

/// Explicit two-arm parameters; the first two arms are used when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObmSection {
    pub sigma_pos: f64,
    pub sigma_neg: f64,
    pub t: f64,
    pub steps: usize,
    pub paths: u64,
    pub seed: u64,
    /// Density samples written to CSV.
    pub points: usize,
}

impl Default for ObmSection {
    fn default() -> Self {
        ObmSection {
            sigma_pos: 2.0,
            sigma_neg: 1.0,
            t: 1.0,
            steps: bandit_core::obm::DEFAULT_STEPS,
            paths: 100_000,
            seed: 0,
            points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn arm_set(&self) -> Result<ArmSet> {
        if self.arms.is_empty() {
            return Err(Error::Config("no [[arms]] given".into()));
        }
        let arms = self.arms.iter().enumerate().map(|(i, a)| a.build(i)).collect::<Result<Vec<_>>>()?;
        ArmSet::new(arms)
    }

    pub fn utility(&self) -> Result<bandit_core::UtilityIndex> {
        self.utility.as_ref().ok_or_else(|| Error::Config("no [utility] section".into()))?.build()
    }

    /// Seeds every stochastic section.
    pub fn override_seed(&mut self, seed: u64) {
        self.simulation.get_or_insert_with(Default::default).seed = seed;
        self.obm.get_or_insert_with(Default::default).seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arms_by_law_or_by_moments() {
        let c = ExperimentConfig::parse(
            r#"
            [[arms]]
            kind = "two-point"
            lo = -1
            hi = 3
            p_hi = 0.5
            mean = 1

            [[arms]]
            mean = 0.0
            variance = 1.0
            "#,
        )
        .unwrap();
        let set = c.arm_set().unwrap();
        assert_eq!(set.pairs(), vec![(1.0, 4.0), (0.0, 1.0)]);
    }

    #[test]
    fn typos_are_rejected() {
        let bad_arm = "[[arms]]\nkind = \"normal\"\nmu = 1.0\nsigma = 2.0\n";
        assert!(matches!(ExperimentConfig::parse(bad_arm), Err(Error::Config(m)) if m.contains("sigma")));
        assert!(ExperimentConfig::parse("[grid]\nxpoints = 3\n").is_err());
        assert!(ExperimentConfig::parse("[[arms]]\nmean = 1.0\n").is_err());
    }

    #[test]
    fn declared_mean_must_match_law() {
        let c = ExperimentConfig::parse("[[arms]]\nkind = \"constant\"\nc = 2.0\nmean = 2.5\n").unwrap();
        assert!(matches!(c.arm_set(), Err(Error::Config(_))));
    }

    #[test]
    fn echo_round_trips() {
        let text = "[[arms]]\nkind = \"normal\"\nmu = 1.0\nsigma2 = 4.0\n\n[simulation]\nstrategy = \"sign-switch\"\n";
        let c = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(again.arms, c.arms);
        assert_eq!(again.simulation, c.simulation);
    }
}
