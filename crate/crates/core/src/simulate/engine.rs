use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::strategy::{PolicyState, Strategy};
use crate::arms::ArmSet;
use crate::error::{Error, Result};
use crate::utility::{TrajectoryStatistics, UtilityIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: u64,
    pub paths: u64,
    pub seed: u64,
    /// Pair path `2j` with a mirrored copy `2j + 1` driven by the same stream.
    pub antithetic: bool,
}

impl SimulationConfig {
    pub fn new(horizon: u64, paths: u64, seed: u64) -> Self {
        SimulationConfig { horizon, paths, seed, antithetic: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("paths must be >= 1"));
        }
        if self.antithetic && self.paths % 2 != 0 {
            return Err(Error::invalid("antithetic sampling needs an even path count"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    #[serde(rename = "se")]
    pub std_error: f64,
    pub paths: u64,
    pub ci95: (f64, f64),
    pub seed: u64,
}

impl MonteCarloEstimate {
    /// Mean and standard error of i.i.d. samples.
    pub fn from_samples(samples: &[f64], paths: u64, seed: u64) -> Self {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        let std_error = (var / m).sqrt();
        MonteCarloEstimate { mean, std_error, paths, ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error), seed }
    }
}

/// Independent stream for one path: the seed picks the key, the path index
/// picks the stream, so adding paths never changes earlier ones.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: u64,
    pub arm: usize,
    pub payoff: f64,
    pub deviation_sum: f64,
}

fn simulate_path<R: Rng + ?Sized>(
    arm_set: &ArmSet,
    strategy: &Strategy,
    n: u64,
    rng: &mut R,
    mirror: bool,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<TrajectoryStatistics> {
    let k_max = arm_set.len();
    let mut pulls = vec![0u64; k_max];
    let mut payoff_sum = 0.0;
    let mut deviation_sum = 0.0;
    for stage in 1..=n {
        let state = PolicyState { stage, pulls: &pulls, payoff_sum, deviation_sum };
        let k = strategy.choose(&state);
        if k >= k_max {
            return Err(Error::Policy(format!("policy chose arm {k} at stage {stage}, only {k_max} arms exist")));
        }
        let arm = &arm_set.arms[k];
        let z = arm.distribution.sample(rng, mirror);
        pulls[k] += 1;
        payoff_sum += z;
        deviation_sum += z - arm.mean;
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow { stage, arm: k, payoff: z, deviation_sum });
        }
    }
    Ok(TrajectoryStatistics::from_sums(payoff_sum, deviation_sum, n))
}

/// One trajectory of `n` stages.
pub fn run_strategy<R: Rng + ?Sized>(
    arm_set: &ArmSet,
    strategy: &Strategy,
    n: u64,
    rng: &mut R,
) -> Result<TrajectoryStatistics> {
    if n == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    simulate_path(arm_set, strategy, n, rng, false, None)
}

/// As [`run_strategy`], also returning every stage.
pub fn run_strategy_traced<R: Rng + ?Sized>(
    arm_set: &ArmSet,
    strategy: &Strategy,
    n: u64,
    rng: &mut R,
) -> Result<(TrajectoryStatistics, Vec<TraceRow>)> {
    if n == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mut rows = Vec::with_capacity(n as usize);
    let stats = simulate_path(arm_set, strategy, n, rng, false, Some(&mut rows))?;
    Ok((stats, rows))
}

/// Monte Carlo estimate of `E[f(stats)]` over `config.paths` trajectories.
/// Per-path results are reduced in path order, so output does not depend on
/// the number of worker threads.
pub fn estimate_un_with<F>(arm_set: &ArmSet, strategy: &Strategy, config: &SimulationConfig, f: F) -> Result<MonteCarloEstimate>
where
    F: Fn(&TrajectoryStatistics) -> f64 + Sync,
{
    config.validate()?;
    strategy.validate(arm_set.len())?;
    let n = config.horizon;
    let groups = if config.antithetic { config.paths / 2 } else { config.paths };
    let samples: Vec<f64> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let mut rng = path_rng(config.seed, g);
            let a = f(&simulate_path(arm_set, strategy, n, &mut rng, false, None)?);
            if config.antithetic {
                let mut rng = path_rng(config.seed, g);
                let b = f(&simulate_path(arm_set, strategy, n, &mut rng, true, None)?);
                Ok(0.5 * (a + b))
            } else {
                Ok(a)
            }
        })
        .collect::<Result<_>>()?;
    let bad = samples.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::numerical(format!("{bad} of {groups} path utilities are not finite")));
    }
    Ok(MonteCarloEstimate::from_samples(&samples, config.paths, config.seed))
}

/// Monte Carlo estimate of `U_n = E[u(S_n / n, Sbar_n / sqrt(n))]`.
pub fn estimate_un(
    arm_set: &ArmSet,
    strategy: &Strategy,
    u: &UtilityIndex,
    config: &SimulationConfig,
) -> Result<MonteCarloEstimate> {
    estimate_un_with(arm_set, strategy, config, |s| u.eval(s.sample_mean, s.scaled_deviation))
}
