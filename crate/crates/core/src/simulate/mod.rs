//! Payoff sampling, strategy execution, Monte Carlo estimation of `U_n` and
//! exact finite-horizon values.

mod distribution;
pub mod dp;
mod engine;
mod strategy;

pub use distribution::PayoffDistribution;
pub use dp::{exact_value_dp, DpArithmetic, DpValue};
pub use engine::{
    estimate_un, estimate_un_with, path_rng, run_strategy, run_strategy_traced, MonteCarloEstimate,
    SimulationConfig, TraceRow,
};
pub use strategy::{PolicyState, Strategy};
