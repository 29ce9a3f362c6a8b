//! Oscillating Brownian motion `dW = sigma(W) dB` with
//! `sigma(w) = sigma_pos` for `w >= 0` and `sigma_neg` for `w < 0`, started
//! at 0. Its time-`t` law has the piecewise-Gaussian density
//!
//! ```text
//! q(t, y) = N(0, sigma_pos² t)(y) · 2 sigma_neg / (sigma_pos + sigma_neg),  y >= 0
//! q(t, y) = N(0, sigma_neg² t)(y) · 2 sigma_pos / (sigma_pos + sigma_neg),  y < 0
//! ```
//!
//! so the occupation probability of `{W >= 0}` is `sigma_neg / (sigma_pos + sigma_neg)`
//! at every `t > 0`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::arms::{check_two_arm_order, thresholds_from_params};
use crate::error::{Error, Result};
use crate::quadrature::{normal_cdf, normal_pdf};
use crate::simulate::{path_rng, MonteCarloEstimate};

pub const MIN_STEPS: usize = 100;
pub const DEFAULT_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObmParams {
    pub sigma_pos: f64,
    pub sigma_neg: f64,
}

impl ObmParams {
    pub fn new(sigma_pos: f64, sigma_neg: f64) -> Result<Self> {
        if !(sigma_pos > 0.0 && sigma_neg > 0.0 && sigma_pos.is_finite() && sigma_neg.is_finite()) {
            return Err(Error::invalid(format!(
                "both volatilities must be positive and finite, got ({sigma_pos}, {sigma_neg})"
            )));
        }
        Ok(ObmParams { sigma_pos, sigma_neg })
    }

    /// Roles swapped: the larger volatility acts below zero.
    pub fn mirrored(&self) -> Self {
        ObmParams { sigma_pos: self.sigma_neg, sigma_neg: self.sigma_pos }
    }

    fn weights(&self) -> (f64, f64) {
        let s = self.sigma_pos + self.sigma_neg;
        (2.0 * self.sigma_neg / s, 2.0 * self.sigma_pos / s)
    }

    /// `P(W_t >= 0)`, the same for all `t > 0`.
    pub fn prob_nonneg(&self) -> f64 {
        self.sigma_neg / (self.sigma_pos + self.sigma_neg)
    }

    /// `E[W_t² 1{W_t < 0}]`.
    pub fn neg_second_moment(&self, t: f64) -> f64 {
        self.sigma_pos * self.sigma_neg * self.sigma_neg * t / (self.sigma_pos + self.sigma_neg)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be positive, got {t}")))
    }
}

pub fn obm_density(params: &ObmParams, t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    let (w_pos, w_neg) = params.weights();
    let s = if y >= 0.0 { params.sigma_pos } else { params.sigma_neg };
    let sd = s * t.sqrt();
    let w = if y >= 0.0 { w_pos } else { w_neg };
    Ok(w * normal_pdf(y / sd) / sd)
}

/// `P(W_t <= y)`.
pub fn obm_cdf(params: &ObmParams, t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    let (w_pos, w_neg) = params.weights();
    let st = t.sqrt();
    Ok(if y < 0.0 {
        w_neg * normal_cdf(y / (params.sigma_neg * st))
    } else {
        0.5 * w_neg + w_pos * (normal_cdf(y / (params.sigma_pos * st)) - 0.5)
    })
}

/// Limit value of switching to arm 1 on `{W >= 0}` and arm 2 on `{W < 0}`
/// under the semivariance index: `(mu1 s2 + mu2 s1 - alpha s1 s2²) / (s1 + s2)`.
pub fn switch_value_semivariance(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, alpha: f64) -> Result<f64> {
    check_two_arm_order(mu1, mu2, sigma1, sigma2)?;
    let p = ObmParams::new(sigma1, sigma2)?;
    let occ = p.prob_nonneg();
    Ok(mu1 * occ + mu2 * (1.0 - occ) - alpha * p.neg_second_moment(1.0))
}

/// Threshold above which specializing in arm 1 is not optimal under the
/// shortfall index.
pub fn shortfall_switch_bound(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    Ok(thresholds_from_params(mu1, mu2, sigma1, sigma2)?.alpha_low_prime)
}

/// Terminal values `W_t` of `paths` Euler–Maruyama paths. The volatility of
/// each step is taken at its left end, with `W = 0` counted as nonnegative.
pub fn simulate_obm_terminal(params: &ObmParams, t: f64, steps: usize, paths: u64, seed: u64) -> Result<Vec<f64>> {
    check_time(t)?;
    if steps < MIN_STEPS {
        return Err(Error::invalid(format!("need at least {MIN_STEPS} steps, got {steps}")));
    }
    if paths == 0 {
        return Err(Error::invalid("paths must be >= 1"));
    }
    let sq = (t / steps as f64).sqrt();
    let (up, down) = (params.sigma_pos * sq, params.sigma_neg * sq);
    Ok((0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut w = 0.0_f64;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += if w >= 0.0 { up } else { down } * z;
            }
            w
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObmStatistics {
    pub prob_nonneg: MonteCarloEstimate,
    pub neg_second_moment: MonteCarloEstimate,
}

pub fn simulate_obm(params: &ObmParams, t: f64, steps: usize, paths: u64, seed: u64) -> Result<ObmStatistics> {
    let w = simulate_obm_terminal(params, t, steps, paths, seed)?;
    let ind: Vec<f64> = w.iter().map(|&v| if v >= 0.0 { 1.0 } else { 0.0 }).collect();
    let sq: Vec<f64> = w.iter().map(|&v| if v < 0.0 { v * v } else { 0.0 }).collect();
    Ok(ObmStatistics {
        prob_nonneg: MonteCarloEstimate::from_samples(&ind, paths, seed),
        neg_second_moment: MonteCarloEstimate::from_samples(&sq, paths, seed),
    })
}
