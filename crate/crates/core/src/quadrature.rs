//! Numerical integration helpers: Gauss–Hermite rules for Gaussian
//! expectations and adaptive Simpson for finite intervals.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Nodes and weights for `∫ f(x) exp(-x²) dx ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence, seeded with
    /// the classical asymptotic guesses for the largest roots.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature order must be >= 1"));
        }
        let n = order;
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::numerical(format!("Gauss-Hermite root {i} of order {n} did not converge")));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(GaussHermite { nodes, weights })
    }

    /// `E[f(Y)]` for `Y ~ N(mean, variance)`.
    pub fn normal_expectation(&self, mean: f64, variance: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        let scale = SQRT_2 * variance.max(0.0).sqrt();
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mean + scale * x);
            if !v.is_finite() {
                return Err(Error::numerical(format!(
                    "integrand is not finite ({v}) at quadrature node {}",
                    mean + scale * x
                )));
            }
            acc += w * v;
        }
        Ok(acc / PI.sqrt())
    }
}

/// Subdivisions always made before the error estimate is trusted, so narrow
/// peaks between the first few sample points are not missed.
const SIMPSON_MIN_DEPTH: u32 = 6;

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || (depth <= 48 - SIMPSON_MIN_DEPTH && delta.abs() <= 15.0 * tol) {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}
