//! Explicit monotone finite differences for
//!
//! ```text
//! ∂t v + G(∂x v, ∂yy v) = 0,   v(1, x, y) = u(x, y),
//! G(p, q) = max_k mu_k p + ½ sigma_k² q,
//! ```
//!
//! marched backward from `t = 1`. Each arm uses its own upwind difference
//! in `x` (forward for `mu_k > 0`, backward for `mu_k < 0`) and the central
//! second difference in `y`; the max is taken over these per-arm candidates,
//! which keeps the scheme monotone under the step bound enforced by [`Grid`].
//! The limit value is `v(0, 0, 0)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::arms::ArmSet;
use crate::error::{Error, Result};
use crate::utility::{single_arm_limit, UtilityIndex};

/// Terminal time.
pub const HORIZON: f64 = 1.0;
/// Largest admissible stability factor.
pub const MAX_STABILITY_FACTOR: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub t_steps: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_points: usize,
    pub y_points: usize,
}

impl Grid {
    /// Default domain for `arm_set` (after any perturbation in `config`):
    /// `y` spans `±6 sigma_max`, `x` covers `[min(0, mu_min), max(0, mu_max)]`
    /// plus a margin of `0.2 max(1, span)` on each side, and the time step is
    /// the largest one meeting the stability bound. Both axes are shifted by
    /// less than one cell so that the origin is a grid node.
    pub fn for_arms(arm_set: &ArmSet, x_points: usize, y_points: usize, config: &SolverConfig) -> Result<Grid> {
        let set = config.effective_arms(arm_set)?;
        let sigma_max = set.var_max.sqrt();
        let lo = set.mu_min.min(0.0);
        let hi = set.mu_max.max(0.0);
        let margin = 0.2 * (hi - lo).max(1.0);
        let y_half = 6.0 * sigma_max * HORIZON.sqrt();
        let mut grid = Grid {
            t_steps: 1,
            x_range: node_aligned(lo - margin, hi + margin, x_points),
            y_range: node_aligned(-y_half, y_half, y_points),
            x_points,
            y_points,
        };
        grid.check_shape()?;
        let dt_max = config.stability_factor * grid.stability_scale(&set);
        grid.t_steps = (HORIZON / dt_max).ceil() as usize;
        Ok(grid)
    }

    pub fn with_t_steps(self, t_steps: usize) -> Grid {
        Grid { t_steps, ..self }
    }

    pub fn dt(&self) -> f64 {
        HORIZON / self.t_steps as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.x_points - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_range.1 - self.y_range.0) / (self.y_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_range.0 + j as f64 * self.dy()
    }

    /// `min(dy² / sigma_max², dx / max(|mu_max|, |mu_min|, 1))`.
    pub fn stability_scale(&self, set: &ArmSet) -> f64 {
        let dy = self.dy();
        let diffusion = if set.var_max > 0.0 { dy * dy / set.var_max } else { f64::INFINITY };
        let transport = self.dx() / set.mu_max.abs().max(set.mu_min.abs()).max(1.0);
        diffusion.min(transport)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x_points < 3 || self.y_points < 3 {
            return Err(Error::config("grid needs at least 3 points per axis"));
        }
        if self.t_steps == 0 {
            return Err(Error::config("grid needs at least one time step"));
        }
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < 0.0 && 0.0 < b;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::config(format!(
                "grid ranges must be finite and strictly contain the origin, got x {:?}, y {:?}",
                self.x_range, self.y_range
            )));
        }
        Ok(())
    }
}

/// Range with the spacing of `[a, b]` on `points` nodes, shifted so that 0
/// is a node.
fn node_aligned(a: f64, b: f64, points: usize) -> (f64, f64) {
    if points < 2 || !(a < 0.0 && 0.0 < b) {
        return (a, b);
    }
    let h = (b - a) / (points - 1) as f64;
    let below = (-a / h).round().clamp(1.0, (points - 2) as f64);
    let lo = -below * h;
    (lo, lo + (points - 1) as f64 * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BoundaryPolicy {
    /// `∂yy v = 0` on the `y` edges.
    #[default]
    SecondDerivativeZero,
    /// `∂yy v` on the `y` edges frozen at the one-sided second difference of
    /// the terminal data.
    OneSidedUpwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Every variance is raised by `epsilon²`; must be positive when the
    /// smallest variance is zero.
    pub epsilon_perturbation: f64,
    pub boundary_policy: BoundaryPolicy,
    /// Ramp width applied to shortfall utilities; `None` means `2 dy`.
    pub smoothing_width: Option<f64>,
    pub stability_factor: f64,
    /// Keep every `n`-th time slice in the solution (the `t = 0` and terminal
    /// slices are always kept).
    pub keep_every: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_perturbation: 0.0,
            boundary_policy: BoundaryPolicy::default(),
            smoothing_width: None,
            stability_factor: MAX_STABILITY_FACTOR,
            keep_every: None,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolverConfig { epsilon_perturbation: epsilon, ..Default::default() }
    }

    /// The arm set the driver actually uses.
    pub fn effective_arms(&self, arm_set: &ArmSet) -> Result<ArmSet> {
        if !(self.stability_factor > 0.0 && self.stability_factor <= MAX_STABILITY_FACTOR) {
            return Err(Error::config(format!(
                "stability factor must lie in (0, {MAX_STABILITY_FACTOR}], got {}",
                self.stability_factor
            )));
        }
        if arm_set.var_min == 0.0 && !(self.epsilon_perturbation > 0.0) {
            return Err(Error::config("an arm has zero variance; set epsilon_perturbation > 0"));
        }
        arm_set.perturbed(self.epsilon_perturbation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSolution {
    pub grid: Grid,
    /// `v(0, x_i, y_j)` at index `i * y_points + j`.
    pub initial: Vec<f64>,
    /// `u(x_i, y_j)` as used by the solver (shortfall ramp applied).
    pub terminal: Vec<f64>,
    /// Intermediate slices `(t, values)` when requested, descending in `t`.
    pub slices: Vec<(f64, Vec<f64>)>,
    pub corner_value: f64,
    /// Arm id maximising the driver in the last step, per node.
    pub control_field: Vec<usize>,
    /// Ramp width used for shortfall utilities (0 otherwise).
    pub smoothing_width: f64,
    pub epsilon_perturbation: f64,
}

/// One row of a `t = 0` dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceRow {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub argmax_arm: usize,
}

impl PdeSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.initial[i * self.grid.y_points + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = SliceRow> + '_ {
        let ny = self.grid.y_points;
        (0..self.initial.len()).map(move |idx| SliceRow {
            x: self.grid.x(idx / ny),
            y: self.grid.y(idx % ny),
            v: self.initial[idx],
            argmax_arm: self.control_field[idx],
        })
    }
}

/// Bilinear interpolation of a slice at `(x, y)`.
pub fn interpolate(grid: &Grid, values: &[f64], x: f64, y: f64) -> f64 {
    let fx = ((x - grid.x_range.0) / grid.dx()).clamp(0.0, (grid.x_points - 1) as f64);
    let fy = ((y - grid.y_range.0) / grid.dy()).clamp(0.0, (grid.y_points - 1) as f64);
    let i = (fx.floor() as usize).min(grid.x_points - 2);
    let j = (fy.floor() as usize).min(grid.y_points - 2);
    let (sx, sy) = (fx - i as f64, fy - j as f64);
    let ny = grid.y_points;
    let v = |a: usize, b: usize| values[a * ny + b];
    (1.0 - sx) * ((1.0 - sy) * v(i, j) + sy * v(i, j + 1)) + sx * ((1.0 - sy) * v(i + 1, j) + sy * v(i + 1, j + 1))
}

/// Per-arm coefficients of the upwind candidate `a_f p_f + a_b p_b + b q`.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    fwd: f64,
    bwd: f64,
    half_var: f64,
}

struct Step<'a> {
    arms: &'a [Stencil],
    nx: usize,
    ny: usize,
    inv_dx: f64,
    inv_dy2: f64,
    dt: f64,
    /// Frozen `∂yy` at the lower/upper `y` edge per `x` row, if any.
    edge_q: Option<&'a [(f64, f64)]>,
}

impl Step<'_> {
    fn row(&self, cur: &[f64], i: usize, out: &mut [f64], mut control: Option<&mut [usize]>) {
        let ny = self.ny;
        let row = &cur[i * ny..(i + 1) * ny];
        let (fwd_from, fwd_to) = if i + 1 < self.nx { (i, i + 1) } else { (i - 1, i) };
        let (bwd_from, bwd_to) = if i > 0 { (i - 1, i) } else { (0, 1) };
        let f0 = &cur[fwd_from * ny..(fwd_from + 1) * ny];
        let f1 = &cur[fwd_to * ny..(fwd_to + 1) * ny];
        let b0 = &cur[bwd_from * ny..(bwd_from + 1) * ny];
        let b1 = &cur[bwd_to * ny..(bwd_to + 1) * ny];
        let (q_lo, q_hi) = self.edge_q.map_or((0.0, 0.0), |e| e[i]);
        let (inv_dx, inv_dy2, dt) = (self.inv_dx, self.inv_dy2, self.dt);

        let q_at = |j: usize| {
            if j == 0 {
                q_lo
            } else if j == ny - 1 {
                q_hi
            } else {
                (row[j + 1] - 2.0 * row[j] + row[j - 1]) * inv_dy2
            }
        };

        if let ([a], None) = (self.arms, control.as_deref_mut()) {
            // single arm: no max, keep the inner loop branch-free
            out[0] = row[0] + dt * (a.fwd * (f1[0] - f0[0]) * inv_dx + a.bwd * (b1[0] - b0[0]) * inv_dx + a.half_var * q_lo);
            for j in 1..ny - 1 {
                let q = (row[j + 1] - 2.0 * row[j] + row[j - 1]) * inv_dy2;
                let pf = (f1[j] - f0[j]) * inv_dx;
                let pb = (b1[j] - b0[j]) * inv_dx;
                out[j] = row[j] + dt * (a.fwd * pf + a.bwd * pb + a.half_var * q);
            }
            let j = ny - 1;
            out[j] = row[j] + dt * (a.fwd * (f1[j] - f0[j]) * inv_dx + a.bwd * (b1[j] - b0[j]) * inv_dx + a.half_var * q_hi);
            return;
        }

        for j in 0..ny {
            let q = q_at(j);
            let pf = (f1[j] - f0[j]) * inv_dx;
            let pb = (b1[j] - b0[j]) * inv_dx;
            let mut best = self.arms[0].fwd * pf + self.arms[0].bwd * pb + self.arms[0].half_var * q;
            let mut arg = 0;
            for (k, a) in self.arms.iter().enumerate().skip(1) {
                let c = a.fwd * pf + a.bwd * pb + a.half_var * q;
                if c > best {
                    best = c;
                    arg = k;
                }
            }
            out[j] = row[j] + dt * best;
            if let Some(ctrl) = control.as_deref_mut() {
                ctrl[j] = arg;
            }
        }
    }
}

/// Solves the HJB equation for `arm_set` and terminal utility `u` on `grid`.
pub fn solve_hjb(arm_set: &ArmSet, u: &UtilityIndex, grid: &Grid, config: &SolverConfig) -> Result<PdeSolution> {
    u.validate()?;
    grid.check_shape()?;
    let set = config.effective_arms(arm_set)?;
    let limit = config.stability_factor * grid.stability_scale(&set);
    if grid.dt() > limit * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "time step {:.3e} exceeds the stability bound {:.3e}; use at least {} steps",
            grid.dt(),
            limit,
            (HORIZON / limit).ceil()
        )));
    }
    let (nx, ny) = (grid.x_points, grid.y_points);
    let (dx, dy) = (grid.dx(), grid.dy());
    let delta = match u {
        UtilityIndex::Shortfall { delta, .. } if *delta > 0.0 => *delta,
        UtilityIndex::Shortfall { .. } => config.smoothing_width.unwrap_or(2.0 * dy),
        _ => 0.0,
    };
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("smoothing width must be >= 0, got {delta}")));
    }
    let u = u.smoothed(delta);

    let mut terminal = vec![0.0; nx * ny];
    terminal.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let x = grid.x(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = u.eval(x, grid.y(j));
        }
    });
    if let Some(bad) = terminal.iter().position(|v| !v.is_finite()) {
        return Err(non_finite(grid, bad, HORIZON, terminal[bad]));
    }

    let inv_dy2 = 1.0 / (dy * dy);
    let edge_q: Option<Vec<(f64, f64)>> = match config.boundary_policy {
        BoundaryPolicy::SecondDerivativeZero => None,
        BoundaryPolicy::OneSidedUpwind => Some(
            (0..nx)
                .map(|i| {
                    let r = &terminal[i * ny..(i + 1) * ny];
                    (
                        (r[0] - 2.0 * r[1] + r[2]) * inv_dy2,
                        (r[ny - 1] - 2.0 * r[ny - 2] + r[ny - 3]) * inv_dy2,
                    )
                })
                .collect(),
        ),
    };
    let stencils: Vec<Stencil> = set
        .arms
        .iter()
        .map(|a| Stencil { fwd: a.mean.max(0.0), bwd: a.mean.min(0.0), half_var: 0.5 * a.variance })
        .collect();
    let step = Step {
        arms: &stencils,
        nx,
        ny,
        inv_dx: 1.0 / dx,
        inv_dy2,
        dt: grid.dt(),
        edge_q: edge_q.as_deref(),
    };

    let mut cur = terminal.clone();
    let mut next = vec![0.0; nx * ny];
    let mut control = vec![0usize; nx * ny];
    let mut slices = Vec::new();
    for n in (0..grid.t_steps).rev() {
        if n == 0 {
            next.par_chunks_mut(ny)
                .zip(control.par_chunks_mut(ny))
                .enumerate()
                .for_each(|(i, (out, ctrl))| step.row(&cur, i, out, Some(ctrl)));
        } else {
            next.par_chunks_mut(ny).enumerate().for_each(|(i, out)| step.row(&cur, i, out, None));
        }
        std::mem::swap(&mut cur, &mut next);
        let t = n as f64 * grid.dt();
        if n % 64 == 0 || n == 0 {
            if let Some(bad) = cur.iter().position(|v| !v.is_finite()) {
                return Err(non_finite(grid, bad, t, cur[bad]));
            }
        }
        if let Some(k) = config.keep_every {
            if k > 0 && n > 0 && n % k == 0 {
                slices.push((t, cur.clone()));
            }
        }
    }
    let ids: Vec<usize> = set.arms.iter().map(|a| a.id).collect();
    control.iter_mut().for_each(|k| *k = ids[*k]);
    let corner_value = interpolate(grid, &cur, 0.0, 0.0);
    Ok(PdeSolution {
        grid: *grid,
        initial: cur,
        terminal,
        slices,
        corner_value,
        control_field: control,
        smoothing_width: delta,
        epsilon_perturbation: config.epsilon_perturbation,
    })
}

fn non_finite(grid: &Grid, idx: usize, t: f64, v: f64) -> Error {
    let (i, j) = (idx / grid.y_points, idx % grid.y_points);
    Error::numerical(format!(
        "non-finite value {v} at t={t:.6}, node ({i}, {j}) = (x={:.6}, y={:.6})",
        grid.x(i),
        grid.y(j)
    ))
}

/// Value of the linear single-arm equation: `∫ u(mu, ·) dN(0, sigma2)`.
pub fn feynman_kac_value(mu: f64, sigma2: f64, u: &UtilityIndex, quadrature_order: usize) -> Result<f64> {
    single_arm_limit(u, mu, sigma2, quadrature_order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremeReduction {
    pub v_full: f64,
    pub v_ext: f64,
    pub delta: f64,
}

/// Solves with all arms and with the extreme arms only, on the same grid.
pub fn extreme_reduction_check(
    arm_set: &ArmSet,
    u: &UtilityIndex,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<ExtremeReduction> {
    let v_full = solve_hjb(arm_set, u, grid, config)?.corner_value;
    let v_ext = solve_hjb(&arm_set.extremes(), u, grid, config)?.corner_value;
    Ok(ExtremeReduction { v_full, v_ext, delta: (v_full - v_ext).abs() })
}
