use bandit_core::arms::{thresholds_from_params, Arm, ArmSet};
use bandit_core::obm::{obm_cdf, obm_density, simulate_obm, ObmParams};
use bandit_core::pde::{feynman_kac_value, solve_hjb, BoundaryPolicy, Grid, SolverConfig};
use bandit_core::regime::{classify, RegimeReport};
use bandit_core::simulate::{estimate_un, exact_value_dp, DpArithmetic, SimulationConfig};
use bandit_core::{Error, Result, UtilityIndex};
use serde_json::{json, Value};

use crate::config::{ArithmeticName, BoundaryName, ExperimentConfig};
use crate::report::{fmt, Report, Table};

/// Largest gap tolerated between the DP and the per-stage mean-variance value.
const DP_MEAN_VARIANCE_TOL: f64 = 1e-12;

/// Two-arm regime, with arm 1 the one of larger mean. `None` when the pair
/// is outside the ordering the classification needs.
fn two_arm_regime(u: &UtilityIndex, set: &ArmSet) -> (Option<RegimeReport>, Option<String>) {
    if set.len() != 2 {
        return (None, None);
    }
    let (a, b) = (&set.arms[0], &set.arms[1]);
    let (arm1, arm2) = if a.mean >= b.mean { (a, b) } else { (b, a) };
    match classify(u, arm1, arm2) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn arm_label(a: &Arm) -> String {
    format!("arm {} (mean {}, variance {})", a.id, fmt(a.mean), fmt(a.variance))
}

pub fn value(cfg: &mut ExperimentConfig) -> Result<Report> {
    let set = cfg.arm_set()?;
    let u = cfg.utility()?;
    let g = cfg.grid.get_or_insert_with(Default::default).clone();
    let solver = SolverConfig {
        epsilon_perturbation: g.epsilon,
        boundary_policy: match g.boundary {
            BoundaryName::SecondDerivativeZero => BoundaryPolicy::SecondDerivativeZero,
            BoundaryName::OneSidedUpwind => BoundaryPolicy::OneSidedUpwind,
        },
        smoothing_width: g.smoothing_width,
        stability_factor: g.stability_factor,
        keep_every: None,
    };
    let mut grid = Grid::for_arms(&set, g.x_points, g.y_points, &solver)?;
    if let Some(t) = g.t_steps {
        grid = grid.with_t_steps(t);
    }
    let sol = solve_hjb(&set, &u, &grid, &solver)?;

    let oracle = if set.len() == 1 {
        let a = &set.arms[0];
        let var = a.variance + g.epsilon * g.epsilon;
        Some(feynman_kac_value(a.mean, var, &u.smoothed(sol.smoothing_width), g.quadrature_order)?)
    } else {
        None
    };
    let (regime, regime_note) = two_arm_regime(&u, &set);
    let perturbed = g.epsilon > 0.0;

    let mut t = Table::default();
    t.row("V", fmt(sol.corner_value));
    t.row("utility", format!("{u:?}"));
    for a in &set.arms {
        t.row("arm", arm_label(a));
    }
    t.row(
        "grid",
        format!(
            "{}x{} nodes, {} steps, x in [{}, {}], y in [{}, {}]",
            grid.x_points,
            grid.y_points,
            grid.t_steps,
            fmt(grid.x_range.0),
            fmt(grid.x_range.1),
            fmt(grid.y_range.0),
            fmt(grid.y_range.1)
        ),
    );
    if sol.smoothing_width > 0.0 {
        t.row("shortfall ramp width", fmt(sol.smoothing_width));
    }
    if perturbed {
        t.row("perturbation", format!("variances raised by epsilon^2 = {}", fmt(g.epsilon * g.epsilon)));
    }
    if let Some(o) = oracle {
        t.row("single-arm quadrature", fmt(o));
        t.row("|V - quadrature|", fmt((sol.corner_value - o).abs()));
    }
    if let Some(r) = &regime {
        t.row("regime", r.regime.to_string());
        if let Some(sv) = r.switching_value {
            t.row("switching value (lower bound on V)", fmt(sv));
        }
    }
    if let Some(n) = &regime_note {
        t.row("regime", format!("not classified: {n}"));
    }

    let mut csv = Table::with_header(&["x", "y", "v", "argmax_arm"]);
    for r in sol.rows() {
        csv.push(vec![fmt(r.x), fmt(r.y), fmt(r.v), r.argmax_arm.to_string()]);
    }
    let result = json!({
        "value": sol.corner_value,
        "grid": grid,
        "dt": grid.dt(),
        "smoothing_width": sol.smoothing_width,
        "epsilon_perturbation": sol.epsilon_perturbation,
        "quadrature_value": oracle,
        "regime": regime,
        "regime_note": regime_note,
    });
    Ok(Report { result, table: t, csv })
}

pub fn simulate(cfg: &mut ExperimentConfig) -> Result<Report> {
    let set = cfg.arm_set()?;
    let u = cfg.utility()?;
    let s = cfg.simulation.get_or_insert_with(Default::default).clone();
    if s.horizons.is_empty() {
        return Err(Error::Config("simulation.horizons is empty".into()));
    }
    let strategy = s.build_strategy(&set)?;
    let mut estimates = Vec::new();
    let mut t = Table::default();
    t.row("utility", format!("{u:?}"));
    t.row("strategy", format!("{strategy:?}"));
    let mut csv = Table::with_header(&["n", "mean", "se", "ci95_lo", "ci95_hi", "paths", "seed"]);
    for &n in &s.horizons {
        let conf = SimulationConfig { horizon: n, paths: s.paths, seed: s.seed, antithetic: s.antithetic };
        let e = estimate_un(&set, &strategy, &u, &conf)?;
        t.row(&format!("U_{n}"), format!("{} ± {} (95% CI [{}, {}])", fmt(e.mean), fmt(e.std_error), fmt(e.ci95.0), fmt(e.ci95.1)));
        csv.push(vec![
            n.to_string(),
            fmt(e.mean),
            fmt(e.std_error),
            fmt(e.ci95.0),
            fmt(e.ci95.1),
            e.paths.to_string(),
            e.seed.to_string(),
        ]);
        estimates.push(json!({ "n": n, "estimate": e }));
    }
    let result = json!({ "strategy": format!("{strategy:?}"), "estimates": estimates });
    Ok(Report { result, table: t, csv })
}

pub fn dp(cfg: &mut ExperimentConfig) -> Result<Report> {
    let set = cfg.arm_set()?;
    let u = cfg.utility()?;
    let d = cfg.dp.get_or_insert_with(Default::default).clone();
    let arithmetic = match d.arithmetic {
        ArithmeticName::Auto => DpArithmetic::Auto,
        ArithmeticName::Float => DpArithmetic::Float,
    };
    let per_stage = match u {
        UtilityIndex::MeanVariance { alpha } => {
            Some(set.arms.iter().map(|a| a.mean - alpha * a.variance).fold(f64::NEG_INFINITY, f64::max))
        }
        _ => None,
    };
    let mut t = Table::default();
    t.row("utility", format!("{u:?}"));
    let mut csv = Table::with_header(&["n", "value", "exact", "first_action", "states"]);
    let mut values = Vec::new();
    for &n in &d.horizons {
        let v = exact_value_dp(&set, &u, n, arithmetic)?;
        if let Some(target) = per_stage {
            if (v.value - target).abs() > DP_MEAN_VARIANCE_TOL {
                return Err(Error::Numerical(format!(
                    "V_{n} = {} disagrees with max_k(mu_k - alpha sigma_k^2) = {target}",
                    v.value
                )));
            }
        }
        let first = set.arms[v.first_action].id;
        let exact = v.exact.clone().unwrap_or_default();
        let shown = if exact.is_empty() { fmt(v.value) } else { format!("{} = {exact}", fmt(v.value)) };
        t.row(&format!("V_{n}"), format!("{shown}, first arm {first}, {} states", v.states));
        csv.push(vec![n.to_string(), fmt(v.value), exact, first.to_string(), v.states.to_string()]);
        values.push(json!({ "n": n, "value": v.value, "exact": v.exact, "first_arm": first, "states": v.states }));
    }
    if let Some(target) = per_stage {
        t.row("max_k(mu_k - alpha sigma_k^2)", format!("{} (matched)", fmt(target)));
    }
    Ok(Report { result: json!({ "values": values, "mean_variance_check": per_stage }), table: t, csv })
}

pub fn thresholds(cfg: &mut ExperimentConfig) -> Result<Report> {
    let (mu1, mu2, s1, s2, set) = match cfg.thresholds {
        Some(p) => (p.mu1, p.mu2, p.sigma1, p.sigma2, None),
        None => {
            let set = cfg.arm_set()?;
            if set.len() != 2 {
                return Err(Error::Config(format!("thresholds need exactly two arms, got {}", set.len())));
            }
            let (a, b) = (&set.arms[0], &set.arms[1]);
            let (a1, a2) = if a.mean >= b.mean { (a, b) } else { (b, a) };
            (a1.mean, a2.mean, a1.sigma(), a2.sigma(), Some(set.clone()))
        }
    };
    let th = thresholds_from_params(mu1, mu2, s1, s2)?;
    let mut t = Table::default();
    t.row("ratio", fmt(th.ratio));
    t.row("alpha_low", fmt(th.alpha_low));
    t.row("alpha_high", fmt(th.alpha_high));
    t.row("alpha_low_prime", fmt(th.alpha_low_prime));
    let mut regime = None;
    if cfg.utility.is_some() {
        let u = cfg.utility()?;
        let set = match set {
            Some(s) => s,
            None => ArmSet::from_pairs(&[(mu1, s1 * s1), (mu2, s2 * s2)])?,
        };
        let (r, note) = two_arm_regime(&u, &set);
        if let Some(r) = &r {
            t.row("regime", r.regime.to_string());
        }
        if let Some(n) = note {
            t.row("regime", format!("not classified: {n}"));
        }
        regime = r;
    }
    let mut csv = Table::with_header(&["mu1", "mu2", "sigma1", "sigma2", "ratio", "alpha_low", "alpha_high", "alpha_low_prime"]);
    csv.push([mu1, mu2, s1, s2, th.ratio, th.alpha_low, th.alpha_high, th.alpha_low_prime].map(fmt).to_vec());
    let result = json!({ "mu1": mu1, "mu2": mu2, "sigma1": s1, "sigma2": s2, "thresholds": th, "regime": regime });
    Ok(Report { result, table: t, csv })
}

pub fn hull(cfg: &mut ExperimentConfig) -> Result<Report> {
    let set = cfg.arm_set()?;
    let mut t = Table::default();
    let mut csv = Table::with_header(&["arm", "mean", "variance", "extreme"]);
    let mut arms = Vec::new();
    for (pos, a) in set.arms.iter().enumerate() {
        let extreme = set.extreme_indices.contains(&pos);
        t.row(&format!("arm {}", a.id), format!("({}, {}){}", fmt(a.mean), fmt(a.variance), if extreme { " extreme" } else { "" }));
        csv.push(vec![a.id.to_string(), fmt(a.mean), fmt(a.variance), extreme.to_string()]);
        arms.push(json!({ "id": a.id, "mean": a.mean, "variance": a.variance, "extreme": extreme }));
    }
    let ext: Vec<usize> = set.extreme_indices.iter().map(|&i| set.arms[i].id).collect();
    t.row("extreme arms", format!("{ext:?}"));
    t.row(
        "bounds",
        format!(
            "mean in [{}, {}], variance in [{}, {}]",
            fmt(set.mu_min),
            fmt(set.mu_max),
            fmt(set.var_min),
            fmt(set.var_max)
        ),
    );
    let result = json!({
        "arms": arms,
        "extreme_arms": ext,
        "mu_min": set.mu_min, "mu_max": set.mu_max,
        "var_min": set.var_min, "var_max": set.var_max,
        "rectangle": set.rectangle().pairs(),
    });
    Ok(Report { result, table: t, csv })
}

pub fn obm(cfg: &mut ExperimentConfig) -> Result<Report> {
    let o = cfg.obm.get_or_insert_with(Default::default).clone();
    let p = ObmParams::new(o.sigma_pos, o.sigma_neg)?;
    let stats = simulate_obm(&p, o.t, o.steps, o.paths, o.seed)?;
    let (pn, m2) = (p.prob_nonneg(), p.neg_second_moment(o.t));
    let mut t = Table::default();
    t.row("P(W >= 0)", format!("{} exact, {} ± {} simulated", fmt(pn), fmt(stats.prob_nonneg.mean), fmt(stats.prob_nonneg.std_error)));
    t.row(
        "E[W^2; W < 0]",
        format!("{} exact, {} ± {} simulated", fmt(m2), fmt(stats.neg_second_moment.mean), fmt(stats.neg_second_moment.std_error)),
    );
    if o.points < 2 {
        return Err(Error::Config("obm.points must be >= 2".into()));
    }
    let reach = 4.0 * o.sigma_pos.max(o.sigma_neg) * o.t.sqrt();
    let mut csv = Table::with_header(&["y", "density", "cdf"]);
    for i in 0..o.points {
        let y = -reach + 2.0 * reach * i as f64 / (o.points - 1) as f64;
        csv.push(vec![fmt(y), fmt(obm_density(&p, o.t, y)?), fmt(obm_cdf(&p, o.t, y)?)]);
    }
    let result: Value = json!({
        "prob_nonneg": pn,
        "neg_second_moment": m2,
        "simulated": stats,
    });
    Ok(Report { result, table: t, csv })
}
