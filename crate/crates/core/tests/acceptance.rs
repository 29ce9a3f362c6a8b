//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bandit_core::arms::{thresholds_from_params, Arm, ArmSet};
use bandit_core::obm::{obm_density, simulate_obm, ObmParams, DEFAULT_STEPS};
use bandit_core::pde::{extreme_reduction_check, feynman_kac_value, solve_hjb, Grid, SolverConfig};
use bandit_core::quadrature::adaptive_simpson;
use bandit_core::simulate::{
    estimate_un, estimate_un_with, exact_value_dp, DpArithmetic, PayoffDistribution, SimulationConfig, Strategy,
};
use bandit_core::utility::{Phi, UtilityIndex};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn arm(id: usize, d: PayoffDistribution) -> Arm {
    Arm::new(id, d).unwrap()
}

fn two_point(id: usize, lo: f64, hi: f64) -> Arm {
    arm(id, PayoffDistribution::TwoPoint { lo, hi, p_hi: 0.5 })
}

fn normal(id: usize, mu: f64, sigma2: f64) -> Arm {
    arm(id, PayoffDistribution::Normal { mu, sigma2 })
}

fn canonical_normal_pair() -> ArmSet {
    ArmSet::new(vec![normal(0, 1.0, 4.0), normal(1, 0.0, 1.0)]).unwrap()
}

fn grid(set: &ArmSet, n: usize, cfg: &SolverConfig) -> Grid {
    Grid::for_arms(set, n, n, cfg).unwrap()
}

fn c1_mean_variance_every_horizon() -> Outcome {
    let start = Instant::now();
    let set = ArmSet::new(vec![two_point(0, -1.0, 3.0)]).unwrap();
    let u = UtilityIndex::MeanVariance { alpha: 0.25 };
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [1, 10, 100] {
        let est = estimate_un(&set, &Strategy::Specialize(0), &u, &SimulationConfig::new(n, 100_000, 101 + n)).unwrap();
        ok &= est.mean.abs() <= 3.0 * est.std_error;
        parts.push(format!("n={n}: {:.4}±{:.4}", est.mean, est.std_error));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && secs < 10.0, format!("{} ({secs:.1}s)", parts.join(", ")))
}

fn single_arm_limit_check(u: UtilityIndex, target: f64, seed: u64) -> Outcome {
    let start = Instant::now();
    let set = ArmSet::new(vec![two_point(0, -1.0, 3.0)]).unwrap();
    let est = estimate_un(&set, &Strategy::Specialize(0), &u, &SimulationConfig::new(10_000, 100_000, seed)).unwrap();
    let tol = (3.0 * est.std_error).max(0.02);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (est.mean - target).abs() <= tol && secs < 60.0,
        format!("{:.4}±{:.4} vs {target}, tol {tol:.4} ({secs:.1}s)", est.mean, est.std_error),
    )
}

fn c2_semivariance_limit() -> Outcome {
    single_arm_limit_check(UtilityIndex::MeanSemivariance { alpha: 1.0 }, -1.0, 202)
}

fn c3_shortfall_limit() -> Outcome {
    single_arm_limit_check(UtilityIndex::Shortfall { alpha: 1.0, delta: 0.0 }, 0.5, 303)
}

fn c4_switching_beats_specialization() -> Outcome {
    let set = canonical_normal_pair();
    let u = UtilityIndex::MeanSemivariance { alpha: 1.0 };
    let est = estimate_un(
        &set,
        &Strategy::SignSwitch { arm_pos: 0, arm_neg: 1 },
        &u,
        &SimulationConfig::new(10_000, 100_000, 404),
    )
    .unwrap();
    let near = (est.mean + 1.0 / 3.0).abs() <= 0.03;
    let above = est.mean - (-0.5_f64).max(-1.0) >= 5.0 * est.std_error;
    outcome(near && above, format!("{:.4}±{:.4} vs -1/3; margin over -0.5 = {:.1} s.e.", est.mean, est.std_error, (est.mean + 0.5) / est.std_error))
}

fn c5_threshold_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut chain_ok = 0;
    for _ in 0..1000 {
        let mu2 = rng.random_range(-5.0..5.0);
        let mu1 = mu2 + rng.random_range(1e-3..5.0);
        let s2 = rng.random_range(1e-2..3.0);
        let s1 = s2 + rng.random_range(1e-3..3.0);
        let t = thresholds_from_params(mu1, mu2, s1, s2).unwrap();
        if t.ratio < t.alpha_low && t.alpha_low < t.alpha_high {
            chain_ok += 1;
        }
    }
    let t = thresholds_from_params(1.0, 0.0, 2.0, 1.0).unwrap();
    let exact = t.ratio == 1.0 / 3.0 && t.alpha_low == 0.5 && t.alpha_high == 2.0 && t.alpha_low_prime == 4.0;
    outcome(
        chain_ok == 1000 && exact,
        format!("chain held on {chain_ok}/1000; canonical {:?}", (t.ratio, t.alpha_low, t.alpha_high, t.alpha_low_prime)),
    )
}

fn c6_pde_matches_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let kinds = [
        UtilityIndex::Additive { phi: Phi::NegExp, alpha: 0.5 },
        UtilityIndex::Blend { phi: Phi::NegExp, alpha: 0.3 },
        UtilityIndex::MeanVariance { alpha: 0.25 },
        UtilityIndex::MeanSemivariance { alpha: 0.5 },
        UtilityIndex::Shortfall { alpha: 1.0, delta: 0.0 },
    ];
    let cfg = SolverConfig::default();
    let mut worst = 0.0_f64;
    let mut halved = 0;
    for _ in 0..20 {
        let mu = rng.random_range(0.25..=9.0);
        let s2 = rng.random_range(0.25..=9.0);
        let set = ArmSet::from_pairs(&[(mu, s2)]).unwrap();
        let fine = grid(&set, 400, &cfg);
        // one time step for both resolutions, so refinement is purely spatial
        let coarse = grid(&set, 200, &cfg).with_t_steps(fine.t_steps);
        let mut err = [0.0; 2];
        for u in &kinds {
            for (slot, g) in [&coarse, &fine].into_iter().enumerate() {
                let sol = solve_hjb(&set, u, g, &cfg).unwrap();
                let oracle = feynman_kac_value(mu, s2, &u.smoothed(sol.smoothing_width), 64).unwrap();
                let e = (sol.corner_value - oracle).abs();
                if slot == 0 {
                    worst = worst.max(e);
                }
                err[slot] += e;
            }
        }
        if err[1] <= 0.5 * err[0] {
            halved += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-2 && halved >= 16 && secs < 300.0,
        format!("max error at 200x200 {worst:.2e}; halved on {halved}/20 ({secs:.0}s)"),
    )
}

fn c7_extreme_reduction() -> Outcome {
    let cfg = SolverConfig::default();
    let set = ArmSet::from_pairs(&[(1.0, 4.0), (0.0, 1.0), (0.5, 2.5)]).unwrap();
    let g = grid(&set, 200, &cfg);
    let mut worst = 0.0_f64;
    for u in [UtilityIndex::MeanVariance { alpha: 0.25 }, UtilityIndex::MeanSemivariance { alpha: 1.0 }] {
        worst = worst.max(extreme_reduction_check(&set, &u, &g, &cfg).unwrap().delta);
    }
    let u = UtilityIndex::MeanSemivariance { alpha: 1.0 };
    let v = solve_hjb(&set, &u, &g, &cfg).unwrap().corner_value;
    let v_rect = solve_hjb(&set.rectangle(), &u, &g, &cfg).unwrap().corner_value;
    outcome(
        worst <= 1e-10 && v <= v_rect + 1e-2,
        format!("max |dV| {worst:.1e}; V(A) {v:.4} <= V(rectangle) {v_rect:.4}"),
    )
}

fn c8_exact_dp() -> Outcome {
    let alpha = 0.25;
    let set = ArmSet::new(vec![two_point(0, -1.0, 3.0), two_point(1, -1.0, 1.0)]).unwrap();
    let u3 = UtilityIndex::MeanVariance { alpha };
    let oracle = set.arms.iter().map(|a| a.mean - alpha * a.variance).fold(f64::NEG_INFINITY, f64::max);
    let mut worst = 0.0_f64;
    for n in 1..=12 {
        let v = exact_value_dp(&set, &u3, n, DpArithmetic::Auto).unwrap().value;
        worst = worst.max((v - oracle).abs());
    }

    // small spreads keep the CLT error of V_12 inside the trend tolerance
    let set = ArmSet::new(vec![two_point(0, 0.5, 1.5), two_point(1, -0.2, 0.2)]).unwrap();
    let u2 = UtilityIndex::Blend { phi: Phi::NegExp, alpha: 0.5 };
    let values: Vec<f64> =
        (1..=12).map(|n| exact_value_dp(&set, &u2, n, DpArithmetic::Auto).unwrap().value).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let cfg = SolverConfig::default();
    let v_pde = solve_hjb(&set, &u2, &grid(&set, 200, &cfg), &cfg).unwrap().corner_value;
    let gap = (values[11] - v_pde).abs();
    outcome(
        worst <= 1e-12 && monotone && gap <= 0.1,
        format!(
            "u.3 max |V_n - max_k| {worst:.1e}; u.2 V_1 {:.5} .. V_12 {:.5} monotone={monotone}, PDE {v_pde:.5}",
            values[0], values[11]
        ),
    )
}

fn c9_low_variance_high_mean_arm() -> Outcome {
    let cfg = SolverConfig::default();
    let set = ArmSet::from_pairs(&[(1.0, 1.0), (1.0, 4.0), (0.0, 4.0)]).unwrap();
    let u = UtilityIndex::Blend { phi: Phi::NegExp, alpha: 0.5 };
    let v = solve_hjb(&set, &u, &grid(&set, 200, &cfg), &cfg).unwrap().corner_value;
    let oracle = feynman_kac_value(1.0, 1.0, &u, 64).unwrap();
    outcome((v - oracle).abs() <= 1e-2, format!("PDE {v:.5} vs {oracle:.5}"))
}

fn c10_lambda_fraction() -> Outcome {
    let phi = Phi::NegQuadraticAround(0.5);
    let u = UtilityIndex::Additive { phi, alpha: 0.0 };
    let cfg = SimulationConfig::new(10_000, 10_000, 1010);
    let lambda = Strategy::lambda_for_target(0.5, 1.0, 0.0, 0, 1).unwrap();

    let constant = ArmSet::new(vec![
        arm(0, PayoffDistribution::Constant { c: 1.0 }),
        arm(1, PayoffDistribution::Constant { c: 0.0 }),
    ])
    .unwrap();
    let est = estimate_un(&constant, &lambda, &u, &cfg).unwrap();
    let spec: Vec<_> =
        (0..2).map(|k| estimate_un(&constant, &Strategy::Specialize(k), &u, &cfg).unwrap()).collect();
    let main = est.mean.abs() <= 3.0 * est.std_error && spec.iter().all(|e| e.mean <= -0.25 + 3.0 * e.std_error);

    // with noise the sample mean carries variance (n1 s1² + n2 s2²) / n²
    let noisy = canonical_normal_pair();
    let est_n = estimate_un(&noisy, &lambda, &u, &cfg).unwrap();
    let var_x = (5_000.0 * 4.0 + 5_000.0 * 1.0) / 1e8;
    let noisy_ok = (est_n.mean + var_x).abs() <= 3.0 * est_n.std_error;
    let spec_n: Vec<_> =
        (0..2).map(|k| estimate_un(&noisy, &Strategy::Specialize(k), &u, &cfg).unwrap()).collect();
    let spec_noisy_ok = spec_n.iter().all(|e| e.mean <= -0.25 + 3.0 * e.std_error);
    outcome(
        main && noisy_ok && spec_noisy_ok,
        format!(
            "constant arms {:.2e}±{:.1e}, specialize {:.4}/{:.4}; normal arms {:.3e}±{:.1e} vs -{var_x:.1e}",
            est.mean, est.std_error, spec[0].mean, spec[1].mean, est_n.mean, est_n.std_error
        ),
    )
}

fn c11_obm_suite() -> Outcome {
    let p = ObmParams::new(2.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst_mass = 0.0_f64;
    let mut cases = vec![(p, 1.0)];
    for _ in 0..20 {
        let q = ObmParams::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)).unwrap();
        cases.push((q, rng.random_range(0.1..3.0)));
    }
    for (q, t) in cases {
        let f = |y: f64| obm_density(&q, t, y).unwrap();
        let reach = 12.0 * q.sigma_pos.max(q.sigma_neg) * t.sqrt();
        let mass = adaptive_simpson(&f, -reach, 0.0, 1e-13) + adaptive_simpson(&f, 0.0, reach, 1e-13);
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    let s = simulate_obm(&p, 1.0, DEFAULT_STEPS, 100_000, 1112).unwrap();
    let p_ok = (s.prob_nonneg.mean - 1.0 / 3.0).abs() <= 3.0 * s.prob_nonneg.std_error + 0.01;
    let m_ok = (s.neg_second_moment.mean - 2.0 / 3.0).abs() <= 3.0 * s.neg_second_moment.std_error + 0.01;
    outcome(
        worst_mass <= 1e-8 && p_ok && m_ok,
        format!(
            "max |mass - 1| {worst_mass:.1e}; P(W>=0) {:.4}±{:.4}; E[W²;W<0] {:.4}±{:.4}",
            s.prob_nonneg.mean, s.prob_nonneg.std_error, s.neg_second_moment.mean, s.neg_second_moment.std_error
        ),
    )
}

fn c12_moment_bound() -> Outcome {
    let set = canonical_normal_pair();
    let strategies = [
        Strategy::Specialize(0),
        Strategy::Specialize(1),
        Strategy::Alternate(vec![0, 1]),
        Strategy::LambdaFraction { lambda: 0.5, first: 0, second: 1 },
        Strategy::SignSwitch { arm_pos: 0, arm_neg: 1 },
    ];
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (si, s) in strategies.iter().enumerate() {
        for n in [100, 1_000, 10_000] {
            let cfg = SimulationConfig::new(n, 10_000, 1200 + si as u64 * 10 + n);
            let est = estimate_un_with(&set, s, &cfg, |t| t.scaled_deviation * t.scaled_deviation).unwrap();
            let slack = (est.mean - set.var_max) / est.std_error;
            worst = worst.max(slack);
            ok &= est.mean <= set.var_max + 3.0 * est.std_error;
        }
    }
    outcome(ok, format!("largest excess over var_max: {worst:.2} s.e."))
}

fn c13_perturbation_rate() -> Outcome {
    let set = ArmSet::from_pairs(&[(2.0, 0.0)]).unwrap();
    // Hölder-½ in y, so the perturbation cost is of order sqrt(epsilon)
    let u = UtilityIndex::custom("x - sqrt|y|", |x, y| x - y.abs().sqrt());
    let value = |eps: f64| {
        let cfg = SolverConfig::with_epsilon(eps);
        solve_hjb(&set, &u, &grid(&set, 200, &cfg), &cfg).unwrap().corner_value
    };
    let v: Vec<f64> = [0.2, 0.1, 0.05].into_iter().map(value).collect();
    let ratio = (v[0] - v[1]).abs() / (v[1] - v[2]).abs();
    outcome((1.2..=1.8).contains(&ratio), format!("V_eps {v:.5?}; ratio {ratio:.4}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("mean-variance exactness at every horizon", c1_mean_variance_every_horizon),
        ("semivariance single-arm limit", c2_semivariance_limit),
        ("shortfall single-arm limit", c3_shortfall_limit),
        ("sign switching beats specialization", c4_switching_beats_specialization),
        ("threshold chain", c5_threshold_chain),
        ("PDE vs Feynman-Kac oracle", c6_pde_matches_oracle),
        ("extreme-arm reduction and rectangle bound", c7_extreme_reduction),
        ("exact DP oracle", c8_exact_dp),
        ("high-mean low-variance arm", c9_low_variance_high_mean_arm),
        ("lambda-fraction optimality", c10_lambda_fraction),
        ("OBM density and simulation", c11_obm_suite),
        ("second-moment bound", c12_moment_bound),
        ("zero-variance perturbation rate", c13_perturbation_rate),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!result.pass);
        println!(
            "criterion {:>2} {tag} {name}: {} [{:.1}s]",
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/13 passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
