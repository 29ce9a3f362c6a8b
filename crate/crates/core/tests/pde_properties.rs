use bandit_core::arms::ArmSet;
use bandit_core::pde::{feynman_kac_value, solve_hjb, Grid, SolverConfig};
use bandit_core::utility::{Phi, UtilityIndex};

fn corner(set: &ArmSet, u: &UtilityIndex, grid: &Grid) -> f64 {
    solve_hjb(set, u, grid, &SolverConfig::default()).unwrap().corner_value
}

#[test]
fn larger_arm_set_never_lowers_the_value() {
    let small = ArmSet::from_pairs(&[(1.0, 4.0), (0.0, 1.0)]).unwrap();
    let big = ArmSet::from_pairs(&[(1.0, 4.0), (0.0, 1.0), (0.8, 1.5)]).unwrap();
    let grid = Grid::for_arms(&big, 81, 81, &SolverConfig::default()).unwrap();
    for u in [
        UtilityIndex::MeanSemivariance { alpha: 1.0 },
        UtilityIndex::MeanVariance { alpha: 0.5 },
        UtilityIndex::Blend { phi: Phi::NegExp, alpha: 0.4 },
    ] {
        let (vs, vb) = (corner(&small, &u, &grid), corner(&big, &u, &grid));
        assert!(vb >= vs, "{}: {vb} < {vs}", u.name());
    }
}

#[test]
fn scaling_the_utility_scales_the_value() {
    let set = ArmSet::from_pairs(&[(1.0, 4.0), (0.0, 1.0)]).unwrap();
    let grid = Grid::for_arms(&set, 81, 81, &SolverConfig::default()).unwrap();
    let base = UtilityIndex::MeanSemivariance { alpha: 1.0 };
    let v = corner(&set, &base, &grid);
    for lambda in [0.5, 2.0] {
        let b = base.clone();
        let scaled = UtilityIndex::custom("scaled semivariance", move |x, y| lambda * b.eval(x, y));
        let vl = corner(&set, &scaled, &grid);
        assert!((vl - lambda * v).abs() <= 1e-12 * v.abs().max(1.0), "lambda={lambda}: {vl} vs {}", lambda * v);
    }
}

#[test]
fn reward_dominant_arm_is_followed_under_constant_ratio() {
    // alpha solving alpha² / (2 (1 - alpha)) = 1/2
    let alpha = 0.5 * (5f64.sqrt() - 1.0);
    let u = UtilityIndex::Blend { phi: Phi::NegExp, alpha };
    assert!((u.risk_ratio_range().unwrap().sup - 0.5).abs() < 1e-15);
    let set = ArmSet::from_pairs(&[(1.0, 2.0), (0.0, 1.0)]).unwrap();
    let cfg = SolverConfig::default();
    let grid = Grid::for_arms(&set, 200, 200, &cfg).unwrap();
    let v = solve_hjb(&set, &u, &grid, &cfg).unwrap().corner_value;
    let arm1 = feynman_kac_value(1.0, 2.0, &u, 64).unwrap();
    assert!((v - arm1).abs() <= 1e-2, "{v} vs {arm1}");
}

#[test]
fn dt_respects_the_stability_bound() {
    let set = ArmSet::from_pairs(&[(3.0, 9.0), (-2.0, 0.5)]).unwrap();
    let cfg = SolverConfig::default();
    let g = Grid::for_arms(&set, 120, 90, &cfg).unwrap();
    let bound = cfg.stability_factor * (g.dy() * g.dy() / set.var_max).min(g.dx() / 3.0);
    assert!(g.dt() <= bound * (1.0 + 1e-12));
}
