use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::game::{Cell, GameModel, StateSpec, StrategyProfile};

fn assert_close(a: f64, b: f64, eps: f64) {
    assert!((a - b).abs() <= eps, "{a} vs {b}");
}

fn quadratic_map(lo: f64, hi: f64, n: usize, w: impl Fn(f64) -> f64) -> ValueMap {
    let step = (hi - lo) / (n - 1) as f64;
    ValueMap::new(lo, step, (0..n).map(|i| w(lo + i as f64 * step)).collect()).unwrap()
}

/// Wide effort range, unit curvature: interior follower responses against
/// `W(s) = -(s - 3)^2`.
fn wide() -> HcParams {
    let mut p = HcParams::default();
    p.discount = 0.5;
    p.phi.gamma = 1.0;
    p.grid.e = GridSpec::new(0.0, 1.0, 21);
    p
}

fn peaked() -> ValueMap {
    quadratic_map(0.0, 4.0, 81, |s| -(s - 3.0) * (s - 3.0))
}

/// Closed-form follower response against `peaked()`:
/// `e = 2 delta a (3 - s0) / (gamma + 2 delta a^2)` with `s0 = f(s, 0) - h(x)`.
fn closed_form_effort(p: &HcParams, s: f64, x: f64) -> f64 {
    let s0 = p.next_state(s, x, 0.0);
    let a = p.f_e();
    2.0 * p.discount * a * (3.0 - s0) / (p.phi.gamma + 2.0 * p.discount * a * a)
}

#[test]
fn defaults_pass_the_shape_check() {
    HcParams::default().shape_check().unwrap();
}

#[test]
fn shape_check_names_the_failing_property() {
    let mut p = HcParams::default();
    p.pi.alpha = -1.0;
    match p.shape_check() {
        Err(Error::Shape { property, points }) => {
            assert!(property.contains("pi"));
            assert!(!points.is_empty());
        }
        other => panic!("{other:?}"),
    }
    let mut p = HcParams::default();
    p.phi.phi1 = 0.2;
    assert!(matches!(p.shape_check(), Err(Error::Shape { property, .. }) if property.contains("phi'(0)")));
    let mut p = HcParams::default();
    p.f.c = 2.0;
    assert!(matches!(p.shape_check(), Err(Error::Shape { property, .. }) if property == "f increasing in s"));
    let mut p = HcParams::default();
    p.discount = 1.0;
    assert!(matches!(p.shape_check(), Err(Error::InvalidArgument(_))));
}

#[test]
fn myopic_follower_residual_is_minus_effort() {
    let mut p = wide();
    p.discount = 0.0;
    let w = peaked();
    for e in [0.05, 0.3, 0.8] {
        assert_close(follower_foc_residual(&p, &w, 1.2, 0.1, e).unwrap(), -e, 1e-14);
    }
    // the only root is the grid boundary, where no interior condition applies
    assert!(matches!(follower_foc_residual(&p, &w, 1.2, 0.1, 0.0), Err(Error::Boundary(_))));
    assert!(matches!(follower_foc_residual(&p, &w, 1.2, 0.1, 1.0), Err(Error::Boundary(_))));
}

#[test]
fn flat_continuation_leaves_only_the_effort_cost() {
    let p = HcParams::default();
    let w = quadratic_map(0.0, 2.0, 41, |_| 3.0);
    for e in [0.001, 0.004, 0.009] {
        assert_close(follower_foc_residual(&p, &w, 1.0, 0.2, e).unwrap(), -p.phi_e(e), 1e-12);
    }
    let lf = leader_foc_residual(&p, &w, &w, 1.5, 0.3, 0.0).unwrap();
    assert_close(lf.residual, p.pi_x(0.3), 1e-12);
    assert!(lf.residual > 0.0);
}

#[test]
fn follower_optimum_matches_the_closed_form() {
    let p = wide();
    let w = peaked();
    for (s, x) in [(1.0, 0.1), (1.5, 0.3), (1.8, 0.6)] {
        let o = follower_optimum(&p, &w, s, x);
        assert!(o.interior);
        assert!(o.soc < 0.0);
        assert_close(o.effort, closed_form_effort(&p, s, x), 1e-9);
        assert!(follower_foc_residual(&p, &w, s, x, o.effort).unwrap().abs() < 1e-9);
    }
}

#[test]
fn grid_effort_residual_is_of_the_order_of_the_step() {
    let w = peaked();
    for n in [11, 21, 41, 81] {
        let mut p = wide();
        p.grid.e.n = n;
        let (j, e) = grid_effort_optimum(&p, &w, 1.5, 0.3);
        assert!(j > 0 && j + 1 < n);
        let r = follower_foc_residual(&p, &w, 1.5, 0.3, e).unwrap().abs();
        // |G_e| <= 1.25 on this instance, and the grid optimum is within half a step
        assert!(r <= 1.25 * 0.5 * p.grid.e.step() + 1e-12, "n={n} r={r}");
    }
}

#[test]
fn ift_sensitivity_matches_the_closed_form() {
    let p = wide();
    let w = peaked();
    let a = p.f_e();
    let want = 2.0 * p.discount * a * p.h_x() / (p.phi.gamma + 2.0 * p.discount * a * a);
    let sens = effort_sensitivity(&p, &w, 1.5, 0.3).unwrap();
    assert!(!sens.degenerate);
    assert_close(sens.ift, want, 1e-9);
    assert_close(sens.finite_difference, want, 1e-6);
    assert_close(sens.finite_difference_half, want, 1e-6);
}

#[test]
fn corner_response_has_no_sensitivity() {
    let p = HcParams::default();
    // decreasing continuation value: no reason to exert effort
    let w = quadratic_map(0.0, 2.0, 41, |s| -s);
    let o = follower_optimum(&p, &w, 1.0, 0.2);
    assert!(!o.interior);
    assert_eq!(o.effort, 0.0);
    assert!(matches!(effort_sensitivity(&p, &w, 1.0, 0.2), Err(Error::Boundary(_))));
}

fn chain(next: &[usize]) -> GameModel {
    let states = next
        .iter()
        .enumerate()
        .map(|(i, &to)| StateSpec {
            label: i as f64,
            leader_actions: vec![0.0],
            efforts: vec![0.0],
            cells: vec![Cell::point(0.0, 0.0, to)],
        })
        .collect();
    GameModel::new(states, 0.5, None, None).unwrap()
}

#[test]
fn steady_state_search_finds_fixed_points_and_cycles() {
    let m = chain(&[1, 2, 2]);
    let ss = find_steady_state(&m, &StrategyProfile::zeros(&m), 0).unwrap();
    assert_eq!(ss, SteadyState::Fixed { state: 2, steps: 2 });
    let m = chain(&[1, 2, 3, 1]);
    let ss = find_steady_state(&m, &StrategyProfile::zeros(&m), 0).unwrap();
    assert_eq!(ss, SteadyState::Cycle { states: vec![1, 2, 3] });
    assert_eq!(ss.representative(), 1);
    assert!(find_steady_state(&m, &StrategyProfile::zeros(&m), 9).is_err());
}

#[test]
fn grid_model_has_absorbing_collapse_states() {
    let p = HcParams::default().with_grid(21, 11, 5);
    let (m, v) = build_hc_model(&p).unwrap();
    assert_eq!(m.n_states(), 21);
    assert_eq!(m.initial_state(), 20);
    let first = p.grid.s.first_at_least(p.s_min).unwrap();
    assert_eq!(v.members().collect::<Vec<_>>(), (first..21).collect::<Vec<_>>());
    for s in 0..first {
        assert_eq!((m.n_leader(s), m.n_effort(s)), (1, 1));
        assert_eq!(m.cell(s, 0, 0).next, vec![(s, 1.0)]);
    }
    for s in first..21 {
        let sv = p.grid.s.point(s);
        for x in 0..m.n_leader(s) {
            assert!(p.h(p.grid.x.point(x)) <= p.f(sv, p.grid.e.hi) - p.s_min + 1e-12 || x == 0);
            for e in 0..m.n_effort(s) {
                let cell = m.cell(s, x, e);
                let xr = realized_extraction(&p, sv, p.grid.x.point(x), p.grid.e.point(e));
                let want = p.grid.s.nearest(p.next_state(sv, xr, p.grid.e.point(e)));
                assert_eq!(cell.next, vec![(want, 1.0)]);
            }
        }
    }
}

#[test]
fn default_family_has_interior_grid_optima_and_a_boundary_steady_state() {
    let sol = solve_hc(&HcParams::default().with_grid(51, 11, 11)).unwrap();
    let r = grid_foc_residuals(&sol);
    assert!(r.follower_points > 0 && r.leader_points > 0);
    let rep = classify_regime(&sol).unwrap();
    assert_eq!(rep.regime, Regime::Boundary);
    assert!(rep.multiplier >= 0.0);
    assert!(rep.slackness_residual.abs() <= 1e-8);
}

#[test]
fn without_drain_the_steady_state_is_interior() {
    let mut p = HcParams::default().with_grid(31, 11, 5);
    p.h.lambda = 0.0;
    let sol = solve_hc(&p).unwrap();
    let rep = classify_regime(&sol).unwrap();
    assert_eq!(rep.regime, Regime::Interior);
    assert_eq!(rep.multiplier, 0.0);
    assert_eq!(rep.slackness_residual, 0.0);
    assert!(rep.unconstrained_steady_state > p.s_min);
}

#[test]
fn impatient_hegemon_with_steep_benefit_sits_on_the_floor() {
    let mut p = HcParams::default().with_grid(51, 26, 11);
    p.discount = 0.01;
    p.pi.alpha = 50.0;
    let sol = solve_hc(&p).unwrap();
    let rep = classify_regime(&sol).unwrap();
    assert_eq!(rep.regime, Regime::Boundary);
    assert!((rep.grid.state - p.s_min).abs() <= p.grid.s.step() + 1e-12);
    assert!(rep.boundary_formula_gap.unwrap() <= p.grid.x.step() + 1e-12);
    assert!(rep.multiplier > 0.0);
    assert!(rep.slackness_residual.abs() <= 1e-8);
    // h(x*) = f(s_min, e*) - s_min
    let e = follower_optimum(&p, &sol.w_c, p.s_min, rep.extraction).effort;
    assert_close(p.h(rep.extraction), p.f(p.s_min, e) - p.s_min, 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn follower_optimum_never_loses_to_the_grid(s in 0.8f64..2.0, x in 0.0f64..0.8, gamma in 0.5f64..4.0) {
        let mut p = wide();
        p.phi.gamma = gamma;
        let w = peaked();
        let obj = |e: f64| -p.phi(e) + p.discount * w.value(p.next_state(s, x, e));
        let o = follower_optimum(&p, &w, s, x);
        let best_grid = p.grid.e.points().into_iter().map(obj).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(obj(o.effort) >= best_grid - 1e-12);
    }

    #[test]
    fn multiplier_solves_the_leader_condition(s in 0.9f64..1.9, x in 0.05f64..0.5) {
        let p = wide();
        let w = peaked();
        if let Ok(mu) = leader_multiplier(&p, &w, &w, s, x) {
            let lf = leader_foc_residual(&p, &w, &w, s, x, mu).unwrap();
            prop_assert!(lf.residual.abs() <= 1e-9 * (1.0 + mu.abs()));
        }
    }
}
