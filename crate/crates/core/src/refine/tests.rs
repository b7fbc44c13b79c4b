use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{self, HIGH, LOW};
use crate::game::{Cell, StateSpec, ValuePair};
use crate::mse::{one_shot_deviation_check, DeviationReport};

fn profile(leader: &[usize], follower: &[&[usize]]) -> StrategyProfile {
    StrategyProfile { leader: leader.to_vec(), follower: follower.iter().map(|f| f.to_vec()).collect() }
}

fn state(label: f64, n_effort: usize, cells: Vec<Cell>) -> StateSpec {
    StateSpec {
        label,
        leader_actions: vec![0.0],
        efforts: (0..n_effort).map(|e| e as f64).collect(),
        cells,
    }
}

/// State 0: the exploitee is indifferent between two efforts, the exploiter strictly
/// prefers effort 1; both lead to the absorbing state 1.
fn tie_model(d: f64) -> GameModel {
    let states = vec![
        state(0.0, 2, vec![Cell::point(1.0, 1.0, 1), Cell::point(2.0, 1.0, 1)]),
        state(1.0, 1, vec![Cell::point(1.0, 1.0, 1)]),
    ];
    GameModel::new(states, d, None, Some(0)).unwrap()
}

/// Two absorbing states with exploitee ties; the exploiter prefers effort 0 at state 0
/// and effort 1 at state 1.
fn split_model(d: f64) -> GameModel {
    let states = vec![
        state(0.0, 2, vec![Cell::point(2.0, 0.0, 0), Cell::point(1.0, 0.0, 0)]),
        state(1.0, 2, vec![Cell::point(1.0, 0.0, 1), Cell::point(2.0, 0.0, 1)]),
    ];
    GameModel::new(states, d, None, Some(0)).unwrap()
}

fn fake(k: usize, w_x: f64, w_e: f64) -> Equilibrium {
    Equilibrium {
        profile: profile(&[0], &[&[k]]),
        values: ValuePair { w_x: vec![w_x], w_e: vec![w_e] },
        report: DeviationReport { leader_gain: vec![0.0], follower_gain: vec![vec![0.0]], max_gain: 0.0 },
    }
}

fn fake_set(members: Vec<Equilibrium>) -> EquilibriumSet {
    EquilibriumSet::new(&fixtures::zero_game(1, 1, 8, 0.5), true, 1e-8, members)
}

#[test]
fn toy3_viability_of_profiles() {
    let m = fixtures::toy3(0.9);
    let v = fixtures::toy3_viability(&m);
    assert!(check_viability(&m, &StrategyProfile::constant(&m, LOW, 0), &v));
    assert!(!check_viability(&m, &StrategyProfile::constant(&m, HIGH, 0), &v));
    // H at 2 only: 2 -> 1, then L holds at 1
    assert!(check_viability(&m, &profile(&[0, LOW, HIGH], &[&[0], &[0, 0], &[0, 0]]), &v));
    // H at 1 with full effort stays at 1
    assert!(check_viability(&m, &profile(&[0, HIGH, HIGH], &[&[0], &[0, 1], &[0, 0]]), &v));
    assert!(check_viability(&m, &StrategyProfile::constant(&m, HIGH, 0), &ViabilitySet::all(3)));
}

#[test]
fn safe_action_certificate() {
    let m = fixtures::toy3(0.9);
    let v = fixtures::toy3_viability(&m);
    let p = StrategyProfile::constant(&m, LOW, 1);
    assert!(check_safe_action(&m, &v, &p.follower).unwrap());
    let bare = ViabilitySet::new(3, [1, 2]).unwrap();
    assert!(matches!(check_safe_action(&m, &bare, &p.follower), Err(Error::MissingSafeAction)));
    // H as "safe" action fails when the follower shirks at state 1
    let h = ViabilitySet::new(3, [1, 2]).unwrap().with_safe_actions(&m, [(1, HIGH), (2, HIGH)].into()).unwrap();
    assert!(!check_safe_action(&m, &h, &StrategyProfile::constant(&m, HIGH, 0).follower).unwrap());
}

#[test]
fn penalized_payoffs() {
    let m = fixtures::toy3(0.9);
    let v = fixtures::toy3_viability(&m);
    let pm = penalize(&m, &PenaltySpec { penalty: 100.0, viability: v.clone() }).unwrap();
    assert_eq!(pm.cell(1, HIGH, 0).payoff_x, -98.0);
    assert_eq!(pm.cell(2, HIGH, 0).payoff_x, 2.0);
    // the collapse state lies outside V and keeps exiting
    assert_eq!(pm.cell(0, 0, 0).payoff_x, -100.0);
    assert_eq!(pm.payoff_bound(), m.payoff_bound() + 100.0);
    for s in 0..3 {
        for x in 0..m.n_leader(s) {
            for e in 0..m.n_effort(s) {
                assert_eq!(pm.cell(s, x, e).payoff_e, m.cell(s, x, e).payoff_e);
                assert_eq!(pm.cell(s, x, e).next, m.cell(s, x, e).next);
            }
        }
    }
    assert_eq!(penalize(&m, &PenaltySpec { penalty: 0.0, viability: v.clone() }).unwrap(), m);
    assert!(penalize(&m, &PenaltySpec { penalty: -1.0, viability: v }).is_err());
}

#[test]
fn threshold_is_zero_without_exits() {
    let m = fixtures::toy3(0.1);
    let t = find_penalty_threshold(&m, &ViabilitySet::all(3), &ThresholdOptions::default()).unwrap();
    assert_eq!(t.threshold, 0.0);
    assert_eq!(t.analytic_bound, None);
}

#[test]
fn toy3_threshold() {
    let m = fixtures::toy3(0.1);
    let v = fixtures::toy3_viability(&m);
    let opts = ThresholdOptions { tol: 1e-6, ..Default::default() };
    let t = find_penalty_threshold(&m, &v, &opts).unwrap();
    assert!(t.threshold > 0.0 && t.threshold.is_finite());
    // 2 * 2 / ((1 - 0.1) * 1)
    let bound = t.analytic_bound.unwrap();
    assert!((bound - 4.0 / 0.9).abs() < 1e-12);
    assert!(t.threshold <= bound + 1e-9, "{t:?}");
    for k in [1.0, 2.0] {
        let pm = penalize(&m, &PenaltySpec { penalty: k * t.threshold, viability: v.clone() }).unwrap();
        let set = mse::enumerate_stationary_mpe(&pm, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
        assert!(set.profiles().all(|p| check_viability(&m, p, &v)));
    }
    let below = penalize(&m, &PenaltySpec { penalty: t.threshold - 1e-3, viability: v.clone() }).unwrap();
    let set = mse::enumerate_stationary_mpe(&below, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
    assert!(!set.profiles().all(|p| check_viability(&m, p, &v)));
}

#[test]
fn threshold_needs_certificate_and_cap() {
    let m = fixtures::toy3(0.1);
    let bare = ViabilitySet::new(3, [1, 2]).unwrap();
    assert!(matches!(
        find_penalty_threshold(&m, &bare, &ThresholdOptions::default()),
        Err(Error::MissingSafeAction)
    ));
    let v = fixtures::toy3_viability(&m);
    let capped = ThresholdOptions { m_cap: 0.5, ..Default::default() };
    assert!(matches!(find_penalty_threshold(&m, &v, &capped), Err(Error::NoThreshold { .. })));
}

#[test]
fn pareto_dominated_equilibrium_is_eliminated() {
    let m = tie_model(0.9);
    let v = ViabilitySet::all(2);
    let set = mse::enumerate_stationary_mpe(&m, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
    assert_eq!(set.len(), 2);
    for q in [RpQuantifier::SomeState, RpQuantifier::AllStates] {
        let out = renegotiation_proof_set(&set, &v, DEFAULT_COMPARE_TOL, q);
        assert_eq!(out.set.len(), 1);
        assert_eq!(out.set.members[0].profile.follower[0], vec![1]);
        assert_eq!(out.eliminations.len(), 1);
        let row = &out.eliminations[0];
        assert_eq!(row.eliminated.follower[0], vec![0]);
        assert_eq!(row.dominator.follower[0], vec![1]);
        assert_eq!(row.state, 0);
        assert!((row.margin - 1.0).abs() < 1e-9);
    }
}

#[test]
fn quantifier_readings_can_differ() {
    let m = split_model(0.5);
    let v = ViabilitySet::all(2);
    let set = mse::enumerate_stationary_mpe(&m, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
    assert_eq!(set.len(), 4);
    let full = renegotiation_proof_set(&set, &v, DEFAULT_COMPARE_TOL, RpQuantifier::SomeState);
    assert_eq!(full.set.len(), 1);
    assert_eq!(full.set.members[0].profile.follower, vec![vec![0], vec![1]]);

    let crossed = set.filter(|eq| eq.profile.follower[0] == eq.profile.follower[1]);
    assert_eq!(crossed.len(), 2);
    let some = renegotiation_proof_set(&crossed, &v, DEFAULT_COMPARE_TOL, RpQuantifier::SomeState);
    let all = renegotiation_proof_set(&crossed, &v, DEFAULT_COMPARE_TOL, RpQuantifier::AllStates);
    assert!(some.set.is_empty());
    assert_eq!(some.eliminations.len(), 2);
    assert_eq!(all.set.len(), 2);
}

#[test]
fn identical_values_are_both_kept() {
    let set = fake_set(vec![fake(0, 3.0, 1.0), fake(1, 3.0, 1.0)]);
    let out = renegotiation_proof_set(&set, &ViabilitySet::all(1), DEFAULT_COMPARE_TOL, RpQuantifier::SomeState);
    assert_eq!(out.set.len(), 2);
    assert!(out.eliminations.is_empty());
}

#[test]
fn selection_rules() {
    let t = DEFAULT_COMPARE_TOL;
    let single = fake_set(vec![fake(3, 1.0, 1.0)]);
    assert_eq!(select_see(&single, 0, t).unwrap().profile, profile(&[0], &[&[3]]));

    let set = fake_set(vec![fake(0, 5.0, 9.0), fake(1, 7.0, 0.0)]);
    assert_eq!(select_see(&set, 0, t).unwrap().values.w_x[0], 7.0);

    // near-tie in w_x goes to the higher w_e
    let set = fake_set(vec![fake(0, 7.0, 1.0), fake(1, 7.0 - 1e-12, 2.0)]);
    assert_eq!(select_see(&set, 0, t).unwrap().profile.follower[0], vec![1]);

    // full tie goes to the smaller profile
    let set = fake_set(vec![fake(4, 7.0, 2.0), fake(2, 7.0, 2.0)]);
    assert_eq!(select_see(&set, 0, t).unwrap().profile.follower[0], vec![2]);

    assert!(matches!(select_see(&fake_set(vec![]), 0, t), Err(Error::NoSelection(_))));
}

#[test]
fn ir_filter_boundaries() {
    let set = fake_set(vec![fake(0, 1.0, 1.0), fake(1, 1.0, 2.0), fake(2, 1.0, 1.0 - 1e-10)]);
    let v = ViabilitySet::all(1);
    let kept = ir_filter(&set, &OutsideOption(vec![1.0]), &v, DEFAULT_COMPARE_TOL);
    assert_eq!(kept.len(), 3);
    let kept = ir_filter(&set, &OutsideOption(vec![1.5]), &v, DEFAULT_COMPARE_TOL);
    assert_eq!(kept.len(), 1);
    assert!(ir_filter(&set, &OutsideOption(vec![5.0]), &v, DEFAULT_COMPARE_TOL).is_empty());
}

#[test]
fn toy3_pipeline_with_threshold_search() {
    let m = fixtures::toy3(0.1);
    let v = fixtures::toy3_viability(&m);
    let opts = PipelineOptions { penalty: PenaltyMode::Search { m_cap: 1e4, tol: 1e-6 }, ..Default::default() };
    let r = run_pipeline(&m, &v, &opts).unwrap();
    let sel = r.selected.clone().expect("a sustainable equilibrium exists");
    assert!(check_viability(&m, &sel.profile, &v));
    assert!(r.threshold.is_some() && r.penalty > 0.0);
    let pm = penalize(&m, &PenaltySpec { penalty: r.penalty, viability: v.clone() }).unwrap();
    assert!(one_shot_deviation_check(&pm, &sel.profile, 1e-10).unwrap().certified(DEFAULT_CERT_TOL));
    assert_eq!(r.safe_action_holds, Some(true));
    let cmp = r.route_comparison.as_ref().unwrap();
    assert!(cmp.unpenalized_viable.is_empty() && !cmp.agree);
    check_nesting(&r).unwrap();
}

#[test]
fn toy3_unpenalized_pipeline_is_empty() {
    let m = fixtures::toy3(0.5);
    let r = run_pipeline(&m, &fixtures::toy3_viability(&m), &PipelineOptions::default()).unwrap();
    assert_eq!(r.equilibria.len(), 2);
    assert!(r.viable.is_empty() && r.selected.is_none());
    assert!(r.notes.iter().any(|n| n.contains("no SEE")));
}

#[test]
fn trivial_viability_selects_the_equilibrium() {
    let m = fixtures::single_state(&[1.0, 3.0], 2, 0.9);
    let r = run_pipeline(&m, &ViabilitySet::all(1), &PipelineOptions::default()).unwrap();
    assert_eq!(r.equilibria.len(), r.renegotiation_proof.len());
    let sel = r.selected.unwrap();
    assert_eq!(sel.profile.leader, vec![1]);
    assert!(r.equilibria.contains(&sel.profile));
}

#[test]
fn nesting_violation_is_reported() {
    let m = tie_model(0.9);
    let mut r = run_pipeline(&m, &ViabilitySet::all(2), &PipelineOptions::default()).unwrap();
    r.selected = Some(r.eliminations[0].clone()).map(|e| Equilibrium {
        profile: e.eliminated,
        ..r.selected.clone().unwrap()
    });
    assert!(matches!(check_nesting(&r), Err(Error::Containment(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn penalty_above_bound_makes_every_equilibrium_viable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = fixtures::RandomSpec { max_states: 3, max_leader: 2, max_effort: 2, ..Default::default() };
        let (m, v) = fixtures::random_viability_model(&mut rng, &spec);
        let Some(bound) = analytic_penalty_bound(&m, &v) else { return Ok(()); };
        let pm = penalize(&m, &PenaltySpec { penalty: 1.01 * bound, viability: v.clone() }).unwrap();
        let set = mse::enumerate_stationary_mpe(&pm, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
        prop_assert!(set.profiles().all(|p| check_viability(&m, p, &v)));
    }

    #[test]
    fn threshold_search_certifies_its_answer(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = fixtures::RandomSpec { max_states: 3, max_leader: 2, max_effort: 2, ..Default::default() };
        let (m, v) = fixtures::random_viability_model(&mut rng, &spec);
        let t = find_penalty_threshold(&m, &v, &ThresholdOptions { tol: 1e-3, ..Default::default() }).unwrap();
        for k in [1.0, 2.0] {
            let pm = penalize(&m, &PenaltySpec { penalty: k * t.threshold, viability: v.clone() }).unwrap();
            let set = mse::enumerate_stationary_mpe(&pm, DEFAULT_CERT_TOL, DEFAULT_BUDGET).unwrap();
            prop_assert!(set.profiles().all(|p| check_viability(&m, p, &v)));
        }
    }

    #[test]
    fn penalty_leaves_follower_responses_alone(seed in any::<u64>(), pen in 0.0..50.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, v) = fixtures::random_viability_model(&mut rng, &fixtures::RandomSpec::default());
        let pm = penalize(&m, &PenaltySpec { penalty: pen, viability: v }).unwrap();
        let w_e: Vec<f64> = (0..m.n_states()).map(|s| s as f64 - 1.0).collect();
        for s in 0..m.n_states() {
            for x in 0..m.n_leader(s) {
                prop_assert_eq!(
                    mse::follower_best_response(&m, &w_e, s, x),
                    mse::follower_best_response(&pm, &w_e, s, x)
                );
            }
        }
    }

    #[test]
    fn refinement_is_idempotent_and_nested(seed in any::<u64>(), all_states in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = fixtures::RandomSpec { max_states: 3, max_leader: 2, max_effort: 2, ..Default::default() };
        let (m, v) = fixtures::random_viability_model(&mut rng, &spec);
        let q = if all_states { RpQuantifier::AllStates } else { RpQuantifier::SomeState };
        let opts = PipelineOptions { quantifier: q, ..Default::default() };
        let r = run_pipeline(&m, &v, &opts).unwrap();
        check_nesting(&r).unwrap();
        let again = renegotiation_proof_set(&r.renegotiation_proof, &v, DEFAULT_COMPARE_TOL, q);
        prop_assert_eq!(&again.set, &r.renegotiation_proof);
        prop_assert!(again.eliminations.is_empty());
        let again_viable = filter_viable(&m, &r.viable, &v);
        prop_assert_eq!(&again_viable, &r.viable);
    }

    #[test]
    fn selection_ignores_member_order(vals in prop::collection::vec((0..4u8, 0..3u8), 1..7), rot in 0usize..7) {
        let mut members: Vec<Equilibrium> =
            vals.iter().enumerate().map(|(k, &(a, b))| fake(k, a as f64, b as f64)).collect();
        let a = select_see(&fake_set(members.clone()), 0, DEFAULT_COMPARE_TOL).unwrap();
        let r = rot % members.len();
        members.rotate_left(r);
        members.reverse();
        let b = select_see(&fake_set(members), 0, DEFAULT_COMPARE_TOL).unwrap();
        prop_assert_eq!(a, b);
    }
}
