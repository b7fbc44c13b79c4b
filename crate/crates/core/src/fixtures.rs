//! Small reference models used by the tests, the CLI presets and the FFI.

use std::collections::BTreeMap;

use rand::Rng;

use crate::game::{Cell, GameModel, StateSpec, ViabilitySet};

/// Leader action indices in [`toy3`].
pub const LOW: usize = 0;
pub const HIGH: usize = 1;

/// Three-state exploitation game.
///
/// State 0 is an absorbing collapse state with a single null action and zero payoffs.
/// At `s in {1, 2}` the leader picks `L` (index 0) or `H` (index 1) and the follower
/// picks effort 0 or 1:
///
/// | (x, e) | next state      |
/// |--------|-----------------|
/// | (L, 0) | s               |
/// | (L, 1) | min(s + 1, 2)   |
/// | (H, 0) | s - 1           |
/// | (H, 1) | s               |
///
/// with `u^X = 2` under `H` and `1` under `L`, and `u^E = s - [x = H] - 0.5 e`.
/// The initial state is 2.
pub fn toy3(discount: f64) -> GameModel {
    let mut states = vec![StateSpec {
        label: 0.0,
        leader_actions: vec![0.0],
        efforts: vec![0.0],
        cells: vec![Cell::point(0.0, 0.0, 0)],
    }];
    for s in 1..=2usize {
        let mut cells = Vec::with_capacity(4);
        for x in [LOW, HIGH] {
            for e in 0..2usize {
                let next = match (x, e) {
                    (LOW, 0) => s,
                    (LOW, _) => (s + 1).min(2),
                    (_, 0) => s - 1,
                    _ => s,
                };
                let ux = if x == HIGH { 2.0 } else { 1.0 };
                let ue = s as f64 - if x == HIGH { 1.0 } else { 0.0 } - 0.5 * e as f64;
                cells.push(Cell::point(ux, ue, next));
            }
        }
        states.push(StateSpec {
            label: s as f64,
            leader_actions: vec![0.0, 1.0],
            efforts: vec![0.0, 1.0],
            cells,
        });
    }
    GameModel::new(states, discount, None, Some(2)).expect("toy3 is well formed")
}

/// `V = {1, 2}` with `L` as the safe action.
pub fn toy3_viability(model: &GameModel) -> ViabilitySet {
    ViabilitySet::new(model.n_states(), [1, 2])
        .and_then(|v| v.with_safe_actions(model, BTreeMap::from([(1, LOW), (2, LOW)])))
        .expect("toy3 viability is well formed")
}

/// `n` self-looping states with the given action counts and all payoffs zero.
pub fn zero_game(n: usize, n_leader: usize, n_effort: usize, discount: f64) -> GameModel {
    let states = (0..n)
        .map(|s| StateSpec {
            label: s as f64,
            leader_actions: (0..n_leader).map(|a| a as f64).collect(),
            efforts: (0..n_effort).map(|a| a as f64).collect(),
            cells: vec![Cell::point(0.0, 0.0, s); n_leader * n_effort],
        })
        .collect();
    GameModel::new(states, discount, None, None).expect("zero game is well formed")
}

/// One absorbing state; the leader's stage payoff is `payoffs[x]` for every effort and
/// the follower's is zero.
pub fn single_state(payoffs: &[f64], n_effort: usize, discount: f64) -> GameModel {
    let cells = payoffs
        .iter()
        .flat_map(|&u| std::iter::repeat(Cell::point(u, 0.0, 0)).take(n_effort))
        .collect();
    let st = StateSpec {
        label: 0.0,
        leader_actions: (0..payoffs.len()).map(|a| a as f64).collect(),
        efforts: (0..n_effort).map(|a| a as f64).collect(),
        cells,
    };
    GameModel::new(vec![st], discount, None, None).expect("single-state game is well formed")
}

/// Two states, one action each, moving to either state with probability 1/2.
pub fn symmetric_two_state(discount: f64) -> GameModel {
    let states = (0..2)
        .map(|s| StateSpec {
            label: s as f64,
            leader_actions: vec![0.0],
            efforts: vec![0.0],
            cells: vec![Cell::new(s as f64, 1.0 - s as f64, vec![(0, 0.5), (1, 0.5)])],
        })
        .collect();
    GameModel::new(states, discount, None, None).expect("two-state chain is well formed")
}

/// Bounds for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub max_states: usize,
    pub max_leader: usize,
    pub max_effort: usize,
    pub max_support: usize,
    pub discount: (f64, f64),
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { max_states: 4, max_leader: 3, max_effort: 3, max_support: 3, discount: (0.5, 0.95) }
    }
}

/// Random model with payoffs in `[-1, 1]` and random finite-support kernels.
pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> GameModel {
    let n = rng.gen_range(2..=spec.max_states.max(2));
    let states = (0..n)
        .map(|s| {
            let nx = rng.gen_range(1..=spec.max_leader);
            let ne = rng.gen_range(1..=spec.max_effort);
            let cells = (0..nx * ne)
                .map(|_| {
                    let k = rng.gen_range(1..=spec.max_support.min(n));
                    let mut targets: Vec<usize> = (0..n).collect();
                    for i in 0..k {
                        let j = rng.gen_range(i..n);
                        targets.swap(i, j);
                    }
                    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    let mut next: Vec<(usize, f64)> =
                        targets[..k].iter().zip(&raw).map(|(&t, &w)| (t, w / total)).collect();
                    next.sort_by_key(|&(t, _)| t);
                    Cell::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), next)
                })
                .collect();
            StateSpec {
                label: s as f64,
                leader_actions: (0..nx).map(|a| a as f64).collect(),
                efforts: (0..ne).map(|a| a as f64).collect(),
                cells,
            }
        })
        .collect();
    let discount = rng.gen_range(spec.discount.0..spec.discount.1);
    GameModel::new(states, discount, None, None).expect("random model is well formed")
}

/// Random model whose state 0 is an absorbing zero-payoff collapse state, with
/// `V = {1, .., n-1}` and leader action 0 as the safe action: its kernels never reach
/// state 0, whatever the effort.
pub fn random_viability_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> (GameModel, ViabilitySet) {
    let base = random_model(rng, spec);
    let model = base
        .map_cells(None, |s, x, _, c| {
            if s == 0 {
                return Cell::point(0.0, 0.0, 0);
            }
            if x != 0 {
                return c.clone();
            }
            let kept: Vec<(usize, f64)> = c.next.iter().copied().filter(|&(t, _)| t != 0).collect();
            let total: f64 = kept.iter().map(|&(_, p)| p).sum();
            if kept.is_empty() {
                Cell::point(c.payoff_x, c.payoff_e, s)
            } else {
                Cell::new(c.payoff_x, c.payoff_e, kept.into_iter().map(|(t, p)| (t, p / total)).collect())
            }
        })
        .expect("random viability model is well formed");
    let n = model.n_states();
    let v = ViabilitySet::new(n, 1..n)
        .and_then(|v| v.with_safe_actions(&model, (1..n).map(|s| (s, 0)).collect()))
        .expect("random viability set is well formed");
    (model, v)
}
