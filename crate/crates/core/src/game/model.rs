use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Outcome of one `(state, leader action, effort)` triple: both stage payoffs and the
/// finite-support distribution of the next state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub payoff_x: f64,
    pub payoff_e: f64,
    /// `(next state index, mass)` pairs.
    pub next: Vec<(usize, f64)>,
}

impl Cell {
    pub fn new(payoff_x: f64, payoff_e: f64, next: Vec<(usize, f64)>) -> Self {
        Self { payoff_x, payoff_e, next }
    }

    /// A deterministic transition to `to`.
    pub fn point(payoff_x: f64, payoff_e: f64, to: usize) -> Self {
        Self::new(payoff_x, payoff_e, vec![(to, 1.0)])
    }

    /// Expected value of `values` at the next state.
    #[inline]
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.next.iter().map(|&(t, p)| p * values[t]).sum()
    }

    /// Probability mass of next states for which `pred` is false.
    pub fn mass_outside(&self, inside: impl Fn(usize) -> bool) -> f64 {
        self.next.iter().filter(|&&(t, _)| !inside(t)).map(|&(_, p)| p).sum()
    }
}

/// Per-state primitives: the state label, the feasible leader actions `X(s)`, the
/// feasible efforts `E(s)` and a dense `|X(s)| x |E(s)|` table of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub label: f64,
    pub leader_actions: Vec<f64>,
    pub efforts: Vec<f64>,
    /// Row-major over `(leader action, effort)`.
    pub cells: Vec<Cell>,
}

impl StateSpec {
    #[inline]
    pub fn cell(&self, x: usize, e: usize) -> &Cell {
        &self.cells[x * self.efforts.len() + e]
    }
}

/// A finite exploiter/exploitee game: states, per-state action and effort sets,
/// transition kernel, stage payoffs and the common discount factor.
///
/// Construction checks structure only (shapes, index ranges, discount). Numeric
/// invariants such as kernel normalization are reported by
/// [`validate_model`](crate::game::validate_model) so that a faulty model can still be
/// inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameModel {
    states: Vec<StateSpec>,
    discount: f64,
    payoff_bound: f64,
    initial_state: usize,
}

impl GameModel {
    /// Builds a model. `payoff_bound` defaults to the largest absolute stage payoff;
    /// `initial_state` defaults to 0.
    pub fn new(
        states: Vec<StateSpec>,
        discount: f64,
        payoff_bound: Option<f64>,
        initial_state: Option<usize>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        // 0 is admitted as the myopic limit.
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!("discount {discount} not in [0, 1)")));
        }
        let n = states.len();
        for (s, st) in states.iter().enumerate() {
            if st.leader_actions.is_empty() {
                return Err(Error::InvalidModel(format!("state {s}: empty leader action set")));
            }
            if st.efforts.is_empty() {
                return Err(Error::InvalidModel(format!("state {s}: empty effort set")));
            }
            let want = st.leader_actions.len() * st.efforts.len();
            if st.cells.len() != want {
                return Err(Error::InvalidModel(format!(
                    "state {s}: expected {want} outcome cells, found {}",
                    st.cells.len()
                )));
            }
            for (i, c) in st.cells.iter().enumerate() {
                let (x, e) = (i / st.efforts.len(), i % st.efforts.len());
                if c.next.is_empty() {
                    return Err(Error::InvalidModel(format!("kernel row ({s},{x},{e}) is empty")));
                }
                if let Some(&(t, _)) = c.next.iter().find(|&&(t, _)| t >= n) {
                    return Err(Error::InvalidModel(format!(
                        "kernel row ({s},{x},{e}) points to state {t} but the model has {n} states"
                    )));
                }
                if !(c.payoff_x.is_finite() && c.payoff_e.is_finite())
                    || c.next.iter().any(|&(_, p)| !p.is_finite())
                {
                    return Err(Error::InvalidModel(format!("non-finite entry at ({s},{x},{e})")));
                }
            }
        }
        let max_abs = states
            .iter()
            .flat_map(|st| st.cells.iter())
            .map(|c| c.payoff_x.abs().max(c.payoff_e.abs()))
            .fold(0.0_f64, f64::max);
        let payoff_bound = payoff_bound.unwrap_or(max_abs);
        if !payoff_bound.is_finite() || payoff_bound < 0.0 {
            return Err(Error::InvalidModel(format!("payoff_bound {payoff_bound} must be finite and >= 0")));
        }
        let initial_state = initial_state.unwrap_or(0);
        if initial_state >= n {
            return Err(Error::InvalidModel(format!("initial_state {initial_state} out of range")));
        }
        Ok(Self { states, discount, payoff_bound, initial_state })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn state(&self, s: usize) -> &StateSpec {
        &self.states[s]
    }

    pub fn states(&self) -> &[StateSpec] {
        &self.states
    }

    #[inline]
    pub fn n_leader(&self, s: usize) -> usize {
        self.states[s].leader_actions.len()
    }

    #[inline]
    pub fn n_effort(&self, s: usize) -> usize {
        self.states[s].efforts.len()
    }

    #[inline]
    pub fn cell(&self, s: usize, x: usize, e: usize) -> &Cell {
        self.states[s].cell(x, e)
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn payoff_bound(&self) -> f64 {
        self.payoff_bound
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn label(&self, s: usize) -> f64 {
        self.states[s].label
    }

    /// Same primitives under another discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(self.states.clone(), discount, Some(self.payoff_bound), Some(self.initial_state))
    }

    /// Rebuilds the model with every cell transformed by `f(s, x, e, cell)`.
    pub fn map_cells(
        &self,
        payoff_bound: Option<f64>,
        mut f: impl FnMut(usize, usize, usize, &Cell) -> Cell,
    ) -> Result<Self> {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(s, st)| {
                let ne = st.efforts.len();
                let cells = st.cells.iter().enumerate().map(|(i, c)| f(s, i / ne, i % ne, c)).collect();
                StateSpec { cells, ..st.clone() }
            })
            .collect();
        Self::new(states, self.discount, payoff_bound, Some(self.initial_state))
    }

    /// Number of pure stationary profiles: `prod_s |X(s)| * prod_{s,x} |E(s)|`.
    /// Returned as `f64` since it overflows integers quickly.
    pub fn profile_space_size(&self) -> f64 {
        self.states
            .iter()
            .map(|st| {
                let nx = st.leader_actions.len() as f64;
                nx * (st.efforts.len() as f64).powf(nx)
            })
            .product()
    }

    /// Whether every kernel row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.states.iter().flat_map(|st| &st.cells).all(|c| c.next.len() == 1)
    }

    /// SHA-256 over a canonical binary encoding of all primitives.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let f = |h: &mut Sha256, v: f64| h.update(v.to_bits().to_le_bytes());
        let u = |h: &mut Sha256, v: usize| h.update((v as u64).to_le_bytes());
        u(&mut h, self.states.len());
        f(&mut h, self.discount);
        f(&mut h, self.payoff_bound);
        u(&mut h, self.initial_state);
        for st in &self.states {
            f(&mut h, st.label);
            u(&mut h, st.leader_actions.len());
            st.leader_actions.iter().for_each(|&a| f(&mut h, a));
            u(&mut h, st.efforts.len());
            st.efforts.iter().for_each(|&a| f(&mut h, a));
            for c in &st.cells {
                f(&mut h, c.payoff_x);
                f(&mut h, c.payoff_e);
                u(&mut h, c.next.len());
                for &(t, p) in &c.next {
                    u(&mut h, t);
                    f(&mut h, p);
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// A subset `V` of the states, optionally carrying a safe leader action per member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViabilitySet {
    members: Vec<bool>,
    safe_action: Option<BTreeMap<usize, usize>>,
}

impl ViabilitySet {
    pub fn new(n_states: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; n_states];
        for s in members {
            if s >= n_states {
                return Err(Error::InvalidModel(format!("viability member {s} out of range")));
            }
            mask[s] = true;
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::InvalidModel("viability set is empty".into()));
        }
        Ok(Self { members: mask, safe_action: None })
    }

    /// `V = S`.
    pub fn all(n_states: usize) -> Self {
        Self { members: vec![true; n_states], safe_action: None }
    }

    /// Attaches the safe-action certificate; every member needs an entry.
    pub fn with_safe_actions(mut self, model: &GameModel, safe: BTreeMap<usize, usize>) -> Result<Self> {
        for s in self.members() {
            match safe.get(&s) {
                None => return Err(Error::InvalidModel(format!("no safe action for member state {s}"))),
                Some(&x) if x >= model.n_leader(s) => {
                    return Err(Error::InvalidModel(format!("safe action {x} out of range at state {s}")))
                }
                _ => {}
            }
        }
        if let Some(&s) = safe.keys().find(|&&s| !self.contains(s)) {
            return Err(Error::InvalidModel(format!("safe action given for non-member state {s}")));
        }
        self.safe_action = Some(safe);
        Ok(self)
    }

    #[inline]
    pub fn contains(&self, s: usize) -> bool {
        self.members.get(s).copied().unwrap_or(false)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(s, _)| s)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_states(&self) -> usize {
        self.members.len()
    }

    pub fn is_everything(&self) -> bool {
        self.members.iter().all(|&b| b)
    }

    pub fn safe_action(&self) -> Option<&BTreeMap<usize, usize>> {
        self.safe_action.as_ref()
    }
}
