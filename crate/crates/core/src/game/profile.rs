use serde::{Deserialize, Serialize};

use super::model::GameModel;
use crate::error::{Error, Result};

/// A pure stationary profile: the leader's action index per state and the follower's
/// effort index for every `(state, leader action)` pair, including off-path actions.
///
/// The derived ordering is lexicographic over the leader vector and then the follower
/// table, which for profiles of one model is the lexicographic order of the flattened
/// action-index vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub leader: Vec<usize>,
    pub follower: Vec<Vec<usize>>,
}

impl StrategyProfile {
    /// The profile playing index 0 everywhere.
    pub fn zeros(model: &GameModel) -> Self {
        Self::constant(model, 0, 0)
    }

    /// Leader plays `x` and follower plays `e` wherever those indices exist, and
    /// index 0 elsewhere.
    pub fn constant(model: &GameModel, x: usize, e: usize) -> Self {
        let n = model.n_states();
        let leader = (0..n).map(|s| if x < model.n_leader(s) { x } else { 0 }).collect();
        let follower = (0..n)
            .map(|s| {
                let ne = model.n_effort(s);
                vec![if e < ne { e } else { 0 }; model.n_leader(s)]
            })
            .collect();
        Self { leader, follower }
    }

    pub fn validate(&self, model: &GameModel) -> Result<()> {
        let n = model.n_states();
        if self.leader.len() != n || self.follower.len() != n {
            return Err(Error::InvalidProfile(format!("profile must cover all {n} states")));
        }
        for s in 0..n {
            if self.leader[s] >= model.n_leader(s) {
                return Err(Error::InvalidProfile(format!(
                    "leader action {} out of range at state {s}",
                    self.leader[s]
                )));
            }
            if self.follower[s].len() != model.n_leader(s) {
                return Err(Error::InvalidProfile(format!(
                    "follower policy at state {s} must cover all {} leader actions",
                    model.n_leader(s)
                )));
            }
            if let Some(x) = self.follower[s].iter().position(|&e| e >= model.n_effort(s)) {
                return Err(Error::InvalidProfile(format!("effort index out of range at ({s},{x})")));
            }
        }
        Ok(())
    }

    /// On-path effort at `s`.
    #[inline]
    pub fn on_path_effort(&self, s: usize) -> usize {
        self.follower[s][self.leader[s]]
    }

    /// Flattened action-index vector (leader indices, then follower table row-major).
    pub fn action_vector(&self) -> Vec<usize> {
        self.leader.iter().chain(self.follower.iter().flatten()).copied().collect()
    }
}

/// Discounted values of both players per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePair {
    pub w_x: Vec<f64>,
    pub w_e: Vec<f64>,
}

impl ValuePair {
    pub fn zeros(n: usize) -> Self {
        Self { w_x: vec![0.0; n], w_e: vec![0.0; n] }
    }

    pub fn sup_distance(&self, other: &ValuePair) -> f64 {
        self.w_x
            .iter()
            .zip(&other.w_x)
            .chain(self.w_e.iter().zip(&other.w_e))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
