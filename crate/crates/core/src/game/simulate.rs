use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::GameModel;
use super::profile::StrategyProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub leader_action: usize,
    pub effort: usize,
    pub payoff_x: f64,
    pub payoff_e: f64,
}

/// Plays `profile` for `horizon` periods from `start`. Point-mass rows never touch the
/// generator, so deterministic models give the same path for every seed.
pub fn simulate_trajectory(
    model: &GameModel,
    profile: &StrategyProfile,
    start: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Step>> {
    profile.validate(model)?;
    if start >= model.n_states() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = start;
    let mut path = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = profile.leader[s];
        let e = profile.follower[s][x];
        let c = model.cell(s, x, e);
        path.push(Step { state: s, leader_action: x, effort: e, payoff_x: c.payoff_x, payoff_e: c.payoff_e });
        s = match c.next.as_slice() {
            [(t, _)] => *t,
            rows => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = rows[rows.len() - 1].0;
                for &(t, p) in rows {
                    acc += p;
                    if u < acc {
                        pick = t;
                        break;
                    }
                }
                pick
            }
        };
    }
    Ok(path)
}
