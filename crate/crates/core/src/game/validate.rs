use serde::{Deserialize, Serialize};

use super::eval::KERNEL_TOL;
use super::model::GameModel;

/// One invariant and the `(state, leader action, effort)` triples that violate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Warnings do not make the report fail.
    pub warning_only: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub state: usize,
    pub leader_action: usize,
    pub effort: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// True when every non-warning check passed.
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.warning_only)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && c.warning_only)
    }
}

pub const CHECK_NORMALIZATION: &str = "kernel_normalization";
pub const CHECK_NONNEGATIVE: &str = "kernel_nonnegative";
pub const CHECK_PAYOFF_BOUND: &str = "payoff_bound";
pub const CHECK_DISCOUNT: &str = "discount_open_interval";
pub const CHECK_MONOTONE: &str = "leader_payoff_monotone";

/// Checks the numeric invariants of a model. Leader-payoff monotonicity in the action
/// order is reported as a warning, or skipped when `relax_monotonicity` is set.
pub fn validate_model(model: &GameModel, relax_monotonicity: bool) -> ValidationReport {
    let mut norm = Vec::new();
    let mut nonneg = Vec::new();
    let mut bound = Vec::new();
    let mut mono = Vec::new();
    let ub = model.payoff_bound();
    for s in 0..model.n_states() {
        let st = model.state(s);
        for x in 0..st.leader_actions.len() {
            for e in 0..st.efforts.len() {
                let c = st.cell(x, e);
                let total: f64 = c.next.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > KERNEL_TOL {
                    norm.push(Violation {
                        state: s,
                        leader_action: x,
                        effort: e,
                        detail: format!("kernel row sums to {total}"),
                    });
                }
                if let Some(&(t, p)) = c.next.iter().find(|&&(_, p)| p < 0.0) {
                    nonneg.push(Violation {
                        state: s,
                        leader_action: x,
                        effort: e,
                        detail: format!("negative mass {p} on state {t}"),
                    });
                }
                let big = c.payoff_x.abs().max(c.payoff_e.abs());
                if big > ub {
                    bound.push(Violation {
                        state: s,
                        leader_action: x,
                        effort: e,
                        detail: format!("|payoff| = {big} exceeds payoff_bound {ub}"),
                    });
                }
                if x + 1 < st.leader_actions.len() {
                    let next = st.cell(x + 1, e).payoff_x;
                    if next < c.payoff_x {
                        mono.push(Violation {
                            state: s,
                            leader_action: x,
                            effort: e,
                            detail: format!("u^X drops from {} to {} at the next action", c.payoff_x, next),
                        });
                    }
                }
            }
        }
    }
    let d = model.discount();
    let mut checks = vec![
        mk(CHECK_NORMALIZATION, norm, false),
        mk(CHECK_NONNEGATIVE, nonneg, false),
        mk(CHECK_PAYOFF_BOUND, bound, false),
        Check {
            name: CHECK_DISCOUNT.into(),
            passed: d > 0.0 && d < 1.0,
            warning_only: true,
            violations: Vec::new(),
        },
    ];
    if !relax_monotonicity {
        checks.push(mk(CHECK_MONOTONE, mono, true));
    }
    ValidationReport { checks }
}

fn mk(name: &str, violations: Vec<Violation>, warning_only: bool) -> Check {
    Check { name: name.into(), passed: violations.is_empty(), warning_only, violations }
}
