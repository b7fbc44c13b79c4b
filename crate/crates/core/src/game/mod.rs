//! Game primitives on finite grids: the model, strategy profiles, policy evaluation
//! and trajectory simulation.

mod eval;
mod model;
mod profile;
mod simulate;
mod validate;

pub use eval::{
    evaluate_exact, evaluate_policies, induced_kernel, policy_sweep, DEFAULT_VALUE_TOL, KERNEL_TOL,
};
pub(crate) use eval::evaluate_accurate;
pub use model::{Cell, GameModel, StateSpec, ViabilitySet};
pub use profile::{StrategyProfile, ValuePair};
pub use simulate::{simulate_trajectory, Step};
pub use validate::{
    validate_model, Check, ValidationReport, Violation, CHECK_DISCOUNT, CHECK_MONOTONE, CHECK_NONNEGATIVE,
    CHECK_NORMALIZATION, CHECK_PAYOFF_BOUND,
};
