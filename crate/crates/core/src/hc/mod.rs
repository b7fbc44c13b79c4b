//! Hegemon/client instance: parametric primitives, the grid game, first-order
//! conditions of both players and the interior/boundary steady-state regimes.

mod foc;
mod grid;
mod interp;
mod params;
mod regime;

pub use foc::{
    effort_sensitivity, effort_sensitivity_with, effort_state_sensitivity, follower_foc_residual,
    follower_optimum, grid_effort_optimum, leader_foc_residual, leader_grid_optimum, leader_multiplier,
    leader_objective, FollowerOptimum, GridOptimum, LeaderFoc, Sensitivity, FD_STEP, SOC_EPS,
};
pub use grid::{build_hc_model, feasible_extractions, realized_extraction};
pub use interp::ValueMap;
pub use params::{
    CapacityBenefit, Drain, EffortCost, ExtractionBenefit, ExtractionBurden, GridSpec, HcGrid, HcParams,
    MonitoringCost, Regeneration,
};
pub use regime::{
    boundary_extraction, classify_regime, find_steady_state, grid_foc_residuals, solve_hc, FocResiduals,
    GridSteadyState, HcSolution, Regime,
    RegimeReport, SteadyState,
};

#[cfg(test)]
mod tests;
