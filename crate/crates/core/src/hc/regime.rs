use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameModel, StrategyProfile, ValuePair, ViabilitySet};
use crate::mse::SolveOptions;
use crate::refine::{
    analytic_penalty_bound, run_pipeline, EquilibriumOptions, EquilibriumSource, PenaltyMode, PipelineOptions,
    RefinementReport,
};

use super::foc::{
    effort_state_sensitivity, follower_foc_residual, follower_optimum, grid_effort_optimum, leader_foc_residual,
    leader_grid_optimum, leader_multiplier, SOC_EPS,
};
use super::grid::build_hc_model;
use super::interp::ValueMap;
use super::params::HcParams;

/// Fixed point or cycle of a deterministic induced map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyState {
    Fixed { state: usize, steps: usize },
    Cycle { states: Vec<usize> },
}

impl SteadyState {
    /// The fixed point, or the lowest state of the cycle.
    pub fn representative(&self) -> usize {
        match self {
            SteadyState::Fixed { state, .. } => *state,
            SteadyState::Cycle { states } => *states.iter().min().expect("cycles are nonempty"),
        }
    }
}

/// Iterates the induced map from `start` until a state repeats.
pub fn find_steady_state(model: &GameModel, profile: &StrategyProfile, start: usize) -> Result<SteadyState> {
    if !model.is_deterministic() {
        return Err(Error::InvalidModel("steady-state search needs a deterministic model".into()));
    }
    if start >= model.n_states() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    profile.validate(model)?;
    let mut seen = HashMap::new();
    let mut path = Vec::new();
    let mut s = start;
    loop {
        if let Some(&k) = seen.get(&s) {
            let cycle: Vec<usize> = path[k..].to_vec();
            return Ok(if cycle.len() == 1 {
                SteadyState::Fixed { state: s, steps: k }
            } else {
                SteadyState::Cycle { states: cycle }
            });
        }
        seen.insert(s, path.len());
        path.push(s);
        s = model.cell(s, profile.leader[s], profile.on_path_effort(s)).next[0].0;
    }
}

/// A solved hegemon/client grid game and the value maps of its selected equilibrium on
/// the viable states.
#[derive(Debug, Clone)]
pub struct HcSolution {
    pub params: HcParams,
    pub model: GameModel,
    pub viability: ViabilitySet,
    pub report: RefinementReport,
    pub profile: StrategyProfile,
    pub values: ValuePair,
    /// Client value `W^C` on the viable states.
    pub w_c: ValueMap,
    /// Hegemon value `V^H` on the viable states.
    pub v_h: ValueMap,
}

impl HcSolution {
    pub fn first_viable(&self) -> usize {
        self.viability.members().next().expect("viability sets are nonempty")
    }

    pub fn state(&self, i: usize) -> f64 {
        self.params.grid.s.point(i)
    }

    pub fn extraction(&self, i: usize) -> f64 {
        self.params.grid.x.point(self.profile.leader[i])
    }

    pub fn effort(&self, i: usize) -> f64 {
        self.params.grid.e.point(self.profile.on_path_effort(i))
    }
}

/// Value iteration contracts at rate `discount`; far past the sweeps needed to reach
/// the residual tolerance the iteration is cycling and more sweeps do not help.
fn sweep_cap(discount: f64) -> usize {
    let needed = if discount > 0.0 { (1e-12f64.ln() / discount.ln()).ceil() as usize } else { 1 };
    (10 * needed).max(1000)
}

/// Builds the grid game, penalizes exits from `{s >= s_min}` just above the analytic
/// threshold, solves it and refines the solution.
pub fn solve_hc(params: &HcParams) -> Result<HcSolution> {
    let (model, viability) = build_hc_model(params)?;
    let penalty = analytic_penalty_bound(&model, &viability).map_or(0.0, |m| 1.01 * m);
    let opts = PipelineOptions {
        penalty: if penalty > 0.0 { PenaltyMode::Fixed(penalty) } else { PenaltyMode::None },
        compare_routes: false,
        equilibria: EquilibriumOptions {
            source: EquilibriumSource::Solve,
            solve: SolveOptions { max_sweeps: sweep_cap(params.discount), ..SolveOptions::default() },
            ..Default::default()
        },
        ..Default::default()
    };
    let report = run_pipeline(&model, &viability, &opts)?;
    let sel = report
        .selected
        .clone()
        .ok_or_else(|| Error::NoSelection(report.notes.join("; ")))?;
    let first = viability.members().next().expect("viability sets are nonempty");
    let gs = params.grid.s;
    let deg = params.grid.fit_degree;
    let map = |v: &[f64]| {
        let nodes = v[first..].to_vec();
        if deg > 0 && nodes.len() > 2 * (deg + 1) {
            ValueMap::fitted(gs.point(first), gs.step(), nodes, deg)
        } else {
            ValueMap::new(gs.point(first), gs.step(), nodes)
        }
    };
    let w_c = map(&sel.values.w_e)?;
    let v_h = map(&sel.values.w_x)?;
    Ok(HcSolution {
        params: *params,
        model,
        viability,
        report,
        profile: sel.profile,
        values: sel.values,
        w_c,
        v_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Interior,
    Boundary,
}

/// Steady state of the grid equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSteadyState {
    pub index: usize,
    pub state: f64,
    pub extraction: f64,
    pub effort: f64,
    /// Cycle states when the induced map does not settle on a fixed point.
    pub cycle: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub steady_state: f64,
    pub extraction: f64,
    pub effort: f64,
    pub multiplier: f64,
    /// Follower FOC residual; `None` when the effort sits on the grid boundary.
    pub follower_residual: Option<f64>,
    /// Leader FOC residual; `None` when the extraction sits on the grid boundary.
    pub leader_residual: Option<f64>,
    pub leader_residual_k_corrected: Option<f64>,
    /// `mu * (f(s*, e*) - h(x*) - s_min)`.
    pub slackness_residual: f64,
    /// Steady state of the game solved with `s_min` lowered to the bottom of the grid.
    pub unconstrained_steady_state: f64,
    pub unconstrained_cycle: bool,
    pub grid: GridSteadyState,
    /// `|x - h^{-1}(f(s_min, e) - s_min)|` at the grid steady state (boundary regime).
    pub boundary_formula_gap: Option<f64>,
    /// `f_s + f_e de*/ds` at the steady state (interior regime), for comparison with
    /// `1 / delta`.
    pub effective_regeneration: Option<f64>,
    pub discount_inverse: f64,
    pub state_step: f64,
    pub extraction_step: f64,
}

fn grid_steady(sol: &HcSolution) -> Result<(SteadyState, GridSteadyState)> {
    let ss = find_steady_state(&sol.model, &sol.profile, sol.model.initial_state())?;
    let i = ss.representative();
    let cycle = match &ss {
        SteadyState::Cycle { states } => Some(states.iter().map(|&k| sol.state(k)).collect()),
        SteadyState::Fixed { .. } => None,
    };
    let g = GridSteadyState { index: i, state: sol.state(i), extraction: sol.extraction(i), effort: sol.effort(i), cycle };
    Ok((ss, g))
}

/// Classifies the steady state of `sol` as interior or boundary.
///
/// The game is re-solved with the viability floor at the bottom of the grid; if that
/// unconstrained steady state lies above `s_min` the regime is interior, with `mu = 0`
/// and FOC residuals evaluated at the constrained grid steady state. Otherwise the
/// boundary point `s* = s_min`, `h(x*) = f(s_min, e*(s_min, x*)) - s_min` is solved for
/// with the continuous follower response, and `mu` is recovered from the leader FOC.
pub fn classify_regime(sol: &HcSolution) -> Result<RegimeReport> {
    let p = &sol.params;
    let (_, grid) = grid_steady(sol)?;

    let mut free = *p;
    free.s_min = p.grid.s.lo;
    let unconstrained = solve_hc(&free)?;
    let (uss, ugrid) = grid_steady(&unconstrained)?;
    let s_u = ugrid.state;
    let interior = s_u > p.s_min + 1e-12;

    let base = RegimeReport {
        regime: Regime::Interior,
        steady_state: grid.state,
        extraction: grid.extraction,
        effort: grid.effort,
        multiplier: 0.0,
        follower_residual: None,
        leader_residual: None,
        leader_residual_k_corrected: None,
        slackness_residual: 0.0,
        unconstrained_steady_state: s_u,
        unconstrained_cycle: matches!(uss, SteadyState::Cycle { .. }),
        grid: grid.clone(),
        boundary_formula_gap: None,
        effective_regeneration: None,
        discount_inverse: if p.discount > 0.0 { 1.0 / p.discount } else { f64::INFINITY },
        state_step: p.grid.s.step(),
        extraction_step: p.grid.x.step(),
    };

    if interior {
        let (s, x, e) = (grid.state, grid.extraction, grid.effort);
        let leader = leader_foc_residual(p, &sol.v_h, &sol.w_c, s, x, 0.0).ok();
        let regen = effort_state_sensitivity(p, &sol.w_c, s, x).map(|de_ds| p.f_s(s) + p.f_e() * de_ds);
        return Ok(RegimeReport {
            follower_residual: follower_foc_residual(p, &sol.w_c, s, x, e).ok(),
            leader_residual: leader.map(|l| l.residual),
            leader_residual_k_corrected: leader.map(|l| l.k_corrected),
            effective_regeneration: regen,
            ..base
        });
    }

    let s = p.s_min;
    let x = boundary_extraction(p, &sol.w_c)?;
    let e = follower_optimum(p, &sol.w_c, s, x).effort;
    let mu = leader_multiplier(p, &sol.v_h, &sol.w_c, s, x)?;
    let leader = leader_foc_residual(p, &sol.v_h, &sol.w_c, s, x, mu).ok();
    let gap = if p.h_x() > 0.0 {
        Some((grid.extraction - (p.f(p.s_min, grid.effort) - p.s_min) / p.h_x()).abs())
    } else {
        None
    };
    Ok(RegimeReport {
        regime: Regime::Boundary,
        steady_state: s,
        extraction: x,
        effort: e,
        multiplier: mu,
        follower_residual: follower_foc_residual(p, &sol.w_c, s, x, e).ok(),
        leader_residual: leader.map(|l| l.residual),
        leader_residual_k_corrected: leader.map(|l| l.k_corrected),
        slackness_residual: mu * (p.next_state(s, x, e) - p.s_min),
        boundary_formula_gap: gap,
        ..base
    })
}

/// Solves `h(x) = f(s_min, e*(s_min, x)) - s_min` for `x` on the extraction range.
pub fn boundary_extraction(p: &HcParams, w_c: &ValueMap) -> Result<f64> {
    let s = p.s_min;
    let slack = |x: f64| p.next_state(s, x, follower_optimum(p, w_c, s, x).effort) - s;
    let (mut lo, mut hi) = (p.grid.x.lo, p.grid.x.hi);
    if slack(lo) < 0.0 || slack(hi) > 0.0 {
        return Err(Error::InvalidArgument(
            "the boundary extraction lies outside the extraction grid".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slack(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the slack may jump where the follower switches branch; take the feasible side
    Ok(lo)
}

/// Largest FOC residuals over the interior grid optima of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocResiduals {
    pub follower_sup: f64,
    pub follower_points: usize,
    pub leader_sup: f64,
    pub leader_points: usize,
}

/// Evaluates the follower FOC at the grid argmax effort for every viable state and
/// extraction whose continuous optimum is interior with a strict second-order
/// condition, and the leader FOC (`mu = 0`) at every interior grid-optimal extraction
/// that keeps the next state strictly viable.
pub fn grid_foc_residuals(sol: &HcSolution) -> FocResiduals {
    let p = &sol.params;
    let ne = p.grid.e.n;
    let mut out = FocResiduals { follower_sup: 0.0, follower_points: 0, leader_sup: 0.0, leader_points: 0 };
    for i in sol.viability.members() {
        let s = sol.state(i);
        for x in p.grid.x.points().into_iter().take(super::grid::feasible_extractions(p, s)) {
            let o = follower_optimum(p, &sol.w_c, s, x);
            if !o.interior || o.soc > -SOC_EPS {
                continue;
            }
            let (j, e) = grid_effort_optimum(p, &sol.w_c, s, x);
            if j == 0 || j + 1 == ne {
                continue;
            }
            if let Ok(r) = follower_foc_residual(p, &sol.w_c, s, x, e) {
                out.follower_sup = out.follower_sup.max(r.abs());
                out.follower_points += 1;
            }
        }
        let Some(g) = leader_grid_optimum(p, &sol.v_h, &sol.w_c, s) else { continue };
        if g.interior && g.slack > 0.0 {
            if let Ok(l) = leader_foc_residual(p, &sol.v_h, &sol.w_c, s, g.extraction, 0.0) {
                out.leader_sup = out.leader_sup.max(l.residual.abs());
                out.leader_points += 1;
            }
        }
    }
    out
}
