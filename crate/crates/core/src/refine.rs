//! Refinement of stationary equilibria to a sustainable exploitation equilibrium.
//!
//! Stages: viability filtering (optionally after a catastrophe penalty on leaving the
//! viability set), an optional individual-rationality filter, renegotiation-proofness
//! against the viable set, and exploiter-optimal selection at a chosen state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{evaluate_accurate, induced_kernel, GameModel, StrategyProfile, ViabilitySet, KERNEL_TOL};
use crate::mse::{self, Equilibrium, EquilibriumSet, SolveOptions, DEFAULT_BUDGET, DEFAULT_CERT_TOL};

/// Tolerance for Pareto and selection comparisons.
pub const DEFAULT_COMPARE_TOL: f64 = 1e-9;

/// True iff every viable state's induced row puts all its mass inside `V`.
pub fn check_viability(model: &GameModel, profile: &StrategyProfile, viability: &ViabilitySet) -> bool {
    induced_kernel(model, profile)
        .iter()
        .enumerate()
        .filter(|(s, _)| viability.contains(*s))
        .all(|(_, row)| exit_mass(row, viability) <= KERNEL_TOL)
}

fn exit_mass(row: &[(usize, f64)], viability: &ViabilitySet) -> f64 {
    row.iter().filter(|&&(t, _)| !viability.contains(t)).map(|&(_, p)| p).sum()
}

/// True iff, for every member `s`, the kernel at `(s, safe(s), follower[s][safe(s)])`
/// stays inside `V`.
pub fn check_safe_action(model: &GameModel, viability: &ViabilitySet, follower: &[Vec<usize>]) -> Result<bool> {
    let safe = viability.safe_action().ok_or(Error::MissingSafeAction)?;
    Ok(safe.iter().all(|(&s, &x)| {
        let e = follower[s][x];
        exit_mass(&model.cell(s, x, e).next, viability) <= KERNEL_TOL
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub penalty: f64,
    pub viability: ViabilitySet,
}

/// The penalized game: `u^X(s,x,e) - M * Q(S \ V | s,x,e)` everywhere, with the payoff
/// bound raised by `M`. Follower payoffs are untouched.
pub fn penalize(model: &GameModel, spec: &PenaltySpec) -> Result<GameModel> {
    let m = spec.penalty;
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalty must be finite and >= 0, got {m}")));
    }
    if m == 0.0 {
        return Ok(model.clone());
    }
    let v = &spec.viability;
    model.map_cells(Some(model.payoff_bound() + m), |_, _, _, c| {
        let mut c = c.clone();
        c.payoff_x -= m * c.mass_outside(|t| v.contains(t));
        c
    })
}

/// Where the equilibria handed to the refinement come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EquilibriumSource {
    /// Exhaustive enumeration; fails when the profile space exceeds the budget.
    Enumerate,
    /// A single certified solution of the coupled Bellman system.
    Solve,
    /// Enumerate within budget, otherwise solve.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    pub source: EquilibriumSource,
    pub cert_tol: f64,
    pub budget: u64,
    pub solve: SolveOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            source: EquilibriumSource::Auto,
            cert_tol: DEFAULT_CERT_TOL,
            budget: DEFAULT_BUDGET,
            solve: SolveOptions::default(),
        }
    }
}

impl EquilibriumOptions {
    fn uses_enumeration(&self, model: &GameModel) -> bool {
        match self.source {
            EquilibriumSource::Enumerate => true,
            EquilibriumSource::Solve => false,
            EquilibriumSource::Auto => model.profile_space_size() <= self.budget as f64,
        }
    }

    /// The equilibrium set of `model` under these options. A solver that fails to
    /// converge yields an empty, non-exhaustive set.
    pub fn equilibria(&self, model: &GameModel) -> Result<EquilibriumSet> {
        if self.uses_enumeration(model) {
            return mse::enumerate_stationary_mpe(model, self.cert_tol, self.budget);
        }
        let opts = SolveOptions { cert_tol: self.cert_tol, ..self.solve };
        match mse::solve_mse(model, &opts) {
            Ok(sol) => Ok(sol.into_set(model, self.cert_tol)),
            Err(Error::IterationBudget { .. } | Error::NotCertified { .. }) => {
                Ok(EquilibriumSet::new(model, false, self.cert_tol, Vec::new()))
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTrial {
    pub penalty: f64,
    pub equilibria: usize,
    pub all_viable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Smallest penalty found (to the search resolution) at which every equilibrium of
    /// the penalized game is viable.
    pub threshold: f64,
    /// `2 * payoff_bound / ((1 - discount) * p_min)`, with `p_min` the smallest nonzero
    /// exit mass from a viable state; `None` when no exit is possible.
    pub analytic_bound: Option<f64>,
    pub trials: Vec<ThresholdTrial>,
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdOptions {
    pub m_cap: f64,
    /// Bisection resolution.
    pub tol: f64,
    pub equilibria: EquilibriumOptions,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            m_cap: 1e6,
            tol: 1e-6,
            equilibria: EquilibriumOptions { source: EquilibriumSource::Enumerate, ..Default::default() },
        }
    }
}

/// Smallest exit mass `Q(S \ V | s,x,e) > 0` over viable states.
fn min_exit_mass(model: &GameModel, viability: &ViabilitySet) -> Option<f64> {
    viability
        .members()
        .flat_map(|s| model.state(s).cells.iter())
        .map(|c| c.mass_outside(|t| viability.contains(t)))
        .filter(|&p| p > KERNEL_TOL)
        .min_by(f64::total_cmp)
}

pub fn analytic_penalty_bound(model: &GameModel, viability: &ViabilitySet) -> Option<f64> {
    min_exit_mass(model, viability).map(|p| 2.0 * model.payoff_bound() / ((1.0 - model.discount()) * p))
}

/// Locates the smallest `M` such that every equilibrium of the penalized game is viable,
/// by doubling from 1 and then bisecting down to `opts.tol`.
pub fn find_penalty_threshold(
    model: &GameModel,
    viability: &ViabilitySet,
    opts: &ThresholdOptions,
) -> Result<ThresholdReport> {
    if !(opts.m_cap > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidArgument("m_cap and tol must be > 0".into()));
    }
    let analytic_bound = analytic_penalty_bound(model, viability);
    let mut trials = Vec::new();
    let mut trial = |m: f64| -> Result<bool> {
        let pm = penalize(model, &PenaltySpec { penalty: m, viability: viability.clone() })?;
        let set = opts.equilibria.equilibria(&pm)?;
        let ok = set.profiles().all(|p| check_viability(model, p, viability));
        trials.push(ThresholdTrial { penalty: m, equilibria: set.len(), all_viable: ok });
        Ok(ok)
    };
    if viability.is_everything() || trial(0.0)? {
        return Ok(ThresholdReport { threshold: 0.0, analytic_bound, trials });
    }
    if viability.safe_action().is_none() {
        return Err(Error::MissingSafeAction);
    }
    let mut lo = 0.0;
    let mut hi = opts.m_cap.min(1.0);
    loop {
        if trial(hi)? {
            break;
        }
        if hi >= opts.m_cap {
            return Err(Error::NoThreshold { m_cap: opts.m_cap });
        }
        lo = hi;
        hi = (2.0 * hi).min(opts.m_cap);
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if trial(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdReport { threshold: hi, analytic_bound, trials })
}

/// Members whose induced chain never leaves `V` from a viable state.
pub fn filter_viable(model: &GameModel, set: &EquilibriumSet, viability: &ViabilitySet) -> EquilibriumSet {
    set.filter(|eq| check_viability(model, &eq.profile, viability))
}

/// Exploitee outside option per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutsideOption(pub Vec<f64>);

/// Members with `w_e[s] >= outside[s] - tol` on every viable state.
pub fn ir_filter(set: &EquilibriumSet, outside: &OutsideOption, viability: &ViabilitySet, tol: f64) -> EquilibriumSet {
    set.filter(|eq| viability.members().all(|s| eq.values.w_e[s] >= outside.0[s] - tol))
}

/// Reading of the state quantifier in the renegotiation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RpQuantifier {
    /// Eliminated when dominated at some viable state.
    SomeState,
    /// Eliminated when weakly dominated at every viable state and strictly at one.
    AllStates,
}

impl RpQuantifier {
    pub fn other(self) -> Self {
        match self {
            RpQuantifier::SomeState => RpQuantifier::AllStates,
            RpQuantifier::AllStates => RpQuantifier::SomeState,
        }
    }
}

impl fmt::Display for RpQuantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RpQuantifier::SomeState => "some-state",
            RpQuantifier::AllStates => "all-states",
        })
    }
}

impl FromStr for RpQuantifier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "some-state" => Ok(RpQuantifier::SomeState),
            "all-states" => Ok(RpQuantifier::AllStates),
            other => Err(Error::InvalidArgument(format!("unknown quantifier reading {other:?}"))),
        }
    }
}

/// One audit row: `eliminated` is Pareto-dominated by `dominator` at `state`, where the
/// larger of the two value improvements is `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub eliminated: StrategyProfile,
    pub dominator: StrategyProfile,
    pub state: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpOutcome {
    pub set: EquilibriumSet,
    pub eliminations: Vec<Elimination>,
}

/// `Some((state, margin))` when `alt` dominates `eq` under `quantifier`.
fn dominates(
    alt: &Equilibrium,
    eq: &Equilibrium,
    viability: &ViabilitySet,
    tol: f64,
    quantifier: RpQuantifier,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut all_weak = true;
    for s in viability.members() {
        let dx = alt.values.w_x[s] - eq.values.w_x[s];
        let de = alt.values.w_e[s] - eq.values.w_e[s];
        let weak = dx >= -tol && de >= -tol;
        all_weak &= weak;
        if weak && (dx > tol || de > tol) {
            let margin = dx.max(de);
            if best.map_or(true, |(_, m)| margin > m) {
                best = Some((s, margin));
            }
        }
    }
    match quantifier {
        RpQuantifier::SomeState => best,
        RpQuantifier::AllStates => best.filter(|_| all_weak),
    }
}

/// Removes every member Pareto-dominated by another member of `set` (the viable set),
/// tested against the full input rather than the shrinking survivor set.
pub fn renegotiation_proof_set(
    set: &EquilibriumSet,
    viability: &ViabilitySet,
    tol: f64,
    quantifier: RpQuantifier,
) -> RpOutcome {
    let mut keep = Vec::with_capacity(set.len());
    let mut eliminations = Vec::new();
    for eq in &set.members {
        let hit = set
            .members
            .iter()
            .find_map(|alt| dominates(alt, eq, viability, tol, quantifier).map(|(s, m)| (alt, s, m)));
        match hit {
            Some((alt, state, margin)) => eliminations.push(Elimination {
                eliminated: eq.profile.clone(),
                dominator: alt.profile.clone(),
                state,
                margin,
            }),
            None => keep.push(eq.clone()),
        }
    }
    RpOutcome { set: set.with_members(keep), eliminations }
}

/// The member with the highest exploiter value at `selection_state`; near-ties (within
/// `tol`) go to the higher exploitee value there, then to the smaller action-index
/// vector.
pub fn select_see(set: &EquilibriumSet, selection_state: usize, tol: f64) -> Result<Equilibrium> {
    if set.is_empty() {
        return Err(Error::NoSelection("the renegotiation-proof set is empty".into()));
    }
    let s = selection_state;
    let best_x = set.members.iter().map(|m| m.values.w_x[s]).fold(f64::NEG_INFINITY, f64::max);
    let tier: Vec<&Equilibrium> = set.members.iter().filter(|m| m.values.w_x[s] >= best_x - tol).collect();
    let best_e = tier.iter().map(|m| m.values.w_e[s]).fold(f64::NEG_INFINITY, f64::max);
    let pick = tier
        .into_iter()
        .filter(|m| m.values.w_e[s] >= best_e - tol)
        .min_by(|a, b| a.profile.cmp(&b.profile))
        .expect("tier is nonempty");
    Ok(pick.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    /// Refine the equilibria of the original game.
    None,
    /// Refine the equilibria of the game penalized with this `M`.
    Fixed(f64),
    /// Search for the threshold and penalize with it.
    Search { m_cap: f64, tol: f64 },
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub penalty: PenaltyMode,
    pub selection_state: Option<usize>,
    pub outside: Option<OutsideOption>,
    pub quantifier: RpQuantifier,
    pub compare_tol: f64,
    pub equilibria: EquilibriumOptions,
    /// On a penalized run, also refine the unpenalized game's equilibria and compare.
    pub compare_routes: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            penalty: PenaltyMode::None,
            selection_state: None,
            outside: None,
            quantifier: RpQuantifier::SomeState,
            compare_tol: DEFAULT_COMPARE_TOL,
            equilibria: EquilibriumOptions::default(),
            compare_routes: true,
        }
    }
}

/// Outcome of the other quantifier reading, kept when it differs from the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateReading {
    pub quantifier: RpQuantifier,
    pub renegotiation_proof: Vec<StrategyProfile>,
    pub selected: Option<StrategyProfile>,
}

/// Viable profiles reached by filtering the original game's equilibria versus by
/// solving the penalized game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteComparison {
    pub unpenalized_viable: Vec<StrategyProfile>,
    pub penalized_viable: Vec<StrategyProfile>,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub fingerprint: String,
    /// Penalty applied before computing equilibria (0 on the unpenalized route).
    pub penalty: f64,
    pub threshold: Option<ThresholdReport>,
    pub selection_state: usize,
    pub quantifier: RpQuantifier,
    pub equilibria: EquilibriumSet,
    pub viable: EquilibriumSet,
    pub individually_rational: Option<EquilibriumSet>,
    pub renegotiation_proof: EquilibriumSet,
    pub eliminations: Vec<Elimination>,
    pub selected: Option<Equilibrium>,
    pub safe_action_holds: Option<bool>,
    pub alternate: Option<AlternateReading>,
    pub route_comparison: Option<RouteComparison>,
    pub notes: Vec<String>,
}

/// Runs equilibrium computation, optional penalization, viability, optional IR,
/// renegotiation-proofness and selection, asserting the nesting of the stages.
pub fn run_pipeline(model: &GameModel, viability: &ViabilitySet, opts: &PipelineOptions) -> Result<RefinementReport> {
    if viability.n_states() != model.n_states() {
        return Err(Error::InvalidArgument("viability set does not match the model".into()));
    }
    let selection_state = opts.selection_state.unwrap_or(model.initial_state());
    if selection_state >= model.n_states() {
        return Err(Error::InvalidArgument(format!("selection state {selection_state} out of range")));
    }
    let mut notes = Vec::new();

    let (penalty, threshold) = match opts.penalty {
        PenaltyMode::None => (0.0, None),
        PenaltyMode::Fixed(m) => (m, None),
        PenaltyMode::Search { m_cap, tol } => {
            if opts.equilibria.uses_enumeration(model) {
                let t = find_penalty_threshold(
                    model,
                    viability,
                    &ThresholdOptions { m_cap, tol, equilibria: opts.equilibria },
                )?;
                (t.threshold, Some(t))
            } else {
                let bound = analytic_penalty_bound(model, viability).unwrap_or(0.0);
                notes.push(format!("model beyond enumeration budget; penalizing with the analytic bound {bound}"));
                (bound, None)
            }
        }
    };

    let (equilibria, route_comparison) = if penalty > 0.0 {
        let pm = penalize(model, &PenaltySpec { penalty, viability: viability.clone() })?;
        let pen_set = opts.equilibria.equilibria(&pm)?;
        let cmp = if opts.compare_routes {
            let raw_set = opts.equilibria.equilibria(model)?;
            let pen_viable: Vec<StrategyProfile> =
                pen_set.profiles().filter(|p| check_viability(model, p, viability)).cloned().collect();
            let raw_viable: Vec<StrategyProfile> =
                raw_set.profiles().filter(|p| check_viability(model, p, viability)).cloned().collect();
            let agree = pen_viable == raw_viable;
            if !agree {
                notes.push("unpenalized and penalized routes yield different viable sets".into());
            }
            Some(RouteComparison { unpenalized_viable: raw_viable, penalized_viable: pen_viable, agree })
        } else {
            None
        };
        // downstream stages compare values of the original game
        let members = pen_set
            .members
            .iter()
            .cloned()
            .map(|mut eq| -> Result<Equilibrium> {
                eq.values = evaluate_accurate(model, &eq.profile)?;
                Ok(eq)
            })
            .collect::<Result<Vec<_>>>()?;
        (pen_set.with_members(members), cmp)
    } else {
        (opts.equilibria.equilibria(model)?, None)
    };
    if equilibria.is_empty() {
        notes.push("no pure stationary equilibrium found".into());
    }

    let viable = filter_viable(model, &equilibria, viability);
    if viable.is_empty() && !equilibria.is_empty() {
        notes.push("no viable equilibrium".into());
    }
    let individually_rational = opts.outside.as_ref().map(|o| ir_filter(&viable, o, viability, opts.compare_tol));
    let rp_input = individually_rational.as_ref().unwrap_or(&viable);
    let rp = renegotiation_proof_set(rp_input, viability, opts.compare_tol, opts.quantifier);
    let selected = match select_see(&rp.set, selection_state, opts.compare_tol) {
        Ok(eq) => Some(eq),
        Err(Error::NoSelection(_)) => {
            notes.push("no SEE found at this grid/tolerance".into());
            None
        }
        Err(e) => return Err(e),
    };

    let alt = renegotiation_proof_set(rp_input, viability, opts.compare_tol, opts.quantifier.other());
    let alternate = (alt.set.members.len() != rp.set.members.len()
        || alt.set.profiles().zip(rp.set.profiles()).any(|(a, b)| a != b))
    .then(|| AlternateReading {
        quantifier: opts.quantifier.other(),
        renegotiation_proof: alt.set.profiles().cloned().collect(),
        selected: select_see(&alt.set, selection_state, opts.compare_tol).ok().map(|e| e.profile),
    });

    let safe_action_holds = match (&selected, viability.safe_action()) {
        (Some(eq), Some(_)) => Some(check_safe_action(model, viability, &eq.profile.follower)?),
        _ => None,
    };

    let report = RefinementReport {
        fingerprint: model.fingerprint(),
        penalty,
        threshold,
        selection_state,
        quantifier: opts.quantifier,
        equilibria,
        viable,
        individually_rational,
        renegotiation_proof: rp.set,
        eliminations: rp.eliminations,
        selected,
        safe_action_holds,
        alternate,
        route_comparison,
        notes,
    };
    check_nesting(&report)?;
    Ok(report)
}

/// `selected in RP ⊆ (IR ⊆) viable ⊆ equilibria`, as profile membership.
pub fn check_nesting(report: &RefinementReport) -> Result<()> {
    let subset = |inner: &EquilibriumSet, outer: &EquilibriumSet, what: &str| -> Result<()> {
        match inner.profiles().find(|p| !outer.contains(p)) {
            Some(p) => Err(Error::Containment(format!("{what}: {p:?}"))),
            None => Ok(()),
        }
    };
    subset(&report.viable, &report.equilibria, "viable profile outside the equilibrium set")?;
    if let Some(ir) = &report.individually_rational {
        subset(ir, &report.viable, "IR profile outside the viable set")?;
        subset(&report.renegotiation_proof, ir, "RP profile outside the IR set")?;
    }
    subset(&report.renegotiation_proof, &report.viable, "RP profile outside the viable set")?;
    if let Some(sel) = &report.selected {
        if !report.renegotiation_proof.contains(&sel.profile) {
            return Err(Error::Containment(format!("selected profile outside the RP set: {:?}", sel.profile)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
