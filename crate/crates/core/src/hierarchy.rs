//! Certification of the inclusion chain SEE ⊆ RP ⊆ viable MPE ⊆ MPE on enumerable
//! models.
//!
//! Every verdict is recomputed here from primitives: values by iterative policy
//! evaluation, one-shot deviation gains from the model's cells, completeness of the
//! MPE set by a scan of on-path cores, and a stationary best-response test for each
//! player at the selection state. Nothing is read from the certificates carried by
//! the solver's sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{evaluate_policies, GameModel, StrategyProfile, ValuePair, ViabilitySet};
use crate::mse::{enumerate_stationary_mpe, EquilibriumSet, DEFAULT_BUDGET};
use crate::refine::{
    find_penalty_threshold, penalize, run_pipeline, EquilibriumOptions, EquilibriumSource, PenaltyMode,
    Elimination, PenaltySpec, PipelineOptions, RefinementReport, ThresholdOptions,
};

/// Scope statement carried by every report.
pub const SCOPE: &str = "pure stationary Markov profiles only: sequential rationality is certified by \
one-shot deviation tests, the Nash property by stationary Markov deviations at the selection state; \
history-dependent deviations are not enumerated";

/// Value tolerance of the independent policy evaluation.
const EVAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HierarchyOptions {
    /// Certification tolerance on deviation gains.
    pub tol: f64,
    pub budget: u64,
    /// Pipeline settings; the equilibrium source is forced to enumeration and a
    /// threshold search is resolved before certification.
    pub pipeline: PipelineOptions,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            tol: crate::mse::DEFAULT_CERT_TOL,
            budget: DEFAULT_BUDGET,
            pipeline: PipelineOptions { compare_routes: false, ..PipelineOptions::default() },
        }
    }
}

/// Independently recomputed certificate of one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCertificate {
    pub profile: StrategyProfile,
    pub values: ValuePair,
    /// Largest one-shot gain of the leader over states.
    pub leader_gain: f64,
    /// Largest one-shot gain of the follower over `(state, action)` pairs.
    pub follower_gain: f64,
    pub sequentially_rational: bool,
    /// Value at the selection state of the leader's best stationary reply, minus its
    /// value under the profile.
    pub leader_stationary_gain: f64,
    pub follower_stationary_gain: f64,
    pub nash_at_selection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyCounts {
    pub mpe: usize,
    pub viable: usize,
    pub renegotiation_proof: usize,
    pub see: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub scope: String,
    pub fingerprint: String,
    pub penalty: f64,
    pub selection_state: usize,
    pub counts: HierarchyCounts,
    pub mpe: Vec<StrategyProfile>,
    pub viable: Vec<StrategyProfile>,
    pub renegotiation_proof: Vec<StrategyProfile>,
    pub see: Option<StrategyProfile>,
    /// Renegotiation audit trail of the recomputed pipeline.
    pub eliminations: Vec<Elimination>,
    pub certificates: Vec<ProfileCertificate>,
    pub verdicts: Vec<Verdict>,
}

impl HierarchyReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }
}

/// Recomputes the MPE set by enumeration and certifies the chain.
pub fn verify_hierarchy(model: &GameModel, viability: &ViabilitySet, opts: &HierarchyOptions) -> Result<HierarchyReport> {
    let (game, penalty) = certification_game(model, viability, opts)?;
    let mpe = enumerate_stationary_mpe(&game, opts.tol, opts.budget)?;
    verify_with(model, viability, opts, &game, penalty, &mpe)
}

/// Certifies the chain against a caller-supplied MPE set, e.g. one produced by a
/// different enumerator. The set must belong to the game the pipeline refines (the
/// penalized game when a penalty is configured).
pub fn verify_hierarchy_with(
    model: &GameModel,
    viability: &ViabilitySet,
    opts: &HierarchyOptions,
    mpe: &EquilibriumSet,
) -> Result<HierarchyReport> {
    let (game, penalty) = certification_game(model, viability, opts)?;
    verify_with(model, viability, opts, &game, penalty, mpe)
}

fn certification_game(model: &GameModel, viability: &ViabilitySet, opts: &HierarchyOptions) -> Result<(GameModel, f64)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
    }
    let enumerate = EquilibriumOptions {
        source: EquilibriumSource::Enumerate,
        cert_tol: opts.tol,
        budget: opts.budget,
        ..opts.pipeline.equilibria
    };
    let penalty = match opts.pipeline.penalty {
        PenaltyMode::None => 0.0,
        PenaltyMode::Fixed(m) => m,
        PenaltyMode::Search { m_cap, tol } => {
            find_penalty_threshold(model, viability, &ThresholdOptions { m_cap, tol, equilibria: enumerate })?.threshold
        }
    };
    let game = if penalty > 0.0 {
        penalize(model, &PenaltySpec { penalty, viability: viability.clone() })?
    } else {
        model.clone()
    };
    Ok((game, penalty))
}

fn describe(profile: &StrategyProfile) -> String {
    format!("leader {:?} follower {:?}", profile.leader, profile.follower)
}

fn containment(what: &str, profile: &StrategyProfile) -> Error {
    Error::Containment(format!("{what}: {}", describe(profile)))
}

fn verify_with(
    model: &GameModel,
    viability: &ViabilitySet,
    opts: &HierarchyOptions,
    game: &GameModel,
    penalty: f64,
    mpe: &EquilibriumSet,
) -> Result<HierarchyReport> {
    let space = game.profile_space_size();
    if space > opts.budget as f64 {
        return Err(Error::BudgetExceeded { size: space, budget: opts.budget });
    }
    let selection_state = opts.pipeline.selection_state.unwrap_or(model.initial_state());
    if selection_state >= model.n_states() {
        return Err(Error::InvalidArgument(format!("selection state {selection_state} out of range")));
    }

    let claimed: Vec<StrategyProfile> = {
        let mut v: Vec<StrategyProfile> = mpe.profiles().cloned().collect();
        v.sort();
        v.dedup();
        v
    };

    let certificates = claimed
        .par_iter()
        .map(|p| certify(game, p, opts.tol, selection_state))
        .collect::<Result<Vec<_>>>()?;
    if let Some(c) = certificates.iter().find(|c| !c.sequentially_rational) {
        return Err(containment("claimed MPE fails the one-shot deviation test", &c.profile));
    }
    if let Some(c) = certificates.iter().find(|c| !c.nash_at_selection) {
        return Err(containment("MPE admits a profitable stationary deviation at the selection state", &c.profile));
    }
    if let Some(missing) = first_uncovered(game, &claimed, opts.tol)? {
        return Err(containment("certified profile missing from the MPE set", &missing));
    }

    let pipeline = PipelineOptions {
        penalty: if penalty > 0.0 { PenaltyMode::Fixed(penalty) } else { PenaltyMode::None },
        selection_state: Some(selection_state),
        equilibria: EquilibriumOptions {
            source: EquilibriumSource::Enumerate,
            cert_tol: opts.tol,
            budget: opts.budget,
            ..opts.pipeline.equilibria
        },
        ..opts.pipeline.clone()
    };
    let report = run_pipeline(model, viability, &pipeline)?;
    check_chain(model, viability, &claimed, &report)?;

    let viable: Vec<StrategyProfile> = report.viable.profiles().cloned().collect();
    let rp: Vec<StrategyProfile> = report.renegotiation_proof.profiles().cloned().collect();
    let see = report.selected.as_ref().map(|e| e.profile.clone());
    let verdicts = [
        "mpe_sequentially_rational",
        "mpe_nash_at_selection",
        "mpe_complete",
        "viable_subset_mpe",
        "viable_members_viable",
        "rp_subset_viable",
        "see_in_rp",
    ]
    .into_iter()
    .map(|name| Verdict { name: name.into(), holds: true })
    .collect();
    Ok(HierarchyReport {
        scope: SCOPE.into(),
        fingerprint: model.fingerprint(),
        penalty,
        selection_state,
        counts: HierarchyCounts {
            mpe: claimed.len(),
            viable: viable.len(),
            renegotiation_proof: rp.len(),
            see: usize::from(see.is_some()),
        },
        mpe: claimed,
        viable,
        renegotiation_proof: rp,
        see,
        eliminations: report.eliminations.clone(),
        certificates,
        verdicts,
    })
}

fn check_chain(
    model: &GameModel,
    viability: &ViabilitySet,
    mpe: &[StrategyProfile],
    report: &RefinementReport,
) -> Result<()> {
    let in_mpe = |p: &StrategyProfile| mpe.binary_search(p).is_ok();
    for p in report.equilibria.profiles() {
        if !in_mpe(p) {
            return Err(containment("pipeline equilibrium absent from the recomputed MPE set", p));
        }
    }
    for p in report.viable.profiles() {
        if !in_mpe(p) {
            return Err(containment("viable profile absent from the MPE set", p));
        }
        if !stays_inside(model, p, viability) {
            return Err(containment("profile in the viable set leaves V", p));
        }
    }
    for p in mpe {
        if stays_inside(model, p, viability) && !report.viable.contains(p) {
            return Err(containment("viable MPE missing from the viable set", p));
        }
    }
    for p in report.renegotiation_proof.profiles() {
        if !report.viable.contains(p) {
            return Err(containment("renegotiation-proof profile absent from the viable set", p));
        }
    }
    if let Some(sel) = &report.selected {
        if !report.renegotiation_proof.contains(&sel.profile) {
            return Err(containment("selected SEE absent from the renegotiation-proof set", &sel.profile));
        }
    }
    Ok(())
}

/// Support containment recomputed from the kernels: no state reachable from V under
/// the profile lies outside V.
fn stays_inside(model: &GameModel, profile: &StrategyProfile, viability: &ViabilitySet) -> bool {
    viability.members().all(|s| {
        let (x, e) = (profile.leader[s], profile.follower[s][profile.leader[s]]);
        model.cell(s, x, e).next.iter().all(|&(t, p)| p == 0.0 || viability.contains(t))
    })
}

fn q(game: &GameModel, w: &[f64], leader: bool, s: usize, x: usize, e: usize) -> f64 {
    let c = game.cell(s, x, e);
    let u = if leader { c.payoff_x } else { c.payoff_e };
    u + game.discount() * c.next.iter().map(|&(t, p)| p * w[t]).sum::<f64>()
}

fn certify(game: &GameModel, profile: &StrategyProfile, tol: f64, selection_state: usize) -> Result<ProfileCertificate> {
    let values = evaluate_policies(game, profile, EVAL_TOL * (1.0 - game.discount()))?;
    let mut leader_gain = f64::NEG_INFINITY;
    let mut follower_gain = f64::NEG_INFINITY;
    for s in 0..game.n_states() {
        for x in 0..game.n_leader(s) {
            let cur = q(game, &values.w_e, false, s, x, profile.follower[s][x]);
            for e in 0..game.n_effort(s) {
                follower_gain = follower_gain.max(q(game, &values.w_e, false, s, x, e) - cur);
            }
        }
        let on = profile.leader[s];
        let cur = q(game, &values.w_x, true, s, on, profile.follower[s][on]);
        for x in 0..game.n_leader(s) {
            leader_gain = leader_gain.max(q(game, &values.w_x, true, s, x, profile.follower[s][x]) - cur);
        }
    }
    let leader_best = stationary_best_reply(game, profile, true)?;
    let follower_best = stationary_best_reply(game, profile, false)?;
    let leader_stationary_gain = leader_best[selection_state] - values.w_x[selection_state];
    let follower_stationary_gain = follower_best[selection_state] - values.w_e[selection_state];
    Ok(ProfileCertificate {
        profile: profile.clone(),
        sequentially_rational: leader_gain <= tol && follower_gain <= tol,
        nash_at_selection: leader_stationary_gain <= tol && follower_stationary_gain <= tol,
        values,
        leader_gain,
        follower_gain,
        leader_stationary_gain,
        follower_stationary_gain,
    })
}

/// Optimal value of one player's MDP with the other player's strategy held fixed, by
/// policy iteration started from the profile itself.
fn stationary_best_reply(game: &GameModel, profile: &StrategyProfile, leader: bool) -> Result<Vec<f64>> {
    let mut current = profile.clone();
    let tol = EVAL_TOL * (1.0 - game.discount());
    loop {
        let values = evaluate_policies(game, &current, tol)?;
        let w = if leader { &values.w_x } else { &values.w_e };
        let mut next = current.clone();
        let mut changed = false;
        for s in 0..game.n_states() {
            let x0 = current.leader[s];
            let e0 = current.follower[s][x0];
            let here = q(game, w, leader, s, x0, e0);
            let candidates: Vec<(usize, usize)> = if leader {
                (0..game.n_leader(s)).map(|x| (x, current.follower[s][x])).collect()
            } else {
                (0..game.n_effort(s)).map(|e| (x0, e)).collect()
            };
            let (mut best, mut best_v) = ((x0, e0), here);
            for (x, e) in candidates {
                let v = q(game, w, leader, s, x, e);
                if v > best_v + 1e-12 * (1.0 + best_v.abs()) {
                    best = (x, e);
                    best_v = v;
                }
            }
            if best != (x0, e0) {
                changed = true;
                next.leader[s] = best.0;
                next.follower[s][best.0] = best.1;
            }
        }
        if !changed {
            return Ok(if leader { values.w_x } else { values.w_e });
        }
        current = next;
    }
}

/// Scans every on-path core (leader action and on-path effort per state) and counts
/// the certified completions; returns a certified profile absent from `claimed`, if
/// any.
fn first_uncovered(game: &GameModel, claimed: &[StrategyProfile], tol: f64) -> Result<Option<StrategyProfile>> {
    let n = game.n_states();
    let radices: Vec<usize> = (0..n).map(|s| game.n_leader(s) * game.n_effort(s)).collect();
    let cores: usize = radices.iter().product();
    let found = (0..cores)
        .into_par_iter()
        .map(|idx| -> Result<Option<StrategyProfile>> {
            let mut rest = idx;
            let mut core = StrategyProfile::zeros(game);
            for s in 0..n {
                let d = rest % radices[s];
                rest /= radices[s];
                let (x, e) = (d / game.n_effort(s), d % game.n_effort(s));
                core.leader[s] = x;
                core.follower[s][x] = e;
            }
            let values = evaluate_policies(game, &core, EVAL_TOL * (1.0 - game.discount()))?;
            Ok(uncovered_completion(game, &core, &values, claimed, tol))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().next())
}

fn uncovered_completion(
    game: &GameModel,
    core: &StrategyProfile,
    values: &ValuePair,
    claimed: &[StrategyProfile],
    tol: f64,
) -> Option<StrategyProfile> {
    let best_effort = |s: usize, x: usize| {
        (0..game.n_effort(s)).map(|e| q(game, &values.w_e, false, s, x, e)).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut options: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for s in 0..game.n_states() {
        let on = core.leader[s];
        let e_on = core.follower[s][on];
        if best_effort(s, on) - q(game, &values.w_e, false, s, on, e_on) > tol {
            return None;
        }
        let here = q(game, &values.w_x, true, s, on, e_on);
        for x in (0..game.n_leader(s)).filter(|&x| x != on) {
            let b = best_effort(s, x);
            let ok: Vec<usize> = (0..game.n_effort(s))
                .filter(|&e| {
                    b - q(game, &values.w_e, false, s, x, e) <= tol && q(game, &values.w_x, true, s, x, e) - here <= tol
                })
                .collect();
            if ok.is_empty() {
                return None;
            }
            options.push((s, x, ok));
        }
    }
    // walk the product of admissible off-path efforts
    let mut digits = vec![0usize; options.len()];
    loop {
        let mut p = core.clone();
        for ((s, x, ok), &d) in options.iter().zip(&digits) {
            p.follower[*s][*x] = ok[d];
        }
        if claimed.binary_search(&p).is_err() {
            return Some(p);
        }
        let mut i = 0;
        loop {
            if i == digits.len() {
                return None;
            }
            digits[i] += 1;
            if digits[i] < options[i].2.len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
