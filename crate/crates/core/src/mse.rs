//! Markov–Stackelberg equilibria: nested best-response value iteration, one-shot
//! deviation certificates and exhaustive enumeration of pure stationary equilibria.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{evaluate_accurate, GameModel, StrategyProfile, ValuePair};

/// Certification tolerance when callers have no opinion.
pub const DEFAULT_CERT_TOL: f64 = 1e-8;
/// Enumeration budget (pure profiles) when callers have no opinion.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

const TIE_EPS: f64 = 1e-12;

#[inline]
fn beats(v: f64, best: f64) -> bool {
    v > best + TIE_EPS * (1.0 + best.abs())
}

/// Leader's one-period-deviation value `u^X(s,x,e) + discount * E[w_x(s')]`.
#[inline]
pub fn leader_q(model: &GameModel, w_x: &[f64], s: usize, x: usize, e: usize) -> f64 {
    let c = model.cell(s, x, e);
    c.payoff_x + model.discount() * c.expect(w_x)
}

/// Follower's one-period-deviation value `u^E(s,x,e) + discount * E[w_e(s')]`.
#[inline]
pub fn follower_q(model: &GameModel, w_e: &[f64], s: usize, x: usize, e: usize) -> f64 {
    let c = model.cell(s, x, e);
    c.payoff_e + model.discount() * c.expect(w_e)
}

/// Follower's best effort at `(s, x)` against continuation values `w_e`; ties go to the
/// lowest effort index.
pub fn follower_best_response(model: &GameModel, w_e: &[f64], s: usize, x: usize) -> usize {
    let mut best = 0;
    let mut best_v = follower_q(model, w_e, s, x, 0);
    for e in 1..model.n_effort(s) {
        let v = follower_q(model, w_e, s, x, e);
        if beats(v, best_v) {
            best = e;
            best_v = v;
        }
    }
    best
}

/// Greedy profile against `values`: the follower best-responds at every `(s, x)` and the
/// leader picks the lowest-index action maximizing its value given those responses.
pub fn greedy_profile(model: &GameModel, values: &ValuePair) -> StrategyProfile {
    let n = model.n_states();
    let mut leader = Vec::with_capacity(n);
    let mut follower = Vec::with_capacity(n);
    for s in 0..n {
        let resp: Vec<usize> =
            (0..model.n_leader(s)).map(|x| follower_best_response(model, &values.w_e, s, x)).collect();
        let mut best = 0;
        let mut best_v = leader_q(model, &values.w_x, s, 0, resp[0]);
        for (x, &e) in resp.iter().enumerate().skip(1) {
            let v = leader_q(model, &values.w_x, s, x, e);
            if beats(v, best_v) {
                best = x;
                best_v = v;
            }
        }
        leader.push(best);
        follower.push(resp);
    }
    StrategyProfile { leader, follower }
}

fn backup(model: &GameModel, profile: &StrategyProfile, values: &ValuePair) -> ValuePair {
    let (w_x, w_e) = (0..model.n_states())
        .map(|s| {
            let (x, e) = (profile.leader[s], profile.on_path_effort(s));
            (leader_q(model, &values.w_x, s, x, e), follower_q(model, &values.w_e, s, x, e))
        })
        .unzip();
    ValuePair { w_x, w_e }
}

/// One-shot deviation gains of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// Per state: best one-shot leader value minus the value of the prescribed action,
    /// with the follower responding as the profile specifies at deviated actions.
    pub leader_gain: Vec<f64>,
    /// Per `(state, leader action)`: best one-shot effort value minus the prescribed one.
    pub follower_gain: Vec<Vec<f64>>,
    pub max_gain: f64,
}

impl DeviationReport {
    pub fn certified(&self, tol: f64) -> bool {
        self.max_gain <= tol
    }

    /// Gains computed against already evaluated values of `profile`.
    pub fn from_values(model: &GameModel, profile: &StrategyProfile, values: &ValuePair) -> Self {
        let n = model.n_states();
        let mut leader_gain = Vec::with_capacity(n);
        let mut follower_gain = Vec::with_capacity(n);
        for s in 0..n {
            let nx = model.n_leader(s);
            let row: Vec<f64> = (0..nx)
                .map(|x| {
                    let cur = follower_q(model, &values.w_e, s, x, profile.follower[s][x]);
                    let best = (0..model.n_effort(s))
                        .map(|e| follower_q(model, &values.w_e, s, x, e))
                        .fold(f64::NEG_INFINITY, f64::max);
                    best - cur
                })
                .collect();
            let cur = leader_q(model, &values.w_x, s, profile.leader[s], profile.on_path_effort(s));
            let best = (0..nx)
                .map(|x| leader_q(model, &values.w_x, s, x, profile.follower[s][x]))
                .fold(f64::NEG_INFINITY, f64::max);
            leader_gain.push(best - cur);
            follower_gain.push(row);
        }
        let max_gain = leader_gain.iter().chain(follower_gain.iter().flatten()).copied().fold(0.0, f64::max);
        Self { leader_gain, follower_gain, max_gain }
    }
}

/// Evaluates `profile` and reports its one-shot deviation gains.
///
/// `tol` is the value tolerance of the evaluation; small models are solved exactly.
pub fn one_shot_deviation_check(model: &GameModel, profile: &StrategyProfile, tol: f64) -> Result<DeviationReport> {
    let values = evaluate_for_check(model, profile, tol)?;
    Ok(DeviationReport::from_values(model, profile, &values))
}

fn evaluate_for_check(model: &GameModel, profile: &StrategyProfile, tol: f64) -> Result<ValuePair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    evaluate_accurate(model, profile)
}

/// A certified equilibrium with its values and deviation certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub values: ValuePair,
    pub report: DeviationReport,
}

/// A set of certified pure stationary equilibria of one model, sorted by profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub fingerprint: String,
    pub exhaustive: bool,
    pub tol: f64,
    pub members: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn new(model: &GameModel, exhaustive: bool, tol: f64, mut members: Vec<Equilibrium>) -> Self {
        members.sort_by(|a, b| a.profile.cmp(&b.profile));
        members.dedup_by(|a, b| a.profile == b.profile);
        Self { fingerprint: model.fingerprint(), exhaustive, tol, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, profile: &StrategyProfile) -> bool {
        self.members.binary_search_by(|m| m.profile.cmp(profile)).is_ok()
    }

    pub fn profiles(&self) -> impl Iterator<Item = &StrategyProfile> {
        self.members.iter().map(|m| &m.profile)
    }

    /// Members satisfying `keep`, preserving metadata.
    pub fn filter(&self, keep: impl Fn(&Equilibrium) -> bool) -> Self {
        self.with_members(self.members.iter().filter(|m| keep(m)).cloned().collect())
    }

    /// Same metadata, different members (assumed sorted and distinct).
    pub fn with_members(&self, members: Vec<Equilibrium>) -> Self {
        Self { fingerprint: self.fingerprint.clone(), exhaustive: self.exhaustive, tol: self.tol, members }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Bellman residual tolerance for the value-iteration phase.
    pub tol: f64,
    /// Certification tolerance for the returned profile.
    pub cert_tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: crate::game::DEFAULT_VALUE_TOL, cert_tol: DEFAULT_CERT_TOL, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSolution {
    pub profile: StrategyProfile,
    pub values: ValuePair,
    pub report: DeviationReport,
    pub sweeps: usize,
    /// Sup-norm Bellman residual of the returned values.
    pub residual: f64,
}

impl MseSolution {
    pub fn into_set(self, model: &GameModel, tol: f64) -> EquilibriumSet {
        let eq = Equilibrium { profile: self.profile, values: self.values, report: self.report };
        EquilibriumSet::new(model, false, tol, vec![eq])
    }
}

/// Solves the coupled leader/follower Bellman system.
///
/// Synchronous best-response value iteration runs until the residual drops below
/// `opts.tol`; the greedy profile is then re-evaluated exactly and improved until it is
/// greedy with respect to its own values. The result is certified separately; a
/// profile failing the deviation check is an error, never a result.
pub fn solve_mse(model: &GameModel, opts: &SolveOptions) -> Result<MseSolution> {
    if !(opts.tol > 0.0 && opts.cert_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be > 0".into()));
    }
    let mut values = ValuePair::zeros(model.n_states());
    let mut profile = greedy_profile(model, &values);
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        profile = greedy_profile(model, &values);
        let next = backup(model, &profile, &values);
        residual = next.sup_distance(&values);
        values = next;
        if residual <= opts.tol {
            break;
        }
    }
    let vi_converged = residual <= opts.tol;

    let polish_budget = 64 + 4 * model.n_states();
    for _ in 0..polish_budget {
        let exact = evaluate_accurate(model, &profile)?;
        let improved = greedy_profile(model, &exact);
        if improved == profile {
            let report = DeviationReport::from_values(model, &profile, &exact);
            if !report.certified(opts.cert_tol) {
                return Err(Error::NotCertified { max_gain: report.max_gain, tol: opts.cert_tol });
            }
            let residual = backup(model, &greedy_profile(model, &exact), &exact).sup_distance(&exact);
            return Ok(MseSolution { profile, values: exact, report, sweeps, residual });
        }
        profile = improved;
    }
    if vi_converged {
        // best-response cycling among near-tied profiles
        Err(Error::IterationBudget { sweeps: sweeps + polish_budget, residual })
    } else {
        Err(Error::IterationBudget { sweeps, residual })
    }
}

fn check_budget(model: &GameModel, budget: u64) -> Result<()> {
    let size = model.profile_space_size();
    if size > budget as f64 {
        return Err(Error::BudgetExceeded { size, budget });
    }
    Ok(())
}

/// Every pure stationary profile whose one-shot deviation gains are all `<= tol`.
///
/// Values depend only on the leader policy and the on-path efforts, and given those
/// values each off-path follower entry enters exactly one follower test and one term
/// of the leader test. The search therefore evaluates each on-path core once and
/// expands the product of admissible off-path efforts, which visits exactly the
/// profiles a brute-force scan would certify (see [`enumerate_bruteforce`]).
pub fn enumerate_stationary_mpe(model: &GameModel, tol: f64, budget: u64) -> Result<EquilibriumSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    check_budget(model, budget)?;
    let n = model.n_states();
    let radices: Vec<usize> = (0..n).flat_map(|s| [model.n_leader(s), model.n_effort(s)]).collect();
    let cores: usize = radices.iter().product();

    let found: Vec<Vec<Equilibrium>> = (0..cores)
        .into_par_iter()
        .map(|idx| -> Result<Vec<Equilibrium>> {
            let digits = mixed_radix(idx, &radices);
            let mut profile = StrategyProfile::zeros(model);
            for s in 0..n {
                let (x, e) = (digits[2 * s], digits[2 * s + 1]);
                profile.leader[s] = x;
                profile.follower[s][x] = e;
            }
            let values = evaluate_accurate(model, &profile)?;
            Ok(expand_core(model, &profile, &values, tol))
        })
        .collect::<Result<_>>()?;
    Ok(EquilibriumSet::new(model, true, tol, found.into_iter().flatten().collect()))
}

fn mixed_radix(mut idx: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = idx % r;
            idx /= r;
            d
        })
        .collect()
}

fn expand_core(model: &GameModel, core: &StrategyProfile, values: &ValuePair, tol: f64) -> Vec<Equilibrium> {
    let n = model.n_states();
    let fgain = |s: usize, x: usize, e: usize| {
        let best = (0..model.n_effort(s))
            .map(|k| follower_q(model, &values.w_e, s, x, k))
            .fold(f64::NEG_INFINITY, f64::max);
        best - follower_q(model, &values.w_e, s, x, e)
    };
    // (state, action) pairs off the path, with their admissible efforts
    let mut slots: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for s in 0..n {
        let on = core.leader[s];
        if fgain(s, on, core.on_path_effort(s)) > tol {
            return Vec::new();
        }
        let cur = leader_q(model, &values.w_x, s, on, core.on_path_effort(s));
        for x in (0..model.n_leader(s)).filter(|&x| x != on) {
            let ok: Vec<usize> = (0..model.n_effort(s))
                .filter(|&e| fgain(s, x, e) <= tol && leader_q(model, &values.w_x, s, x, e) - cur <= tol)
                .collect();
            if ok.is_empty() {
                return Vec::new();
            }
            slots.push((s, x, ok));
        }
    }
    let radices: Vec<usize> = slots.iter().map(|(_, _, ok)| ok.len()).collect();
    let count: usize = radices.iter().product();
    (0..count)
        .map(|idx| {
            let mut profile = core.clone();
            for (d, (s, x, ok)) in mixed_radix(idx, &radices).into_iter().zip(&slots) {
                profile.follower[*s][*x] = ok[d];
            }
            let report = DeviationReport::from_values(model, &profile, values);
            Equilibrium { profile, values: values.clone(), report }
        })
        .collect()
}

/// Acceptance rule applied to a full deviation report.
pub type AcceptRule = fn(&DeviationReport, f64) -> bool;

/// The standard rule: every one-shot gain is at most `tol`.
pub fn standard_rule(report: &DeviationReport, tol: f64) -> bool {
    report.certified(tol)
}

/// Scans every pure profile and keeps those accepted by `rule`. Exponential; meant as an
/// oracle for [`enumerate_stationary_mpe`] and for fault-injection tests.
pub fn enumerate_bruteforce(model: &GameModel, tol: f64, budget: u64, rule: AcceptRule) -> Result<EquilibriumSet> {
    check_budget(model, budget)?;
    let n = model.n_states();
    let mut radices: Vec<usize> = (0..n).map(|s| model.n_leader(s)).collect();
    for s in 0..n {
        radices.extend(std::iter::repeat(model.n_effort(s)).take(model.n_leader(s)));
    }
    let total: usize = radices.iter().product();
    let members: Vec<Equilibrium> = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<Option<Equilibrium>> {
            let digits = mixed_radix(idx, &radices);
            let leader = digits[..n].to_vec();
            let mut rest = &digits[n..];
            let follower = (0..n)
                .map(|s| {
                    let (row, tail) = rest.split_at(model.n_leader(s));
                    rest = tail;
                    row.to_vec()
                })
                .collect();
            let profile = StrategyProfile { leader, follower };
            let values = evaluate_accurate(model, &profile)?;
            let report = DeviationReport::from_values(model, &profile, &values);
            Ok(rule(&report, tol).then_some(Equilibrium { profile, values, report }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(EquilibriumSet::new(model, true, tol, members))
}
