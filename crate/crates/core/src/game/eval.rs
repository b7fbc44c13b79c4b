use nalgebra::{DMatrix, DVector};

use super::model::{Cell, GameModel};
use super::profile::{StrategyProfile, ValuePair};
use crate::error::{Error, Result};

/// Value tolerance used when callers have no opinion.
pub const DEFAULT_VALUE_TOL: f64 = 1e-10;
/// Kernel normalization tolerance.
pub const KERNEL_TOL: f64 = 1e-12;

/// Sweep budget for iterative evaluation: enough for a `discount`-contraction to shrink
/// an error of `scale` below `tol`, with slack.
fn sweep_budget(discount: f64, scale: f64, tol: f64) -> usize {
    if discount <= 0.0 {
        return 4;
    }
    let need = ((tol / scale.max(tol)).ln() / discount.ln()).ceil();
    (need.max(1.0) as usize).saturating_mul(2).saturating_add(100).min(50_000_000)
}

#[inline]
fn on_path_cell<'m>(model: &'m GameModel, profile: &StrategyProfile, s: usize) -> &'m Cell {
    model.cell(s, profile.leader[s], profile.on_path_effort(s))
}

/// One synchronous policy-evaluation sweep `W <- u + discount * P W`.
pub fn policy_sweep(model: &GameModel, profile: &StrategyProfile, values: &ValuePair) -> ValuePair {
    let d = model.discount();
    let (w_x, w_e) = (0..model.n_states())
        .map(|s| {
            let c = on_path_cell(model, profile, s);
            (c.payoff_x + d * c.expect(&values.w_x), c.payoff_e + d * c.expect(&values.w_e))
        })
        .unzip();
    ValuePair { w_x, w_e }
}

/// Evaluates a fixed profile by iterating [`policy_sweep`] from zero until the sup-norm
/// residual `|TW - W|` is at most `tol`.
pub fn evaluate_policies(model: &GameModel, profile: &StrategyProfile, tol: f64) -> Result<ValuePair> {
    profile.validate(model)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let d = model.discount();
    let scale = model.payoff_bound() / (1.0 - d);
    let budget = sweep_budget(d, scale, tol);
    let mut values = ValuePair::zeros(model.n_states());
    let mut residual = f64::INFINITY;
    for _ in 0..budget {
        let next = policy_sweep(model, profile, &values);
        residual = next.sup_distance(&values);
        values = next;
        if residual <= tol {
            return Ok(values);
        }
    }
    Err(Error::IterationBudget { sweeps: budget, residual })
}

/// Evaluates a fixed profile by solving `(I - discount * P) W = u` directly.
///
/// Same contract as [`evaluate_policies`]; used where many small evaluations need
/// values accurate to rounding.
pub fn evaluate_exact(model: &GameModel, profile: &StrategyProfile) -> Result<ValuePair> {
    profile.validate(model)?;
    let n = model.n_states();
    let d = model.discount();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut bx = DVector::<f64>::zeros(n);
    let mut be = DVector::<f64>::zeros(n);
    for s in 0..n {
        let c = on_path_cell(model, profile, s);
        for &(t, p) in &c.next {
            a[(s, t)] -= d * p;
        }
        bx[s] = c.payoff_x;
        be[s] = c.payoff_e;
    }
    let lu = a.lu();
    let (Some(wx), Some(we)) = (lu.solve(&bx), lu.solve(&be)) else {
        return Err(Error::InvalidModel("policy-evaluation system is singular (kernel not stochastic?)".into()));
    };
    Ok(ValuePair { w_x: wx.iter().copied().collect(), w_e: we.iter().copied().collect() })
}

/// Exact evaluation for small models, iterative with a tightened tolerance otherwise.
pub(crate) fn evaluate_accurate(model: &GameModel, profile: &StrategyProfile) -> Result<ValuePair> {
    if model.n_states() <= 400 {
        evaluate_exact(model, profile)
    } else {
        let tol = (DEFAULT_VALUE_TOL * (1.0 - model.discount())).max(1e-13 * (1.0 + model.payoff_bound()));
        evaluate_policies(model, profile, tol)
    }
}

/// Markov chain induced by the profile: row `s` is the kernel row at
/// `(s, leader(s), follower(s, leader(s)))`.
pub fn induced_kernel(model: &GameModel, profile: &StrategyProfile) -> Vec<Vec<(usize, f64)>> {
    (0..model.n_states()).map(|s| on_path_cell(model, profile, s).next.clone()).collect()
}
