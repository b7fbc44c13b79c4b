use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::interp::ValueMap;
use super::params::HcParams;

/// Second-order terms with `|G_e|` below this count as degenerate.
pub const SOC_EPS: f64 = 1e-8;

const BISECT_ITERS: usize = 200;

/// `G(e) = -phi'(e) + delta * W'(s') * f_e(s, e)`, `s' = f(s, e) - h(x)`.
fn g(p: &HcParams, w: &ValueMap, s: f64, x: f64, e: f64) -> f64 {
    -p.phi_e(e) + p.discount * w.slope(p.next_state(s, x, e)) * p.f_e()
}

/// `dG/de`.
fn g_e(p: &HcParams, w: &ValueMap, s: f64, x: f64, e: f64) -> f64 {
    let sn = p.next_state(s, x, e);
    -p.phi_ee() + p.discount * (w.curvature(sn) * p.f_e() * p.f_e() + w.slope(sn) * p.f_ee())
}

/// The follower objective up to terms constant in `e`.
fn follower_objective(p: &HcParams, w: &ValueMap, s: f64, x: f64, e: f64) -> f64 {
    -p.phi(e) + p.discount * w.value(p.next_state(s, x, e))
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Continuous follower response at `(s, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerOptimum {
    pub effort: f64,
    /// Strictly inside the effort range with a sign change of the FOC around it.
    pub interior: bool,
    /// `dG/de` at the optimum.
    pub soc: f64,
}

/// Maximizes the follower objective over `[e_lo, e_hi]` against the continuation map
/// `w_c`: a scan on a refined effort grid locates the best point, then the FOC is
/// bisected inside the neighbouring bracket.
pub fn follower_optimum(p: &HcParams, w_c: &ValueMap, s: f64, x: f64) -> FollowerOptimum {
    let ge = p.grid.e;
    let n = (4 * (ge.n - 1)).max(64);
    let step = (ge.hi - ge.lo) / n as f64;
    let at = |j: usize| if j == n { ge.hi } else { ge.lo + j as f64 * step };
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for j in 0..=n {
        let v = follower_objective(p, w_c, s, x, at(j));
        if j == 0 || v > best_v + 1e-15 * (1.0 + best_v.abs()) {
            best = j;
            best_v = v;
        }
    }
    let lo = at(best.saturating_sub(1));
    let hi = at((best + 1).min(n));
    let (glo, ghi) = (g(p, w_c, s, x, lo), g(p, w_c, s, x, hi));
    let effort = if glo > 0.0 && ghi < 0.0 {
        bisect(lo, hi, |e| g(p, w_c, s, x, e))
    } else if best == 0 && glo <= 0.0 {
        ge.lo
    } else if best == n && ghi >= 0.0 {
        ge.hi
    } else {
        at(best)
    };
    let interior = effort > ge.lo && effort < ge.hi && glo > 0.0 && ghi < 0.0;
    FollowerOptimum { effort, interior, soc: g_e(p, w_c, s, x, effort) }
}

/// Root of the follower FOC on the branch through `e0`, found by widening a bracket
/// around `e0`; used to track the response under small changes of `x`.
fn follower_root_near(p: &HcParams, w_c: &ValueMap, s: f64, x: f64, e0: f64) -> Option<f64> {
    let ge = p.grid.e;
    let mut r = ge.step() / 64.0;
    for _ in 0..12 {
        let lo = (e0 - r).max(ge.lo);
        let hi = (e0 + r).min(ge.hi);
        if g(p, w_c, s, x, lo) > 0.0 && g(p, w_c, s, x, hi) < 0.0 {
            return Some(bisect(lo, hi, |e| g(p, w_c, s, x, e)));
        }
        r *= 2.0;
    }
    None
}

/// Effort on the effort grid maximizing the follower objective against `w_c`.
pub fn grid_effort_optimum(p: &HcParams, w_c: &ValueMap, s: f64, x: f64) -> (usize, f64) {
    let es = p.grid.e.points();
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &e) in es.iter().enumerate() {
        let v = follower_objective(p, w_c, s, x, e);
        if j == 0 || v > best.1 + 1e-15 * (1.0 + best.1.abs()) {
            best = (j, v);
        }
    }
    (best.0, es[best.0])
}

/// `-phi'(e) + delta * W_c'(s') * f_e(s, e)` with `s' = f(s, e) - h(x)`.
pub fn follower_foc_residual(p: &HcParams, w_c: &ValueMap, s: f64, x: f64, e: f64) -> Result<f64> {
    let ge = p.grid.e;
    if !(e > ge.lo && e < ge.hi) {
        return Err(Error::Boundary("effort"));
    }
    Ok(g(p, w_c, s, x, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub effort: f64,
    /// Implicit-function value of `de*/dx`.
    pub ift: f64,
    /// Central difference `(e*(x + delta) - e*(x - delta)) / (2 delta)`.
    pub finite_difference: f64,
    /// The same with `delta / 2`.
    pub finite_difference_half: f64,
    pub delta: f64,
    /// `dG/de` at the optimum.
    pub soc: f64,
    pub degenerate: bool,
}

/// Default finite-difference step for [`effort_sensitivity`].
pub const FD_STEP: f64 = 1e-4;

/// `de*/dx` at `(s, x)` from the implicit function theorem applied to the follower FOC,
/// together with central finite differences of the re-solved response.
///
/// With `G(e, x) = -phi'(e) + delta W'(f(s,e) - h(x)) f_e`:
/// `de*/dx = -delta W'' f_e h' / (phi'' - delta W'' f_e^2 - delta W' f_ee)`.
pub fn effort_sensitivity(p: &HcParams, w_c: &ValueMap, s: f64, x: f64) -> Result<Sensitivity> {
    effort_sensitivity_with(p, w_c, s, x, FD_STEP)
}

pub fn effort_sensitivity_with(p: &HcParams, w_c: &ValueMap, s: f64, x: f64, delta: f64) -> Result<Sensitivity> {
    let opt = follower_optimum(p, w_c, s, x);
    if !opt.interior {
        return Err(Error::Boundary("effort"));
    }
    let e = opt.effort;
    let sn = p.next_state(s, x, e);
    let num = -p.discount * w_c.curvature(sn) * p.f_e() * p.h_x();
    let den = p.phi_ee() - p.discount * w_c.curvature(sn) * p.f_e().powi(2) - p.discount * w_c.slope(sn) * p.f_ee();
    let soc = opt.soc;
    let degenerate = soc > -SOC_EPS;
    let ift = if den == 0.0 { f64::NAN } else { num / den };
    let fd = |d: f64| -> f64 {
        match (follower_root_near(p, w_c, s, x + d, e), follower_root_near(p, w_c, s, x - d, e)) {
            (Some(a), Some(b)) => (a - b) / (2.0 * d),
            _ => f64::NAN,
        }
    };
    Ok(Sensitivity {
        effort: e,
        ift,
        finite_difference: fd(delta),
        finite_difference_half: fd(0.5 * delta),
        delta,
        soc,
        degenerate,
    })
}

/// `de*/ds` from the implicit function theorem; `None` at a corner response.
pub fn effort_state_sensitivity(p: &HcParams, w_c: &ValueMap, s: f64, x: f64) -> Option<f64> {
    let opt = follower_optimum(p, w_c, s, x);
    if !opt.interior || opt.soc == 0.0 {
        return None;
    }
    let sn = p.next_state(s, x, opt.effort);
    let g_s = p.discount * w_c.curvature(sn) * p.f_s(s) * p.f_e();
    Some(-g_s / opt.soc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderFoc {
    /// `pi'(x) - delta V'(s') (h'(x) - f_e de*/dx) - mu (h'(x) - f_e de*/dx)`.
    pub residual: f64,
    /// The residual with the effort-cost channel `- k_e de*/dx` added.
    pub k_corrected: f64,
    /// `mu * (f(s, e*) - h(x) - s_min)`.
    pub slackness: f64,
    pub effort: f64,
    pub de_dx: f64,
}

/// Effort response and its `x`-derivative; a corner response is locally constant.
fn effort_response(p: &HcParams, w_c: &ValueMap, s: f64, x: f64) -> (f64, f64) {
    match effort_sensitivity(p, w_c, s, x) {
        Ok(sens) => (sens.effort, sens.ift),
        Err(_) => (follower_optimum(p, w_c, s, x).effort, 0.0),
    }
}

/// Leader first-order condition at `(s, x)` for multiplier `mu`; `x` must lie strictly
/// inside the extraction grid.
pub fn leader_foc_residual(p: &HcParams, v_h: &ValueMap, w_c: &ValueMap, s: f64, x: f64, mu: f64) -> Result<LeaderFoc> {
    let gx = p.grid.x;
    if !(x > gx.lo && x < gx.hi) {
        return Err(Error::Boundary("extraction"));
    }
    let (e, de_dx) = effort_response(p, w_c, s, x);
    let wedge = p.h_x() - p.f_e() * de_dx;
    let sn = p.next_state(s, x, e);
    let residual = p.pi_x(x) - p.discount * v_h.slope(sn) * wedge - mu * wedge;
    Ok(LeaderFoc {
        residual,
        k_corrected: residual - p.k_e() * de_dx,
        slackness: mu * (sn - p.s_min),
        effort: e,
        de_dx,
    })
}

/// Multiplier solving the leader FOC at `(s, x)`.
pub fn leader_multiplier(p: &HcParams, v_h: &ValueMap, w_c: &ValueMap, s: f64, x: f64) -> Result<f64> {
    let (e, de_dx) = effort_response(p, w_c, s, x);
    let wedge = p.h_x() - p.f_e() * de_dx;
    if wedge.abs() < SOC_EPS {
        return Err(Error::DegenerateSoc(wedge));
    }
    let sn = p.next_state(s, x, e);
    Ok((p.pi_x(x) - p.discount * v_h.slope(sn) * wedge) / wedge)
}

/// Leader objective with the continuous follower response.
pub fn leader_objective(p: &HcParams, v_h: &ValueMap, w_c: &ValueMap, s: f64, x: f64) -> (f64, f64, f64) {
    let e = follower_optimum(p, w_c, s, x).effort;
    let sn = p.next_state(s, x, e);
    (p.leader_payoff(s, x, e) + p.discount * v_h.value(sn), e, sn)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub index: usize,
    pub extraction: f64,
    pub effort: f64,
    /// `f(s, e*) - h(x) - s_min`.
    pub slack: f64,
    /// Not at either end of the extraction grid, and the next grid point is feasible.
    pub interior: bool,
}

/// Extraction on the grid maximizing the leader objective at `s`, subject to
/// `f(s, e*(s, x)) - h(x) >= s_min`.
pub fn leader_grid_optimum(p: &HcParams, v_h: &ValueMap, w_c: &ValueMap, s: f64) -> Option<GridOptimum> {
    let xs = p.grid.x.points();
    let evals: Vec<(f64, f64, f64)> = xs.iter().map(|&x| leader_objective(p, v_h, w_c, s, x)).collect();
    let feasible = |j: usize| evals[j].2 >= p.s_min - 1e-12;
    let mut best: Option<usize> = None;
    for j in (0..xs.len()).filter(|&j| feasible(j)) {
        if best.map_or(true, |b| evals[j].0 > evals[b].0 + 1e-15 * (1.0 + evals[b].0.abs())) {
            best = Some(j);
        }
    }
    let j = best?;
    let interior = j > 0 && j + 1 < xs.len() && feasible(j + 1);
    Some(GridOptimum { index: j, extraction: xs[j], effort: evals[j].1, slack: evals[j].2 - p.s_min, interior })
}
