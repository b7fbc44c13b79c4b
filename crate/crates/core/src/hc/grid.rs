use std::collections::BTreeMap;

use crate::error::Result;
use crate::game::{Cell, GameModel, StateSpec, ViabilitySet};

use super::params::HcParams;

/// Number of leader actions feasible at state `s`: the grid prefix with
/// `h(x) <= f(s, e_max) - s_min`, never empty.
pub fn feasible_extractions(params: &HcParams, s: f64) -> usize {
    let cap = params.f(s, params.grid.e.hi) - params.s_min + 1e-12;
    let xs = params.grid.x.points();
    xs.iter().take_while(|&&x| params.h(x) <= cap).count().max(1)
}

/// Extraction actually realized at `(s, x, e)`: the drain cannot take the state below
/// the bottom of the grid.
pub fn realized_extraction(params: &HcParams, s: f64, x: f64, e: f64) -> f64 {
    let room = params.f(s, e) - params.grid.s.lo;
    if params.h(x) <= room || params.h_x() <= 0.0 {
        x
    } else {
        (room / params.h_x()).max(0.0)
    }
}

/// Grid game for the hegemon/client model.
///
/// States are the `s` grid points, leader actions the feasible prefix of the `x` grid,
/// efforts the `e` grid. The kernel moves to the grid point nearest `f(s,e) - h(x)`,
/// clamped to the grid; at the bottom the realized extraction is capped by what is
/// there to drain. States below `s_min` are absorbing collapse states with the single
/// action `(x, e) = (x_lo, e_lo)` and its primitive payoffs.
///
/// The viability set is `{s >= s_min}`; the safe action at each viable state is the
/// smallest extraction keeping even the lowest effort inside it, attached only when
/// every viable state has one. The initial state is the top of the grid.
pub fn build_hc_model(params: &HcParams) -> Result<(GameModel, ViabilitySet)> {
    params.shape_check()?;
    let gs = params.grid.s;
    let xs = params.grid.x.points();
    let es = params.grid.e.points();
    let first = gs.first_at_least(params.s_min).unwrap_or(gs.n - 1);
    let states: Vec<StateSpec> = gs
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            if i < first {
                let (x, e) = (xs[0], es[0]);
                let cell = Cell::point(params.leader_payoff(s, x, e), params.follower_payoff(s, x, e), i);
                return StateSpec { label: s, leader_actions: vec![x], efforts: vec![e], cells: vec![cell] };
            }
            let nx = feasible_extractions(params, s);
            let mut cells = Vec::with_capacity(nx * es.len());
            for &x in &xs[..nx] {
                for &e in &es {
                    let xr = realized_extraction(params, s, x, e);
                    let next = gs.nearest(params.next_state(s, xr, e));
                    cells.push(Cell::point(params.leader_payoff(s, xr, e), params.follower_payoff(s, xr, e), next));
                }
            }
            StateSpec { label: s, leader_actions: xs[..nx].to_vec(), efforts: es.clone(), cells }
        })
        .collect();
    let model = GameModel::new(states, params.discount, None, Some(gs.n - 1))?;
    let viability = ViabilitySet::new(gs.n, first..gs.n)?;
    let safe: BTreeMap<usize, usize> = (first..gs.n)
        .filter_map(|i| {
            (0..model.n_leader(i)).find(|&x| model.cell(i, x, 0).next[0].0 >= first).map(|x| (i, x))
        })
        .collect();
    let viability = if safe.len() == viability.len() { viability.with_safe_actions(&model, safe)? } else { viability };
    Ok((model, viability))
}
