//! Water flow control over a network of reservoirs.
//!
//! Actions are per-edge discharge volumes along the downstream topology; a
//! terminal edge (`to: None`) leaves the system. Exponentially distributed
//! rainfall lands in every reservoir every step. Penalties apply outside the
//! safe band `[L_i, U_i]`, with overflow weighted much more heavily than
//! shortage.

use crate::autodiff::{Graph, NodeId};

/// A discharge route from one reservoir to a downstream one, or out of the
/// system when `to` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReservoirEdge {
    pub from: usize,
    pub to: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ReservoirParams {
    pub reservoirs: usize,
    pub edges: Vec<ReservoirEdge>,
    pub level_low: Vec<f64>,
    pub level_high: Vec<f64>,
    pub penalty_low: f64,
    pub penalty_high: f64,
    /// Rainfall rate; per-step rainfall has mean `1 / rain_rate`.
    pub rain_rate: f64,
}

impl Default for ReservoirParams {
    /// Linear chain 1 -> 2 -> 3 -> 4 -> 5 with the last reservoir discharging
    /// out of the system.
    fn default() -> Self {
        let n = 5;
        let mut edges: Vec<ReservoirEdge> = (0..n - 1)
            .map(|i| ReservoirEdge { from: i, to: Some(i + 1) })
            .collect();
        edges.push(ReservoirEdge { from: n - 1, to: None });
        ReservoirParams {
            reservoirs: n,
            edges,
            level_low: vec![20.0; n],
            level_high: vec![80.0; n],
            penalty_low: 5.0,
            penalty_high: 100.0,
            rain_rate: 0.1,
        }
    }
}

/// Rescale trigger: totals above `budget * (1 + 1e-12)` get scaled down.
const OUTFLOW_SLACK: f64 = 1.0 + 1e-12;
/// Rescale factor shrink, so the rescaled total lands strictly below the
/// budget despite rounding and the projection is exactly idempotent.
const OUTFLOW_SHRINK: f64 = 1.0 - 1e-14;

#[inline]
fn rmax0(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `s'_i = s_i - outflow_i + inflow_i + rain_i`.
pub fn step(p: &ReservoirParams, s: &[f64], a: &[f64], xi: &[f64], next: &mut Vec<f64>) {
    for i in 0..p.reservoirs {
        let mut v = s[i];
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.from == i {
                v -= a[e];
            }
        }
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.to == Some(i) {
                v += a[e];
            }
        }
        next.push(v + xi[i]);
    }
}

pub fn step_node(p: &ReservoirParams, g: &mut Graph, s: &[NodeId], a: &[NodeId], xi: &[f64]) -> Vec<NodeId> {
    let mut next = Vec::with_capacity(p.reservoirs);
    for i in 0..p.reservoirs {
        let mut v = s[i];
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.from == i {
                v = g.sub(v, a[e]);
            }
        }
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.to == Some(i) {
                v = g.add(v, a[e]);
            }
        }
        next.push(g.add_const(v, xi[i]));
    }
    next
}

/// Sum over reservoirs of the out-of-band penalty; zero inside `[L_i, U_i]`.
pub fn reward(p: &ReservoirParams, s: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.reservoirs {
        let over = rmax0(s[i] - p.level_high[i]);
        let under = rmax0(p.level_low[i] - s[i]);
        acc += -(over * p.penalty_high + under * p.penalty_low);
    }
    acc
}

pub fn reward_node(p: &ReservoirParams, g: &mut Graph, s: &[NodeId]) -> NodeId {
    let mut terms = Vec::with_capacity(p.reservoirs);
    for i in 0..p.reservoirs {
        let hi = g.constant(p.level_high[i]);
        let lo = g.constant(p.level_low[i]);
        let above = g.sub(s[i], hi);
        let over = g.relu(above);
        let below = g.sub(lo, s[i]);
        let under = g.relu(below);
        let over_pen = g.scale(over, p.penalty_high);
        let under_pen = g.scale(under, p.penalty_low);
        let total = g.add(over_pen, under_pen);
        terms.push(g.neg(total));
    }
    g.sum(&terms)
}

/// Scales each reservoir's outflows down when their sum exceeds the current
/// level, leaving a relative margin of 1e-14 so the result is exactly
/// idempotent and levels stay nonnegative.
pub fn rescale_outflows(p: &ReservoirParams, s: &[f64], a: &mut [f64]) {
    for i in 0..p.reservoirs {
        let mut total = 0.0;
        let mut any = false;
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.from == i {
                if any {
                    total += a[e];
                } else {
                    total = a[e];
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        let budget = rmax0(s[i]);
        if total > budget * OUTFLOW_SLACK {
            let f = budget / total * OUTFLOW_SHRINK;
            for (e, edge) in p.edges.iter().enumerate() {
                if edge.from == i {
                    a[e] *= f;
                }
            }
        }
    }
}

/// Tape counterpart of [`rescale_outflows`]; whether a row rescales is fixed
/// by the forward values, and gradients flow through the scale factor into
/// both the level and the raw actions.
pub fn rescale_outflows_node(p: &ReservoirParams, g: &mut Graph, s: &[NodeId], a: &mut [NodeId]) {
    for i in 0..p.reservoirs {
        let mut total: Option<NodeId> = None;
        for (e, edge) in p.edges.iter().enumerate() {
            if edge.from == i {
                total = Some(match total {
                    None => a[e],
                    Some(t) => g.add(t, a[e]),
                });
            }
        }
        let Some(total) = total else { continue };
        let budget_v = rmax0(g.value(s[i]));
        if g.value(total) > budget_v * OUTFLOW_SLACK {
            let budget = g.relu(s[i]);
            let ratio = g.div(budget, total).expect("total exceeds a nonnegative budget");
            let f = g.scale(ratio, OUTFLOW_SHRINK);
            for (e, edge) in p.edges.iter().enumerate() {
                if edge.from == i {
                    a[e] = g.mul(a[e], f);
                }
            }
        }
    }
}
