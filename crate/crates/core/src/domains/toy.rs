//! One-step deterministic quadratic domain.
//!
//! Reward `-(a - target)^2` with a known optimum, used as a convergence
//! oracle for the trainers and as a zero-noise corner case elsewhere.

use crate::autodiff::{Graph, NodeId};

#[derive(Debug, Clone)]
pub struct QuadraticToyParams {
    pub target: f64,
}

pub fn reward(p: &QuadraticToyParams, a: &[f64]) -> f64 {
    let d = a[0] - p.target;
    -(d * d)
}

pub fn reward_node(p: &QuadraticToyParams, g: &mut Graph, a: &[NodeId]) -> NodeId {
    let t = g.constant(p.target);
    let d = g.sub(a[0], t);
    let sq = g.mul(d, d);
    g.neg(sq)
}
