//! Decision representations and their gradient-ascent training.
//!
//! Two representations are optimized against the same reparameterized rollout
//! machinery: a straight-line [`Plan`] (one action row per step, shared by
//! every rollout of an epoch) and a reactive [`PolicyParams`] network whose
//! actions are recomputed from each rollout's own realized states.

mod mlp;
mod optimizer;
mod rollout;
mod train;

pub use mlp::{declare_params, forward_node, GraphParams, PolicyParams};
pub use optimizer::{clip_global_norm, OptimizerKind, OptimizerState};
pub use rollout::{
    merged_return_batch, rollout_drp, rollout_return, rollout_slp, utility_and_gradient,
    RolloutBuffers, Trajectory, UtilityEval,
};
pub use train::{train, TraceRow, TrainOutcome, TrainSettings};

use crate::domains::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Slp,
    Drp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Slp => "slp",
            Method::Drp => "drp",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "slp" => Some(Method::Slp),
            "drp" => Some(Method::Drp),
            _ => None,
        }
    }
}

/// An open-loop action sequence, one row per step `0..=H`, stored flat
/// row-major. Rows are kept inside the domain's static action bounds by
/// projection after every optimizer step.
#[derive(Debug, Clone)]
pub struct Plan {
    pub action_dim: usize,
    pub values: Vec<f64>,
}

impl Plan {
    /// All-zero plan; zero actions are feasible in every domain.
    pub fn zeros(domain: &DomainSpec) -> Self {
        Plan {
            action_dim: domain.action_dim(),
            values: vec![0.0; (domain.horizon + 1) * domain.action_dim()],
        }
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.action_dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.action_dim..(t + 1) * self.action_dim]
    }

    /// Clamps every row into the domain's static bounds, in place.
    pub fn project_static(&mut self, domain: &DomainSpec) {
        for row in self.values.chunks_mut(self.action_dim) {
            domain.project_action_static(row);
        }
    }
}

/// The optimizable decision representation.
#[derive(Debug, Clone)]
pub enum Representation {
    Plan(Plan),
    Policy(PolicyParams),
}

impl Representation {
    /// Fresh representation for a domain: a zero plan, or a policy network
    /// initialized from `weights_seed` with the domain's output head and
    /// input normalization.
    pub fn init(domain: &DomainSpec, method: Method, hidden: &[usize], weights_seed: u64) -> Self {
        match method {
            Method::Slp => Representation::Plan(Plan::zeros(domain)),
            Method::Drp => Representation::Policy(PolicyParams::init(domain, hidden, weights_seed)),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Representation::Plan(_) => Method::Slp,
            Representation::Policy(_) => Method::Drp,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Representation::Plan(p) => &p.values,
            Representation::Policy(p) => &p.values,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Representation::Plan(p) => &mut p.values,
            Representation::Policy(p) => &mut p.values,
        }
    }

    /// Post-optimizer feasibility projection; a no-op for policies, whose
    /// heads enforce the bounds by construction.
    pub fn project_static(&mut self, domain: &DomainSpec) {
        if let Representation::Plan(p) = self {
            p.project_static(domain);
        }
    }
}
