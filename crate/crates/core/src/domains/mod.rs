//! Continuous state-action MDP domains with reparameterized transitions.
//!
//! A domain is a tuple of initial state, horizon, transition and reward. All
//! transition randomness is exogenous: a [`Scenario`] of pre-sampled noise
//! draws turns every rollout into a deterministic function of (initial state,
//! actions, noise), which is what lets gradients flow through the dynamics.
//!
//! Each domain implements its step and reward twice with mirrored operation
//! order: once over plain `f64` (used by evaluation and by the forward pass of
//! the staged trainer) and once over tape nodes (used to differentiate). A
//! crate-level check asserts the two agree bitwise on shared scenarios.

mod hvac;
mod navigation;
mod reservoir;
mod toy;

pub use hvac::HvacParams;
pub use navigation::{crossing_length, NavigationParams};
pub use reservoir::{ReservoirEdge, ReservoirParams};
pub use toy::QuadraticToyParams;

use crate::autodiff::{Graph, NodeId};
use crate::rng;

/// A batch of exogenous noise draws: `rollouts x (horizon+1) x dims`,
/// regenerable bitwise from its seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub rollouts: usize,
    pub steps: usize,
    pub dims: usize,
    pub seed: u64,
    noise: Vec<f64>,
}

impl Scenario {
    /// Noise vector for rollout `i` at step `t`.
    #[inline]
    pub fn at(&self, rollout: usize, step: usize) -> &[f64] {
        let base = (rollout * self.steps + step) * self.dims;
        &self.noise[base..base + self.dims]
    }

    pub fn raw(&self) -> &[f64] {
        &self.noise
    }

    /// All-zero noise with the shape the domain expects; turns any rollout
    /// into its deterministic skeleton.
    pub fn zeros(domain: &DomainSpec, m: usize) -> Scenario {
        let steps = domain.horizon + 1;
        let dims = domain.noise_dims_per_step();
        Scenario { rollouts: m, steps, dims, seed: 0, noise: vec![0.0; m * steps * dims] }
    }
}

/// How noise entries are distributed.
#[derive(Debug, Clone, Copy, PartialEq)]
enum NoiseLaw {
    StandardNormal,
    Exponential { rate: f64 },
}

/// Output squashing applied to the policy network per domain. Each head keeps
/// a live gradient across its whole range and lands inside the static action
/// bounds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionHead {
    /// `bound * tanh(z)` per coordinate: actions in `[-bound, bound]`.
    TanhBound(f64),
    /// `bound * sigmoid(z)` per coordinate: actions in `(0, bound)`.
    ScaledSigmoid(f64),
    /// `scale * softplus(z)` per coordinate: nonnegative, unbounded above.
    ScaledSoftplus(f64),
    /// Raw network output.
    Linear,
}

/// Domain-specific parameter records.
#[derive(Debug, Clone)]
pub enum DomainParams {
    Navigation(NavigationParams),
    Reservoir(ReservoirParams),
    Hvac(HvacParams),
    QuadraticToy(QuadraticToyParams),
}

/// A fully specified planning domain: transition, reward, noise law, action
/// constraints and horizon.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    /// Number of transition steps; actions are indexed `0..=horizon`.
    pub horizon: usize,
    pub initial_state: Vec<f64>,
    /// Constant added to every per-step reward. Utilities shift by
    /// `(horizon+1) * offset` and gradients are unaffected.
    pub reward_offset: f64,
    pub params: DomainParams,
}

impl DomainSpec {
    pub fn navigation_default() -> Self {
        DomainSpec {
            horizon: 20,
            initial_state: vec![0.0, 0.0],
            reward_offset: 0.0,
            params: DomainParams::Navigation(NavigationParams::default()),
        }
    }

    pub fn reservoir_default() -> Self {
        let params = ReservoirParams::default();
        DomainSpec {
            horizon: 50,
            initial_state: vec![45.0; params.reservoirs],
            reward_offset: 0.0,
            params: DomainParams::Reservoir(params),
        }
    }

    pub fn hvac_default() -> Self {
        let params = HvacParams::default();
        DomainSpec {
            horizon: 125,
            initial_state: vec![20.0; params.rooms],
            reward_offset: 0.0,
            params: DomainParams::Hvac(params),
        }
    }

    /// One-step deterministic domain with reward `-(a - target)^2`; the
    /// analytic optimum makes it a convergence oracle for the trainers.
    pub fn quadratic_toy() -> Self {
        DomainSpec {
            horizon: 0,
            initial_state: vec![0.0],
            reward_offset: 0.0,
            params: DomainParams::QuadraticToy(QuadraticToyParams { target: 3.0 }),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "navigation" => Some(Self::navigation_default()),
            "reservoir" => Some(Self::reservoir_default()),
            "hvac" => Some(Self::hvac_default()),
            "toy-quadratic" => Some(Self::quadratic_toy()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.params {
            DomainParams::Navigation(_) => "navigation",
            DomainParams::Reservoir(_) => "reservoir",
            DomainParams::Hvac(_) => "hvac",
            DomainParams::QuadraticToy(_) => "toy-quadratic",
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.params {
            DomainParams::Navigation(_) => 2,
            DomainParams::Reservoir(p) => p.reservoirs,
            DomainParams::Hvac(p) => p.rooms,
            DomainParams::QuadraticToy(_) => 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        match &self.params {
            DomainParams::Navigation(_) => 2,
            DomainParams::Reservoir(p) => p.edges.len(),
            DomainParams::Hvac(p) => p.rooms,
            DomainParams::QuadraticToy(_) => 1,
        }
    }

    pub fn noise_dims_per_step(&self) -> usize {
        match &self.params {
            DomainParams::Navigation(_) => 2,
            DomainParams::Reservoir(p) => p.reservoirs,
            // Actuation per room, dispersion per adjacent pair, one shared
            // outdoor draw.
            DomainParams::Hvac(p) => p.rooms + p.edges.len() + 1,
            DomainParams::QuadraticToy(_) => 1,
        }
    }

    fn noise_law(&self) -> NoiseLaw {
        match &self.params {
            DomainParams::Reservoir(p) => NoiseLaw::Exponential { rate: p.rain_rate },
            _ => NoiseLaw::StandardNormal,
        }
    }

    pub fn action_head(&self) -> ActionHead {
        match &self.params {
            DomainParams::Navigation(p) => ActionHead::TanhBound(p.action_bound),
            // discharges scaled to twice the mean rainfall, the right order
            // of magnitude for a balanced network
            DomainParams::Reservoir(p) => ActionHead::ScaledSoftplus(2.0 / p.rain_rate),
            DomainParams::Hvac(p) => ActionHead::ScaledSigmoid(p.action_max),
            DomainParams::QuadraticToy(_) => ActionHead::Linear,
        }
    }

    /// Affine input normalization for policy networks: states enter as
    /// `(s - center) / scale`. Unnormalized states (levels near 80,
    /// temperatures near 20) saturate randomly initialized layers.
    pub fn policy_input_center(&self) -> Vec<f64> {
        self.initial_state.clone()
    }

    pub fn policy_input_scale(&self) -> f64 {
        match &self.params {
            DomainParams::Navigation(_) => 10.0,
            DomainParams::Reservoir(_) => 50.0,
            DomainParams::Hvac(_) => 10.0,
            DomainParams::QuadraticToy(_) => 1.0,
        }
    }

    /// Draws the full noise array for `m` rollouts. Every entry is a pure
    /// function of `(seed, rollout, step, dim)`, so regeneration is bitwise
    /// and rollouts could be filled in any order.
    pub fn sample_scenario(&self, m: usize, seed: u64) -> Scenario {
        assert!(m >= 1, "at least one rollout");
        let steps = self.horizon + 1;
        let dims = self.noise_dims_per_step();
        let law = self.noise_law();
        let mut noise = Vec::with_capacity(m * steps * dims);
        for i in 0..m {
            let key_i = rng::child(seed, i as u64);
            for t in 0..steps {
                let key_it = rng::child(key_i, t as u64);
                for d in 0..dims {
                    noise.push(match law {
                        NoiseLaw::StandardNormal => rng::normal(key_it, d as u64),
                        NoiseLaw::Exponential { rate } => rng::exponential(key_it, d as u64, rate),
                    });
                }
            }
        }
        Scenario { rollouts: m, steps, dims, seed, noise }
    }

    /// The `rollout`-th row of [`DomainSpec::sample_scenario`] under the same
    /// seed, as a standalone one-rollout scenario. Episodes can therefore be
    /// generated independently, in any order, with identical draws.
    pub fn sample_scenario_rollout(&self, seed: u64, rollout: usize) -> Scenario {
        let steps = self.horizon + 1;
        let dims = self.noise_dims_per_step();
        let law = self.noise_law();
        let key_i = rng::child(seed, rollout as u64);
        let mut noise = Vec::with_capacity(steps * dims);
        for t in 0..steps {
            let key_it = rng::child(key_i, t as u64);
            for d in 0..dims {
                noise.push(match law {
                    NoiseLaw::StandardNormal => rng::normal(key_it, d as u64),
                    NoiseLaw::Exponential { rate } => rng::exponential(key_it, d as u64, rate),
                });
            }
        }
        Scenario { rollouts: 1, steps, dims, seed, noise }
    }

    /// Numeric transition; `next` is cleared and filled with the next state.
    pub fn step(&self, s: &[f64], a: &[f64], xi: &[f64], next: &mut Vec<f64>) {
        next.clear();
        match &self.params {
            DomainParams::Navigation(p) => navigation::step(p, s, a, xi, next),
            DomainParams::Reservoir(p) => reservoir::step(p, s, a, xi, next),
            DomainParams::Hvac(p) => hvac::step(p, s, a, xi, next),
            DomainParams::QuadraticToy(_) => next.extend_from_slice(s),
        }
    }

    /// Numeric reward `r(s, a)`.
    pub fn reward(&self, s: &[f64], a: &[f64]) -> f64 {
        let base = match &self.params {
            DomainParams::Navigation(p) => navigation::reward(p, s),
            DomainParams::Reservoir(p) => reservoir::reward(p, s),
            DomainParams::Hvac(p) => hvac::reward(p, s, a),
            DomainParams::QuadraticToy(p) => toy::reward(p, a),
        };
        if self.reward_offset != 0.0 {
            base + self.reward_offset
        } else {
            base
        }
    }

    /// Tape transition mirroring [`DomainSpec::step`] operation for operation.
    pub fn step_node(&self, g: &mut Graph, s: &[NodeId], a: &[NodeId], xi: &[f64]) -> Vec<NodeId> {
        match &self.params {
            DomainParams::Navigation(p) => navigation::step_node(p, g, s, a, xi),
            DomainParams::Reservoir(p) => reservoir::step_node(p, g, s, a, xi),
            DomainParams::Hvac(p) => hvac::step_node(p, g, s, a, xi),
            DomainParams::QuadraticToy(_) => s.to_vec(),
        }
    }

    /// Tape reward mirroring [`DomainSpec::reward`].
    pub fn reward_node(&self, g: &mut Graph, s: &[NodeId], a: &[NodeId]) -> NodeId {
        let base = match &self.params {
            DomainParams::Navigation(p) => navigation::reward_node(p, g, s),
            DomainParams::Reservoir(p) => reservoir::reward_node(p, g, s),
            DomainParams::Hvac(p) => hvac::reward_node(p, g, s, a),
            DomainParams::QuadraticToy(p) => toy::reward_node(p, g, a),
        };
        if self.reward_offset != 0.0 {
            g.add_const(base, self.reward_offset)
        } else {
            base
        }
    }

    /// Projects a raw action onto the feasible set at state `s`, in place.
    /// Clamps are applied first, then the reservoir outflow budget; the
    /// result is exactly idempotent.
    pub fn project_action(&self, s: &[f64], a: &mut [f64]) {
        self.project_action_static(a);
        self.project_action_stateful(s, a);
    }

    /// The state-independent part of the projection (bound clamps). This is
    /// what keeps plan rows feasible between optimizer steps.
    pub fn project_action_static(&self, a: &mut [f64]) {
        match &self.params {
            DomainParams::Navigation(p) => {
                for v in a.iter_mut() {
                    *v = v.clamp(-p.action_bound, p.action_bound);
                }
            }
            DomainParams::Reservoir(_) => {
                for v in a.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            DomainParams::Hvac(p) => {
                for v in a.iter_mut() {
                    *v = v.clamp(0.0, p.action_max);
                }
            }
            DomainParams::QuadraticToy(_) => {}
        }
    }

    /// The state-dependent part of the projection: the reservoir per-source
    /// outflow budget. No-op for the other domains.
    pub fn project_action_stateful(&self, s: &[f64], a: &mut [f64]) {
        if let DomainParams::Reservoir(p) = &self.params {
            reservoir::rescale_outflows(p, s, a);
        }
    }

    /// In-tape counterpart of [`DomainSpec::project_action_stateful`]; the
    /// branch (rescale or not) is fixed by the values at construction time and
    /// gradients flow through the selected branch.
    pub fn project_action_stateful_node(&self, g: &mut Graph, s: &[NodeId], a: &mut Vec<NodeId>) {
        if let DomainParams::Reservoir(p) = &self.params {
            reservoir::rescale_outflows_node(p, g, s, a);
        }
    }

    /// Counts constraint incidents in one step: zone contact for Navigation,
    /// out-of-band reservoirs, rooms at or below the cold threshold. Returns
    /// `(incidents, opportunities)`.
    pub fn incidents(&self, s: &[f64], a: &[f64]) -> (u64, u64) {
        match &self.params {
            DomainParams::Navigation(p) => {
                let c = crossing_length(s, a, &p.zone_lo, &p.zone_hi);
                ((c > 0.0) as u64, 1)
            }
            DomainParams::Reservoir(p) => {
                let mut n = 0;
                for i in 0..p.reservoirs {
                    if s[i] <= p.level_low[i] || s[i] >= p.level_high[i] {
                        n += 1;
                    }
                }
                (n, p.reservoirs as u64)
            }
            DomainParams::Hvac(p) => {
                let n = s.iter().filter(|&&t| t <= p.cold_threshold).count() as u64;
                (n, p.rooms as u64)
            }
            DomainParams::QuadraticToy(_) => (0, 1),
        }
    }
}
