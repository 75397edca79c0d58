//! Reparameterized rollout engines.
//!
//! Every rollout is the deterministic chain `s_{t+1} = phi(s_t, a_t, xi_t)`
//! with per-step rewards summed into one return node. Three entry points:
//!
//! - [`merged_return_batch`] (and the [`rollout_slp`] / [`rollout_drp`]
//!   wrappers) build all `m` rollouts in one graph, merged at the batch
//!   statistics. This is the reference structure, used directly on small
//!   instances and by the gradient checks.
//! - [`rollout_return`] is the plain-`f64` twin, shared by evaluation and by
//!   the trainer's forward pass. It mirrors the tape ops exactly, so its
//!   returns match the tape's forward values bitwise.
//! - [`utility_and_gradient`] is the staged trainer engine: numeric forward
//!   pass for all returns, a small statistics tape for `d utility / d G_i`,
//!   then one tape per rollout backpropagated with that seed and folded into
//!   a parameter-indexed gradient. Mathematically identical to backpropagating
//!   the merged graph, but peak memory stays at one rollout's tape and chunks
//!   run in parallel. Chunking is fixed (not thread-count dependent), so
//!   results are bitwise reproducible on any machine.

use rayon::prelude::*;

use crate::autodiff::{Graph, NodeId};
use crate::domains::{DomainSpec, Scenario};
use crate::error::{Error, Result};
use crate::objectives::{
    entropic_diagnostics, mean_and_population_variance, ReturnBatch, UtilityConfig, UtilityKind,
};
use crate::planners::mlp::{declare_params, forward_node, GraphParams, PolicyParams};
use crate::planners::{Plan, Representation};

/// Number of gradient-accumulation chunks per epoch. Fixed so the fold order
/// (and hence the result bits) does not depend on the thread count.
const GRAD_CHUNKS: usize = 16;

/// Scratch space reused across numeric rollouts.
#[derive(Debug, Default)]
pub struct RolloutBuffers {
    state: Vec<f64>,
    next: Vec<f64>,
    action: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// One evaluated episode: states, executed actions and rewards per step.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

/// Where a rollout chain gets its actions.
enum GraphActions<'a> {
    /// Shared plan rows living at `first.. first + rows*dim`.
    Plan { first: NodeId, dim: usize },
    Policy { params: &'a PolicyParams, gp: GraphParams },
}

/// Builds one rollout's chain in `g` and returns its return node `G_i`.
fn chain_rollout(
    g: &mut Graph,
    domain: &DomainSpec,
    actions: &GraphActions,
    scenario: &Scenario,
    rollout: usize,
) -> Result<NodeId> {
    let mut s: Vec<NodeId> = domain.initial_state.iter().map(|&v| g.constant(v)).collect();
    let mut rewards = Vec::with_capacity(domain.horizon + 1);
    for t in 0..=domain.horizon {
        let mut a: Vec<NodeId> = match actions {
            GraphActions::Plan { first, dim } => {
                (0..*dim).map(|k| NodeId(first.0 + (t * dim + k) as u32)).collect()
            }
            GraphActions::Policy { params, gp } => forward_node(params, g, gp, &s),
        };
        domain.project_action_stateful_node(g, &s, &mut a);
        rewards.push(domain.reward_node(g, &s, &a));
        if t < domain.horizon {
            s = domain.step_node(g, &s, &a, scenario.at(rollout, t));
            for id in &s {
                if !g.value(*id).is_finite() {
                    return Err(Error::NonFiniteState { rollout, step: t + 1 });
                }
            }
        }
    }
    Ok(g.sum(&rewards))
}

/// All `m` rollouts of a representation in one graph. Returns the batch and
/// the first parameter variable (parameters are one contiguous range).
pub fn merged_return_batch(
    g: &mut Graph,
    domain: &DomainSpec,
    rep: &Representation,
    scenario: &Scenario,
) -> Result<(ReturnBatch, NodeId)> {
    let (actions, first) = match rep {
        Representation::Plan(p) => {
            let first = g.variable_range(&p.values);
            (GraphActions::Plan { first, dim: p.action_dim }, first)
        }
        Representation::Policy(p) => {
            let gp = declare_params(g, p);
            (GraphActions::Policy { params: p, gp }, gp.first)
        }
    };
    let mut returns = Vec::with_capacity(scenario.rollouts);
    for i in 0..scenario.rollouts {
        returns.push(chain_rollout(g, domain, &actions, scenario, i)?);
    }
    Ok((ReturnBatch::new(returns), first))
}

/// Straight-line-plan rollout batch: the same action row per step is shared
/// by all rollouts, so gradients accumulate over every scenario.
pub fn rollout_slp(
    g: &mut Graph,
    plan: &Plan,
    scenario: &Scenario,
    domain: &DomainSpec,
) -> Result<ReturnBatch> {
    let rep = Representation::Plan(plan.clone());
    Ok(merged_return_batch(g, domain, &rep, scenario)?.0)
}

/// Reactive-policy rollout batch: actions are recomputed from each rollout's
/// own realized states, so gradients reach the weights through every action
/// and every transition.
pub fn rollout_drp(
    g: &mut Graph,
    params: &PolicyParams,
    scenario: &Scenario,
    domain: &DomainSpec,
) -> Result<ReturnBatch> {
    let rep = Representation::Policy(params.clone());
    Ok(merged_return_batch(g, domain, &rep, scenario)?.0)
}

/// Plain numeric rollout of one scenario row; returns the episode return and
/// optionally captures the trajectory. No tape is built.
pub fn rollout_return(
    domain: &DomainSpec,
    rep: &Representation,
    scenario: &Scenario,
    rollout: usize,
    mut capture: Option<&mut Trajectory>,
    bufs: &mut RolloutBuffers,
) -> Result<f64> {
    bufs.state.clear();
    bufs.state.extend_from_slice(&domain.initial_state);
    let mut total = 0.0;
    for t in 0..=domain.horizon {
        match rep {
            Representation::Plan(p) => {
                bufs.action.clear();
                bufs.action.extend_from_slice(p.row(t));
            }
            Representation::Policy(p) => {
                p.forward(&bufs.state, &mut bufs.x, &mut bufs.y, &mut bufs.action);
            }
        }
        domain.project_action(&bufs.state, &mut bufs.action);
        let r = domain.reward(&bufs.state, &bufs.action);
        total += r;
        if let Some(traj) = capture.as_deref_mut() {
            traj.states.push(bufs.state.clone());
            traj.actions.push(bufs.action.clone());
            traj.rewards.push(r);
        }
        if t < domain.horizon {
            domain.step(&bufs.state, &bufs.action, scenario.at(rollout, t), &mut bufs.next);
            if bufs.next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { rollout, step: t + 1 });
            }
            std::mem::swap(&mut bufs.state, &mut bufs.next);
        }
    }
    Ok(total)
}

/// Utility value, batch statistics and the full parameter gradient for one
/// epoch's scenario, via the staged forward/backward described in the module
/// docs.
#[derive(Debug, Clone)]
pub struct UtilityEval {
    pub utility: f64,
    pub mean: f64,
    pub variance: f64,
    pub returns: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Entropic pre-shift exponent exceeded the overflow threshold.
    pub overflow_risk: bool,
}

pub fn utility_and_gradient(
    domain: &DomainSpec,
    rep: &Representation,
    scenario: &Scenario,
    utility: &UtilityConfig,
) -> Result<UtilityEval> {
    let m = scenario.rollouts;

    // Forward pass: all returns, numerically.
    let returns: Result<Vec<f64>> = (0..m)
        .into_par_iter()
        .map_init(RolloutBuffers::default, |bufs, i| {
            rollout_return(domain, rep, scenario, i, None, bufs)
        })
        .collect();
    let returns = returns?;

    // Statistics tape: utility over the returns, and its gradient seeds.
    let mut sg = Graph::new();
    let first = sg.variable_range(&returns);
    let batch = ReturnBatch::new((0..m).map(|i| NodeId(first.0 + i as u32)).collect());
    let unode = utility.build(&mut sg, &batch)?;
    let value = sg.value(unode);
    let seeds = sg.backward(unode).dense().to_vec();
    let (mean, variance) = mean_and_population_variance(&returns);
    let overflow_risk = utility.kind == UtilityKind::ExactEntropic
        && entropic_diagnostics(&returns, utility.beta).overflow_risk;

    // Backward pass: one tape per rollout, seeded with d utility / d G_i,
    // folded into fixed chunks.
    let n_params = rep.values().len();
    let chunk_len = m.div_ceil(GRAD_CHUNKS);
    let n_chunks = m.div_ceil(chunk_len);
    let chunk_grads: Result<Vec<Vec<f64>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n_params];
            let mut scratch = Vec::new();
            for i in c * chunk_len..((c + 1) * chunk_len).min(m) {
                let mut g = Graph::new();
                let (actions, _) = match rep {
                    Representation::Plan(p) => {
                        let first = g.variable_range(&p.values);
                        (GraphActions::Plan { first, dim: p.action_dim }, first)
                    }
                    Representation::Policy(p) => {
                        let gp = declare_params(&mut g, p);
                        (GraphActions::Policy { params: p, gp }, gp.first)
                    }
                };
                let gi = chain_rollout(&mut g, domain, &actions, scenario, i)?;
                debug_assert_eq!(
                    g.value(gi).to_bits(),
                    returns[i].to_bits(),
                    "numeric and tape forward diverged on rollout {i}"
                );
                g.backward_seeded_into(gi, seeds[i], &mut scratch, &mut acc);
            }
            Ok(acc)
        })
        .collect();

    let mut gradient = vec![0.0; n_params];
    for cg in chunk_grads? {
        for (t, v) in gradient.iter_mut().zip(cg) {
            *t += v;
        }
    }

    Ok(UtilityEval { utility: value, mean, variance, returns, gradient, overflow_risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainParams;
    use crate::planners::Method;
    use crate::rng;

    fn small_nav() -> DomainSpec {
        DomainSpec { horizon: 2, ..DomainSpec::navigation_default() }
    }

    #[test]
    fn horizon_zero_returns_are_identical_across_rollouts() {
        let mut domain = DomainSpec::navigation_default();
        domain.horizon = 0;
        let plan = Plan::zeros(&domain);
        let scenario = domain.sample_scenario(4, 8);
        let mut g = Graph::new();
        let batch = rollout_slp(&mut g, &plan, &scenario, &domain).unwrap();
        let first = g.value(batch.returns[0]);
        for &gi in &batch.returns {
            assert_eq!(g.value(gi), first);
        }
        // G = r(s0, a0) = -|s0 - goal|
        assert!((first - (-(145.0f64).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_makes_all_returns_equal() {
        let domain = small_nav();
        let mut plan = Plan::zeros(&domain);
        plan.values.iter_mut().enumerate().for_each(|(k, v)| *v = 0.3 + 0.1 * (k % 2) as f64);
        let scenario = Scenario::zeros(&domain, 5);
        let mut g = Graph::new();
        let batch = rollout_slp(&mut g, &plan, &scenario, &domain).unwrap();
        let first = g.value(batch.returns[0]).to_bits();
        for &gi in &batch.returns {
            assert_eq!(g.value(gi).to_bits(), first);
        }
    }

    #[test]
    fn two_step_navigation_return_matches_hand_computation() {
        let mut domain = DomainSpec::navigation_default();
        domain.horizon = 2;
        domain.initial_state = vec![0.0, 0.0];
        let goal = match &domain.params {
            DomainParams::Navigation(p) => p.goal,
            _ => unreachable!(),
        };
        let mut plan = Plan::zeros(&domain);
        plan.values = vec![1.0, 0.5, -0.25, 1.0, 0.0, 0.0];
        let scenario = Scenario::zeros(&domain, 1);
        let dist = |x: f64, y: f64| ((x - goal[0]).powi(2) + (y - goal[1]).powi(2)).sqrt();
        let expect = -dist(0.0, 0.0) - dist(1.0, 0.5) - dist(0.75, 1.5);
        let mut g = Graph::new();
        let batch = rollout_slp(&mut g, &plan, &scenario, &domain).unwrap();
        assert!((g.value(batch.returns[0]) - expect).abs() < 1e-12);
    }

    #[test]
    fn drp_horizon_zero_matches_policy_reward() {
        let mut domain = DomainSpec::navigation_default();
        domain.horizon = 0;
        let params = PolicyParams::init(&domain, &[4], 77);
        let scenario = domain.sample_scenario(3, 2);
        let mut g = Graph::new();
        let batch = rollout_drp(&mut g, &params, &scenario, &domain).unwrap();
        let (mut x, mut y, mut a) = (Vec::new(), Vec::new(), Vec::new());
        params.forward(&domain.initial_state, &mut x, &mut y, &mut a);
        let expect = domain.reward(&domain.initial_state, &a);
        for &gi in &batch.returns {
            assert_eq!(g.value(gi), expect);
        }
    }

    #[test]
    fn numeric_rollout_matches_tape_forward_bitwise() {
        for (domain, seed) in [
            (small_nav(), 1u64),
            (DomainSpec { horizon: 3, ..DomainSpec::reservoir_default() }, 2),
            (DomainSpec { horizon: 3, ..DomainSpec::hvac_default() }, 3),
        ] {
            for method in [Method::Slp, Method::Drp] {
                let mut rep = Representation::init(&domain, method, &[6, 4], rng::child(seed, 9));
                // nudge plan rows off zero so projections are exercised
                if let Representation::Plan(p) = &mut rep {
                    for (k, v) in p.values.iter_mut().enumerate() {
                        *v = 0.2 + 0.05 * (k % 3) as f64;
                    }
                    p.project_static(&domain);
                }
                let scenario = domain.sample_scenario(3, seed);
                let mut g = Graph::new();
                let (batch, _) = merged_return_batch(&mut g, &domain, &rep, &scenario).unwrap();
                let mut bufs = RolloutBuffers::default();
                for i in 0..3 {
                    let numeric =
                        rollout_return(&domain, &rep, &scenario, i, None, &mut bufs).unwrap();
                    assert_eq!(
                        numeric.to_bits(),
                        g.value(batch.returns[i]).to_bits(),
                        "{} {:?} rollout {i}",
                        domain.name(),
                        method
                    );
                }
            }
        }
    }

    #[test]
    fn staged_gradient_matches_merged_backward() {
        for (domain, seed) in [
            (small_nav(), 11u64),
            (DomainSpec { horizon: 2, ..DomainSpec::reservoir_default() }, 12),
            (DomainSpec { horizon: 2, ..DomainSpec::hvac_default() }, 13),
        ] {
            for method in [Method::Slp, Method::Drp] {
                let rep = Representation::init(&domain, method, &[5, 3], rng::child(seed, 21));
                let scenario = domain.sample_scenario(4, seed);
                let ucfg = UtilityConfig::mean_variance(-1.0);

                let staged = utility_and_gradient(&domain, &rep, &scenario, &ucfg).unwrap();

                let mut g = Graph::new();
                let (batch, _) = merged_return_batch(&mut g, &domain, &rep, &scenario).unwrap();
                let unode = ucfg.build(&mut g, &batch).unwrap();
                let merged = g.backward(unode);
                let merged_dense = merged.dense();

                assert!((staged.utility - g.value(unode)).abs() <= 1e-12);
                assert_eq!(staged.gradient.len(), merged_dense.len());
                for (k, (a, b)) in staged.gradient.iter().zip(merged_dense).enumerate() {
                    let tol = 1e-12 * b.abs().max(1.0);
                    assert!(
                        (a - b).abs() <= tol,
                        "{} {:?} param {k}: staged {a} vs merged {b}",
                        domain.name(),
                        method
                    );
                }
            }
        }
    }

    #[test]
    fn nonfinite_states_abort_with_step_index() {
        let mut domain = DomainSpec::hvac_default();
        domain.horizon = 4;
        // uncapped cubic dispersion plus a colossal inter-room gap overflows
        domain.initial_state = vec![1e150, 0.0, 0.0, 0.0, 0.0];
        if let DomainParams::Hvac(p) = &mut domain.params {
            p.dispersion_cap = f64::INFINITY;
        }
        let rep = Representation::init(&domain, Method::Slp, &[], 1);
        let scenario = domain.sample_scenario(1, 1);
        let mut bufs = RolloutBuffers::default();
        let err = rollout_return(&domain, &rep, &scenario, 0, None, &mut bufs).unwrap_err();
        match err {
            Error::NonFiniteState { rollout: 0, step: 1 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }
}
