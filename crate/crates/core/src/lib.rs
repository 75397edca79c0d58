//! Risk-aware planning for continuous state-action MDPs.
//!
//! Plans and reactive policies are optimized by backpropagating through
//! reparameterized stochastic rollouts: all randomness is drawn up front as a
//! scenario of exogenous noise, the rollout becomes a deterministic
//! differentiable function of the decision variables, and a risk objective
//! (mean-variance or entropic utility of the return distribution) is ascended
//! by gradient steps.
//!
//! Module layout:
//! - [`autodiff`]: scalar reverse-mode tape sufficient to differentiate
//!   batched rollouts end to end.
//! - [`domains`]: the CSA-MDP abstraction plus the Navigation, Reservoir and
//!   HVAC benchmark domains with reparameterized transitions.
//! - [`objectives`]: differentiable risk objectives over per-rollout returns.
//! - [`planners`]: straight-line plan and deep-reactive-policy rollout engines
//!   and their gradient-ascent training loops.
//! - [`eval`]: post-training rollout evaluation, summary statistics, bootstrap
//!   variance comparison and risk-parameter sweeps.
//! - [`config`]: experiment configuration (flat key-value file format) with
//!   per-domain defaults.

pub mod autodiff;
pub mod checks;
pub mod config;
pub mod domains;
pub mod error;
pub mod eval;
pub mod objectives;
pub mod params_io;
pub mod planners;
pub mod rng;

pub use error::{Error, Result};
