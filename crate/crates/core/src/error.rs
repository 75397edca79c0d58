//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tape operation was evaluated outside its domain (log of a
    /// non-positive value, sqrt of a negative, division by zero).
    #[error("domain error in {op} at node {node}: {detail}")]
    MathDomain {
        op: &'static str,
        node: usize,
        detail: String,
    },

    /// A rollout produced a non-finite state component.
    #[error("non-finite state in rollout {rollout} at step {step}")]
    NonFiniteState { rollout: usize, step: usize },

    /// Training produced a non-finite utility or gradient.
    #[error("non-finite {what} at epoch {epoch}")]
    NonFiniteTraining { what: &'static str, epoch: usize },

    #[error("config error: {0}")]
    Config(String),

    /// A trained-parameter file does not match the requested experiment.
    #[error("params mismatch: {0}")]
    ParamsMismatch(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
