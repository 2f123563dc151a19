//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the supported range of a routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketing search never saw the function change sign.
    #[error("no sign change while scanning [{lo}, {hi}] ({context})")]
    NoSignChange { lo: f64, hi: f64, context: String },

    /// An iteration hit its budget before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A discretized region contains no nodes.
    #[error("empty region: {0}")]
    EmptyRegion(String),

    /// The inside mask splits into more than one 4-connected component.
    #[error("mask is not 4-connected ({components} components)")]
    DisconnectedMask { components: usize },

    /// A configuration value is structurally invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
