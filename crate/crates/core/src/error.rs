use thiserror::Error;

use crate::lattice::NodeId;

/// Errors raised by the lattice solvers and the optimization drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{function} is undefined at {argument} (q = {q})")]
    Domain {
        function: &'static str,
        argument: f64,
        q: f64,
    },

    #[error("step too coarse: |theta|*sqrt(dt) = {value} >= 1, refine the lattice")]
    StepSize { value: f64 },

    #[error("measure change is not equivalent at {node}: branch factor {factor} <= 0")]
    NotEquivalent { node: NodeId, factor: f64 },

    #[error("process shape mismatch: expected {expected} levels, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("lattice with {steps} steps exceeds the path-indexed cap of {cap}")]
    TooManySteps { steps: usize, cap: usize },

    #[error("nonpositive conditional mean {mean} at {node}")]
    NonPositiveMean { node: NodeId, mean: f64 },

    #[error("root finding failed at {node}: {reason}")]
    RootFinding { node: NodeId, reason: String },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },

    #[error("budget bracket not found after {expansions} expansions (target {target})")]
    Bracket { expansions: usize, target: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config is missing required key `{key}`")]
    MissingKey { key: &'static str },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Solver failures that more work (finer lattice, more iterations, a
    /// different budget) might cure, as opposed to invalid input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Bracket { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
