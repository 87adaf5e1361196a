use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("outcome {outcome} has zero probability under every hypothesis")]
    ImpossibleOutcome { outcome: usize },

    #[error("subsystem subset is empty")]
    EmptySubset,

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("solver did not converge: best duality gap {gap:.3e} after {iterations} iterations")]
    Convergence { gap: f64, iterations: usize },

    #[error("policy has no decision for a reachable belief state (mask {mask:?})")]
    PolicyGap { mask: Vec<bool> },

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("robustness bound violated: |diff({theta})| = {diff:.6e} exceeds {bound:.6e}")]
    BoundViolation { theta: f64, diff: f64, bound: f64 },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid { what, why: why.into() }
    }
}
