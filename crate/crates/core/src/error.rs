use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("aliasing guard violated: grid intervals {grid} < 4 x modes {modes}")]
    AliasingGuard { modes: usize, grid: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown damping preset `{0}`")]
    UnknownPreset(String),

    #[error("damping support outside the domain: {0}")]
    SupportOutsideDomain(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("mode count {modes} exceeds the dense-matrix cap of {cap}")]
    TooManyModes { modes: usize, cap: usize },

    #[error("Newton iteration did not converge at t = {t} (residual {residual:e} after {iters} iterations)")]
    NewtonDivergence { t: f64, residual: f64, iters: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("linear solve failed: {0}")]
    Factorization(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Time at which a solver failure happened, if this is one.
    pub fn failure_time(&self) -> Option<f64> {
        match self {
            Error::NewtonDivergence { t, .. } | Error::NonFinite { t } => Some(*t),
            _ => None,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        self.failure_time().is_some()
    }
}

pub type Result<T> = std::result::Result<T, Error>;
