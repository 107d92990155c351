//! Error types shared across the crate.

/// Errors produced while building or evaluating homeomorphisms.
#[derive(Debug, thiserror::Error)]
pub enum HomeoError {
    /// An evaluation needed deeper tile nesting or a larger power than the
    /// budget allows.
    #[error("evaluation budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Sampled values failed to be strictly increasing beyond float noise.
    #[error("non-monotone samples detected: {0}")]
    NonMonotone(String),

    /// Breakpoint data that does not describe a valid increasing PL map.
    #[error("invalid piecewise-linear map: {0}")]
    InvalidMap(String),

    /// A metric or comparison was requested for maps that are not declared
    /// as commuting with a common period.
    #[error("maps are not declared period-commuting")]
    NotPeriodic,

    /// An operator precondition failed (disjointness, component
    /// preservation, domain membership, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A construction step could not be completed.
    #[error("construction failed: {0}")]
    Construction(String),

    /// The fixed-point iteration failed to converge within its budget.
    #[error("iteration did not converge: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, HomeoError>;
