use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("Fock truncation risk: {0}")]
    TruncationRisk(String),

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires the {expected} phase but g = {g}")]
    WrongPhase { expected: &'static str, g: f64 },

    #[error("g = 1 is the exact critical point; analytic squeeze parameter diverges")]
    CriticalSingularity,

    #[error("labeling failed: {0}")]
    Labeling(String),

    #[error("search failed: {0}")]
    Search(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("frequency binning is ambiguous: {0}")]
    Binning(String),

    #[error("generator composition error: {0}")]
    Composition(String),

    #[error("singular term: {0}")]
    SingularTerm(String),

    #[error("integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("adaptive step underflow at t = {time} (dt = {dt:e})")]
    Stiffness { time: f64, dt: f64 },

    #[error("decay fit failed: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
