use thiserror::Error;

/// Errors raised by the sampling, renewal and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trial budget of {cap} proposal draws exceeded")]
    TrialBudgetExceeded { cap: u64 },

    #[error("likelihood ratio is zero at a proposal draw; the proposal puts mass where the target vanishes")]
    ZeroWeight,

    #[error("observed likelihood ratio {observed} exceeds the declared bound {bound}")]
    RatioExceedsBound { observed: f64, bound: f64 },

    #[error("non-positive interarrival draw {0}")]
    NonpositiveInterarrival(f64),

    #[error("query time {t} lies past the trace horizon {horizon}")]
    QueryPastHorizon { t: f64, horizon: f64 },

    #[error("uniform component is degenerate (alpha = {alpha})")]
    DegenerateComponent { alpha: f64 },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("ratio needs at least two cycles")]
    SingleCycle,

    #[error("Newton iteration did not converge after {iterations} iterations (|grad|_inf = {grad_norm})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("Hessian is not negative definite at the reported mode")]
    IndefiniteHessian,

    #[error("design matrix is singular")]
    SingularDesign,

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
