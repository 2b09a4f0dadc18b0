use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a documented invariant.
    #[error("validation error at {location}: {message}")]
    Validation { location: String, message: String },

    /// Structured input (catalog, config, trace) could not be parsed.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("steady state did not converge{context} after {iterations} iterations (last residual {residual:.3e})")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("velocity quadrature did not converge: achieved relative error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("fit precondition failed: {0}")]
    FitPrecondition(String),

    #[error("fit Jacobian is rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("fit diverged: residual grew for {steps} consecutive damped steps")]
    Divergence { steps: usize },

    #[error("no dip found near {center_thz} THz: {reason}")]
    DipNotFound { center_thz: f64, reason: String },

    #[error("{failed} of {total} scan points failed; first at index {first_index}: {first}")]
    Scan {
        failed: usize,
        total: usize,
        first_index: usize,
        first: Box<Error>,
        indices: Vec<usize>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for solver, quadrature and fit non-convergence.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::Convergence { .. }
            | Error::Quadrature { .. }
            | Error::RankDeficient { .. }
            | Error::Divergence { .. } => true,
            Error::Scan { first, .. } => first.is_convergence(),
            _ => false,
        }
    }
}
