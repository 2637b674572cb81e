use thiserror::Error;

/// Errors raised by the reserving library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data failed validation. The message carries the offending line where known.
    #[error("invalid data: {0}")]
    Data(String),

    /// A parameter or argument was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Not enough observations to fit the requested model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The sample is degenerate for the requested family (e.g. all zeros for a negative binomial).
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// The optimizer hit its iteration cap without meeting the tolerance.
    #[error("optimizer did not converge after {iterations} iterations ({context})")]
    NonConvergence { iterations: usize, context: String },

    /// The operation is not defined for this model variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by the environment (files, encodings) rather than by the model.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }

    /// Prefixes the message with `ctx`, e.g. the fitting phase that failed.
    pub fn context(self, ctx: impl std::fmt::Display) -> Error {
        match self {
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::InvalidParameter(m) => Error::InvalidParameter(format!("{ctx}: {m}")),
            Error::InsufficientData(m) => Error::InsufficientData(format!("{ctx}: {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{ctx}: {m}")),
            Error::NonConvergence { iterations, context } => {
                Error::NonConvergence { iterations, context: format!("{ctx}: {context}") }
            }
            other => other,
        }
    }
}
