use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Grid too coarse for the requested spectral dimension.
    #[error("grid resolution {resolution} cannot represent {required} modes without aliasing")]
    Aliasing { resolution: usize, required: usize },

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The state left the finite, representable regime.
    #[error("divergence at t = {time}: {reason}")]
    Divergence { time: f64, reason: String },

    /// The Picard iteration stopped contracting.
    #[error("time window too large: Picard residual grew from {previous:e} to {current:e} at iteration {iteration}")]
    WindowTooLarge {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    /// An exhaustive enumeration would exceed its work budget.
    #[error("enumeration of {requested} tuples exceeds the budget of {budget}")]
    Budget { requested: u128, budget: u128 },

    /// A checkpoint stream could not be decoded.
    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn divergence(time: f64, reason: impl Into<String>) -> Self {
        Error::Divergence {
            time,
            reason: reason.into(),
        }
    }

    /// Stamps a divergence whose time was not known where it was raised.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::Divergence { time, reason } if time.is_nan() => Error::Divergence { time: t, reason },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
