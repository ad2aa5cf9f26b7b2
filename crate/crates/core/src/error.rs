use thiserror::Error;

/// Errors raised by the predictors, estimators and the harness.
#[derive(Debug, Error)]
pub enum FplError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A learning-rate rule produced a larger rate than at the previous step.
    #[error("learning rate increased at step {step}: {previous} -> {current}")]
    NonMonotoneSchedule {
        step: u64,
        previous: f64,
        current: f64,
    },

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<FplError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FplError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FplError::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: u64) -> Self {
        match self {
            e @ FplError::AtStep { .. } => e,
            e => FplError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, FplError>;
