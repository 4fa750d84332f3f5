use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (valid: {valid})")]
    OutOfRange { index: usize, valid: String },

    /// A configuration value failed validation. `field` is a dotted path.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("schedule error: {0}")]
    Schedule(String),

    /// A caller broke an operation's precondition (e.g. integrating across an injection).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical cross-check disagreed with the analytic prediction.
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefix the field path of an `InvalidParameter` error, e.g. `alpha` -> `schedule.alpha`.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: if field.is_empty() {
                    prefix.to_string()
                } else {
                    format!("{prefix}.{field}")
                },
                reason,
            },
            other => other,
        }
    }
}
