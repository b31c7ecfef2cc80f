use thiserror::Error;

/// Errors produced by the simulation library and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel `{kind}` is not {{0,1}}-valued; an indicator kernel is required")]
    NotIndicator { kind: String },

    #[error("box-counting dimension undefined: {0}")]
    UndefinedDimension(String),

    #[error("explicit scheme became unstable at step {step} (t = {time}): {reason}")]
    Stability {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
