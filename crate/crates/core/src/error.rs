use thiserror::Error;

/// Errors raised by model construction, policy setup and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution parameter is outside its valid range.
    #[error("invalid distribution parameter: {0}")]
    InvalidDistribution(String),

    /// An observation value is outside the support of a discrete family.
    #[error("observation {value} is outside the support of {family}")]
    Domain { family: &'static str, value: f64 },

    /// `p` puts mass where `q` has none, so D(p||q) is infinite.
    #[error("absolute continuity violated: {0}")]
    AbsoluteContinuity(String),

    /// Instance or run configuration is invalid. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A rate quantity is undefined because some divergence is zero.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// Probe set or observation vector does not match the state.
    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    /// The linear program has no feasible point or is unbounded.
    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
