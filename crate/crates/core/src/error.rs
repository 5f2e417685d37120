use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no admissible cells: {0}")]
    EmptyCells(String),
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("iteration did not converge after {iterations} steps (estimate {estimate:e}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },
    #[error("singular factorization at pivot {0}")]
    Singular(usize),
    #[error("coercivity search failed: {0}")]
    Coercivity(String),
    #[error("numerical invariant breached at eps = {eps:e}: {msg}")]
    Breach { eps: f64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::ConfigParse(_))
    }

    /// Attaches the offending ε to a numerical error.
    pub fn at_eps(self, eps: f64) -> Self {
        match self {
            Error::Breach { eps: e, msg } if e.is_nan() => Error::Breach { eps, msg },
            Error::Breach { .. } | Error::Config { .. } | Error::ConfigParse(_) | Error::Io(_) => self,
            other => Error::Breach {
                eps,
                msg: other.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
