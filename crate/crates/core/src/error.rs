use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge within depth {depth} (best estimate {estimate})")]
    Convergence { estimate: f64, depth: u32 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
