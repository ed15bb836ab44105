use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A configuration value is out of range. `field` is a dotted path.
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("non-finite value in {what} (round {round:?}, client {client:?})")]
    NonFinite {
        what: &'static str,
        round: Option<usize>,
        client: Option<usize>,
    },

    #[error("client {client} has an empty training split")]
    EmptyClient { client: usize },

    #[error("round {round} aborted: {source}")]
    RoundAborted { round: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_round(self, round: usize) -> Self {
        match self {
            e @ Error::RoundAborted { .. } => e,
            e => Error::RoundAborted {
                round,
                source: Box::new(e),
            },
        }
    }
}
