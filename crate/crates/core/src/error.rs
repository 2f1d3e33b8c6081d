use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("patterns live on different direction grids")]
    GridMismatch,

    #[error("direction grid is not closed under the antipodal map")]
    NotAntipodallyClosed,

    /// A matrix that must be inverted is too close to singular.
    #[error("ill-conditioned {context}: condition number {cond:.3e} exceeds {limit:.1e}")]
    IllConditioned {
        context: String,
        cond: f64,
        limit: f64,
    },

    #[error("network is not passive: largest singular value {0}")]
    NotPassive(f64),

    #[error("{0} efficiency is undefined: the stage receives no power")]
    UndefinedStage(&'static str),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("incomplete data: {0}")]
    Incomplete(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::IllConditioned { .. } | Error::NotPassive(_))
    }
}
