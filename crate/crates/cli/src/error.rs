use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rems_core::Error),

    #[error("{what} deviates by {found:.3e}, above the tolerance {tol:.1e}")]
    Tolerance { what: String, found: f64, tol: f64 },

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            CliError::Tolerance { .. } => 2,
            _ => 1,
        }
    }
}
