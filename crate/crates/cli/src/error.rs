use thiserror::Error;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<arsvd_core::Error> for CliError {
    fn from(e: arsvd_core::Error) -> Self {
        use arsvd_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidConfig(_) => CliError::Usage(msg),
            E::DimensionMismatch { .. } | E::BadLength { .. } | E::NonFinite { .. } | E::InvalidInput(_) => {
                CliError::Data(msg)
            }
            E::NoConvergence { .. } | E::Numerical(_) => CliError::Numerical(msg),
        }
    }
}
