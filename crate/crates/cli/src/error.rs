use ddbh::Error as CoreError;

/// Process exit codes: 1 for usage and configuration problems, 2 for
/// numerical failures and I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_)
            | CoreError::InvalidConfig(_)
            | CoreError::InvalidLattice(_)
            | CoreError::InvalidParams(_) => CliError::Usage(e.to_string()),
            CoreError::DimensionCap { .. } => CliError::Usage(format!(
                "{e}; try a smaller lattice.size, a lower exact.n_max, or exact.displaced = true"
            )),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
