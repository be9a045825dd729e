use cavity_bell::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ILL_POSED: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                Error::Precondition(_)
                | Error::ShapeMismatch { .. }
                | Error::Resolution { .. }
                | Error::Validity { .. }
                | Error::OutsideDomain { .. } => EXIT_CONFIG,
                Error::NonFinite(_)
                | Error::ZeroNorm
                | Error::IntegratorFailure { .. }
                | Error::NoNode { .. } => EXIT_NUMERIC,
                Error::IllPosed { .. } => EXIT_ILL_POSED,
            },
            CliError::Io(_) | CliError::Json(_) => EXIT_IO,
        }
    }
}
