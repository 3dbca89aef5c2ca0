use thiserror::Error;

/// Failures of the command-line runner, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver error in {module}: {source}")]
    Solver {
        module: &'static str,
        #[source]
        source: drmdp::Error,
    },
}

impl CliError {
    pub fn solver(module: &'static str, source: drmdp::Error) -> Self {
        CliError::Solver { module, source }
    }

    /// `2` for bad configuration or input, `3` for solver and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Input(_) => 2,
            CliError::Io(_) | CliError::Solver { .. } => 3,
        }
    }
}
