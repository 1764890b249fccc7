use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, unwritable output.
    #[error("config error: {0}")]
    Config(String),
    /// The configured surface cannot be analyzed (not spacelike, level set
    /// without a solution, ...).
    #[error("invalid input: {0}")]
    Input(#[from] ppwave::Error),
    #[error("identity check failed: {}", .0.join(", "))]
    IdentityFailure(Vec<String>),
    #[error("solver: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::IdentityFailure(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Config(_) | CliError::Input(_) => 3,
        }
    }
}
