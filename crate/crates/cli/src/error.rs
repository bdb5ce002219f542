use std::fmt;

/// Failure of a subcommand, mapped to a process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Io(String),
    NoEdges(String),
    NonFinite(String),
    NotConverged(String),
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::NoEdges(_) => 4,
            CliError::NonFinite(_) => 5,
            CliError::NotConverged(_) => 6,
            CliError::Verify(_) => 7,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Io(m) => ("i/o", m),
            CliError::NoEdges(m) => ("initialization", m),
            CliError::NonFinite(m) => ("solver", m),
            CliError::NotConverged(m) => ("convergence", m),
            CliError::Verify(m) => ("verify", m),
        };
        write!(f, "{kind} error: {msg}")
    }
}

impl std::error::Error for CliError {}

impl From<accv::Error> for CliError {
    fn from(e: accv::Error) -> Self {
        use accv::Error::*;
        match e {
            NoEdges { .. } | TooFewPoints { .. } => CliError::NoEdges(e.to_string()),
            NonFinite { .. } => CliError::NonFinite(e.to_string()),
            InvalidImage(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
