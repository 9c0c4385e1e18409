//! Configuration loading and run orchestration for the `faddeev` binary.

pub mod config;
pub mod output;
pub mod run;

/// Failures split by exit status: configuration problems exit with 2,
/// computational ones with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] faddeev::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Compute(_) | Self::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Compute(_) => "computation",
            Self::Io(_) => "io",
        }
    }

    /// One-line JSON record for machine consumption.
    pub fn record(&self, subcommand: &str) -> String {
        serde_json::json!({
            "subcommand": subcommand,
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}
