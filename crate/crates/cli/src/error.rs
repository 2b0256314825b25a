//! Command-level errors and their exit codes.

use std::fmt;

pub const EXIT_OK: i32 = 0;
/// Parse, validation, or I/O failure.
pub const EXIT_ERROR: i32 = 1;
/// The requested policy is infeasible for the scenario.
pub const EXIT_INFEASIBLE: i32 = 2;
/// A statistical verdict failed (unbounded growth, failed drift probe).
pub const EXIT_FAIL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Scenario(String),
    Io(String),
    Core(msb_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(msb_core::Error::Infeasible(_)) => EXIT_INFEASIBLE,
            _ => EXIT_ERROR,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "parse error: {msg}"),
            CliError::Scenario(msg) => write!(f, "invalid scenario: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<msb_core::Error> for CliError {
    fn from(e: msb_core::Error) -> Self {
        CliError::Core(e)
    }
}
