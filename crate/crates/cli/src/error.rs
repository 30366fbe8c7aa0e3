//! Error carrier that pairs every failure with its process exit code.

use std::fmt;

/// Exit codes: 0 success, 1 replay divergence, 2 usage, 3 configuration,
/// 4 checkpoint or schema version mismatch, 5 I/O.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DIVERGED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_VERSION: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn version(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_VERSION,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::io(format!("i/o error: {e}"))
    }
}

impl From<crossway_marl::Error> for CliError {
    fn from(e: crossway_marl::Error) -> CliError {
        if e.is_checkpoint_error() {
            return CliError::version(e.to_string());
        }
        match &e {
            crossway_marl::Error::Io(_) => CliError::io(e.to_string()),
            crossway_marl::Error::Sim(s) => classify_sim(s, e.to_string()),
            crossway_marl::Error::BadVariant(_) | crossway_marl::Error::Train(_) => {
                CliError::config(e.to_string())
            }
            _ => CliError::io(e.to_string()),
        }
    }
}

impl From<crossway_sim::Error> for CliError {
    fn from(e: crossway_sim::Error) -> CliError {
        let msg = e.to_string();
        classify_sim(&e, msg)
    }
}

fn classify_sim(e: &crossway_sim::Error, msg: String) -> CliError {
    match e {
        crossway_sim::Error::BadTrace(detail) if detail.contains("schema") => {
            CliError::version(msg)
        }
        crossway_sim::Error::Io(_) => CliError::io(msg),
        _ => CliError::config(msg),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
