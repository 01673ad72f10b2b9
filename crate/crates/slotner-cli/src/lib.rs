//! Command implementations behind the `slotner` binary.
//!
//! Conventions shared by every command: requested data goes to standard
//! output, diagnostics to standard error; exit code 0 on success, 1 for
//! validation problems, 2 for I/O failures; every successful run produces a
//! [`manifest::RunManifest`], written next to the artifact when there is one
//! and to standard error otherwise.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;

/// Process outcome, split by who is at fault.
#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: malformed corpora, config contradictions, label
    /// mismatches. Exit code 1.
    Validation(String),
    /// The machine failed: unreadable or unwritable files. Exit code 2.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<slotner::Error> for CliError {
    fn from(err: slotner::Error) -> Self {
        if err.is_io() {
            CliError::Io(err.to_string())
        } else {
            CliError::Validation(err.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_err(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}
