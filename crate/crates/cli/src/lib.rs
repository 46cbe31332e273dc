//! Operational surface for the wiretap-channel JSCC experiments: config
//! loading, dataset preparation, stage orchestration, checkpointing, and
//! artifact export. All simulation math lives in `dibjscc-core`.

pub mod config;
pub mod io;
pub mod runner;
pub mod synth;

use std::fmt;

/// CLI-level errors, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 2: bad config file, bad flag, failed validation.
    Config(String),
    /// Exit code 3: a required earlier stage has not produced its artifact.
    Prerequisite(String),
    /// Exit code 4: anything that failed at runtime.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prerequisite(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Prerequisite(m) => write!(f, "prerequisite error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dibjscc_core::Error> for CliError {
    fn from(e: dibjscc_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
