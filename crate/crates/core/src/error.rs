use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the platform model and the controllers built on it.
#[derive(Debug, Error)]
pub enum CueingError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration produced a non-finite state")]
    IntegrationBlowup,

    #[error("region enumeration exceeded the cap of {cap} regions")]
    RegionCap { cap: usize },

    #[error("region table: {0}")]
    Table(#[from] TableError),

    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
}

/// Failures while reading or writing a serialized region table.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes, not a region table")]
    BadMagic,

    #[error("unsupported table version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("model hash mismatch: table was built for a different configuration")]
    HashMismatch,

    #[error("truncated file while reading {what} (region {region} of {total})")]
    Truncated {
        what: &'static str,
        region: usize,
        total: usize,
    },

    #[error("malformed table: {0}")]
    Malformed(String),
}

/// Failures while generating or loading reference signals.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid sampling grid: {0}")]
    Grid(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("trace {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("trace {0} contains no samples")]
    Empty(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CueingError> = std::result::Result<T, E>;
