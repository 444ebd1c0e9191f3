//! Library side of the command-line driver, shared by the binary and the
//! test suites.

pub mod commands;
pub mod config;

use greencast::gbdt::GbdtError;
use greencast::loss::LossError;
use greencast::mlp::MlpError;
use greencast::pipeline::PipelineError;

/// Errors classified by exit code: domain errors (1) mean the data could
/// not support the request (empty band or split, degenerate training);
/// IO/usage errors (2) mean bad invocation, unreadable files or broken
/// formats.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Io(String),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) | CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::EmptySplit(..) => CliError::Domain(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::EmptyBand(_) | LossError::EmptyInput => CliError::Domain(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GbdtError> for CliError {
    fn from(e: GbdtError) -> Self {
        match e {
            GbdtError::ModelFile(inner) => CliError::Io(inner.to_string()),
            GbdtError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<MlpError> for CliError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::ModelFile(inner) => CliError::Io(inner.to_string()),
            MlpError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}
