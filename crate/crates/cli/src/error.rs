use std::fmt;
use std::io;
use std::path::Path;

use rlvr_forge::dataset::DatasetError;
use rlvr_forge::gateway::GatewayError;
use rlvr_forge::rating::RatingError;
use rlvr_forge::rollout::RolloutError;
use rlvr_forge::synth::{PipelineError, SynthError};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input data or configuration (exit 1).
    Invalid(String),
    /// Filesystem failure (exit 2).
    Io(String),
    /// A model backend could not be reached or kept failing (exit 3).
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 1,
            Self::Io(_) => 2,
            Self::Transport(_) => 3,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "error: {m}"),
            Self::Io(m) => write!(f, "I/O error: {m}"),
            Self::Transport(m) => write!(f, "backend error: {m}"),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        if e.is_transport() {
            Self::Transport(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<RolloutError> for CliError {
    fn from(e: RolloutError) -> Self {
        if e.is_transport() {
            Self::Transport(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        if e.is_transport() {
            Self::Transport(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_transport() {
            Self::Transport(e.to_string())
        } else {
            Self::Invalid(e.to_string())
        }
    }
}

impl From<RatingError> for CliError {
    fn from(e: RatingError) -> Self {
        match e {
            RatingError::Gateway(g) => g.into(),
            RatingError::Io(e) => Self::Io(e.to_string()),
            other => Self::Invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
