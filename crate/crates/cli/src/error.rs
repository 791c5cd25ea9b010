//! Error-to-exit-code mapping: 1 runtime failure, 2 usage or bad inputs,
//! 3 training divergence.

use converse_core::corpus::DataError;
use converse_core::model::ModelError;
use converse_core::train::TrainError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Divergence(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
            CliError::Divergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::Divergence(m) => f.write_str(m),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(err) => CliError::Runtime(err.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } => CliError::Divergence(e.to_string()),
            TrainError::Corpus(data) => data.into(),
            TrainError::Model(ModelError::Config(msg)) => CliError::Usage(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<converse_core::eval::EvalError> for CliError {
    fn from(e: converse_core::eval::EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<converse_core::synth::SynthError> for CliError {
    fn from(e: converse_core::synth::SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}
