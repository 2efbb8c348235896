//! CLI error channel: input problems exit 2, numerical failures exit 3.

use std::fmt;

use lineuplab_core::eval::EvalError;
use lineuplab_core::ingest::IngestError;
use lineuplab_core::lapm::LapmError;
use lineuplab_core::metrics::MetricsError;
use lineuplab_core::model::ModelError;
use lineuplab_core::regression::RegressionError;
use lineuplab_core::synth::SynthError;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RegressionError> for CliError {
    fn from(e: RegressionError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<LapmError> for CliError {
    fn from(e: LapmError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::UnknownPlayer(_) => CliError::Input(e.to_string()),
            MetricsError::Feasibility { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InsufficientOverlap { .. } | EvalError::Input(_) => {
                CliError::Input(e.to_string())
            }
            EvalError::Model(m) => CliError::Input(m.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
