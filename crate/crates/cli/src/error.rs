//! Error-to-exit-code mapping: 1 usage, 2 data, 3 numeric failure.

use std::fmt;
use vatts_core::align::AlignError;
use vatts_core::corpus::CorpusError;
use vatts_core::dsp::DspError;
use vatts_core::features::FeatureError;
use vatts_core::metrics::MetricError;
use vatts_core::model::ModelError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(CorpusError, AlignError, FeatureError, MetricError, DspError, std::io::Error);

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            ModelError::BadConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
