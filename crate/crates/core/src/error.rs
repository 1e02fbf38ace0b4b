use thiserror::Error;

use crate::circuit::{CircuitError, ParseError};
use crate::features::FeatureError;
use crate::graph::GraphError;
use crate::model::ModelError;
use crate::noise::NoiseError;
use crate::numeric::NumericError;

/// Top-level error, classified by the exit code a command-line front end
/// should report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

impl From<CircuitError> for Error {
    fn from(e: CircuitError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<GraphError> for Error {
    fn from(e: GraphError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<FeatureError> for Error {
    fn from(e: FeatureError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<NoiseError> for Error {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::InvalidModel(_)
            | NoiseError::InvalidScale(_)
            | NoiseError::ScaledProbability(_)
            | NoiseError::EvenFoldFactor(_)
            | NoiseError::NoShots
            | NoiseError::InvalidConfig(_) => Error::Config(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<NumericError> for Error {
    fn from(e: NumericError) -> Self {
        match e {
            NumericError::NonFinite(_) => Error::Numeric(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for Error {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => Error::Config(e.to_string()),
            ModelError::Numeric(n) => n.into(),
            _ => Error::Data(e.to_string()),
        }
    }
}
