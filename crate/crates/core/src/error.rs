use thiserror::Error;

use crate::augment::AugmentError;
use crate::census::CensusError;
use crate::eval::EvalError;
use crate::geotile::GeoError;
use crate::harness::HarnessError;
use crate::model::{LabelFileError, ModelError};
use crate::preprocess::PreprocessError;

/// Process exit codes used by the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    Data = 2,
    ExternalService = 3,
    Adapter = 4,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Label(#[from] LabelFileError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Census(#[from] CensusError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    ExternalService(String),
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Usage(_) => ExitCode::Usage,
            Error::ExternalService(_) => ExitCode::ExternalService,
            Error::Harness(
                HarnessError::AdapterCrashed { .. }
                | HarnessError::ProtocolViolation { .. }
                | HarnessError::Timeout { .. }
                | HarnessError::Spawn(_),
            ) => ExitCode::Adapter,
            Error::Census(CensusError::AdapterFailed { .. } | CensusError::MissingPrediction { .. }) => {
                ExitCode::Adapter
            }
            Error::Geo(
                GeoError::AllCandidatesFailed { .. } | GeoError::ProviderFailed { .. } | GeoError::DecodeError { .. },
            ) => ExitCode::ExternalService,
            _ => ExitCode::Data,
        }
    }
}
