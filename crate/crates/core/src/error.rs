use thiserror::Error;

use crate::baselines::BaselineError;
use crate::dataset::DatasetError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::ingest::IngestError;
use crate::label::LabelError;
use crate::modelfile::ModelFileError;
use crate::neuralnet::NetError;
use crate::synthgen::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline-level error. Each stage keeps its own error type; this wraps them
/// so the driver can map failures onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code: 2 input error, 3 numeric failure, 4 infeasible spec.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Net(NetError::NonFiniteLoss { .. })
            | Error::Baseline(BaselineError::NonFiniteLoss { .. }) => 3,
            Error::Synth(SynthError::SpecInfeasible(_)) => 4,
            _ => 2,
        }
    }
}
