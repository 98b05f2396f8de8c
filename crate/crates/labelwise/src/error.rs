use std::io;
use std::path::PathBuf;

use labelwise_core::agreement::AgreementError;
use labelwise_core::campaign::RoundError;
use labelwise_core::corpus::PostingError;
use labelwise_core::flagging::ScoreError;
use labelwise_core::label::InvalidLabel;
use labelwise_core::ordinal::{CvError, ModelError, TrainError};
use labelwise_core::resolve::ResolveError;
use labelwise_core::sampling::SamplingError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// A malformed record in an input file, located by line or row.
    #[error("{file}: {location}: {message}")]
    Record {
        file: String,
        location: String,
        message: String,
    },
    /// Several row-level problems reported together.
    #[error("{file}: {}", .problems.join("; "))]
    Rows { file: String, problems: Vec<String> },
    #[error("unknown {kind} {id}")]
    Unknown { kind: &'static str, id: String },
    #[error("duplicate {kind} {id}")]
    Duplicate { kind: &'static str, id: String },
    #[error("annotator {annotator} is not assigned to {what}")]
    NotAssigned { annotator: String, what: String },
    #[error("{0}")]
    Invalid(String),
    #[error("store schema version {found} is newer than supported version {supported}")]
    SchemaVersion { found: u32, supported: u32 },
    #[error(transparent)]
    Label(#[from] InvalidLabel),
    #[error(transparent)]
    Posting(#[from] PostingError),
    #[error(transparent)]
    Round(#[from] RoundError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    CrossValidation(#[from] CvError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn record(file: impl Into<String>, location: impl Into<String>, message: impl ToString) -> Self {
        Error::Record {
            file: file.into(),
            location: location.into(),
            message: message.to_string(),
        }
    }

    /// `2` for I/O failures, `1` for everything the user can fix in the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
