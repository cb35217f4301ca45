use std::path::PathBuf;

use thiserror::Error;

use crate::weights::Modality;

/// Pipeline stage names, attached to errors raised by [`crate::pipeline::run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Graph,
    Descriptors,
    Weights,
    Merge,
    Postprocess,
    Output,
    Eval,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Graph => "graph",
            Stage::Descriptors => "descriptors",
            Stage::Weights => "weights",
            Stage::Merge => "merge",
            Stage::Postprocess => "postprocess",
            Stage::Output => "output",
            Stage::Eval => "eval",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("image contains no valid depth pixels")]
    NoValidDepth,

    #[error("graph construction needs an image grid mapping, but the cloud has none")]
    MissingGrid,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("cloud lacks the {0} descriptor required by the modality set")]
    MissingDescriptor(Modality),

    #[error("weighted graph does not carry the {0} modality")]
    MissingModality(Modality),

    #[error("images share no labeled pixels")]
    NoCommonPixels,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The stage this error was raised in, if it came out of the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
