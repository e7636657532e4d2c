use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed keypoint document {file}: {detail} (byte offset {offset})")]
    KeypointParse {
        file: String,
        offset: usize,
        detail: String,
    },

    #[error("{file}: person {person} has {count} numbers in pose_keypoints_2d, expected 54")]
    KeypointSchema {
        file: String,
        person: usize,
        count: usize,
    },

    #[error("clip {clip_id} has no valid joint observations; cannot interpolate")]
    UnusableClip { clip_id: String },

    #[error("pupil trace {participant_id}/{clip_id} has no valid samples")]
    UnusableTrace {
        participant_id: String,
        clip_id: String,
    },

    #[error("malformed pupil CSV {file} line {line}: {detail}")]
    PupilCsv {
        file: String,
        line: usize,
        detail: String,
    },

    #[error("invalid {what}: {detail}")]
    InvalidInput { what: String, detail: String },

    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error("leave-one-out requires at least 2 clips, got {0}")]
    TooFewClips(usize),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no usable events: {0}")]
    NoUsableEvents(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::InvalidInput {
            what: what.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
