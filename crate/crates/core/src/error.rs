use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown skill code `{0}`")]
    UnknownCode(String),

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },

    #[error("background model has not seen any frame")]
    UninitialisedModel,

    #[error("no image row matches the trampoline hue window")]
    TrampolineNotFound,

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("track too short: {len} samples, need at least {min}")]
    TrackTooShort { len: usize, min: usize },

    #[error("track has no valid centroid samples")]
    EmptyTrack,

    #[error("segmentation failed: found {0} minima, need at least 2")]
    SegmentationFailed(usize),

    #[error("athlete is in contact with the bed for the whole segment {start}..={end}")]
    NoAirbornePhase { start: usize, end: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid pose data: {0}")]
    InvalidPose(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("shoulder separation is zero over the whole routine")]
    ZeroShoulderSeparation,

    #[error("trajectory too short: {0} samples, need at least 2")]
    TrajectoryTooShort(usize),

    #[error("feature `{0}` has no valid samples in the segment")]
    MissingFeature(&'static str),

    #[error("trajectory shape mismatch: {left} vs {right} samples")]
    ShapeMismatch { left: usize, right: usize },

    #[error("reference set is empty")]
    EmptyReferenceSet,

    #[error("skill `{code}` has {available} examples, need {required}")]
    InsufficientExamples {
        code: String,
        available: usize,
        required: usize,
    },

    #[error("confusion matrix holds no predictions")]
    EmptyConfusion,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid skill model: {0}")]
    InvalidModel(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's input rather than by a
    /// pipeline stage giving up on otherwise valid data.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::EmptyMask
                | Error::EmptyTrack
                | Error::TrampolineNotFound
                | Error::SegmentationFailed(_)
                | Error::NoAirbornePhase { .. }
                | Error::ZeroShoulderSeparation
                | Error::MissingFeature(_)
                | Error::DegenerateGeometry(_)
        )
    }
}
