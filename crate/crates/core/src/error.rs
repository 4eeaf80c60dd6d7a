use std::path::PathBuf;

use thiserror::Error;

use crate::geom::TrackId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad category of a failure, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or arguments; nothing was computed.
    Validation,
    /// Input files are missing, malformed or inconsistent.
    Data,
    /// An internal invariant did not hold.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot interpolate between tracks {0} and {1}")]
    TrackMismatch(TrackId, TrackId),
    #[error("box timestamps must be strictly increasing ({0} >= {1})")]
    NonIncreasingTimestamps(i64, i64),
    #[error("no annotated keyframes")]
    NoAnnotation,
    #[error("unknown track {0}")]
    UnknownTrack(TrackId),
    #[error("no canonical cloud for track {0}")]
    MissingTrack(TrackId),
    #[error("reference cloud for label voting is empty or unlabeled")]
    InsufficientReference,
    #[error("voxel index {index:?} outside grid dims {dims:?}")]
    IndexOutOfRange { index: [usize; 3], dims: [usize; 3] },
    #[error("grid specs do not match")]
    SpecMismatch,
    #[error("class id {class} outside ontology of {classes} classes")]
    ClassOutOfRange { class: u8, classes: usize },
    #[error("ray origin equals its endpoint")]
    DegenerateRay,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("frame {frame}: payload {path} is missing")]
    MissingPayload { frame: usize, path: PathBuf },
    #[error("{path}: corrupt payload at byte offset {offset}: {reason}")]
    CorruptPayload {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("manifest schema violation: {0}")]
    ManifestSchema(String),
    #[error("{path}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },
    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },
    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u8 },
    #[error("{path}: header dims {dims:?} overflow")]
    DimensionOverflow { path: PathBuf, dims: [u64; 3] },
    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGrid(_) | Error::InvalidConfig(_) => ErrorKind::Validation,
            Error::Stage { source, .. } => source.kind(),
            Error::Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}
