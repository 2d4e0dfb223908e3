use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::SubTriangle;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
    #[error("subdivision budget exceeded at depth {depth} ({} sub-triangles kept)", partial.len())]
    SubdivisionBudgetExceeded { depth: u32, partial: Vec<SubTriangle> },
    #[error("non-finite gradient on triangle {0}")]
    NonFiniteGradient(u64),
    #[error("mask selects no valid pixels")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall { width: usize, height: usize, window: usize },
    #[error("need at least 2 point pairs, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("zero-length edge")]
    ZeroLengthEdge,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{}: missing file", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {msg}", path.display())]
    MalformedHeader { path: PathBuf, msg: String },
    #[error("{}: {msg}", path.display())]
    DimensionMismatch { path: PathBuf, msg: String },
    #[error("unknown scene kind `{0}`")]
    UnknownKind(String),
    #[error("scene has no ground truth")]
    MissingGroundTruth,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable class name, used by the CLI error line.
    pub fn class(&self) -> &'static str {
        match self {
            Error::DegenerateTriangle(_) => "DegenerateTriangle",
            Error::SubdivisionBudgetExceeded { .. } => "SubdivisionBudgetExceeded",
            Error::NonFiniteGradient(_) => "NonFiniteGradient",
            Error::EmptyMask => "EmptyMask",
            Error::ImageTooSmall { .. } => "ImageTooSmall",
            Error::InsufficientPoints(_) => "InsufficientPoints",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::ZeroLengthEdge => "ZeroLengthEdge",
            Error::EmptyCloud => "EmptyCloud",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::MissingFile(_) => "MissingFile",
            Error::MalformedHeader { .. } => "MalformedHeader",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::UnknownKind(_) => "UnknownKind",
            Error::MissingGroundTruth => "MissingGroundTruth",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::MalformedHeader { path: path.into(), msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            return Error::MissingFile(path.into());
        }
        Error::Io { path: path.into(), source }
    }
}
