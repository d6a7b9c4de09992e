use std::path::PathBuf;

use thiserror::Error;

use crate::math::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize an all-zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature space mismatch: expected {expected:?}, found {found:?}")]
    SpaceMismatch { expected: Space, found: Space },

    #[error("softmax temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("not a probability vector: {0}")]
    NotAProbability(String),

    #[error("cache is empty")]
    EmptyCache,

    #[error("attention-weighted class center requires a query feature")]
    MissingQuery,

    #[error("graph node {index} is not unit-normalized (norm {norm})")]
    NonUnitNode { index: usize, norm: f64 },

    #[error("second-order graph must be derived from a first-order graph")]
    WrongOrder,

    #[error("clique set is empty")]
    EmptyCliqueSet,

    #[error("no class has a cached auxiliary feature")]
    EmptyAfv,

    #[error("stream is empty")]
    EmptyStream,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("bad magic {found:?} in {path}")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("unsupported version {found} in {path}")]
    VersionUnsupported { path: PathBuf, found: u32 },

    #[error("truncated payload in {path}: header needs {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("vector {index} in {path} is not unit-normalized (norm {norm})")]
    NonUnitVectors {
        path: PathBuf,
        index: usize,
        norm: f64,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVector => "ZeroVector",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SpaceMismatch { .. } => "SpaceMismatch",
            Error::NonPositiveTemperature(_) => "NonPositiveTemperature",
            Error::NotAProbability(_) => "NotAProbability",
            Error::EmptyCache => "EmptyCache",
            Error::MissingQuery => "MissingQuery",
            Error::NonUnitNode { .. } => "NonUnitNode",
            Error::WrongOrder => "WrongOrder",
            Error::EmptyCliqueSet => "EmptyCliqueSet",
            Error::EmptyAfv => "EmptyAFV",
            Error::EmptyStream => "EmptyStream",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
            Error::BadMagic { .. } => "BadMagic",
            Error::VersionUnsupported { .. } => "VersionUnsupported",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::NonUnitVectors { .. } => "NonUnitVectors",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
