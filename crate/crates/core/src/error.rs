//! Error taxonomy shared by the library and the CLI.
//!
//! Every failure mode carries enough context for a one-line diagnostic, and
//! [`Error::exit_code`] maps the taxonomy onto the process exit convention:
//! 1 for input/schema problems, 2 for domain failures, 3 for violated
//! internal invariants.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("point lies behind the camera")]
    BehindCamera,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no ground plane found")]
    NoGroundPlane,
    #[error("degenerate floor: fewer than two inlier points")]
    DegenerateFloor,
    #[error("unknown category: {0}")]
    UnknownCategory(String),
    #[error("inserted footprint has zero area")]
    ZeroAreaFootprint,
    #[error("no asset in catalog for category: {0}")]
    NoAssetForCategory(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("pixel out of bounds: ({0}, {1})")]
    OutOfBounds(f64, f64),
    #[error("index out of range: ({0}, {1})")]
    IndexOutOfRange(u32, u32),
    #[error("gamma must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("normal must be unit length, got norm {0}")]
    NonUnitNormal(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Process exit code for the CLI: 1 = input/schema error, 2 = domain
    /// failure, 3 = internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingFile(_)
            | Error::SchemaViolation(_)
            | Error::InvalidCalibration(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidConfig(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Image(_) => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }

    /// Stable machine-readable tag for summaries and skip records.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "MissingFile",
            Error::SchemaViolation(_) => "SchemaViolation",
            Error::InvalidCalibration(_) => "InvalidCalibration",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::BehindCamera => "BehindCamera",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::NoGroundPlane => "NoGroundPlane",
            Error::DegenerateFloor => "DegenerateFloor",
            Error::UnknownCategory(_) => "UnknownCategory",
            Error::ZeroAreaFootprint => "ZeroAreaFootprint",
            Error::NoAssetForCategory(_) => "NoAssetForCategory",
            Error::InsufficientData(_) => "InsufficientData",
            Error::OutOfBounds(_, _) => "OutOfBounds",
            Error::IndexOutOfRange(_, _) => "IndexOutOfRange",
            Error::InvalidGamma(_) => "InvalidGamma",
            Error::NonUnitNormal(_) => "NonUnitNormal",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Internal(_) => "Internal",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Image(_) => "Image",
        }
    }
}
