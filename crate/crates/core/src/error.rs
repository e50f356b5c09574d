use thiserror::Error;

use crate::echo_sim::Stage;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("stage mismatch: expected {expected}, found {found}")]
    StageMismatch { expected: Stage, found: Stage },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("aperture unusable for polar formatting: {0}")]
    NonMonotoneAperture(String),

    #[error("phase profile is not detrended: constant {constant:.4} rad, linear {linear:.4} rad at aperture edge")]
    NotDetrended { constant: f64, linear: f64 },

    #[error("autofocus estimation failed: {0}")]
    EstimationFailed(String),

    #[error("zero-energy image")]
    ZeroEnergy,

    #[error("region of interest out of bounds: {0}")]
    OutOfBounds(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Grid(#[from] crate::io::GridFileError),

    #[error("image export: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, Error>;
