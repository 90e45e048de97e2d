use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),

    #[error("degenerate assembly: total mass is zero")]
    DegenerateAssembly,

    #[error("invalid assembly: {0}")]
    InvalidAssembly(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("design vector: {0}")]
    InvalidVector(String),

    #[error("{dir}: need {needed} images, found {found}")]
    InsufficientImages {
        dir: PathBuf,
        needed: usize,
        found: usize,
    },

    #[error("corpus has {found} images but {needed} backgrounds were requested")]
    CorpusTooSmall { needed: usize, found: usize },

    #[error("perceptual backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error(
        "acceptance rate fell below floor: {accepted} feasible out of {tried} candidates (floor {floor:e})"
    )]
    AcceptanceFloor {
        tried: u64,
        accepted: u64,
        floor: f64,
    },

    #[error("invalid image file: {0}")]
    ImageFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
