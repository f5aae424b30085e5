use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimensions must be positive, got {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("radius must lie in (0, 4], got {0}")]
    InvalidRadius(f64),

    #[error("light source coordinates must be finite")]
    NonFiniteCoordinate,

    #[error("segment light source requires a second anchor")]
    MissingSegmentEnd,

    #[error("channel must be one of 1, 2, 3, 4 (got {0})")]
    InvalidChannel(u8),

    #[error("scaling factor must be finite, got {0}")]
    InvalidAlpha(f64),

    #[error("values must be finite")]
    NonFiniteValue,

    #[error("mask values must lie in [0, 1]")]
    MaskOutOfRange,

    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {found_width}x{found_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        found_width: usize,
        found_height: usize,
    },

    #[error("output size {width}x{height} must be positive multiples of 8")]
    NotMultipleOf8 { width: u32, height: u32 },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),

    #[error("expansion factor must be >= 1, got {0}")]
    InvalidExpansion(f64),

    #[error("bounding box must satisfy min < max within [0, 1]")]
    InvalidBoundingBox,

    #[error("evaluation region is empty")]
    EmptyRegion,

    #[error("backend failure: {0}")]
    Backend(String),
}
