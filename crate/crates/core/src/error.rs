use thiserror::Error;

/// Errors raised anywhere in the simulation and estimation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate gratings: moire wavevector magnitude {magnitude:.3e} rad/mm is below threshold")]
    DegenerateGratings { magnitude: f64 },
    #[error("boundary case: intrinsic mismatch equals a/Z, compression trend undefined")]
    BoundaryCase,
    #[error("gratings are not parallel (orientation difference {difference:.3e} rad)")]
    NonParallelGratings { difference: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{axis} = {value} is outside the configured range [{min}, {max}]")]
    OutOfRange {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("tilt moment requires a normal preload of at least {floor} N (got Fz = {fz} N)")]
    TiltWithoutPreload { fz: f64, floor: f64 },
    #[error("grating pitch {pitch_px:.2} px is below the 3 px sampling bound")]
    UndersampledGrating { pitch_px: f64 },
    #[error("image is too small for spectral analysis ({width}x{height}, need at least 64x64)")]
    ImageTooSmall { width: usize, height: usize },
    #[error("no dominant spectral peak found")]
    NoPeak,
    #[error("image has zero total intensity")]
    ZeroImage,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular system (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("not enough samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("model format: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
