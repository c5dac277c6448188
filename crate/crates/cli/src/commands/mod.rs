pub mod calibrate;
pub mod design;
pub mod eval;
pub mod extract;
pub mod gate;
pub mod simulate;

use std::path::{Path, PathBuf};

use moire_core::{Error, Simulator};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Flags shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overwrite: bool,
}

impl Common {
    /// The run configuration, looked up next to `data_dir` when no
    /// `--config` is given.
    pub fn run_config(&self, data_dir: Option<&Path>) -> CliResult<RunConfig> {
        Ok(RunConfig::resolve(self.config.as_deref(), data_dir)?.with_seed(self.seed))
    }

    pub fn require_out(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::Config("--out <dir> is required".into()))
    }
}

pub fn simulator(cfg: &RunConfig) -> Simulator {
    Simulator {
        geometry: cfg.geometry,
        material: cfg.material,
        ranges: cfg.dataset.ranges,
        render: cfg.render,
        spectral: cfg.spectral,
    }
}

/// Frame indices at or above these select noise streams that never overlap
/// the dataset frames.
pub const STREAM_NOISE_BASE: u64 = 1 << 32;
pub const GATE_NOISE_BASE: u64 = 2 << 32;
pub const SWEEP_NOISE_BASE: u64 = 3 << 32;

/// Short machine-readable name of a core error, for row-level markers.
pub fn error_code(err: &Error) -> &'static str {
    match err {
        Error::DegenerateGratings { .. } => "degenerate_gratings",
        Error::BoundaryCase => "boundary_case",
        Error::NonParallelGratings { .. } => "non_parallel_gratings",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::OutOfRange { .. } => "out_of_range",
        Error::TiltWithoutPreload { .. } => "tilt_without_preload",
        Error::UndersampledGrating { .. } => "undersampled_grating",
        Error::ImageTooSmall { .. } => "image_too_small",
        Error::NoPeak => "no_peak",
        Error::ZeroImage => "zero_image",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::SingularSystem { .. } => "singular_system",
        Error::InsufficientSamples { .. } => "insufficient_samples",
        Error::MalformedImage(_) => "malformed_image",
        Error::ModelFormat(_) => "model_format",
    }
}
