//! The run configuration document.

use std::path::Path;

use moire_core::estimator::DEFAULT_RIDGE_LAMBDA;
use moire_core::features::SpectralConfig;
use moire_core::{DatasetSpec, DesignPreset, GateConfig, GratingLayout, MaterialModel, RenderConfig, SensorGeometry};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "moire-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default = "calibration_geometry")]
    pub geometry: SensorGeometry,
    #[serde(default)]
    pub material: MaterialModel,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default)]
    pub gate: GateConfig,
    #[serde(default)]
    pub gate_calibration: GateCalibration,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default)]
    pub simulate: SimulateSettings,
}

fn calibration_geometry() -> SensorGeometry {
    SensorGeometry::preset(DesignPreset::Dense).with_layout(GratingLayout::Crossed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSettings {
    pub ridge_lambda: f64,
    pub split_seed: u64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            split_seed: 0,
        }
    }
}

/// How the gate threshold is derived when `gate.t_on` is unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateCalibration {
    pub noise_frames: usize,
    pub multiplier: f64,
}

impl Default for GateCalibration {
    fn default() -> Self {
        Self {
            noise_frames: 100,
            multiplier: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPair {
    pub p1: f64,
    pub p2: f64,
    /// Overrides the table-wide spacing, mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Overrides the table-wide camera distance, mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSettings {
    pub spacing: f64,
    pub camera_distance: f64,
    pub pairs: Vec<DesignPair>,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            spacing: SensorGeometry::PRESET_SPACING,
            camera_distance: SensorGeometry::PRESET_CAMERA_DISTANCE,
            pairs: DesignPreset::ALL
                .iter()
                .map(|p| {
                    let (p1, p2) = p.pitches();
                    DesignPair { p1, p2, a: None, z: None }
                })
                .collect(),
        }
    }
}

/// Press-hold-release trace for the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSettings {
    pub idle_frames: usize,
    pub ramp_frames: usize,
    pub hold_frames: usize,
    pub peak_fz: f64,
}

impl Default for StreamSettings {
    fn default() -> Self {
        Self {
            idle_frames: 10,
            ramp_frames: 5,
            hold_frames: 20,
            peak_fz: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSettings {
    /// Also write a contact stream under `stream/`.
    pub stream: Option<StreamSettings>,
    /// Also write the press/shear/scale/rotation sweeps under `sweeps/`.
    pub deformation_sweeps: bool,
    pub sweep_frames: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            stream: None,
            deformation_sweeps: false,
            sweep_frames: 10,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            geometry: calibration_geometry(),
            material: MaterialModel::default(),
            render: RenderConfig::default(),
            spectral: SpectralConfig::default(),
            dataset: DatasetSpec::default(),
            estimator: EstimatorSettings::default(),
            gate: GateConfig::default(),
            gate_calibration: GateCalibration::default(),
            design: DesignSettings::default(),
            simulate: SimulateSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validated()
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        Self::from_json(&text)
    }

    /// Explicit `--config` first, then the `config.json` a previous command
    /// left in `dir`, then the defaults.
    pub fn resolve(explicit: Option<&Path>, dir: Option<&Path>) -> CliResult<Self> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        if let Some(path) = dir.map(|d| d.join("config.json")).filter(|p| p.is_file()) {
            return Self::load(&path);
        }
        Ok(Self::default())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.render.seed = seed;
            self.dataset.seed = seed;
        }
        self
    }

    pub fn validated(self) -> CliResult<Self> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("schema must be \"{SCHEMA}\", got \"{}\"", self.schema)));
        }
        let config = |e: moire_core::Error| CliError::Config(e.to_string());
        self.geometry.validated().map_err(config)?;
        self.render.validated().map_err(config)?;
        self.spectral.validated().map_err(config)?;
        self.dataset.validated().map_err(config)?;
        self.material.validated(&self.dataset.ranges, &self.geometry).map_err(config)?;
        let gate = self.gate.validated().map_err(config)?;
        if gate.t_on.is_none() && self.gate_calibration.noise_frames == 0 {
            return Err(CliError::Config("gate needs t_on or at least one noise frame".into()));
        }
        if !(self.gate_calibration.multiplier > 0.0) {
            return Err(CliError::Config("gate_calibration.multiplier must be positive".into()));
        }
        if !(self.estimator.ridge_lambda >= 0.0) {
            return Err(CliError::Config("estimator.ridge_lambda must be >= 0".into()));
        }
        if let Some(s) = self.simulate.stream {
            if !(0.0..=self.dataset.ranges.fz.max).contains(&s.peak_fz) {
                return Err(CliError::Config("stream peak_fz is outside the Fz range".into()));
            }
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
