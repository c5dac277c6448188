//! Simulation and estimation toolkit for a dual-grating moire tactile sensor.
//!
//! The pipeline runs wrench → deformation ([`load`]) → fringe image
//! ([`synth`]) → observables ([`features`]) → wrench ([`estimator`]), with
//! the closed-form grating geometry in [`optics`] and the contact gate in
//! [`gate`].

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod features;
mod fft;
pub mod gate;
pub mod image;
pub mod load;
pub mod optics;
pub mod synth;

pub use dataset::{DatasetSpec, Sample, Simulator, SweepKind};
pub use error::{Error, Result};
pub use estimator::{CalibrationModel, FeatureVector, Metrics, TiltFit};
pub use features::{MoireObservables, ReferenceFrame, SpectralConfig, SpectralPeak};
pub use gate::{GateConfig, GateState, Mode};
pub use image::ImageGray;
pub use load::{DeformationState, MaterialModel, Range, Wrench, WrenchRanges};
pub use optics::{DesignPreset, FringeDescriptor, Grating, GratingLayout, SensorGeometry, Trend, WaveVector2};
pub use synth::RenderConfig;
