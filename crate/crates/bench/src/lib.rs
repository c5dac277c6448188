//! Shared fixtures for the benchmarks.

use moire_core::dataset::DatasetSpec;
use moire_core::{
    DesignPreset, GratingLayout, ImageGray, MaterialModel, RenderConfig, Sample, SensorGeometry, Simulator,
    SpectralConfig, Wrench, WrenchRanges,
};

/// Calibration geometry at the given resolution (20 px/mm).
pub fn simulator(resolution: usize) -> Simulator {
    Simulator {
        geometry: SensorGeometry::preset(DesignPreset::Dense).with_layout(GratingLayout::Crossed),
        material: MaterialModel::default(),
        ranges: WrenchRanges::default(),
        render: RenderConfig {
            resolution,
            ..RenderConfig::default()
        },
        spectral: SpectralConfig::default(),
    }
}

/// A mixed load well inside every range.
pub fn loaded_wrench() -> Wrench {
    Wrench {
        fx: 0.1,
        fy: -0.05,
        fz: 0.8,
        tx: 0.002,
        ty: -0.001,
        tz: 0.003,
    }
}

pub fn loaded_frame(sim: &Simulator) -> ImageGray {
    sim.frame(&loaded_wrench(), 0).expect("fixture renders")
}

/// A small rendered dataset for the fitting benchmark.
pub fn small_dataset() -> Vec<Sample> {
    let spec = DatasetSpec {
        n: 200,
        contact_radius_max: 5.0,
        ..DatasetSpec::default()
    };
    simulator(400).build_dataset(&spec).expect("fixture dataset")
}
