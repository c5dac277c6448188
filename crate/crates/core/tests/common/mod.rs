#![allow(dead_code)]

use moire_core::features::SpectralConfig;
use moire_core::optics::{Grating, GratingLayout, SensorGeometry};
use moire_core::synth::analytic_fringes;
use moire_core::{DeformationState, DesignPreset, MaterialModel, RenderConfig, Simulator, WrenchRanges};
use rand::Rng;

pub fn simulator(preset: DesignPreset, layout: GratingLayout, render: RenderConfig) -> Simulator {
    Simulator {
        geometry: SensorGeometry::preset(preset).with_layout(layout),
        material: MaterialModel::default(),
        ranges: WrenchRanges::default(),
        render,
        spectral: SpectralConfig::default(),
    }
}

/// Calibration default: dense pitches, crossed layout.
pub fn dense(render: RenderConfig) -> Simulator {
    simulator(DesignPreset::Dense, GratingLayout::Crossed, render)
}

/// Random parallel-stack geometry whose projected pitches are renderable at
/// 20 px/mm and whose fringe period fits the field several times.
pub fn random_geometry(rng: &mut impl Rng) -> SensorGeometry {
    loop {
        let p2 = rng.random_range(0.15..0.4);
        let p1 = rng.random_range(0.15..0.4);
        let alpha2 = rng.random_range(0.0..std::f64::consts::PI);
        let delta = rng.random_range(0.0..8f64).to_radians();
        let Ok(g) = SensorGeometry::new(
            Grating::new(p1, alpha2 + delta).unwrap(),
            Grating::new(p2, alpha2).unwrap(),
            3.0,
            12.0,
        ) else {
            continue;
        };
        if g.apparent_far_pitch() < 0.15 {
            continue;
        }
        let Ok(fringes) = analytic_fringes(&g, &DeformationState::identity(g.spacing)) else {
            continue;
        };
        if (0.8..8.0).contains(&fringes.period) {
            return g;
        }
    }
}

/// Smallest angle between two fringe orientations, which are defined mod π.
pub fn orientation_error(a: f64, b: f64) -> f64 {
    moire_core::optics::fold_half_plane(a - b).abs()
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    moire_core::gate::percentile(values, q)
}
