//! Synthetic calibration datasets: isolated sweeps plus mixed random loads,
//! rendered and reduced to observables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_all, MoireObservables, ReferenceFrame, SpectralConfig};
use crate::image::ImageGray;
use crate::load::{wrench_to_deformation, DeformationState, MaterialModel, Wrench, WrenchRanges};
use crate::optics::SensorGeometry;
use crate::synth::{render, render_frame, RenderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Fz,
    Fx,
    Fy,
    Tz,
    /// Tx/Ty at a fixed normal preload.
    Tilt,
    Mixed,
}

impl SweepKind {
    pub const ALL: [SweepKind; 6] = [
        SweepKind::Fz,
        SweepKind::Fx,
        SweepKind::Fy,
        SweepKind::Tz,
        SweepKind::Tilt,
        SweepKind::Mixed,
    ];
    pub const ISOLATED: [SweepKind; 5] = [SweepKind::Fz, SweepKind::Fx, SweepKind::Fy, SweepKind::Tz, SweepKind::Tilt];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Fz => "fz",
            SweepKind::Fx => "fx",
            SweepKind::Fy => "fy",
            SweepKind::Tz => "tz",
            SweepKind::Tilt => "tilt",
            SweepKind::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// How many samples of which kind, and where the loads come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub n: usize,
    /// Share of samples drawn as mixed random loads; the rest is split
    /// evenly over the isolated sweeps.
    pub mixed_fraction: f64,
    /// Normal preload of the tilt sweep, N.
    pub tilt_preload: f64,
    /// Largest contact offset used to realize tilt, mm.
    pub contact_radius_max: f64,
    pub ranges: WrenchRanges,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            mixed_fraction: 0.5,
            tilt_preload: 1.0,
            contact_radius_max: 10.0,
            ranges: WrenchRanges::default(),
            seed: 1,
        }
    }
}

impl DatasetSpec {
    pub fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one sample".into()));
        }
        if !(0.0..=1.0).contains(&self.mixed_fraction) {
            return Err(Error::InvalidParameter("mixed_fraction must lie in [0, 1]".into()));
        }
        if !(self.contact_radius_max >= 0.0) {
            return Err(Error::InvalidParameter("contact_radius_max must be >= 0".into()));
        }
        self.ranges.validated()?;
        Ok(self)
    }

    /// Sample count per kind, in [`SweepKind::ALL`] order.
    pub fn counts(&self) -> [usize; 6] {
        let mixed = (self.n as f64 * self.mixed_fraction).round() as usize;
        let isolated = self.n - mixed;
        let mut counts = [0; 6];
        for (i, c) in counts.iter_mut().take(5).enumerate() {
            *c = isolated / 5 + usize::from(i < isolated % 5);
        }
        counts[5] = mixed;
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub sweep: SweepKind,
    pub wrench: Wrench,
    pub observables: MoireObservables,
}

fn linspace(min: f64, max: f64, n: usize, i: usize) -> f64 {
    if n <= 1 {
        min
    } else {
        min + (max - min) * i as f64 / (n - 1) as f64
    }
}

/// Isolated sweep of `n` wrenches, ascending along the swept axis.
pub fn sweep(kind: SweepKind, n: usize, spec: &DatasetSpec) -> Vec<Wrench> {
    let r = &spec.ranges;
    (0..n)
        .map(|i| match kind {
            SweepKind::Fz => Wrench::normal(linspace(r.fz.min, r.fz.max, n, i)),
            SweepKind::Fx => Wrench {
                fx: linspace(r.fx.min, r.fx.max, n, i),
                ..Wrench::ZERO
            },
            SweepKind::Fy => Wrench {
                fy: linspace(r.fy.min, r.fy.max, n, i),
                ..Wrench::ZERO
            },
            SweepKind::Tz => Wrench {
                tz: linspace(r.tz.min, r.tz.max, n, i),
                ..Wrench::ZERO
            },
            SweepKind::Tilt => tilt_point(i, n, spec),
            SweepKind::Mixed => Wrench::ZERO,
        })
        .collect()
}

/// Contact offsets on a sunflower spiral filling the admissible disk.
fn tilt_point(i: usize, n: usize, spec: &DatasetSpec) -> Wrench {
    let fz = spec.tilt_preload;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let radius = spec.contact_radius_max * ((i as f64 + 0.5) / n as f64).sqrt();
    let angle = i as f64 * golden;
    contact_wrench(fz, [radius * angle.cos(), radius * angle.sin()], &spec.ranges)
}

/// Normal load `fz` applied at contact offset `c` (mm): `Tx = Fz·c_y`,
/// `Ty = −Fz·c_x`, clipped to the torque ranges.
pub fn contact_wrench(fz: f64, c: [f64; 2], ranges: &WrenchRanges) -> Wrench {
    Wrench {
        fz,
        tx: (fz * c[1] / 1000.0).clamp(ranges.tx.min, ranges.tx.max),
        ty: (-fz * c[0] / 1000.0).clamp(ranges.ty.min, ranges.ty.max),
        ..Wrench::ZERO
    }
}

fn mixed(rng: &mut ChaCha8Rng, spec: &DatasetSpec) -> Wrench {
    let r = &spec.ranges;
    let mut uniform = |range: crate::load::Range| range.lerp(rng.random::<f64>());
    let fz = uniform(r.fz);
    let fx = uniform(r.fx);
    let fy = uniform(r.fy);
    let tz = uniform(r.tz);
    let radius = spec.contact_radius_max * rng.random::<f64>().sqrt();
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let tilt = if fz >= r.f_floor {
        contact_wrench(fz, [radius * angle.cos(), radius * angle.sin()], r)
    } else {
        Wrench::normal(fz)
    };
    Wrench { fx, fy, tz, ..tilt }
}

/// Every wrench of the dataset with its sweep label, in dataset order.
pub fn dataset_wrenches(spec: &DatasetSpec) -> Result<Vec<(SweepKind, Wrench)>> {
    let spec = spec.validated()?;
    let counts = spec.counts();
    let mut out = Vec::with_capacity(spec.n);
    for (kind, &count) in SweepKind::ISOLATED.iter().zip(&counts) {
        out.extend(sweep(*kind, count, &spec).into_iter().map(|w| (*kind, w)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..counts[5] {
        out.push((SweepKind::Mixed, mixed(&mut rng, &spec)));
    }
    Ok(out)
}

/// Everything needed to turn wrenches into observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulator {
    pub geometry: SensorGeometry,
    pub material: MaterialModel,
    pub ranges: WrenchRanges,
    pub render: RenderConfig,
    pub spectral: SpectralConfig,
}

impl Simulator {
    pub fn deformation(&self, w: &Wrench) -> Result<DeformationState> {
        wrench_to_deformation(w, &self.material, &self.geometry, &self.ranges)
    }

    /// Frame `index` of a run.
    pub fn frame(&self, w: &Wrench, index: u64) -> Result<ImageGray> {
        let d = self.deformation(w)?;
        render_frame(&self.geometry, &d, &self.material, &self.render, index)
    }

    /// Noiseless zero-wrench frame.
    pub fn reference_image(&self) -> Result<ImageGray> {
        let d = self.deformation(&Wrench::ZERO)?;
        render(&self.geometry, &d, &self.material, &self.render.noiseless())
    }

    pub fn reference(&self) -> Result<ReferenceFrame> {
        ReferenceFrame::new(&self.reference_image()?, &self.spectral)
    }

    /// Renders and extracts every wrench; frame `i` uses noise stream `i`.
    pub fn observe(&self, wrenches: &[Wrench], reference: &ReferenceFrame) -> Result<Vec<MoireObservables>> {
        wrenches
            .par_iter()
            .enumerate()
            .map(|(i, w)| extract_all(&self.frame(w, i as u64)?, reference))
            .collect()
    }

    pub fn build_dataset(&self, spec: &DatasetSpec) -> Result<Vec<Sample>> {
        let labelled = dataset_wrenches(spec)?;
        let reference = self.reference()?;
        let wrenches: Vec<Wrench> = labelled.iter().map(|(_, w)| *w).collect();
        let observables = self.observe(&wrenches, &reference)?;
        Ok(labelled
            .into_iter()
            .zip(observables)
            .enumerate()
            .map(|(index, ((sweep, wrench), observables))| Sample {
                index,
                sweep,
                wrench,
                observables,
            })
            .collect())
    }
}
