//! Grating and moire geometry.
//!
//! Each grating is a single spatial harmonic `cos(k·x + φ)` with
//! `k = 2π/p · [cos α, sin α]`. Two superposed gratings beat at the
//! difference wavevector `K = k1 − k2`, whose magnitude sets the fringe
//! period `Λ = 2π/‖K‖` and whose direction sets the fringe orientation.
//!
//! Orientations of fringes are always reported in the folded half-plane
//! `(−π/2, π/2]`: an intensity image cannot tell `K` from `−K`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest moire wavevector magnitude (rad/mm) treated as a real beat.
pub const DEGENERACY_EPS: f64 = 1e-9;

/// Orientation difference (rad) below which two gratings count as parallel.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Tolerance on `δ_obj − a/Z` for the compression-trend boundary.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Folds a direction angle into the half-plane `(−π/2, π/2]`.
pub fn fold_half_plane(angle: f64) -> f64 {
    let mut a = wrap_angle(angle);
    if a > FRAC_PI_2 {
        a -= PI;
    } else if a <= -FRAC_PI_2 {
        a += PI;
    }
    a
}

/// A line grating: pitch in mm, orientation of its wavevector in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grating {
    pub pitch: f64,
    pub orientation: f64,
    #[serde(default)]
    pub phase_offset: f64,
}

impl Grating {
    pub fn new(pitch: f64, orientation: f64) -> Result<Self> {
        Self {
            pitch,
            orientation,
            phase_offset: 0.0,
        }
        .validated()
    }

    pub fn with_phase(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    /// Checks the pitch and normalizes the orientation into `(−π, π]`.
    pub fn validated(self) -> Result<Self> {
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grating pitch must be positive and finite, got {}",
                self.pitch
            )));
        }
        if !self.orientation.is_finite() || !self.phase_offset.is_finite() {
            return Err(Error::InvalidParameter(
                "grating orientation and phase must be finite".into(),
            ));
        }
        Ok(Self {
            orientation: wrap_angle(self.orientation),
            ..self
        })
    }

    pub fn wavevector(&self) -> WaveVector2 {
        grating_wavevector(self)
    }
}

/// Spatial frequency vector in rad/mm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WaveVector2 {
    pub kx: f64,
    pub ky: f64,
}

impl WaveVector2 {
    pub const fn new(kx: f64, ky: f64) -> Self {
        Self { kx, ky }
    }

    pub fn norm(&self) -> f64 {
        self.kx.hypot(self.ky)
    }

    pub fn dot(&self, v: [f64; 2]) -> f64 {
        self.kx * v[0] + self.ky * v[1]
    }

    /// The same vector rotated by +90°.
    pub fn perpendicular(&self) -> Self {
        Self::new(-self.ky, self.kx)
    }
}

impl std::ops::Sub for WaveVector2 {
    type Output = WaveVector2;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.kx - rhs.kx, self.ky - rhs.ky)
    }
}

impl std::ops::Neg for WaveVector2 {
    type Output = WaveVector2;

    fn neg(self) -> Self {
        Self::new(-self.kx, -self.ky)
    }
}

/// Moire fringe field produced by two gratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeDescriptor {
    pub wavevector: WaveVector2,
    /// Fringe period in mm.
    pub period: f64,
    /// Fringe orientation in `(−π/2, π/2]`.
    pub orientation: f64,
}

impl FringeDescriptor {
    pub fn from_wavevector(k: WaveVector2) -> Result<Self> {
        let magnitude = k.norm();
        if !(magnitude > DEGENERACY_EPS) {
            return Err(Error::DegenerateGratings { magnitude });
        }
        Ok(Self {
            wavevector: k,
            period: TAU / magnitude,
            orientation: fold_half_plane(k.ky.atan2(k.kx)),
        })
    }
}

/// How each grating layer is patterned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GratingLayout {
    /// One family of parallel lines per layer.
    #[default]
    Lines,
    /// Two orthogonal line families per layer (a square grid). The second
    /// family produces a second moire band rotated by 90°, which makes
    /// displacement along the first family's lines observable.
    Crossed,
}

/// Optical stack: far grating (pitch p1) at depth `Z + a`, near grating
/// (pitch p2) at depth `Z`, both seen by a camera on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorGeometry {
    pub far: Grating,
    pub near: Grating,
    /// Inter-grating spacing `a`, mm.
    pub spacing: f64,
    /// Camera distance `Z` to the near grating, mm.
    pub camera_distance: f64,
    #[serde(default)]
    pub layout: GratingLayout,
}

/// The three pitch pairs of the sensitivity-tuning study (`a/Z = 0.25`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignPreset {
    Dense,
    Mid,
    Sparse,
}

impl DesignPreset {
    pub const ALL: [DesignPreset; 3] = [DesignPreset::Dense, DesignPreset::Mid, DesignPreset::Sparse];

    /// `(p1, p2)` in mm.
    pub fn pitches(self) -> (f64, f64) {
        match self {
            DesignPreset::Dense => (0.20, 0.20),
            DesignPreset::Mid => (0.35, 0.30),
            DesignPreset::Sparse => (0.30, 0.25),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignPreset::Dense => "dense",
            DesignPreset::Mid => "mid",
            DesignPreset::Sparse => "sparse",
        }
    }
}

impl SensorGeometry {
    /// Default camera distance for presets, mm.
    pub const PRESET_CAMERA_DISTANCE: f64 = 12.0;
    /// Default spacing for presets, mm (`a/Z = 0.25`).
    pub const PRESET_SPACING: f64 = 3.0;

    pub fn new(far: Grating, near: Grating, spacing: f64, camera_distance: f64) -> Result<Self> {
        Self {
            far,
            near,
            spacing,
            camera_distance,
            layout: GratingLayout::Lines,
        }
        .validated()
    }

    /// Parallel axis-aligned gratings with the given pitches and `a/Z`.
    pub fn parallel(p1: f64, p2: f64, spacing: f64, camera_distance: f64) -> Result<Self> {
        Self::new(Grating::new(p1, 0.0)?, Grating::new(p2, 0.0)?, spacing, camera_distance)
    }

    pub fn preset(preset: DesignPreset) -> Self {
        let (p1, p2) = preset.pitches();
        Self::parallel(p1, p2, Self::PRESET_SPACING, Self::PRESET_CAMERA_DISTANCE)
            .expect("preset geometry is valid")
    }

    pub fn with_layout(mut self, layout: GratingLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn validated(self) -> Result<Self> {
        let far = self.far.validated()?;
        let near = self.near.validated()?;
        let (a, z) = (self.spacing, self.camera_distance);
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidParameter(format!("camera distance must be positive, got {z}")));
        }
        if !(a.is_finite() && a >= 0.0 && a < z) {
            return Err(Error::InvalidParameter(format!(
                "spacing must satisfy 0 <= a < Z, got a = {a}, Z = {z}"
            )));
        }
        Ok(Self { far, near, ..self })
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing / self.camera_distance
    }

    /// Far pitch as imaged at the near-grating plane: `p1·Z/(Z+a)`.
    pub fn apparent_far_pitch(&self) -> f64 {
        self.far.pitch * self.camera_distance / (self.camera_distance + self.spacing)
    }

    fn check_parallel(&self) -> Result<()> {
        let difference = fold_half_plane(self.far.orientation - self.near.orientation).abs();
        if difference > PARALLEL_EPS {
            return Err(Error::NonParallelGratings { difference });
        }
        Ok(())
    }
}

/// `k = (2π/p)·[cos α, sin α]`.
pub fn grating_wavevector(g: &Grating) -> WaveVector2 {
    let magnitude = TAU / g.pitch;
    WaveVector2::new(magnitude * g.orientation.cos(), magnitude * g.orientation.sin())
}

/// Beat between two gratings, `K = k1 − k2`.
pub fn moire_descriptor(g1: &Grating, g2: &Grating) -> Result<FringeDescriptor> {
    moire_descriptor_with_eps(g1, g2, DEGENERACY_EPS)
}

pub fn moire_descriptor_with_eps(g1: &Grating, g2: &Grating, eps: f64) -> Result<FringeDescriptor> {
    let k = grating_wavevector(g1) - grating_wavevector(g2);
    let magnitude = k.norm();
    if magnitude <= eps {
        return Err(Error::DegenerateGratings { magnitude });
    }
    FringeDescriptor::from_wavevector(k)
}

/// Exact period for pitches `p1, p2` at relative angle `Δα`.
pub fn period_general(p1: f64, p2: f64, delta_alpha: f64) -> Result<f64> {
    check_pitches(p1, p2)?;
    let denominator = p1 * p1 + p2 * p2 - 2.0 * p1 * p2 * delta_alpha.cos();
    // Same threshold as the wavevector route: ‖K‖ = 2π·sqrt(den)/(p1·p2).
    let magnitude = TAU * denominator.max(0.0).sqrt() / (p1 * p2);
    if magnitude <= DEGENERACY_EPS {
        return Err(Error::DegenerateGratings { magnitude });
    }
    Ok(p1 * p2 / denominator.sqrt())
}

/// Small-mismatch design regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Equal pitches, small rotation: `Λ ≈ p/Δα`.
    AngleDominated,
    /// Parallel gratings, small pitch mismatch: `Λ = p/δ`.
    PitchDominated,
}

/// Regime approximation of the period, with `p = (p1+p2)/2`.
pub fn period_approx(p1: f64, p2: f64, delta_alpha: f64, regime: Regime) -> Result<f64> {
    check_pitches(p1, p2)?;
    let p = 0.5 * (p1 + p2);
    match regime {
        Regime::AngleDominated => {
            let angle = delta_alpha.abs();
            if angle == 0.0 {
                return Err(Error::DegenerateGratings { magnitude: 0.0 });
            }
            Ok(p / angle)
        }
        Regime::PitchDominated => {
            let delta = delta_obj(p1, p2);
            if delta == 0.0 {
                return Err(Error::DegenerateGratings { magnitude: 0.0 });
            }
            Ok(p / delta)
        }
    }
}

/// Intrinsic mismatch `|p2 − p1| / ((p1+p2)/2)`.
pub fn delta_obj(p1: f64, p2: f64) -> f64 {
    (p2 - p1).abs() / (0.5 * (p1 + p2))
}

/// First-order effective mismatch `|δ_obj − a/Z|`.
///
/// This is the documented approximation; it reproduces the quoted δ_eff of
/// the three design presets but not their amplification (see
/// [`amplification_exact`]). Orientation is ignored.
pub fn delta_eff_approx(geom: &SensorGeometry) -> f64 {
    (delta_obj(geom.far.pitch, geom.near.pitch) - geom.spacing_ratio()).abs()
}

/// Amplification `A = q1/|q1 − q2|` with the projected far pitch
/// `q1 = p1·Z/(Z+a)` and `q2 = p2`. Equal to `Λ_apparent / q2`.
pub fn amplification_exact(geom: &SensorGeometry) -> Result<f64> {
    geom.check_parallel()?;
    let q1 = geom.apparent_far_pitch();
    let q2 = geom.near.pitch;
    let mismatch = (q1 - q2).abs();
    if mismatch == 0.0 || TAU * mismatch / (q1 * q2) <= DEGENERACY_EPS {
        return Err(Error::DegenerateGratings {
            magnitude: TAU * mismatch / (q1 * q2),
        });
    }
    Ok(q1 / mismatch)
}

/// Period of the moire seen by the camera, `q1·q2/|q1 − q2|` for parallel
/// gratings; for rotated gratings the projected pitches go through
/// [`moire_descriptor`].
pub fn apparent_descriptor(geom: &SensorGeometry) -> Result<FringeDescriptor> {
    let far = Grating {
        pitch: geom.apparent_far_pitch(),
        ..geom.far
    };
    moire_descriptor(&far, &geom.near)
}

/// Direction the fringes move under compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Sparser,
    Denser,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Sparser => "sparser",
            Trend::Denser => "denser",
        }
    }
}

/// Sign rule for the fringe trend under compression: `δ_obj < a/Z` means
/// compression lowers the effective mismatch and the period grows.
pub fn compression_trend(geom: &SensorGeometry) -> Result<Trend> {
    geom.check_parallel()?;
    let diff = delta_obj(geom.far.pitch, geom.near.pitch) - geom.spacing_ratio();
    if diff.abs() < BOUNDARY_EPS {
        Err(Error::BoundaryCase)
    } else if diff < 0.0 {
        Ok(Trend::Sparser)
    } else {
        Ok(Trend::Denser)
    }
}

fn check_pitches(p1: f64, p2: f64) -> Result<()> {
    if p1.is_finite() && p2.is_finite() && p1 > 0.0 && p2 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "pitches must be positive, got p1 = {p1}, p2 = {p2}"
        )))
    }
}
