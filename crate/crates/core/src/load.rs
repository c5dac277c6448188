//! Forward load model: wrench to grating deformation and contact pressure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::SensorGeometry;

/// Axis labels in wrench order.
pub const AXIS_NAMES: [&str; 6] = ["Fx", "Fy", "Fz", "Tx", "Ty", "Tz"];

/// Contact wrench. Forces in N, torques in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    #[serde(rename = "Fx")]
    pub fx: f64,
    #[serde(rename = "Fy")]
    pub fy: f64,
    #[serde(rename = "Fz")]
    pub fz: f64,
    #[serde(rename = "Tx")]
    pub tx: f64,
    #[serde(rename = "Ty")]
    pub ty: f64,
    #[serde(rename = "Tz")]
    pub tz: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        fx: 0.0,
        fy: 0.0,
        fz: 0.0,
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
    };

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            fx: v[0],
            fy: v[1],
            fz: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    pub fn normal(fz: f64) -> Self {
        Self { fz, ..Self::ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn symmetric(half: f64) -> Self {
        Self { min: -half, max: half }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    pub fn lerp(&self, t: f64) -> f64 {
        self.min + t * (self.max - self.min)
    }
}

/// Admissible wrench ranges plus the normal preload below which a tilt
/// moment cannot be realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WrenchRanges {
    pub fx: Range,
    pub fy: Range,
    pub fz: Range,
    pub tx: Range,
    pub ty: Range,
    pub tz: Range,
    /// N.
    pub f_floor: f64,
}

impl Default for WrenchRanges {
    fn default() -> Self {
        Self {
            fx: Range::symmetric(0.2),
            fy: Range::symmetric(0.2),
            fz: Range::new(0.0, 1.2),
            tx: Range::symmetric(0.012),
            ty: Range::symmetric(0.012),
            tz: Range::symmetric(0.008),
            f_floor: 0.05,
        }
    }
}

impl WrenchRanges {
    pub fn axes(&self) -> [Range; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    pub fn validated(self) -> Result<Self> {
        for (range, name) in self.axes().iter().zip(AXIS_NAMES) {
            if !(range.min.is_finite() && range.max.is_finite() && range.min <= range.max) {
                return Err(Error::InvalidParameter(format!("range for {name} is empty or not finite")));
            }
        }
        if self.fz.min < 0.0 {
            return Err(Error::InvalidParameter("normal force range must be non-negative".into()));
        }
        if !(self.f_floor.is_finite() && self.f_floor > 0.0) {
            return Err(Error::InvalidParameter("f_floor must be positive".into()));
        }
        Ok(self)
    }

    /// Checks a wrench against the ranges and the tilt-preload rule.
    pub fn check(&self, w: &Wrench) -> Result<()> {
        if !w.is_finite() {
            return Err(Error::InvalidParameter("wrench has non-finite components".into()));
        }
        for ((value, range), axis) in w.to_array().iter().zip(self.axes()).zip(AXIS_NAMES) {
            if !range.contains(*value) {
                return Err(Error::OutOfRange {
                    axis,
                    value: *value,
                    min: range.min,
                    max: range.max,
                });
            }
        }
        if (w.tx != 0.0 || w.ty != 0.0) && w.fz < self.f_floor {
            return Err(Error::TiltWithoutPreload {
                fz: w.fz,
                floor: self.f_floor,
            });
        }
        Ok(())
    }
}

/// Constitutive constants of the elastomer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialModel {
    /// Lateral strain per unit normal force, 1/N.
    pub c_strain: f64,
    /// N/mm.
    pub k_shear: f64,
    /// N·m/rad.
    pub k_twist: f64,
    /// N/mm.
    pub k_spacing: f64,
    /// Brightness per unit pressure, 1/(N/mm²).
    pub brightness_gain: f64,
    /// mm/N^(1/3).
    pub hertz_radius_coeff: f64,
    /// mm.
    pub psf_sigma: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            c_strain: 0.001,
            k_shear: 10.0,
            k_twist: 0.5,
            k_spacing: 100.0,
            brightness_gain: 4.0,
            hertz_radius_coeff: 2.5,
            psf_sigma: 0.5,
        }
    }
}

impl MaterialModel {
    /// Checks the constants alone and against the extremes of `ranges` on `geom`.
    pub fn validated(self, ranges: &WrenchRanges, geom: &SensorGeometry) -> Result<Self> {
        let positive = [
            ("k_shear", self.k_shear),
            ("k_twist", self.k_twist),
            ("k_spacing", self.k_spacing),
            ("hertz_radius_coeff", self.hertz_radius_coeff),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        for (name, value) in [
            ("c_strain", self.c_strain),
            ("brightness_gain", self.brightness_gain),
            ("psf_sigma", self.psf_sigma),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {value}")));
            }
        }
        let fz_max = ranges.fz.max_abs();
        if self.c_strain * fz_max >= 0.2 {
            return Err(Error::InvalidParameter(format!(
                "strain {} at the largest normal load exceeds 0.2",
                self.c_strain * fz_max
            )));
        }
        if geom.spacing - fz_max / self.k_spacing <= 0.0 {
            return Err(Error::InvalidParameter(
                "gratings would touch at the largest normal load".into(),
            ));
        }
        Ok(self)
    }
}

/// Deformed state of the upper grating and the contact patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationState {
    /// In-plane displacement of the upper grating, mm.
    pub u: [f64; 2],
    pub strain: f64,
    /// Rotation of the upper grating, rad.
    pub twist: f64,
    /// mm from the sensor center.
    pub contact_center: [f64; 2],
    /// Hertzian contact radius, mm.
    pub contact_radius: f64,
    /// Deformed inter-grating spacing, mm.
    pub spacing: f64,
    /// N/mm².
    pub peak_pressure: f64,
    /// Normal load that produced the patch, N.
    pub normal_load: f64,
}

impl DeformationState {
    /// Undeformed state for a stack with inter-grating spacing `a`.
    pub fn identity(spacing: f64) -> Self {
        Self {
            u: [0.0; 2],
            strain: 0.0,
            twist: 0.0,
            contact_center: [0.0; 2],
            contact_radius: 0.0,
            spacing,
            peak_pressure: 0.0,
            normal_load: 0.0,
        }
    }

    pub fn with_displacement(mut self, u: [f64; 2]) -> Self {
        self.u = u;
        self
    }
}

/// Maps a wrench forward through the linear constitutive laws.
///
/// Tilt moments are realized as an off-center contact: `Tx = Fz·c_y` and
/// `Ty = −Fz·c_x`, with torques converted to N·mm.
pub fn wrench_to_deformation(
    w: &Wrench,
    m: &MaterialModel,
    g: &SensorGeometry,
    ranges: &WrenchRanges,
) -> Result<DeformationState> {
    ranges.check(w)?;
    let fz = w.fz;
    let lever = 1000.0 / fz.max(ranges.f_floor);
    let spacing = g.spacing - fz / m.k_spacing;
    if spacing <= 0.0 {
        return Err(Error::InvalidParameter("deformed spacing is not positive".into()));
    }
    let (contact_radius, peak_pressure) = if fz > 0.0 {
        let radius = m.hertz_radius_coeff * fz.cbrt();
        (radius, 3.0 * fz / (2.0 * std::f64::consts::PI * radius * radius))
    } else {
        (0.0, 0.0)
    };
    Ok(DeformationState {
        u: [w.fx / m.k_shear, w.fy / m.k_shear],
        strain: m.c_strain * fz,
        twist: w.tz / m.k_twist,
        contact_center: [-w.ty * lever, w.tx * lever],
        contact_radius,
        spacing,
        peak_pressure,
        normal_load: fz,
    })
}

/// Hertzian pressure `P0·sqrt(1 − (r/a_c)²)` inside the contact, zero outside.
pub fn pressure_at(d: &DeformationState, x: [f64; 2]) -> f64 {
    if d.contact_radius <= 0.0 {
        return 0.0;
    }
    let dx = x[0] - d.contact_center[0];
    let dy = x[1] - d.contact_center[1];
    let s = (dx * dx + dy * dy) / (d.contact_radius * d.contact_radius);
    if s < 1.0 {
        d.peak_pressure * (1.0 - s).sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::DesignPreset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::preset(DesignPreset::Mid)
    }

    fn deform(w: Wrench) -> Result<DeformationState> {
        wrench_to_deformation(&w, &MaterialModel::default(), &geom(), &WrenchRanges::default())
    }

    #[test]
    fn zero_wrench_is_identity() {
        let d = deform(Wrench::ZERO).unwrap();
        assert_eq!(d, DeformationState::identity(geom().spacing));
    }

    #[test]
    fn shear_and_twist_laws() {
        let d = deform(Wrench { fx: 0.1, ..Wrench::ZERO }).unwrap();
        assert_relative_eq!(d.u[0], 0.01, max_relative = 1e-15);
        assert_eq!(d.u[1], 0.0);

        let m = MaterialModel {
            k_twist: 0.1,
            ..MaterialModel::default()
        };
        let w = Wrench { tz: 0.004, ..Wrench::ZERO };
        let d = wrench_to_deformation(&w, &m, &geom(), &WrenchRanges::default()).unwrap();
        assert_relative_eq!(d.twist, 0.04, max_relative = 1e-15);
    }

    #[test]
    fn tilt_maps_to_contact_offset() {
        let w = Wrench {
            fz: 1.0,
            tx: 0.005,
            ..Wrench::ZERO
        };
        let d = deform(w).unwrap();
        assert_relative_eq!(d.contact_center[1], 5.0, max_relative = 1e-12);
        assert_eq!(d.contact_center[0], 0.0);

        let w = Wrench {
            fz: 0.5,
            ty: 0.002,
            ..Wrench::ZERO
        };
        let d = deform(w).unwrap();
        assert_relative_eq!(d.contact_center[0], -4.0, max_relative = 1e-12);
    }

    #[test]
    fn range_and_preload_errors() {
        assert!(matches!(
            deform(Wrench::normal(1.5)),
            Err(Error::OutOfRange { axis: "Fz", .. })
        ));
        assert!(matches!(
            deform(Wrench { fx: -0.3, ..Wrench::ZERO }),
            Err(Error::OutOfRange { axis: "Fx", .. })
        ));
        assert!(matches!(
            deform(Wrench {
                fz: 0.01,
                tx: 0.001,
                ..Wrench::ZERO
            }),
            Err(Error::TiltWithoutPreload { .. })
        ));
        assert!(deform(Wrench {
            fx: f64::NAN,
            ..Wrench::ZERO
        })
        .is_err());
    }

    #[test]
    fn pressure_profile_points() {
        let d = deform(Wrench::normal(0.6)).unwrap();
        assert_relative_eq!(pressure_at(&d, [0.0, 0.0]), d.peak_pressure);
        assert_eq!(pressure_at(&d, [d.contact_radius, 0.0]), 0.0);
        assert_relative_eq!(
            pressure_at(&d, [0.0, d.contact_radius / 2.0]),
            d.peak_pressure * 3f64.sqrt() / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pressure_integrates_to_normal_load() {
        for fz in [0.2, 0.6, 1.2] {
            let d = deform(Wrench::normal(fz)).unwrap();
            // midpoint rule on a fine grid covering the patch
            let n = 1200;
            let half = d.contact_radius * 1.05;
            let h = 2.0 * half / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                let x = -half + (i as f64 + 0.5) * h;
                for j in 0..n {
                    let y = -half + (j as f64 + 0.5) * h;
                    total += pressure_at(&d, [x, y]);
                }
            }
            total *= h * h;
            assert!((total - fz).abs() / fz < 0.005, "Fz = {fz}: {total}");
        }
    }

    #[test]
    fn material_validation() {
        let ranges = WrenchRanges::default();
        assert!(MaterialModel::default().validated(&ranges, &geom()).is_ok());
        let soft = MaterialModel {
            k_spacing: 0.3,
            ..MaterialModel::default()
        };
        assert!(soft.validated(&ranges, &geom()).is_err());
        let stretchy = MaterialModel {
            c_strain: 0.2,
            ..MaterialModel::default()
        };
        assert!(stretchy.validated(&ranges, &geom()).is_err());
        let bad = MaterialModel {
            k_shear: 0.0,
            ..MaterialModel::default()
        };
        assert!(bad.validated(&ranges, &geom()).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_lateral_components(
            fx in -0.1f64..0.1,
            fy in -0.1f64..0.1,
            tz in -0.004f64..0.004,
        ) {
            let one = deform(Wrench { fx, fy, tz, ..Wrench::ZERO }).unwrap();
            let two = deform(Wrench { fx: 2.0 * fx, fy: 2.0 * fy, tz: 2.0 * tz, ..Wrench::ZERO }).unwrap();
            prop_assert_eq!(two.u[0], 2.0 * one.u[0]);
            prop_assert_eq!(two.u[1], 2.0 * one.u[1]);
            prop_assert_eq!(two.twist, 2.0 * one.twist);
        }

        #[test]
        fn moments_recovered_from_contact(
            fz in 0.05f64..1.2,
            tx in -0.012f64..0.012,
            ty in -0.012f64..0.012,
        ) {
            let d = deform(Wrench { fz, tx, ty, ..Wrench::ZERO }).unwrap();
            prop_assert!((fz * d.contact_center[1] / 1000.0 - tx).abs() <= 1e-15);
            prop_assert!((-fz * d.contact_center[0] / 1000.0 - ty).abs() <= 1e-15);
        }

        #[test]
        fn contact_grows_with_load(f1 in 0.01f64..1.19, step in 1e-3f64..0.5) {
            let f2 = (f1 + step).min(1.2);
            prop_assume!(f2 > f1);
            let a = deform(Wrench::normal(f1)).unwrap();
            let b = deform(Wrench::normal(f2)).unwrap();
            prop_assert!(b.contact_radius > a.contact_radius);
            let load_a = a.peak_pressure * a.contact_radius.powi(2);
            let load_b = b.peak_pressure * b.contact_radius.powi(2);
            prop_assert!(load_b > load_a);
        }
    }
}
