//! Fringe image renderer.
//!
//! Each grating layer is a raised-cosine transmission; the camera sees their
//! product. The deformed far grating is stretched by the lateral strain,
//! rotated by the load twist and projected through the reduced spacing.
//! Contact adds blurred Hertzian brightness and a bright rim at the contact
//! edge; pixel noise comes last.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageGray, STANDARD_RESOLUTION, STANDARD_SCALE};
use crate::load::{pressure_at, wrench_to_deformation, DeformationState, MaterialModel, Wrench, WrenchRanges};
use crate::optics::{moire_descriptor, FringeDescriptor, Grating, GratingLayout, SensorGeometry, WaveVector2};

/// Finest grating period that can be rendered, pixels.
pub const MIN_PITCH_PX: f64 = 3.0;

/// FWHM of a Gaussian divided by its sigma.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Square frame size, pixels.
    pub resolution: usize,
    /// px/mm.
    pub scale: f64,
    pub noise_sigma: f64,
    /// Peak rim brightness at `rim_force_ref`.
    pub rim_gain: f64,
    /// Rim FWHM, mm.
    pub rim_width: f64,
    /// Normal load at which the rim reaches `rim_gain`, N. The rim peak
    /// scales as `(Fz/rim_force_ref)^(2/3)`, so with the Hertzian radius
    /// growing as `Fz^(1/3)` its integrated brightness is proportional to Fz.
    pub rim_force_ref: f64,
    pub baseline_intensity: f64,
    /// Half-width of the region with full fringe contrast, mm.
    pub aperture_half_width: f64,
    /// Width of the cosine taper outside the aperture, mm. Beyond it the
    /// fringes fade to their mean level.
    pub aperture_taper: f64,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            resolution: STANDARD_RESOLUTION,
            scale: STANDARD_SCALE,
            noise_sigma: 0.01,
            rim_gain: 0.15,
            rim_width: 1.0,
            rim_force_ref: 1.2,
            baseline_intensity: 0.1,
            aperture_half_width: 8.0,
            aperture_taper: 12.0,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = 0.0;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.resolution < 16 {
            return Err(Error::InvalidParameter(format!("resolution {} is too small", self.resolution)));
        }
        let checks = [
            ("scale", self.scale, self.scale > 0.0),
            ("noise_sigma", self.noise_sigma, self.noise_sigma >= 0.0),
            ("rim_gain", self.rim_gain, self.rim_gain >= 0.0),
            ("rim_width", self.rim_width, self.rim_width > 0.0),
            ("rim_force_ref", self.rim_force_ref, self.rim_force_ref > 0.0),
            (
                "baseline_intensity",
                self.baseline_intensity,
                (0.0..=1.0).contains(&self.baseline_intensity),
            ),
            ("aperture_half_width", self.aperture_half_width, self.aperture_half_width >= 0.0),
            ("aperture_taper", self.aperture_taper, self.aperture_taper >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(Error::InvalidParameter(format!("render {name} out of range: {value}")));
            }
        }
        Ok(self)
    }

    /// Field of view along one side, mm.
    pub fn field_of_view(&self) -> f64 {
        self.resolution as f64 / self.scale
    }
}

/// The two gratings as the camera sees them for a given deformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGratings {
    pub far: Grating,
    pub near: Grating,
}

impl ProjectedGratings {
    pub fn new(g: &SensorGeometry, d: &DeformationState) -> Self {
        let z = g.camera_distance;
        let pitch = g.far.pitch * (1.0 + d.strain) * z / (z + d.spacing);
        Self {
            far: Grating {
                pitch,
                orientation: g.far.orientation + d.twist,
                phase_offset: g.far.phase_offset,
            },
            near: g.near,
        }
    }

    pub fn fringes(&self) -> Result<FringeDescriptor> {
        moire_descriptor(&self.far, &self.near)
    }
}

/// Analytic moire seen at the camera for a deformation.
pub fn analytic_fringes(g: &SensorGeometry, d: &DeformationState) -> Result<FringeDescriptor> {
    ProjectedGratings::new(g, d).fringes()
}

struct Harmonic {
    k: WaveVector2,
    phase: f64,
}

fn harmonics(g: &SensorGeometry, d: &DeformationState) -> Vec<Harmonic> {
    let projected = ProjectedGratings::new(g, d);
    let mut out = Vec::with_capacity(4);
    for grating in [projected.far, projected.near] {
        let k = grating.wavevector();
        let mut family = vec![k];
        if g.layout == GratingLayout::Crossed {
            family.push(k.perpendicular());
        }
        for k in family {
            // the fringe field moves rigidly with the contact layer
            out.push(Harmonic {
                k,
                phase: grating.phase_offset - k.dot(d.u),
            });
        }
    }
    out
}

fn aperture_profile(coords: &[f64], cfg: &RenderConfig) -> Vec<f64> {
    coords
        .iter()
        .map(|&c| {
            let excess = c.abs() - cfg.aperture_half_width;
            if excess <= 0.0 {
                1.0
            } else if cfg.aperture_taper <= 0.0 || excess >= cfg.aperture_taper {
                0.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * excess / cfg.aperture_taper).cos())
            }
        })
        .collect()
}

/// Renders one frame with the noise stream of frame 0.
pub fn render(g: &SensorGeometry, d: &DeformationState, m: &MaterialModel, cfg: &RenderConfig) -> Result<ImageGray> {
    render_frame(g, d, m, cfg, 0)
}

/// Renders one frame; `frame_index` selects an independent noise stream
/// under `cfg.seed`.
pub fn render_frame(
    g: &SensorGeometry,
    d: &DeformationState,
    m: &MaterialModel,
    cfg: &RenderConfig,
    frame_index: u64,
) -> Result<ImageGray> {
    let cfg = cfg.validated()?;
    let projected = ProjectedGratings::new(g, d);
    for grating in [projected.far, projected.near] {
        let pitch_px = grating.pitch * cfg.scale;
        if pitch_px < MIN_PITCH_PX {
            return Err(Error::UndersampledGrating { pitch_px });
        }
    }
    projected.fringes()?;

    let n = cfg.resolution;
    let mut img = ImageGray::zeros(n, n, cfg.scale);
    let coords: Vec<f64> = (0..n).map(|i| img.x_of(i)).collect();
    let terms = harmonics(g, d);
    // per-axis trig tables: cos(kx·x + ky·y + φ) = cx·cy − sx·sy
    let tables: Vec<[Vec<f64>; 4]> = terms
        .iter()
        .map(|h| {
            let (sx, cx): (Vec<f64>, Vec<f64>) = coords.iter().map(|&x| (h.k.kx * x + h.phase).sin_cos()).unzip();
            let (sy, cy): (Vec<f64>, Vec<f64>) = coords.iter().map(|&y| (h.k.ky * y).sin_cos()).unzip();
            [cx, sx, cy, sy]
        })
        .collect();
    let window = aperture_profile(&coords, &cfg);
    let mean_level = 0.5f64.powi(terms.len() as i32);
    let i0 = cfg.baseline_intensity;

    img.values_mut().par_chunks_mut(n).enumerate().for_each(|(row, out)| {
        let wy = window[row];
        for (col, px) in out.iter_mut().enumerate() {
            let mut pattern = 1.0;
            for [cx, sx, cy, sy] in &tables {
                pattern *= 0.5 * (1.0 + cx[col] * cy[row] - sx[col] * sy[row]);
            }
            let faded = mean_level + window[col] * wy * (pattern - mean_level);
            *px = i0 + faded * (1.0 - i0);
        }
    });

    add_contact(&mut img, d, m, &cfg);

    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(frame_index);
        let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in img.values_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in img.values_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(img)
}

/// Adds `κ·(P∗h)` and the contact rim inside the patch bounding box.
fn add_contact(img: &mut ImageGray, d: &DeformationState, m: &MaterialModel, cfg: &RenderConfig) {
    if d.contact_radius <= 0.0 || d.normal_load <= 0.0 {
        return;
    }
    let scale = cfg.scale;
    let psf_px = m.psf_sigma * scale;
    let rim_sigma = cfg.rim_width / FWHM_PER_SIGMA;
    let reach = d.contact_radius + (4.0 * m.psf_sigma).max(5.0 * rim_sigma);
    let (w, h) = (img.width(), img.height());
    let to_col = |x: f64| x * scale + w as f64 / 2.0 - 0.5;
    let to_row = |y: f64| y * scale + h as f64 / 2.0 - 0.5;
    let clamp_index = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
    let c0 = clamp_index(to_col(d.contact_center[0] - reach).floor(), w);
    let c1 = clamp_index(to_col(d.contact_center[0] + reach).ceil(), w);
    let r0 = clamp_index(to_row(d.contact_center[1] - reach).floor(), h);
    let r1 = clamp_index(to_row(d.contact_center[1] + reach).ceil(), h);
    if c1 <= c0 || r1 <= r0 {
        return;
    }
    let (bw, bh) = (c1 - c0 + 1, r1 - r0 + 1);

    let mut pressure = vec![0.0; bw * bh];
    for r in 0..bh {
        let y = img.y_of(r0 + r);
        for c in 0..bw {
            pressure[r * bw + c] = pressure_at(d, [img.x_of(c0 + c), y]);
        }
    }
    if psf_px > 0.0 {
        pressure = gaussian_blur(&pressure, bw, bh, psf_px);
    }

    let rim_peak = cfg.rim_gain * (d.normal_load / cfg.rim_force_ref).powf(2.0 / 3.0);
    let values = img.values_mut();
    for r in 0..bh {
        let y = (r0 + r) as f64 + 0.5 - h as f64 / 2.0;
        let y = y / scale - d.contact_center[1];
        for c in 0..bw {
            let x = ((c0 + c) as f64 + 0.5 - w as f64 / 2.0) / scale - d.contact_center[0];
            let radial = x.hypot(y) - d.contact_radius;
            let rim = rim_peak * (-0.5 * (radial / rim_sigma).powi(2)).exp();
            values[(r0 + r) * w + c0 + c] += m.brightness_gain * pressure[r * bw + c] + rim;
        }
    }
}

/// Separable Gaussian blur with zero padding.
fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma_px: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_px).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma_px).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let convolve = |get: &dyn Fn(isize) -> f64, n: usize, i: usize| {
        let mut acc = 0.0;
        for (t, k) in kernel.iter().enumerate() {
            let j = i as isize + t as isize - radius;
            if j >= 0 && (j as usize) < n {
                acc += k * get(j);
            }
        }
        acc
    };
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        let line = &src[r * w..(r + 1) * w];
        for c in 0..w {
            tmp[r * w + c] = convolve(&|j| line[j as usize], w, c);
        }
    }
    let mut out = vec![0.0; w * h];
    for c in 0..w {
        for r in 0..h {
            out[r * w + c] = convolve(&|j| tmp[j as usize * w + c], h, r);
        }
    }
    out
}

/// Renders a wrench trace. Frame `i` uses noise stream `i`, so the result
/// does not depend on the parallel schedule.
pub fn render_sequence(
    g: &SensorGeometry,
    trace: &[Wrench],
    m: &MaterialModel,
    ranges: &WrenchRanges,
    cfg: &RenderConfig,
) -> Result<Vec<ImageGray>> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("wrench trace is empty".into()));
    }
    trace
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let d = wrench_to_deformation(w, m, g, ranges)?;
            render_frame(g, &d, m, cfg, i as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::DesignPreset;

    fn small_cfg() -> RenderConfig {
        RenderConfig {
            resolution: 256,
            scale: 20.0,
            ..RenderConfig::default()
        }
    }

    fn geom() -> SensorGeometry {
        SensorGeometry::preset(DesignPreset::Mid)
    }

    fn deform(w: Wrench) -> DeformationState {
        wrench_to_deformation(&w, &MaterialModel::default(), &geom(), &WrenchRanges::default()).unwrap()
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let cfg = small_cfg().with_noise(0.2);
        let img = render(&geom(), &deform(Wrench::normal(1.2)), &MaterialModel::default(), &cfg).unwrap();
        assert!(img.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn undersampled_grating_is_rejected() {
        let cfg = RenderConfig {
            scale: 10.0,
            ..small_cfg()
        };
        let d = DeformationState::identity(geom().spacing);
        assert!(matches!(
            render(&geom(), &d, &MaterialModel::default(), &cfg),
            Err(Error::UndersampledGrating { .. })
        ));
    }

    #[test]
    fn degenerate_projection_is_rejected() {
        let g = SensorGeometry::parallel(0.25, 0.2, 3.0, 12.0).unwrap();
        let d = DeformationState::identity(3.0);
        assert!(matches!(
            render(&g, &d, &MaterialModel::default(), &small_cfg()),
            Err(Error::DegenerateGratings { .. })
        ));
    }

    #[test]
    fn same_seed_same_frame_different_stream_differs() {
        let d = deform(Wrench::normal(0.3));
        let m = MaterialModel::default();
        let cfg = small_cfg().with_seed(42);
        let a = render_frame(&geom(), &d, &m, &cfg, 3).unwrap();
        let b = render_frame(&geom(), &d, &m, &cfg, 3).unwrap();
        let c = render_frame(&geom(), &d, &m, &cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn contact_brightens_and_draws_rim() {
        let m = MaterialModel::default();
        let cfg = RenderConfig::default().noiseless();
        let free = render(&geom(), &deform(Wrench::ZERO), &m, &cfg).unwrap();
        let d = deform(Wrench::normal(1.0));
        let pressed = render(&geom(), &d, &m, &cfg).unwrap();
        let mean = |img: &ImageGray| img.values().iter().sum::<f64>() / img.values().len() as f64;
        assert!(mean(&pressed) > mean(&free));

        // same fringes with the contact terms switched off
        let dark = MaterialModel {
            brightness_gain: 0.0,
            ..m
        };
        let fringes_only = render(&geom(), &d, &dark, &RenderConfig { rim_gain: 0.0, ..cfg }).unwrap();
        let ring_gain = |radius: f64| {
            let samples = 360;
            (0..samples)
                .map(|i| {
                    let t = i as f64 / samples as f64 * std::f64::consts::TAU;
                    let col = (radius * t.cos() * cfg.scale + 400.0) as usize;
                    let row = (radius * t.sin() * cfg.scale + 400.0) as usize;
                    pressed.get(col, row) - fringes_only.get(col, row)
                })
                .sum::<f64>()
                / samples as f64
        };
        let rim = ring_gain(d.contact_radius);
        let outside = ring_gain(d.contact_radius + 3.0);
        assert!(rim > 0.1, "rim gain {rim}");
        assert!(outside.abs() < 1e-3, "outside gain {outside}");
    }

    #[test]
    fn sequence_of_zero_wrenches_is_constant() {
        let frames = render_sequence(
            &geom(),
            &[Wrench::ZERO; 3],
            &MaterialModel::default(),
            &WrenchRanges::default(),
            &small_cfg().noiseless(),
        )
        .unwrap();
        assert_eq!(frames[0], frames[1]);
        assert_eq!(frames[1], frames[2]);
        assert!(render_sequence(&geom(), &[], &MaterialModel::default(), &WrenchRanges::default(), &small_cfg()).is_err());
    }

    #[test]
    fn blur_preserves_mass() {
        let (w, h) = (41, 41);
        let mut src = vec![0.0; w * h];
        src[20 * w + 20] = 1.0;
        let out = gaussian_blur(&src, w, h, 3.0);
        let total: f64 = out.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(out[20 * w + 20] > out[20 * w + 23]);
    }

    #[test]
    fn aperture_profile_shape() {
        let cfg = RenderConfig::default();
        let p = aperture_profile(&[0.0, 8.0, 14.0, 20.0, 25.0], &cfg);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 1.0);
        assert!((p[2] - 0.5).abs() < 1e-12);
        assert!(p[3].abs() < 1e-12);
        assert_eq!(p[4], 0.0);
    }
}
