//! Physics observables of a fringe image: brightness, brightness centroid,
//! spectral peak (period and orientation) and demodulated phase.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{bin_of, signed_bin, Fft2};
use crate::image::ImageGray;
use crate::optics::{fold_half_plane, wrap_angle, WaveVector2};

/// Smallest image side accepted by the spectral routines.
pub const MIN_SPECTRAL_SIDE: usize = 64;

/// Column names of the feature CSV, after the leading `frame` column.
pub const FEATURE_COLUMNS: [&str; 10] = [
    "I",
    "cx",
    "cy",
    "gpx",
    "gpy",
    "theta",
    "lambda",
    "band_energy",
    "pox",
    "poy",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// Bins around DC ignored by the peak search.
    pub dc_exclusion_radius: f64,
    /// Minimum share of in-band energy the peak bin must hold.
    pub peak_floor: f64,
    /// Shortest fringe period searched, mm. Keeps the grating carriers out
    /// of the search band.
    pub min_period: f64,
    /// Radius in bins of the neighborhood counted as band energy.
    pub band_radius: f64,
    /// Side fraction of the centered window used for phase statistics.
    pub roi_fraction: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            dc_exclusion_radius: 2.0,
            peak_floor: 0.05,
            min_period: 0.5,
            band_radius: 3.0,
            roi_fraction: 0.7,
        }
    }
}

impl SpectralConfig {
    pub fn validated(self) -> Result<Self> {
        let ok = self.dc_exclusion_radius >= 0.0
            && (0.0..1.0).contains(&self.peak_floor)
            && self.min_period > 0.0
            && self.band_radius >= 0.0
            && self.roi_fraction > 0.0
            && self.roi_fraction <= 1.0;
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!("invalid spectral settings {self:?}")))
        }
    }
}

/// Restriction of the peak search to a wedge of folded orientations and,
/// optionally, an annulus of wavevector magnitudes (rad/mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub center: f64,
    pub half_width: f64,
    pub magnitude: Option<(f64, f64)>,
}

impl Sector {
    pub fn new(center: f64, half_width: f64) -> Self {
        Self {
            center,
            half_width,
            magnitude: None,
        }
    }

    pub fn with_magnitude(mut self, min: f64, max: f64) -> Self {
        self.magnitude = Some((min, max));
        self
    }

    fn contains(&self, kx: f64, ky: f64) -> bool {
        if let Some((min, max)) = self.magnitude {
            let k = kx.hypot(ky);
            if k < min || k > max {
                return false;
            }
        }
        fold_half_plane(ky.atan2(kx) - self.center).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// Refined peak in the half-plane `Kx > 0` (or `Kx = 0, Ky > 0`).
    pub wavevector: WaveVector2,
    pub period: f64,
    pub orientation: f64,
    pub band_energy: f64,
    /// Power of the peak bin.
    pub power: f64,
}

/// Record of observables for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoireObservables {
    pub mean_brightness: f64,
    /// mm, relative to the image center.
    pub centroid: [f64; 2],
    /// Mean gradient of the phase change along the primary band, rad/mm.
    pub mean_phase_gradient: [f64; 2],
    /// Phase change at the image center for the primary and secondary
    /// bands, rad. The secondary entry is zero for line gratings.
    pub phase_offset: [f64; 2],
    pub orientation: f64,
    pub period: f64,
    pub band_energy: f64,
}

impl MoireObservables {
    pub fn to_row(&self) -> [f64; 10] {
        [
            self.mean_brightness,
            self.centroid[0],
            self.centroid[1],
            self.mean_phase_gradient[0],
            self.mean_phase_gradient[1],
            self.orientation,
            self.period,
            self.band_energy,
            self.phase_offset[0],
            self.phase_offset[1],
        ]
    }

    pub fn from_row(row: [f64; 10]) -> Self {
        Self {
            mean_brightness: row[0],
            centroid: [row[1], row[2]],
            mean_phase_gradient: [row[3], row[4]],
            orientation: row[5],
            period: row[6],
            band_energy: row[7],
            phase_offset: [row[8], row[9]],
        }
    }
}

/// Wrapped phase sampled every `step` pixels of the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub width: usize,
    pub height: usize,
    /// Source image px/mm.
    pub scale: f64,
    /// Source pixels per sample along x and y.
    pub step: [usize; 2],
    pub values: Vec<f64>,
}

impl PhaseField {
    /// Position of sample `j` along `axis` (0 = x), mm from the center.
    pub fn position(&self, j: usize, axis: usize) -> f64 {
        let n = [self.width, self.height][axis] * self.step[axis];
        ((j * self.step[axis]) as f64 + 0.5 - n as f64 / 2.0) / self.scale
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Smallest sample count a phase field is decimated to along one side.
const MIN_PHASE_SAMPLES: usize = 64;

/// Largest divisor `d` of `n` leaving at least `needed` samples.
fn decimation(n: usize, needed: usize) -> usize {
    let needed = needed.max(MIN_PHASE_SAMPLES);
    (1..=n).rev().find(|&d| n % d == 0 && n / d >= needed).unwrap_or(1)
}

/// Statistics of a phase-change field over the central region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseStatistics {
    /// rad/mm.
    pub gradient: [f64; 2],
    /// Plane-removed circular mean, i.e. the change at the image center, rad.
    pub offset: f64,
    /// Standard deviation of the plane-removed residual, rad.
    pub residual_std: f64,
}

pub fn mean_brightness(img: &ImageGray) -> f64 {
    let values = img.values();
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn brightness_centroid(img: &ImageGray) -> Result<[f64; 2]> {
    let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for row in 0..img.height() {
        let y = img.y_of(row);
        let mut line = 0.0;
        let mut line_x = 0.0;
        for col in 0..img.width() {
            let v = img.get(col, row);
            line += v;
            line_x += v * img.x_of(col);
        }
        total += line;
        sx += line_x;
        sy += line * y;
    }
    if total <= 0.0 {
        return Err(Error::ZeroImage);
    }
    Ok([sx / total, sy / total])
}

fn check_size(img: &ImageGray) -> Result<()> {
    if img.width() < MIN_SPECTRAL_SIDE || img.height() < MIN_SPECTRAL_SIDE {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Unwindowed spectrum of the mean-removed image.
fn raw_spectrum(img: &ImageGray) -> Vec<Complex64> {
    let mean = mean_brightness(img);
    let mut data: Vec<Complex64> = img.values().iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    Fft2::forward(img.width(), img.height()).process(&mut data);
    data
}

/// Windowed power spectrum of a mean-removed image.
struct PowerSpectrum {
    width: usize,
    height: usize,
    /// rad/mm per bin along x and y.
    dk: [f64; 2],
    power: Vec<f64>,
}

impl PowerSpectrum {
    fn new(img: &ImageGray) -> Self {
        Self::from_spectrum(&raw_spectrum(img), img.width(), img.height(), img.scale())
    }

    /// Applies the separable Hann window as a three-tap convolution on the
    /// unwindowed spectrum; exact for the pixel-centered window.
    fn from_spectrum(spectrum: &[Complex64], w: usize, h: usize, scale: f64) -> Self {
        let taps = |n: usize| {
            let t = Complex64::from_polar(0.25, PI / n as f64);
            (-t, -t.conj())
        };
        let (lx, rx) = taps(w);
        let mut rows = vec![Complex64::default(); w * h];
        for (out, line) in rows.chunks_exact_mut(w).zip(spectrum.chunks_exact(w)) {
            for f in 0..w {
                let below = line[(f + w - 1) % w];
                let above = line[(f + 1) % w];
                out[f] = 0.5 * line[f] + lx * below + rx * above;
            }
        }
        let (ly, ry) = taps(h);
        let mut power = vec![0.0; w * h];
        for f in 0..h {
            let below = &rows[((f + h - 1) % h) * w..][..w];
            let here = &rows[f * w..][..w];
            let above = &rows[((f + 1) % h) * w..][..w];
            for c in 0..w {
                power[f * w + c] = (0.5 * here[c] + ly * below[c] + ry * above[c]).norm_sqr();
            }
        }
        Self {
            width: w,
            height: h,
            dk: [TAU * scale / w as f64, TAU * scale / h as f64],
            power,
        }
    }

    fn at(&self, fx: i64, fy: i64) -> f64 {
        self.power[bin_of(fy, self.height) * self.width + bin_of(fx, self.width)]
    }

    fn peak(&self, cfg: &SpectralConfig, sector: Option<Sector>) -> Result<SpectralPeak> {
        let k_max = TAU / cfg.min_period;
        let dc2 = cfg.dc_exclusion_radius * cfg.dc_exclusion_radius;
        let mut total = 0.0;
        let mut best: Option<(i64, i64, f64)> = None;
        for by in 0..self.height {
            let fy = signed_bin(by, self.height);
            for bx in 0..self.width {
                let fx = signed_bin(bx, self.width);
                if fx < 0 || (fx == 0 && fy <= 0) {
                    continue;
                }
                if ((fx * fx + fy * fy) as f64) <= dc2 {
                    continue;
                }
                let (kx, ky) = (fx as f64 * self.dk[0], fy as f64 * self.dk[1]);
                if kx.hypot(ky) > k_max {
                    continue;
                }
                if let Some(s) = sector {
                    if !s.contains(kx, ky) {
                        continue;
                    }
                }
                let p = self.power[by * self.width + bx];
                total += p;
                if best.is_none_or(|(_, _, bp)| p > bp) {
                    best = Some((fx, fy, p));
                }
            }
        }
        let Some((fx, fy, peak)) = best else {
            return Err(Error::NoPeak);
        };
        // numerically flat spectra carry no fringe
        let pixels = (self.width * self.height) as f64;
        if !(total > 1e-24 * pixels * pixels) || peak < cfg.peak_floor * total {
            return Err(Error::NoPeak);
        }

        let refine = |minus: f64, plus: f64| {
            let (l, c, r) = (minus.max(1e-300).ln(), peak.max(1e-300).ln(), plus.max(1e-300).ln());
            let denom = l - 2.0 * c + r;
            if denom < 0.0 {
                (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        };
        let ox = refine(self.at(fx - 1, fy), self.at(fx + 1, fy));
        let oy = refine(self.at(fx, fy - 1), self.at(fx, fy + 1));
        let k = WaveVector2::new((fx as f64 + ox) * self.dk[0], (fy as f64 + oy) * self.dk[1]);

        let radius = cfg.band_radius;
        let reach = radius.ceil() as i64;
        let mut band = 0.0;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= radius * radius {
                    band += self.at(fx + dx, fy + dy);
                }
            }
        }
        Ok(SpectralPeak {
            wavevector: k,
            period: TAU / k.norm(),
            orientation: fold_half_plane(k.ky.atan2(k.kx)),
            band_energy: (band / total).min(1.0),
            power: peak,
        })
    }
}

/// Dominant fringe peak of the image.
pub fn spectral_peak(img: &ImageGray, cfg: &SpectralConfig) -> Result<SpectralPeak> {
    spectral_peak_in_sector(img, cfg, None)
}

/// Dominant fringe peak among orientations inside `sector`.
pub fn spectral_peak_in_sector(img: &ImageGray, cfg: &SpectralConfig, sector: Option<Sector>) -> Result<SpectralPeak> {
    check_size(img)?;
    PowerSpectrum::new(img).peak(cfg, sector)
}

/// Fourier-domain demodulator; one forward transform serves any number of
/// carriers.
pub struct Demodulator {
    width: usize,
    height: usize,
    scale: f64,
    spectrum: Vec<Complex64>,
}

impl Demodulator {
    pub fn new(img: &ImageGray) -> Result<Self> {
        check_size(img)?;
        let spectrum = raw_spectrum(img);
        Ok(Self {
            width: img.width(),
            height: img.height(),
            scale: img.scale(),
            spectrum,
        })
    }

    fn power_spectrum(&self) -> PowerSpectrum {
        PowerSpectrum::from_spectrum(&self.spectrum, self.width, self.height, self.scale)
    }

    /// Phase of the fringe component at `k`, with the carrier `k·x`
    /// removed. A fringe field translated by `u` reads `+k·u`.
    pub fn phase(&self, k: WaveVector2) -> Result<PhaseField> {
        let magnitude = k.norm();
        if !(magnitude > 0.0) {
            return Err(Error::NoPeak);
        }
        let (w, h) = (self.width, self.height);
        let dk = [TAU * self.scale / w as f64, TAU * self.scale / h as f64];
        // raised-cosine pass band of radius ‖k‖/2 around the carrier; a
        // hard edge would ring across the whole field
        let cutoff = 0.5 * magnitude;
        // the pass band occupies a small block of bins, so the analytic
        // signal is recovered exactly on a coarser grid by folding the band
        // into a smaller transform; the margin keeps neighboring samples
        // well within a cycle of each other
        let band_bins = |step: f64| 2 * ((2.0 * cutoff / step).ceil() as usize + 2);
        let step = [decimation(w, band_bins(dk[0])), decimation(h, band_bins(dk[1]))];
        let (sw, sh) = (w / step[0], h / step[1]);
        let mut folded = vec![Complex64::default(); sw * sh];
        let mut kept = 0usize;
        let span = |center: f64, delta: f64, n: usize| {
            let lo = ((center - cutoff) / delta).floor() as i64;
            let hi = ((center + cutoff) / delta).ceil() as i64;
            let half = (n / 2) as i64;
            lo.max(-half)..=hi.min((n as i64 - 1) - half)
        };
        for fy in span(k.ky, dk[1], h) {
            let ky = fy as f64 * dk[1];
            let (by, sy) = (bin_of(fy, h), bin_of(fy, sh));
            for fx in span(k.kx, dk[0], w) {
                let kx = fx as f64 * dk[0];
                let r = (kx - k.kx).hypot(ky - k.ky);
                if r < cutoff {
                    let gain = 0.5 * (1.0 + (PI * r / cutoff).cos());
                    folded[sy * sw + bin_of(fx, sw)] += self.spectrum[by * w + bin_of(fx, w)] * gain;
                    kept += 1;
                }
            }
        }
        if kept == 0 {
            return Err(Error::NoPeak);
        }
        Fft2::inverse(sw, sh).process(&mut folded);
        let mut field = PhaseField {
            width: sw,
            height: sh,
            scale: self.scale,
            step,
            values: Vec::with_capacity(sw * sh),
        };
        let cx: Vec<Complex64> = (0..sw).map(|j| Complex64::from_polar(1.0, -k.kx * field.position(j, 0))).collect();
        let cy: Vec<Complex64> = (0..sh).map(|j| Complex64::from_polar(1.0, -k.ky * field.position(j, 1))).collect();
        for (row, line) in folded.chunks_exact(sw).enumerate() {
            for (z, tx) in line.iter().zip(&cx) {
                field.values.push(wrap_angle(-(z * tx * cy[row]).arg()));
            }
        }
        Ok(field)
    }
}

/// Demodulated phase of the fringe component at `k`, wrapped to `(−π, π]`.
/// The pass band is a raised cosine of radius `‖k‖/2` around `k`.
pub fn phase_map(img: &ImageGray, k: WaveVector2) -> Result<PhaseField> {
    Demodulator::new(img)?.phase(k)
}

/// `wrap_angle` for arguments within (−3π, 3π].
fn wrap_small(a: f64) -> f64 {
    if a > PI {
        a - TAU
    } else if a <= -PI {
        a + TAU
    } else {
        a
    }
}

/// Gradient, offset and residual of `phase − reference` over the centered
/// window covering `roi_fraction` of each side.
pub fn phase_statistics(phase: &PhaseField, reference: &PhaseField, roi_fraction: f64) -> Result<PhaseStatistics> {
    if phase.width != reference.width || phase.height != reference.height || phase.step != reference.step {
        return Err(Error::DimensionMismatch(format!(
            "phase fields {}x{} and {}x{} on different grids",
            phase.width, phase.height, reference.width, reference.height
        )));
    }
    let (w, h) = (phase.width, phase.height);
    let window = |n: usize| {
        let keep = ((n as f64 * roi_fraction).round() as usize).clamp(2, n);
        let start = (n - keep) / 2;
        (start, start + keep)
    };
    let (c0, c1) = window(w);
    let (r0, r1) = window(h);
    let diff = |c: usize, r: usize| wrap_small(phase.values[r * w + c] - reference.values[r * w + c]);

    let (mut gx, mut gy, mut nx, mut ny) = (0.0, 0.0, 0usize, 0usize);
    for r in r0..r1 {
        for c in c0..c1 {
            let here = diff(c, r);
            if c + 1 < c1 {
                gx += wrap_small(diff(c + 1, r) - here);
                nx += 1;
            }
            if r + 1 < r1 {
                gy += wrap_small(diff(c, r + 1) - here);
                ny += 1;
            }
        }
    }
    let gradient = [
        gx / nx.max(1) as f64 * phase.scale / phase.step[0] as f64,
        gy / ny.max(1) as f64 * phase.scale / phase.step[1] as f64,
    ];

    let residual = |c: usize, r: usize| diff(c, r) - gradient[0] * phase.position(c, 0) - gradient[1] * phase.position(r, 1);
    let mut sum = Complex64::default();
    for r in r0..r1 {
        for c in c0..c1 {
            sum += Complex64::from_polar(1.0, residual(c, r));
        }
    }
    let offset = sum.arg();
    let mut square = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            square += wrap_angle(residual(c, r) - offset).powi(2);
        }
    }
    let count = ((c1 - c0) * (r1 - r0)) as f64;
    Ok(PhaseStatistics {
        gradient,
        offset: wrap_angle(offset),
        residual_std: (square / count).sqrt(),
    })
}

/// `⟨∂x Δφ⟩, ⟨∂y Δφ⟩` over the default central 70% window.
pub fn mean_phase_gradient(phase: &PhaseField, reference: &PhaseField) -> Result<[f64; 2]> {
    Ok(phase_statistics(phase, reference, SpectralConfig::default().roi_fraction)?.gradient)
}

/// A fringe band tracked from the reference frame.
#[derive(Debug, Clone)]
pub struct Band {
    pub wavevector: WaveVector2,
    pub phase: PhaseField,
}

/// Zero-wrench frame with its fringe bands located and demodulated.
#[derive(Debug, Clone)]
pub struct ReferenceFrame {
    pub primary: Band,
    pub secondary: Option<Band>,
    pub peak: SpectralPeak,
    pub config: SpectralConfig,
}

/// Half-width of the sector searched around each reference band.
const TRACKING_HALF_WIDTH: f64 = FRAC_PI_4;
/// Range of wavevector magnitudes tracked, relative to the reference band.
const TRACKING_MAGNITUDE: (f64, f64) = (0.5, 2.0);
/// Half-width of the sector where an orthogonal companion band is sought.
const COMPANION_HALF_WIDTH: f64 = PI / 6.0;
/// Companion peak power relative to the global peak needed to accept it.
const COMPANION_MIN_POWER: f64 = 0.25;

impl ReferenceFrame {
    pub fn new(img: &ImageGray, cfg: &SpectralConfig) -> Result<Self> {
        let cfg = cfg.validated()?;
        check_size(img)?;
        let demodulator = Demodulator::new(img)?;
        let spectrum = demodulator.power_spectrum();
        let global = spectrum.peak(&cfg, None)?;
        let companion = spectrum
            .peak(
                &cfg,
                Some(
                    Sector::new(global.orientation + FRAC_PI_2, COMPANION_HALF_WIDTH)
                        .with_magnitude(0.5 * global.wavevector.norm(), 2.0 * global.wavevector.norm()),
                ),
            )
            .ok()
            .filter(|p| p.power >= COMPANION_MIN_POWER * global.power);
        // the band closer to the x axis is primary, so the order does not
        // depend on which of two similar peaks happens to win
        let (primary, secondary) = match companion {
            Some(c) if c.orientation.abs() < global.orientation.abs() => (c, Some(global)),
            Some(c) => (global, Some(c)),
            None => (global, None),
        };
        let band = |p: &SpectralPeak| -> Result<Band> {
            Ok(Band {
                wavevector: p.wavevector,
                phase: demodulator.phase(p.wavevector)?,
            })
        };
        Ok(Self {
            primary: band(&primary)?,
            secondary: secondary.as_ref().map(band).transpose()?,
            peak: primary,
            config: cfg,
        })
    }

    /// Search window around a reference band: contact brightness puts
    /// energy near DC, so the magnitude is bounded as well as the angle.
    fn sector(k: WaveVector2) -> Sector {
        let magnitude = k.norm();
        Sector::new(fold_half_plane(k.ky.atan2(k.kx)), TRACKING_HALF_WIDTH)
            .with_magnitude(TRACKING_MAGNITUDE.0 * magnitude, TRACKING_MAGNITUDE.1 * magnitude)
    }
}

/// All observables of `img` relative to `reference`.
pub fn extract_all(img: &ImageGray, reference: &ReferenceFrame) -> Result<MoireObservables> {
    let cfg = &reference.config;
    let ref_phase = &reference.primary.phase;
    let (rw, rh) = (ref_phase.width * ref_phase.step[0], ref_phase.height * ref_phase.step[1]);
    if img.width() != rw || img.height() != rh {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs reference {}x{}",
            img.width(),
            img.height(),
            rw,
            rh
        )));
    }
    let demodulator = Demodulator::new(img)?;
    let peak = demodulator
        .power_spectrum()
        .peak(cfg, Some(ReferenceFrame::sector(reference.primary.wavevector)))?;
    let primary = phase_statistics(
        &demodulator.phase(reference.primary.wavevector)?,
        &reference.primary.phase,
        cfg.roi_fraction,
    )?;
    let secondary_offset = match &reference.secondary {
        Some(band) => phase_statistics(&demodulator.phase(band.wavevector)?, &band.phase, cfg.roi_fraction)?.offset,
        None => 0.0,
    };
    Ok(MoireObservables {
        mean_brightness: mean_brightness(img),
        centroid: brightness_centroid(img)?,
        mean_phase_gradient: primary.gradient,
        phase_offset: [primary.offset, secondary_offset],
        orientation: peak.orientation,
        period: peak.period,
        band_energy: peak.band_energy,
    })
}
