//! Energy-ratio contact gate with hysteresis and debounce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGray;

/// Floor on the baseline energy in the ratio denominator.
pub const ENERGY_EPS: f64 = 1e-12;
/// Side fraction of the centered window the ratio is computed over.
pub const GATE_ROI_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Vision,
    Tactile,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vision => "vision",
            Mode::Tactile => "tactile",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    /// Switch-on threshold. `None` means calibrate from noise-only frames.
    pub t_on: Option<f64>,
    pub hysteresis_ratio: f64,
    pub debounce_frames: u32,
    /// Hz.
    pub frame_rate: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            t_on: None,
            hysteresis_ratio: 0.8,
            debounce_frames: 2,
            frame_rate: 60.0,
        }
    }
}

impl GateConfig {
    pub fn with_threshold(mut self, t_on: f64) -> Self {
        self.t_on = Some(t_on);
        self
    }

    pub fn validated(self) -> Result<Self> {
        if let Some(t) = self.t_on {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!("t_on must be positive, got {t}")));
            }
        }
        if !(self.hysteresis_ratio > 0.0 && self.hysteresis_ratio < 1.0) {
            return Err(Error::InvalidParameter("hysteresis_ratio must lie in (0, 1)".into()));
        }
        if self.debounce_frames == 0 {
            return Err(Error::InvalidParameter("debounce_frames must be >= 1".into()));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::InvalidParameter("frame_rate must be positive".into()));
        }
        Ok(self)
    }

    /// Switch-on threshold; panics if it has not been set or calibrated.
    pub fn t_on(&self) -> f64 {
        self.t_on.expect("gate threshold not calibrated")
    }

    pub fn t_off(&self) -> f64 {
        self.t_on() * self.hysteresis_ratio
    }

    /// Time from the first frame of a sustained crossing to the switch, s.
    pub fn switch_latency(&self) -> f64 {
        self.debounce_frames as f64 / self.frame_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GateState {
    pub mode: Mode,
    pub consecutive_count: u32,
    pub baseline_energy: f64,
    pub last_er: f64,
}

impl GateState {
    pub fn new(baseline_energy: f64) -> Self {
        Self {
            baseline_energy,
            ..Self::default()
        }
    }
}

/// `Σ(f − b)² / max(Σb², ε)` over the central window.
pub fn energy_ratio(frame: &ImageGray, baseline: &ImageGray) -> Result<f64> {
    frame.same_shape(baseline)?;
    let (c0, c1, r0, r1) = frame.central_window(GATE_ROI_FRACTION);
    let (mut diff, mut base) = (0.0, 0.0);
    for row in r0..r1 {
        for col in c0..c1 {
            let b = baseline.get(col, row);
            diff += (frame.get(col, row) - b).powi(2);
            base += b * b;
        }
    }
    Ok(diff / base.max(ENERGY_EPS))
}

/// Energy of the baseline over the gate window.
pub fn baseline_energy(baseline: &ImageGray) -> f64 {
    let (c0, c1, r0, r1) = baseline.central_window(GATE_ROI_FRACTION);
    (r0..r1)
        .flat_map(|r| (c0..c1).map(move |c| (c, r)))
        .map(|(c, r)| baseline.get(c, r).powi(2))
        .sum()
}

/// One debounced, hysteretic step. Requires a threshold in `cfg`.
pub fn update(state: GateState, er: f64, cfg: &GateConfig) -> (GateState, Mode) {
    let crossing = match state.mode {
        Mode::Vision => er > cfg.t_on(),
        Mode::Tactile => er < cfg.t_off(),
    };
    let mut next = GateState { last_er: er, ..state };
    if crossing {
        next.consecutive_count = state.consecutive_count + 1;
        if next.consecutive_count >= cfg.debounce_frames {
            next.mode = match state.mode {
                Mode::Vision => Mode::Tactile,
                Mode::Tactile => Mode::Vision,
            };
            next.consecutive_count = 0;
        }
    } else {
        next.consecutive_count = 0;
    }
    (next, next.mode)
}

/// `multiplier ×` the 99th percentile of noise-only ratios.
pub fn calibrate_threshold(noise_ratios: &[f64], multiplier: f64) -> Result<f64> {
    if noise_ratios.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let p99 = percentile(noise_ratios, 0.99);
    let t = multiplier * p99;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("noise-only ratios are all zero".into()));
    }
    Ok(t)
}

/// Linear-interpolated percentile, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs the gate over a ratio stream from Vision mode.
pub fn run(ratios: &[f64], baseline_energy: f64, cfg: &GateConfig) -> Vec<Mode> {
    let mut state = GateState::new(baseline_energy);
    ratios
        .iter()
        .map(|&er| {
            let (next, mode) = update(state, er, cfg);
            state = next;
            mode
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> GateConfig {
        GateConfig::default().with_threshold(1.0)
    }

    #[test]
    fn ratio_examples() {
        let b = ImageGray::from_fn(4, 4, 1.0, |x, y| 0.5 + 0.1 * x + 0.05 * y);
        assert_eq!(energy_ratio(&b, &b).unwrap(), 0.0);
        // a 4×4 image keeps its center 3×3 under the 70% window (round(2.8) = 3)
        let mut f = b.clone();
        f.values_mut().iter_mut().for_each(|v| *v += 0.1);
        let (c0, c1, r0, r1) = b.central_window(GATE_ROI_FRACTION);
        assert_eq!((c0, c1, r0, r1), (0, 3, 0, 3));
        let mut base = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                base += b.get(c, r).powi(2);
            }
        }
        let expected = 9.0 * 0.01 / base;
        assert!((energy_ratio(&f, &b).unwrap() - expected).abs() < 1e-12);
        assert!((baseline_energy(&b) - base).abs() < 1e-12);
        assert!(energy_ratio(&ImageGray::zeros(3, 4, 1.0), &b).is_err());
    }

    #[test]
    fn switches_after_debounce() {
        let modes = run(&[2.0, 2.0, 2.0], 1.0, &cfg());
        assert_eq!(modes, vec![Mode::Vision, Mode::Tactile, Mode::Tactile]);
        assert!((cfg().switch_latency() - 2.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn alternating_never_switches() {
        let ratios: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 2.0 } else { 0.0 }).collect();
        assert!(run(&ratios, 1.0, &cfg()).iter().all(|m| *m == Mode::Vision));
    }

    #[test]
    fn dead_band_holds_tactile() {
        let state = GateState {
            mode: Mode::Tactile,
            ..GateState::default()
        };
        let mut s = state;
        for i in 0..1000 {
            let er = 0.8 + 0.2 * (i as f64 / 999.0);
            s = update(s, er, &cfg()).0;
            assert_eq!(s.mode, Mode::Tactile);
        }
    }

    #[test]
    fn threshold_from_percentile() {
        let ratios: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((percentile(&ratios, 0.99) - 99.01).abs() < 1e-9);
        assert!((calibrate_threshold(&ratios, 5.0).unwrap() - 495.05).abs() < 1e-9);
        assert!(calibrate_threshold(&[], 5.0).is_err());
        assert!(calibrate_threshold(&[0.0, 0.0], 5.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validated().is_ok());
        assert!(GateConfig { hysteresis_ratio: 1.0, ..cfg() }.validated().is_err());
        assert!(GateConfig { debounce_frames: 0, ..cfg() }.validated().is_err());
        assert!(GateConfig { t_on: Some(-1.0), ..cfg() }.validated().is_err());
    }

    proptest! {
        #[test]
        fn dead_band_never_chatters(
            seeds in proptest::collection::vec(0.0f64..=1.0, 1..200),
            start_tactile in any::<bool>(),
        ) {
            let c = GateConfig::default().with_threshold(2.0);
            let mode = if start_tactile { Mode::Tactile } else { Mode::Vision };
            let mut s = GateState { mode, ..GateState::default() };
            for t in seeds {
                let er = c.t_off() + t * (c.t_on() - c.t_off());
                s = update(s, er, &c).0;
                prop_assert_eq!(s.mode, mode);
            }
        }

        #[test]
        fn latency_is_debounce(n in 1u32..6, lead in 0usize..20, level in 1.01f64..10.0) {
            let c = GateConfig { debounce_frames: n, ..GateConfig::default() }.with_threshold(1.0);
            let mut ratios = vec![0.5; lead];
            ratios.extend(std::iter::repeat_n(level, 10));
            let modes = run(&ratios, 1.0, &c);
            let first = modes.iter().position(|m| *m == Mode::Tactile).unwrap();
            prop_assert_eq!(first, lead + n as usize - 1);
        }

        #[test]
        fn update_is_pure(count in 0u32..3, er in 0.0f64..5.0, tactile in any::<bool>()) {
            let s = GateState {
                mode: if tactile { Mode::Tactile } else { Mode::Vision },
                consecutive_count: count.min(1),
                baseline_energy: 3.0,
                last_er: 0.0,
            };
            prop_assert_eq!(update(s, er, &cfg()), update(s, er, &cfg()));
            prop_assert!(update(s, er, &cfg()).0.consecutive_count <= cfg().debounce_frames);
        }
    }
}
