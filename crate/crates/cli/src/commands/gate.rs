//! Runs the contact gate over a frame stream.

use std::path::Path;

use moire_core::gate::{self, baseline_energy, calibrate_threshold, energy_ratio};
use moire_core::{GateConfig, ImageGray, Mode, Wrench};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{simulator, Common, GATE_NOISE_BASE};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::files::{fmt_f64, list_frames, read_pgm, OutDir, Table};

/// Energy ratios of zero-load frames, read back at 8 bits like the stream.
pub fn noise_ratios(cfg: &RunConfig, baseline: &ImageGray) -> CliResult<Vec<f64>> {
    let sim = simulator(cfg);
    (0..cfg.gate_calibration.noise_frames as u64)
        .into_par_iter()
        .map(|i| Ok(energy_ratio(&sim.frame(&Wrench::ZERO, GATE_NOISE_BASE + i)?.quantized(), baseline)?))
        .collect()
}

/// The configured gate with its switch-on threshold filled in.
pub fn resolve_gate(cfg: &RunConfig, baseline: &ImageGray) -> CliResult<GateConfig> {
    match cfg.gate.t_on {
        Some(_) => Ok(cfg.gate),
        None => {
            let t = calibrate_threshold(&noise_ratios(cfg, baseline)?, cfg.gate_calibration.multiplier)?;
            Ok(cfg.gate.with_threshold(t))
        }
    }
}

pub fn run(common: &Common, input: &Path, frames: Option<&Path>) -> CliResult<Value> {
    let cfg = common.run_config(Some(input))?;
    let root = common.out.clone().unwrap_or_else(|| input.to_path_buf());
    let mut out = OutDir::prepare(&root, &["gate.csv"], common.overwrite)?;
    out.write_config(&cfg)?;

    let baseline = read_pgm(&input.join("reference.pgm"), cfg.render.scale)?;
    let gate_cfg = resolve_gate(&cfg, &baseline)?.validated()?;
    let frames = list_frames(&frames.map(|f| input.join(f)).unwrap_or_else(|| input.join("stream")))?;
    let ratios = frames
        .par_iter()
        .map(|(_, path)| Ok(energy_ratio(&read_pgm(path, cfg.render.scale)?, &baseline)?))
        .collect::<CliResult<Vec<f64>>>()?;
    let modes = gate::run(&ratios, baseline_energy(&baseline), &gate_cfg);

    let mut table = Table::new(&["frame", "er", "mode"])?;
    for (((index, _), er), mode) in frames.iter().zip(&ratios).zip(&modes) {
        table.row([index.to_string(), fmt_f64(*er), mode.as_str().to_string()])?;
    }
    out.write("gate.csv", &table.into_bytes()?)?;
    out.finish(&cfg)?;

    let switches = modes.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(modes.first() == Some(&Mode::Tactile));
    Ok(json!({
        "command": "gate",
        "config_hash": cfg.hash(),
        "frames": modes.len(),
        "t_on": gate_cfg.t_on(),
        "t_off": gate_cfg.t_off(),
        "switches": switches,
        "tactile_frames": modes.iter().filter(|m| **m == Mode::Tactile).count(),
        "files": ["gate.csv"],
    }))
}
