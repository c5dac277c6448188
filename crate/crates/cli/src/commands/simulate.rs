//! Renders the configured dataset, and optionally a gate stream and
//! deformation sweeps, to PGM frames with their load tables.

use moire_core::dataset::dataset_wrenches;
use moire_core::load::AXIS_NAMES;
use moire_core::synth::render_frame;
use moire_core::{DeformationState, Wrench};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{simulator, Common, STREAM_NOISE_BASE, SWEEP_NOISE_BASE};
use crate::config::{RunConfig, StreamSettings};
use crate::error::CliResult;
use crate::files::{fmt_f64, frame_name, OutDir, Table};

/// Frames rendered in parallel before being written out.
const CHUNK: usize = 64;

pub const OWNED: [&str; 6] = ["reference.pgm", "frames", "wrenches.csv", "stream", "stream.csv", "sweeps"];

/// Idle, ramp up, hold, ramp down, idle.
pub fn stream_trace(s: &StreamSettings) -> Vec<Wrench> {
    let idle = std::iter::repeat_n(Wrench::ZERO, s.idle_frames);
    let up = (1..=s.ramp_frames).map(|i| Wrench::normal(s.peak_fz * i as f64 / s.ramp_frames as f64));
    let hold = std::iter::repeat_n(Wrench::normal(s.peak_fz), s.hold_frames);
    let down = (1..=s.ramp_frames).rev().map(|i| Wrench::normal(s.peak_fz * i as f64 / s.ramp_frames as f64));
    idle.clone().chain(up).chain(hold).chain(down).chain(idle).collect()
}

/// A named deformation sweep: folder, level column, level at fraction `t`
/// of the way through, and the state it produces.
struct DeformationSweep {
    name: &'static str,
    column: &'static str,
    level: fn(f64) -> f64,
    state: fn(DeformationState, f64) -> DeformationState,
}

const SWEEPS: [DeformationSweep; 4] = [
    DeformationSweep {
        name: "press",
        column: "indent_um",
        level: |t| 5.0 + 95.0 * t,
        state: |d, um| DeformationState {
            spacing: d.spacing - um * 1e-3,
            ..d
        },
    },
    DeformationSweep {
        name: "shear",
        column: "shift_um",
        level: |t| 90.0 * t,
        state: |d, um| d.with_displacement([um * 1e-3, 0.0]),
    },
    DeformationSweep {
        name: "scale",
        column: "strain_pct",
        level: |t| 5.0 * t,
        state: |d, pct| DeformationState { strain: pct / 100.0, ..d },
    },
    DeformationSweep {
        name: "rotation",
        column: "twist_deg",
        level: |t| 9.0 * t,
        state: |d, deg| DeformationState {
            twist: deg.to_radians(),
            ..d
        },
    },
];

fn fraction(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

fn wrench_fields(w: &Wrench) -> impl Iterator<Item = String> {
    w.to_array().into_iter().map(fmt_f64)
}

/// Renders `frames` (index, noise stream, wrench) in chunks into `dir`.
fn write_wrench_frames(out: &mut OutDir, cfg: &RunConfig, dir: &str, frames: &[(usize, u64, Wrench)]) -> CliResult<()> {
    let sim = simulator(cfg);
    out.create_dir(dir)?;
    for chunk in frames.chunks(CHUNK) {
        let rendered = chunk
            .par_iter()
            .map(|(_, stream, w)| sim.frame(w, *stream).map(|img| img.to_pgm()))
            .collect::<Result<Vec<_>, _>>()?;
        for ((index, _, _), bytes) in chunk.iter().zip(rendered) {
            out.write(&format!("{dir}/{}", frame_name(*index)), &bytes)?;
        }
    }
    Ok(())
}

pub fn run(common: &Common) -> CliResult<Value> {
    let cfg = common.run_config(None)?;
    let root = common.require_out()?;
    let mut out = OutDir::prepare(root, &OWNED, common.overwrite)?;
    out.write_config(&cfg)?;
    let sim = simulator(&cfg);

    out.write("reference.pgm", &sim.reference_image()?.to_pgm())?;

    let labelled = dataset_wrenches(&cfg.dataset)?;
    let mut header = vec!["frame", "sweep"];
    header.extend(AXIS_NAMES);
    let mut table = Table::new(&header)?;
    for (i, (kind, w)) in labelled.iter().enumerate() {
        table.row([i.to_string(), kind.as_str().to_string()].into_iter().chain(wrench_fields(w)))?;
    }
    out.write("wrenches.csv", &table.into_bytes()?)?;
    let frames: Vec<_> = labelled.iter().enumerate().map(|(i, (_, w))| (i, i as u64, *w)).collect();
    write_wrench_frames(&mut out, &cfg, "frames", &frames)?;

    let mut summary = json!({
        "command": "simulate",
        "config_hash": cfg.hash(),
        "frames": labelled.len(),
    });

    if let Some(stream) = cfg.simulate.stream {
        let trace = stream_trace(&stream);
        let mut header = vec!["frame"];
        header.extend(AXIS_NAMES);
        let mut table = Table::new(&header)?;
        for (i, w) in trace.iter().enumerate() {
            table.row(std::iter::once(i.to_string()).chain(wrench_fields(w)))?;
        }
        out.write("stream.csv", &table.into_bytes()?)?;
        let frames: Vec<_> = trace.iter().enumerate().map(|(i, w)| (i, STREAM_NOISE_BASE + i as u64, *w)).collect();
        write_wrench_frames(&mut out, &cfg, "stream", &frames)?;
        summary["stream_frames"] = json!(trace.len());
    }

    if cfg.simulate.deformation_sweeps {
        let n = cfg.simulate.sweep_frames;
        let base = DeformationState::identity(cfg.geometry.spacing);
        for (k, sweep) in SWEEPS.iter().enumerate() {
            let dir = format!("sweeps/{}", sweep.name);
            out.create_dir(&dir)?;
            let levels: Vec<f64> = (0..n).map(|i| (sweep.level)(fraction(i, n))).collect();
            let rendered = levels
                .par_iter()
                .enumerate()
                .map(|(i, &level)| {
                    let stream = SWEEP_NOISE_BASE + (k * n + i) as u64;
                    render_frame(&cfg.geometry, &(sweep.state)(base, level), &cfg.material, &cfg.render, stream)
                        .map(|img| img.to_pgm())
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = Table::new(&["frame", sweep.column])?;
            for (i, (level, bytes)) in levels.iter().zip(rendered).enumerate() {
                out.write(&format!("{dir}/{}", frame_name(i)), &bytes)?;
                table.row([i.to_string(), fmt_f64(*level)])?;
            }
            out.write(&format!("{dir}/levels.csv"), &table.into_bytes()?)?;
        }
        summary["sweeps"] = json!(SWEEPS.iter().map(|s| s.name).collect::<Vec<_>>());
    }

    let manifest = out.finish(&cfg)?;
    summary["files"] = json!(manifest.files.len());
    Ok(summary)
}
