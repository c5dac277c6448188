//! Reduces a folder of frames to the observables table.

use std::path::{Path, PathBuf};

use moire_core::features::{extract_all, FEATURE_COLUMNS};
use moire_core::{MoireObservables, ReferenceFrame};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Common;
use crate::error::CliResult;
use crate::files::{fmt_f64, list_frames, read_pgm, OutDir, Table};

const CHUNK: usize = 64;

pub fn header() -> Vec<&'static str> {
    std::iter::once("frame").chain(FEATURE_COLUMNS).collect()
}

/// Observables of every `frame_*.pgm` in `frames_dir`, against the
/// reference image.
pub fn extract_dir(
    frames_dir: &Path,
    reference: &ReferenceFrame,
    default_scale: f64,
) -> CliResult<Vec<(usize, MoireObservables)>> {
    let frames = list_frames(frames_dir)?;
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(CHUNK) {
        let rows = chunk
            .par_iter()
            .map(|(index, path)| {
                let img = read_pgm(path, default_scale)?;
                Ok((*index, extract_all(&img, reference)?))
            })
            .collect::<CliResult<Vec<_>>>()?;
        out.extend(rows);
    }
    Ok(out)
}

pub fn to_csv(rows: &[(usize, MoireObservables)]) -> CliResult<Vec<u8>> {
    let mut t = Table::new(&header())?;
    for (index, obs) in rows {
        t.row(std::iter::once(index.to_string()).chain(obs.to_row().into_iter().map(fmt_f64)))?;
    }
    t.into_bytes()
}

pub fn run(common: &Common, input: &Path, frames: Option<&Path>) -> CliResult<Value> {
    let cfg = common.run_config(Some(input))?;
    let root = common.out.clone().unwrap_or_else(|| input.to_path_buf());
    let mut out = OutDir::prepare(&root, &["features.csv"], common.overwrite)?;
    out.write_config(&cfg)?;

    let reference_img = read_pgm(&input.join("reference.pgm"), cfg.render.scale)?;
    let reference = ReferenceFrame::new(&reference_img, &cfg.spectral)?;
    let frames_dir: PathBuf = frames.map(|f| input.join(f)).unwrap_or_else(|| input.join("frames"));
    let rows = extract_dir(&frames_dir, &reference, cfg.render.scale)?;
    out.write("features.csv", &to_csv(&rows)?)?;
    out.finish(&cfg)?;
    Ok(json!({
        "command": "extract",
        "config_hash": cfg.hash(),
        "frames": rows.len(),
        "reference_period": reference.peak.period,
        "reference_orientation": reference.peak.orientation,
        "files": ["features.csv"],
    }))
}
