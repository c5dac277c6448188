//! Joins features with wrenches, fits the calibration model and scores it
//! on the held-out split.

use std::collections::BTreeMap;
use std::path::Path;

use moire_core::estimator::{fit, fit_tilt_matrix};
use moire_core::features::FEATURE_COLUMNS;
use moire_core::load::AXIS_NAMES;
use moire_core::{MoireObservables, Sample, SweepKind, Wrench};
use serde_json::{json, Value};

use super::eval::metrics_json;
use super::Common;
use crate::error::{CliError, CliResult};
use crate::files::{columns, fmt_f64, parse_f64, read_csv, OutDir, Table};

pub const OWNED: [&str; 3] = ["model.json", "metrics.json", "dataset.csv"];

fn parse_frame(field: &str, path: &Path) -> CliResult<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::Io(format!("{}: bad frame index {field:?}", path.display())))
}

fn parse_sweep(field: &str, path: &Path) -> CliResult<SweepKind> {
    SweepKind::parse(field.trim()).ok_or_else(|| CliError::Io(format!("{}: unknown sweep {field:?}", path.display())))
}

fn read_row<const N: usize>(record: &csv::StringRecord, idx: &[usize], path: &Path) -> CliResult<[f64; N]> {
    let mut out = [0.0; N];
    for (slot, &i) in out.iter_mut().zip(idx) {
        *slot = parse_f64(&record[i], &path.display().to_string())?;
    }
    Ok(out)
}

/// Frame index to observables.
pub fn read_features(path: &Path) -> CliResult<BTreeMap<usize, MoireObservables>> {
    let (header, records) = read_csv(path)?;
    let frame = columns(&header, &["frame"], path)?[0];
    let idx = columns(&header, &FEATURE_COLUMNS, path)?;
    records
        .iter()
        .map(|r| Ok((parse_frame(&r[frame], path)?, MoireObservables::from_row(read_row(r, &idx, path)?))))
        .collect()
}

/// Frame index to sweep label and wrench.
pub fn read_wrenches(path: &Path) -> CliResult<BTreeMap<usize, (SweepKind, Wrench)>> {
    let (header, records) = read_csv(path)?;
    let key = columns(&header, &["frame", "sweep"], path)?;
    let idx = columns(&header, &AXIS_NAMES, path)?;
    records
        .iter()
        .map(|r| {
            let w = Wrench::from_array(read_row(r, &idx, path)?);
            Ok((parse_frame(&r[key[0]], path)?, (parse_sweep(&r[key[1]], path)?, w)))
        })
        .collect()
}

/// Inner join on the frame index; every feature row needs a wrench.
pub fn join(
    features: &BTreeMap<usize, MoireObservables>,
    wrenches: &BTreeMap<usize, (SweepKind, Wrench)>,
) -> CliResult<Vec<Sample>> {
    features
        .iter()
        .map(|(&index, obs)| {
            let (sweep, wrench) = wrenches
                .get(&index)
                .ok_or_else(|| CliError::Io(format!("no wrench for frame {index}")))?;
            Ok(Sample {
                index,
                sweep: *sweep,
                wrench: *wrench,
                observables: *obs,
            })
        })
        .collect()
}

pub fn dataset_header() -> Vec<&'static str> {
    ["frame", "sweep"].into_iter().chain(AXIS_NAMES).chain(FEATURE_COLUMNS).collect()
}

pub fn dataset_csv(samples: &[Sample]) -> CliResult<Vec<u8>> {
    let mut t = Table::new(&dataset_header())?;
    for s in samples {
        let numbers = s.wrench.to_array().into_iter().chain(s.observables.to_row()).map(fmt_f64);
        t.row([s.index.to_string(), s.sweep.as_str().to_string()].into_iter().chain(numbers))?;
    }
    t.into_bytes()
}

pub fn read_dataset(path: &Path) -> CliResult<Vec<Sample>> {
    let (header, records) = read_csv(path)?;
    let key = columns(&header, &["frame", "sweep"], path)?;
    let axes = columns(&header, &AXIS_NAMES, path)?;
    let feats = columns(&header, &FEATURE_COLUMNS, path)?;
    records
        .iter()
        .map(|r| {
            Ok(Sample {
                index: parse_frame(&r[key[0]], path)?,
                sweep: parse_sweep(&r[key[1]], path)?,
                wrench: Wrench::from_array(read_row(r, &axes, path)?),
                observables: MoireObservables::from_row(read_row(r, &feats, path)?),
            })
        })
        .collect()
}

pub fn run(common: &Common, features: &Path, wrenches: &Path) -> CliResult<Value> {
    let data_dir = features.parent().filter(|p| !p.as_os_str().is_empty());
    let cfg = common.run_config(data_dir)?;
    let root = common
        .out
        .clone()
        .or_else(|| data_dir.map(Path::to_path_buf))
        .unwrap_or_else(|| ".".into());
    let mut out = OutDir::prepare(&root, &OWNED, common.overwrite)?;
    out.write_config(&cfg)?;

    let samples = join(&read_features(features)?, &read_wrenches(wrenches)?)?;
    let (model, metrics) = fit(&samples, cfg.estimator.ridge_lambda, cfg.estimator.split_seed)?;
    let tilt: Vec<Sample> = samples.iter().filter(|s| s.sweep == SweepKind::Tilt).cloned().collect();
    let tilt_fit = if tilt.len() >= 3 { fit_tilt_matrix(&tilt).ok() } else { None };

    let report = json!({
        "held_out": metrics_json(&metrics),
        "train_samples": samples.len() - metrics.n,
        "ridge_lambda": cfg.estimator.ridge_lambda,
        "split_seed": cfg.estimator.split_seed,
        "tilt": tilt_fit,
    });
    out.write("model.json", format!("{}\n", model.to_json()).as_bytes())?;
    out.write_json("metrics.json", &report)?;
    out.write("dataset.csv", &dataset_csv(&samples)?)?;
    out.finish(&cfg)?;
    Ok(json!({
        "command": "calibrate",
        "config_hash": cfg.hash(),
        "samples": samples.len(),
        "metrics": report,
        "files": OWNED,
    }))
}
