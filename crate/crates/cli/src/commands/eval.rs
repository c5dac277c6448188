//! Scores a saved model on a dataset table.

use std::path::Path;

use moire_core::estimator::evaluate;
use moire_core::load::AXIS_NAMES;
use moire_core::{CalibrationModel, Metrics};
use serde_json::{json, Map, Value};

use super::calibrate::read_dataset;
use super::Common;
use crate::error::CliResult;
use crate::files::{read_text, OutDir};

/// Per-axis R² and MAE keyed by axis name. An R² of `null` means the axis
/// had no variance to explain.
pub fn metrics_json(m: &Metrics) -> Value {
    let mut r2 = Map::new();
    let mut mae = Map::new();
    for (axis, name) in AXIS_NAMES.iter().enumerate() {
        r2.insert(name.to_string(), json!(m.r2[axis]));
        mae.insert(name.to_string(), json!(m.mae[axis]));
    }
    json!({ "n": m.n, "r2": r2, "mae": mae })
}

pub fn run(common: &Common, model: &Path, dataset: &Path) -> CliResult<Value> {
    let cfg = common.run_config(model.parent().filter(|p| !p.as_os_str().is_empty()))?;
    let model = CalibrationModel::from_json(&read_text(model)?)?;
    let samples = read_dataset(dataset)?;
    let metrics = metrics_json(&evaluate(&model, &samples));
    if let Some(root) = common.out.as_deref() {
        let mut out = OutDir::prepare(root, &["eval.json"], common.overwrite)?;
        out.write_json("eval.json", &metrics)?;
        out.finish(&cfg)?;
    }
    Ok(json!({ "command": "eval", "metrics": metrics }))
}
