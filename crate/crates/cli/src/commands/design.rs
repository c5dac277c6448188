//! Closed-form design table over pitch pairs.

use moire_core::optics::{amplification_exact, apparent_descriptor, compression_trend, delta_eff_approx, delta_obj};
use moire_core::{Error, SensorGeometry};
use serde::Serialize;
use serde_json::{json, Value};

use super::{error_code, Common};
use crate::config::{DesignPair, RunConfig};
use crate::error::CliResult;
use crate::files::{fmt_f64, OutDir, Table};

pub const HEADER: [&str; 9] = [
    "p1",
    "p2",
    "a_over_Z",
    "delta_obj",
    "delta_eff_approx",
    "A_exact",
    "Lambda_apparent",
    "trend",
    "error",
];

/// One table row. Quantities that could not be computed are `None` and the
/// first failure is named in `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRow {
    pub p1: f64,
    pub p2: f64,
    pub a_over_z: f64,
    pub delta_obj: f64,
    pub delta_eff_approx: Option<f64>,
    pub amplification: Option<f64>,
    pub apparent_period: Option<f64>,
    pub trend: Option<&'static str>,
    pub error: Option<&'static str>,
}

pub fn row(pair: &DesignPair, spacing: f64, camera_distance: f64) -> DesignRow {
    let a = pair.a.unwrap_or(spacing);
    let z = pair.z.unwrap_or(camera_distance);
    let mut row = DesignRow {
        p1: pair.p1,
        p2: pair.p2,
        a_over_z: a / z,
        delta_obj: delta_obj(pair.p1, pair.p2),
        delta_eff_approx: None,
        amplification: None,
        apparent_period: None,
        trend: None,
        error: None,
    };
    let mut note = |e: Error| {
        row.error.get_or_insert(error_code(&e));
    };
    let geom = match SensorGeometry::parallel(pair.p1, pair.p2, a, z) {
        Ok(g) => g,
        Err(e) => {
            note(e);
            return row;
        }
    };
    let delta_eff = delta_eff_approx(&geom);
    let amplification = amplification_exact(&geom).map_err(&mut note).ok();
    let apparent_period = apparent_descriptor(&geom).map(|d| d.period).map_err(&mut note).ok();
    let trend = compression_trend(&geom).map(|t| t.as_str()).map_err(&mut note).ok();
    DesignRow {
        delta_eff_approx: Some(delta_eff),
        amplification,
        apparent_period,
        trend,
        ..row
    }
}

pub fn table(cfg: &RunConfig) -> Vec<DesignRow> {
    let d = &cfg.design;
    d.pairs.iter().map(|p| row(p, d.spacing, d.camera_distance)).collect()
}

pub fn to_csv(rows: &[DesignRow]) -> CliResult<Vec<u8>> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut t = Table::new(&HEADER)?;
    for r in rows {
        t.row([
            fmt_f64(r.p1),
            fmt_f64(r.p2),
            fmt_f64(r.a_over_z),
            fmt_f64(r.delta_obj),
            opt(r.delta_eff_approx),
            opt(r.amplification),
            opt(r.apparent_period),
            r.trend.unwrap_or_default().to_string(),
            r.error.unwrap_or_default().to_string(),
        ])?;
    }
    t.into_bytes()
}

pub fn run(common: &Common) -> CliResult<Value> {
    let cfg = common.run_config(None)?;
    let rows = table(&cfg);
    let mut summary = json!({ "command": "design", "config_hash": cfg.hash(), "rows": rows });
    if let Some(root) = common.out.as_deref() {
        let mut out = OutDir::prepare(root, &["design.csv"], common.overwrite)?;
        out.write("design.csv", &to_csv(&rows)?)?;
        out.write_config(&cfg)?;
        out.finish(&cfg)?;
        summary["files"] = json!(["design.csv"]);
    }
    Ok(summary)
}
