use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use moire_core::FeatureVector;
use moire_core::MoireObservables;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn moire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moire")).args(args).output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn ok(args: &[&str]) -> Value {
    let out = moire(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    summary(&out)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn design_reports_the_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("design");
    let json = ok(&["design", "--out", s(&out)]);
    let a: Vec<f64> = json["rows"].as_array().unwrap().iter().map(|r| r["amplification"].as_f64().unwrap()).collect();
    for (got, want) in a.iter().zip([4.0, 14.0, 24.0]) {
        assert!((got - want).abs() / want < 1e-9);
    }
    let csv = std::fs::read_to_string(out.join("design.csv")).unwrap();
    assert!(csv.starts_with("p1,p2,a_over_Z,delta_obj,delta_eff_approx,A_exact,Lambda_apparent,trend,error\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn design_marks_degenerate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "moire-run/1", "design": {"pairs": [{"p1": 0.3, "p2": 0.3, "a": 0.0}, {"p1": 0.2, "p2": 0.3}]}}"#,
    );
    let json = ok(&["design", "--config", s(&cfg)]);
    assert_eq!(json["rows"][0]["error"], "degenerate_gratings");
    assert_eq!(json["rows"][1]["trend"], "denser");
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"schema": "moire-run/1", "mystery": true}"#);
    let out = moire(&["design", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&out)["error"]["kind"], "config");

    let out = moire(&["extract", "--input", s(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(3));

    // 0.1 mm pitch at 20 px/mm is below the sampling bound
    let fine = write_config(
        dir.path(),
        r#"{"schema": "moire-run/1", "geometry": {"far": {"pitch": 0.1, "orientation": 0.0, "phase_offset": 0.0},
            "near": {"pitch": 0.11, "orientation": 0.0, "phase_offset": 0.0}, "spacing": 3.0, "camera_distance": 12.0,
            "layout": "lines"}, "dataset": {"n": 2}}"#,
    );
    let out = moire(&["simulate", "--config", s(&fine), "--out", s(&dir.path().join("fine"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(summary(&out)["error"]["kind"], "numeric");
}

#[test]
fn simulate_smoke_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "moire-run/1", "dataset": {"n": 10}}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = ok(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(first["frames"], 10);
    assert_eq!(std::fs::read_dir(a.join("frames")).unwrap().count(), 10);
    assert_eq!(std::fs::read_to_string(a.join("wrenches.csv")).unwrap().lines().count(), 11);

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], first["config_hash"]);
    assert_eq!(manifest["seeds"]["render"], 0);
    assert!(manifest["files"]["frames/frame_000009.pgm"].is_string());

    ok(&["simulate", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
    for i in 0..10 {
        let name = format!("frames/frame_{i:06}.pgm");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }

    // an existing run is only replaced on request
    let again = moire(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(again.status.code(), Some(3));
    ok(&["simulate", "--config", s(&cfg), "--out", s(&a), "--overwrite"]);

    // a different seed is a different run
    let seeded = ok(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("c")), "--seed", "5"]);
    assert_ne!(seeded["config_hash"], first["config_hash"]);
    assert_ne!(
        std::fs::read(a.join("frames/frame_000000.pgm")).unwrap(),
        std::fs::read(dir.path().join("c/frames/frame_000000.pgm")).unwrap()
    );
}

#[test]
fn full_pipeline_in_one_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "moire-run/1", "dataset": {"n": 80}}"#);
    let run = dir.path().join("run");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(ok(&["extract", "--input", s(&run)])["frames"], 80);
    let cal = ok(&["calibrate", "--features", s(&run.join("features.csv")), "--wrenches", s(&run.join("wrenches.csv"))]);
    let r2 = &cal["metrics"]["held_out"]["r2"];
    for axis in ["Fx", "Fy", "Fz", "Tx", "Ty", "Tz"] {
        assert!(r2[axis].as_f64().unwrap() > 0.9, "{axis}: {r2}");
    }
    let eval = ok(&["eval", "--model", s(&run.join("model.json")), "--dataset", s(&run.join("dataset.csv"))]);
    assert_eq!(eval["metrics"]["n"], 80);

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    for f in ["features.csv", "model.json", "metrics.json", "dataset.csv", "wrenches.csv", "config.json"] {
        assert!(manifest["files"][f].is_string(), "{f}");
    }

    // a second configuration cannot write into the same run
    let other = write_config(dir.path(), r#"{"schema": "moire-run/1", "dataset": {"n": 81}}"#);
    let out = moire(&["gate", "--input", s(&run), "--config", s(&other)]);
    assert_eq!(out.status.code(), Some(2));
    let out = moire(&["extract", "--input", s(&run)]);
    assert_eq!(out.status.code(), Some(3), "features exist");
}

#[test]
fn eval_of_exact_model_on_its_training_data() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"schema": "moire-run/1", "estimator": {"ridge_lambda": 0.0}}"#);
    std::fs::rename(dir.path().join("cfg.json"), dir.path().join("config.json")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let weights: Vec<[f64; 8]> = (0..6).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    let sweeps = ["fz", "fx", "fy", "tz", "tilt", "mixed"];
    let mut features = String::from("frame,I,cx,cy,gpx,gpy,theta,lambda,band_energy,pox,poy\n");
    let mut wrenches = String::from("frame,sweep,Fx,Fy,Fz,Tx,Ty,Tz\n");
    for i in 0..120 {
        let row: [f64; 10] = [
            rng.random_range(0.3..0.6),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            0.0,
            0.0,
            rng.random_range(-0.5..0.5),
            rng.random_range(0.7..0.9),
            1.0,
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        ];
        let f = FeatureVector::from_observables(&MoireObservables::from_row(row));
        let w: Vec<f64> = weights.iter().enumerate().map(|(a, wa)| a as f64 + wa.iter().zip(&f.0).map(|(x, y)| x * y).sum::<f64>()).collect();
        features.push_str(&format!("{i},{}\n", row.map(|v| v.to_string()).join(",")));
        wrenches.push_str(&format!("{i},{},{}\n", sweeps[i % 6], w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")));
    }
    std::fs::write(dir.path().join("features.csv"), features).unwrap();
    std::fs::write(dir.path().join("wrenches.csv"), wrenches).unwrap();
    ok(&["calibrate", "--features", s(&dir.path().join("features.csv")), "--wrenches", s(&dir.path().join("wrenches.csv"))]);
    let eval = ok(&["eval", "--model", s(&dir.path().join("model.json")), "--dataset", s(&dir.path().join("dataset.csv"))]);
    for axis in ["Fx", "Fy", "Fz", "Tx", "Ty", "Tz"] {
        let r2 = eval["metrics"]["r2"][axis].as_f64().unwrap();
        assert!((1.0 - r2).abs() < 1e-9, "{axis}: {r2}");
    }
}

#[test]
fn gate_stays_in_vision_on_an_unloaded_stream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "moire-run/1", "dataset": {"n": 1}, "render": {"resolution": 256},
            "simulate": {"stream": {"peak_fz": 0.0}}, "gate_calibration": {"noise_frames": 40}}"#,
    );
    let run = dir.path().join("run");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&run)]);
    let json = ok(&["gate", "--input", s(&run)]);
    assert_eq!(json["tactile_frames"], 0);
    let log = std::fs::read_to_string(run.join("gate.csv")).unwrap();
    assert!(log.lines().skip(1).all(|l| l.ends_with(",vision")));
    assert_eq!(log.lines().count(), 51);
}

#[test]
fn gate_follows_a_press() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "moire-run/1", "dataset": {"n": 1}, "render": {"resolution": 256},
            "simulate": {"stream": {}}, "gate_calibration": {"noise_frames": 40}}"#,
    );
    let run = dir.path().join("run");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&run)]);
    let json = ok(&["gate", "--input", s(&run)]);
    assert_eq!(json["switches"], 2);
    let modes: Vec<String> = std::fs::read_to_string(run.join("gate.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    assert_eq!(modes[0], "vision");
    assert_eq!(modes[30], "tactile");
    assert_eq!(modes[49], "vision");
}
