//! Output directories, atomic writes, CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use moire_core::ImageGray;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "moire-manifest/1";

/// Writes `bytes` to a temp file next to `path`, then renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir.display(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path.display(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path.display(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path.display(), e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

/// Reads a PGM, treating a missing or unreadable file as an I/O failure and
/// a malformed one as numeric.
pub fn read_pgm(path: &Path, default_scale: f64) -> CliResult<ImageGray> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(ImageGray::from_pgm(&bytes, default_scale)?)
}

/// `frame_*.pgm` files of `dir` in name order, with their indices.
pub fn list_frames(dir: &Path) -> CliResult<Vec<(usize, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir.display(), e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(index) = name.strip_prefix("frame_").and_then(|s| s.strip_suffix(".pgm")) else { continue };
        if let Ok(index) = index.parse::<usize>() {
            frames.push((index, path));
        }
    }
    frames.sort();
    if frames.is_empty() {
        return Err(CliError::Io(format!("{}: no frame_*.pgm files", dir.display())));
    }
    Ok(frames)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn parse_f64(field: &str, what: &str) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Io(format!("{what}: cannot parse {field:?} as a number")))
}

/// In-memory CSV, written atomically once complete.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> CliResult<Vec<u8>> {
        self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Header and records of a CSV file.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path.display(), e))?;
    let header = reader.headers().map_err(|e| CliError::io(path.display(), e))?.iter().map(String::from).collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::io(path.display(), e))?;
    Ok((header, records))
}

/// Position of each of `wanted` in a CSV header.
pub fn columns(header: &[String], wanted: &[&str], path: &Path) -> CliResult<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == w)
                .ok_or_else(|| CliError::Io(format!("{}: missing column {w:?}", path.display())))
        })
        .collect()
}

/// Record of what a run directory holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Relative path to SHA-256.
    pub files: BTreeMap<String, String>,
    /// Free-form note; never part of the reproducible content.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

/// An output directory and the files one command owns in it.
pub struct OutDir {
    pub root: PathBuf,
    overwrite: bool,
    written: BTreeMap<String, String>,
}

impl OutDir {
    /// Creates `root` if needed. Refuses when any of `owned` (files or
    /// directories, relative to `root`) already exists, unless `overwrite`,
    /// in which case those entries are removed first.
    pub fn prepare(root: &Path, owned: &[&str], overwrite: bool) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root.display(), e))?;
        for name in owned {
            let path = root.join(name);
            if !path.exists() {
                continue;
            }
            if !overwrite {
                return Err(CliError::Io(format!(
                    "{} already exists; pass --overwrite to replace it",
                    path.display()
                )));
            }
            let removed = if path.is_dir() {
                std::fs::remove_dir_all(&path)
            } else {
                std::fs::remove_file(&path)
            };
            removed.map_err(|e| CliError::io(path.display(), e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            overwrite,
            written: BTreeMap::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn create_dir(&self, rel: &str) -> CliResult<PathBuf> {
        let path = self.path(rel);
        std::fs::create_dir_all(&path).map_err(|e| CliError::io(path.display(), e))?;
        Ok(path)
    }

    /// Writes `rel` atomically and records its hash.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.path(rel), bytes)?;
        self.written.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes the run configuration, or checks that the one already in the
    /// directory is the same run.
    pub fn write_config(&mut self, cfg: &RunConfig) -> CliResult<()> {
        let path = self.path(CONFIG_FILE);
        if path.is_file() && !self.overwrite {
            let existing = RunConfig::load(&path)?;
            if existing.hash() != cfg.hash() {
                return Err(CliError::Config(format!(
                    "{} belongs to a different run; pass --overwrite or use another --out",
                    path.display()
                )));
            }
        }
        let mut text = cfg.to_json();
        text.push('\n');
        self.write(CONFIG_FILE, text.as_bytes())
    }

    /// Merges this command's files into `manifest.json`.
    pub fn finish(self, cfg: &RunConfig) -> CliResult<Manifest> {
        let path = self.path(MANIFEST_FILE);
        let mut manifest = if path.is_file() {
            serde_json::from_str::<Manifest>(&read_text(&path)?).map_err(|e| CliError::io(path.display(), e))?
        } else {
            Manifest::default()
        };
        if manifest.config_hash != cfg.hash() {
            // a manifest from another configuration says nothing about this run
            manifest.files.clear();
        }
        manifest.schema = MANIFEST_SCHEMA.to_string();
        manifest.config_hash = cfg.hash();
        manifest.seeds = BTreeMap::from([
            ("render".to_string(), cfg.render.seed),
            ("dataset".to_string(), cfg.dataset.seed),
            ("split".to_string(), cfg.estimator.split_seed),
        ]);
        manifest.files.retain(|name, _| self.root.join(name).is_file());
        manifest.files.extend(self.written);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_existing_outputs_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::prepare(dir.path(), &["a.csv"], false).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        assert!(matches!(OutDir::prepare(dir.path(), &["a.csv"], false), Err(CliError::Io(_))));
        // other commands' files do not block
        assert!(OutDir::prepare(dir.path(), &["b.csv"], false).is_ok());
        OutDir::prepare(dir.path(), &["a.csv"], true).unwrap();
        assert!(!dir.path().join("a.csv").exists());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 2.5e12, 0.0] {
            assert_eq!(parse_f64(&fmt_f64(v), "v").unwrap(), v);
        }
    }
}
