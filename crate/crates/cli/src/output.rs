use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
        }
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Writes `bytes` to `path` plus a sidecar manifest next to it.
fn emit(path: &Path, bytes: &[u8], manifest: &RunManifest) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    let side = manifest_path(path);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&side, text).with_context(|| format!("cannot write {}", side.display()))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn csv_bytes<R: Serialize>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Sends a payload to `path` (with manifest) or to stdout.
pub fn deliver(path: Option<&Path>, bytes: &[u8], manifest: &mut RunManifest, all: &[PathBuf]) -> Result<()> {
    match path {
        Some(p) => {
            manifest.outputs = all.to_vec();
            emit(p, bytes, manifest)
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
