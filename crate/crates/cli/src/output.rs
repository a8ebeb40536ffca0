use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use duolift_core::sim::{write_csv, TelemetryRecord};
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_telemetry(path: &Path, records: &[TelemetryRecord]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_csv(records, std::io::BufWriter::new(file)).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Directory for per-run telemetry under `out`.
pub fn runs_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join("runs");
    ensure_dir(&dir)?;
    Ok(dir)
}

/// File-name friendly form of a label.
pub fn slug(label: &str) -> String {
    let mut s = String::new();
    for c in label.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' => s.push(c.to_ascii_lowercase()),
            '.' => s.push('p'),
            _ if !s.ends_with('_') => s.push('_'),
            _ => {}
        }
    }
    s.trim_matches('_').to_string()
}

/// Round to `decimals` places for report tables.
pub fn round(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}
