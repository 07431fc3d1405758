//! Data-file emitters. Every CSV starts with a versioned schema comment and
//! a column header; floats are written in Rust's shortest round-trip form,
//! so identical runs produce byte-identical files. Timestamps appear only in
//! the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::Result;

/// A single CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => {
            if v.is_finite() {
                format!("{v}")
            } else {
                "nan".into()
            }
        }
        Cell::Text(v) => v.clone(),
    }
}

/// Write a CSV with a `# schema=<name>/<version>` comment line.
pub fn write_csv(
    path: &Path,
    schema: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<Cell>>,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# schema={schema}").expect("string write");
    writeln!(out, "{}", columns.join(",")).expect("string write");
    for row in rows {
        let line: Vec<String> = row.iter().map(render).collect();
        writeln!(out, "{}", line.join(",")).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write pretty JSON; key order comes from struct/map order, so output is
/// deterministic for a fixed value.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serialization");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// The run manifest: the fully resolved configuration plus provenance.
/// This is the only emitted file allowed to carry a timestamp.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    resolved: serde_json::Value,
    extra: &[(&str, serde_json::Value)],
) -> Result<PathBuf> {
    let mut root = serde_json::Map::new();
    root.insert("command".into(), command.into());
    root.insert(
        "package_version".into(),
        env!("CARGO_PKG_VERSION").into(),
    );
    root.insert("config".into(), resolved);
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    root.insert("created_unix".into(), stamp.into());
    for (k, v) in extra {
        root.insert((*k).to_string(), v.clone());
    }
    let path = dir.join("manifest.json");
    write_json(&path, &serde_json::Value::Object(root))?;
    Ok(path)
}
