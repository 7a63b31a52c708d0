//! Bit-stable table emission and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn type_name(&self) -> &'static str {
        match self {
            Cell::Real(_) => "f64",
            Cell::Int(_) => "i64",
            Cell::Text(_) => "str",
        }
    }

    /// Reals with 17 significant digits, so every value round-trips exactly.
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) if x.is_nan() => "nan".into(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(x) if x.is_finite() => json!(x),
            Cell::Real(_) => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

/// A named table with a fixed column list.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    fn schema(&self) -> Vec<String> {
        let types: Vec<&str> = match self.rows.first() {
            Some(r) => r.iter().map(Cell::type_name).collect(),
            None => vec!["f64"; self.columns.len()],
        };
        self.columns
            .iter()
            .zip(types)
            .map(|(c, t)| format!("{c}:{t}"))
            .collect()
    }

    /// `#`-prefixed schema line, header row, data rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# schema: {}", self.schema().join(","));
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({ "schema": self.schema(), "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("tables serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// Writes tables into the output directory and remembers their digests.
pub struct Writer {
    dir: PathBuf,
    format: Format,
    pub files: Vec<FileDigest>,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.out);
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Writer {
            dir,
            format: cfg.format,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, table: &Table) -> Result<(), CliError> {
        let (ext, body) = match self.format {
            Format::Csv => ("csv", table.to_csv()),
            Format::Json => ("json", table.to_json()),
        };
        let name = format!("{}.{ext}", table.name);
        let path = self.dir.join(&name);
        std::fs::write(&path, body.as_bytes()).map_err(|e| io_error(&path, e))?;
        self.files.push(FileDigest {
            name,
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
        });
        Ok(())
    }

    /// Writes `manifest.json` describing the run.
    pub fn finish(self, command: &str, cfg: &RunConfig, seconds: f64) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "software": "qtransfer",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "prng": qtransfer::trajectory::rng::PRNG_ID,
            "time_unit": cfg.time_unit(),
            "wall_clock_seconds": seconds,
            "config": cfg,
            "files": self.files,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_reals_round_trip() {
        let mut t = Table::new("x", &["t", "k", "label"]);
        let v = 0.1 + 0.2;
        t.push(vec![v.into(), 3u64.into(), "a".into()]);
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# schema: t:f64,k:i64,label:str"));
        assert_eq!(lines.next(), Some("t,k,label"));
        let row = lines.next().unwrap();
        let parsed: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, v);
        assert_eq!(row, "3.0000000000000004e-1,3,a");
    }
}
