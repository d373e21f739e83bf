use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// A CSV cell; floats print with full 64-bit round-trip precision.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
    Empty,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => write!(f, "{v}"),
            Cell::I(v) => write!(f, "{v}"),
            Cell::U(v) => write!(f, "{v}"),
            Cell::S(v) => write!(f, "{v}"),
            Cell::Empty => Ok(()),
        }
    }
}

/// Tabular result: fixed header, rows of cells. Serialized as UTF-8 CSV
/// with `\n` line endings and a mandatory header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Write atomically: to a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv(dir: &Path, name: &str, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.csv"));
    write_atomic(&path, &table.to_csv())?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_atomic(&path, &text)?;
    Ok(path)
}

/// Metadata sidecar common to every command: effective config echo plus
/// run information.
#[derive(Debug, Serialize)]
pub struct Metadata<'a, E: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a crate::config::ExperimentConfig,
    pub wall_clock_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<E>,
}
