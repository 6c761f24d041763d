//! Output files: collision checks, atomic writes and a small CSV table type.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Fails with [`Error::OutputExists`] if any target exists and `force` is off.
pub fn check_collisions(dir: &Path, names: &[&str], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match names.iter().map(|n| dir.join(n)).find(|p| p.exists()) {
        Some(p) => Err(Error::OutputExists(p.display().to_string())),
        None => Ok(()),
    }
}

/// Writes `contents` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One CSV cell. Floats use the shortest round-trip representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = match cell {
                    Cell::Int(v) => write!(out, "{v}"),
                    Cell::Float(v) => write!(out, "{v:?}"),
                    Cell::Bool(v) => write!(out, "{v}"),
                    Cell::Empty => Ok(()),
                };
            }
            out.push('\n');
        }
        out
    }

    /// Array of objects keyed by the header; empty cells become `null`.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.header
                    .iter()
                    .zip(row)
                    .map(|(k, c)| {
                        let v = match c {
                            Cell::Int(v) => serde_json::json!(v),
                            Cell::Float(v) => serde_json::json!(v),
                            Cell::Bool(v) => serde_json::json!(v),
                            Cell::Empty => serde_json::Value::Null,
                        };
                        (k.to_string(), v)
                    })
                    .collect()
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(vec!["d", "x", "y"]);
        t.push(vec![3.into(), 0.1.into(), Cell::Empty]);
        t.push(vec![4.into(), (1.0 / 3.0).into(), 1e-20.into()]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "d,x,y");
        assert_eq!(lines[1], "3,0.1,");
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 1e-20);
    }

    #[test]
    fn json_uses_null_for_empty() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![1.into(), Cell::Empty]);
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v[0]["a"], 1);
        assert!(v[0]["b"].is_null());
    }

    #[test]
    fn collision_and_atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        check_collisions(dir.path(), &["out.csv"], false).unwrap();
        write_atomic(&path, b"a\n").unwrap();
        assert!(matches!(check_collisions(dir.path(), &["out.csv"], false), Err(Error::OutputExists(_))));
        check_collisions(dir.path(), &["out.csv"], true).unwrap();
        write_atomic(&path, b"b\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
