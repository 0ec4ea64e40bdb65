//! Deterministic CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Full-precision float, 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accumulates rows of a comma-separated table in memory.
pub struct Table {
    buf: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Table {
            buf,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.width);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match c {
                Cell::F(v) => self.buf.push_str(&float(*v)),
                Cell::I(v) => {
                    let _ = write!(self.buf, "{v}");
                }
                Cell::S(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

pub enum Cell<'a> {
    F(f64),
    I(usize),
    S(&'a str),
}

pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io {
            path: root.to_path_buf(),
            source: e,
        })?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["name", "k", "v"]);
        t.row(&[Cell::S("a"), Cell::I(3), Cell::F(1.0)]);
        assert_eq!(t.into_string(), "name,k,v\na,3,1.0000000000000000e0\n");
    }
}
