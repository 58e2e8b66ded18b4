use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

/// Whitespace-separated table with a single header row.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &mut dyn Iterator<Item = &str>| {
            let joined: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(joined.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut self.header.iter().copied());
        for row in &self.rows {
            line(&mut row.iter().map(String::as_str));
        }
        out
    }

    /// Writes the table to `dir/name` through a temporary file in `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let target = dir.join(name);
        let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", target.display()));
        let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.render().as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&target).map_err(|e| io(e.error))?;
        Ok(target)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn int(x: impl Display) -> String {
    x.to_string()
}

pub fn flag(b: bool) -> String {
    u8::from(b).to_string()
}
