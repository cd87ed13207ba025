//! Reports emitted twice: aligned plain text for people and `key=value`
//! lines for scripts.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Report {
    title: String,
    fields: Vec<(String, String)>,
    notes: Vec<String>,
    tables: Vec<(String, Vec<Vec<usize>>)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn field(&mut self, key: impl Into<String>, value: impl Display) {
        self.fields.push((key.into(), value.to_string()));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// `matrix[true][predicted]`.
    pub fn confusion(&mut self, key: impl Into<String>, matrix: &[Vec<usize>]) {
        self.tables.push((key.into(), matrix.to_vec()));
    }

    pub fn text(&self) -> String {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = format!("{}\n", self.title);
        for (k, v) in &self.fields {
            let _ = writeln!(out, "  {k:<width$}  {v}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "  note: {n}");
        }
        for (name, m) in &self.tables {
            let cell = m.iter().flatten().max().map_or(1, |v| v.to_string().len()).max(3);
            let _ = writeln!(out, "  {name} (rows: true class, columns: predicted)");
            let _ = write!(out, "  {:>4}", "");
            for p in 0..m.len() {
                let _ = write!(out, " {p:>cell$}");
            }
            out.push('\n');
            for (t, row) in m.iter().enumerate() {
                let _ = write!(out, "  {t:>4}");
                for v in row {
                    let _ = write!(out, " {v:>cell$}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// One `key=value` per line; confusion rows as `name.<true>=c0,c1,...`.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}={v}");
        }
        for (i, n) in self.notes.iter().enumerate() {
            let _ = writeln!(out, "note.{}={n}", i + 1);
        }
        for (name, m) in &self.tables {
            for (t, row) in m.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{name}.{t}={}", cells.join(","));
            }
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.kv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        for (ext, body) in [("txt", self.text()), ("kv", self.key_values())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Parses `key=value` report lines.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
