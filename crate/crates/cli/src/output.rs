//! Output directory bookkeeping and table writers.
//!
//! CSV tables carry a header row, LF line endings and shortest round-trip
//! floats; missing values are empty fields. The JSON form of a table is
//! `{"columns": [...], "rows": [[...], ...]}` with missing values as null.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thirdsound_core::config::fmt_f64;

use crate::args::Format;
use crate::error::{CliError, CliResult};

/// Where outputs go and which files were written, in order.
pub struct OutputDir {
    root: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Relative names of every file written so far.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.register(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(Path::new(name), e))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Opens `<stem>.csv` or `<stem>.json` according to `--format`.
    pub fn table(&mut self, stem: &str, columns: &[&str]) -> CliResult<TableWriter> {
        self.table_as(stem, columns, self.format)
    }

    pub fn table_as(&mut self, stem: &str, columns: &[&str], format: Format) -> CliResult<TableWriter> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let name = format!("{stem}.{ext}");
        let path = self.register(&name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        TableWriter::new(BufWriter::new(file), path, columns, format)
    }

    /// Writes a whole table of optional values.
    pub fn write_table(&mut self, stem: &str, columns: &[&str], rows: &[Vec<Option<f64>>]) -> CliResult<()> {
        let mut t = self.table(stem, columns)?;
        for row in rows {
            t.row(row)?;
        }
        t.finish()
    }
}

pub struct TableWriter {
    out: BufWriter<File>,
    path: PathBuf,
    format: Format,
    width: usize,
    rows: usize,
    line: String,
}

fn json_number(v: Option<f64>) -> String {
    match v {
        Some(0.0) => "0.0".to_string(),
        Some(x) if x.is_finite() => serde_json::to_string(&x).expect("finite float"),
        _ => "null".to_string(),
    }
}

fn csv_field(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl TableWriter {
    fn new(mut out: BufWriter<File>, path: PathBuf, columns: &[&str], format: Format) -> CliResult<Self> {
        let head = match format {
            Format::Csv => format!("{}\n", columns.join(",")),
            Format::Json => {
                let cols = serde_json::to_string(columns).expect("strings serialize");
                format!("{{\"columns\":{cols},\"rows\":[")
            }
        };
        out.write_all(head.as_bytes()).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            out,
            path,
            format,
            width: columns.len(),
            rows: 0,
            line: String::new(),
        })
    }

    pub fn row(&mut self, values: &[Option<f64>]) -> CliResult<()> {
        assert_eq!(values.len(), self.width, "row width must match the header");
        self.line.clear();
        match self.format {
            Format::Csv => {
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        self.line.push(',');
                    }
                    self.line.push_str(&csv_field(*v));
                }
                self.line.push('\n');
            }
            Format::Json => {
                if self.rows > 0 {
                    self.line.push(',');
                }
                self.line.push_str("\n[");
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        self.line.push(',');
                    }
                    self.line.push_str(&json_number(*v));
                }
                self.line.push(']');
            }
        }
        self.rows += 1;
        self.out
            .write_all(self.line.as_bytes())
            .map_err(|e| CliError::io(&self.path, e))
    }

    /// Row of plain values.
    pub fn values(&mut self, values: &[f64]) -> CliResult<()> {
        let row: Vec<Option<f64>> = values.iter().map(|v| Some(*v)).collect();
        self.row(&row)
    }

    pub fn finish(mut self) -> CliResult<()> {
        if self.format == Format::Json {
            self.out.write_all(b"\n]}\n").map_err(|e| CliError::io(&self.path, e))?;
        }
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
