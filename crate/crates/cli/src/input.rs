//! CSV input tables.

use std::path::Path;

use crate::error::{CliError, CliResult, ErrorKind};

/// Columns of a headed numeric CSV. Blank fields read as `None`.
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
    source: String,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| CliError::io(path, e))?;
        let bad = |msg: String| CliError::new(ErrorKind::Config, format!("{}: {msg}", path.display()));
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                let v = if field.is_empty() {
                    None
                } else {
                    Some(
                        field
                            .parse::<f64>()
                            .map_err(|e| bad(format!("row {}: `{field}` is not a number ({e})", line + 2)))?,
                    )
                };
                col.push(v);
            }
        }
        Ok(Self {
            headers,
            columns,
            source: path.display().to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn optional(&self, name: &str) -> Option<&[Option<f64>]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// A column that must be present with no blank fields.
    pub fn required(&self, name: &str) -> CliResult<Vec<f64>> {
        let col = self.optional(name).ok_or_else(|| {
            CliError::new(
                ErrorKind::Config,
                format!(
                    "{}: missing column `{name}` (have {})",
                    self.source,
                    self.headers.join(", ")
                ),
            )
        })?;
        col.iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    CliError::new(
                        ErrorKind::Config,
                        format!("{}: row {} has a blank `{name}`", self.source, i + 2),
                    )
                })
            })
            .collect()
    }
}

/// A sampled record read from a trace CSV.
pub struct Trace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

/// Reads `column` and infers the sample rate from the `t_s` column.
pub fn read_trace(path: &Path, column: &str) -> CliResult<Trace> {
    let table = Table::read(path)?;
    let t = table.required("t_s")?;
    let samples = table.required(column)?;
    if t.len() < 2 {
        return Err(CliError::new(
            ErrorKind::Config,
            format!("{}: need at least two samples", path.display()),
        ));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(CliError::new(
            ErrorKind::Config,
            format!("{}: t_s must increase", path.display()),
        ));
    }
    // Times are written as i/fs; rounding to 12 significant digits recovers
    // the nominal rate exactly for ordinary values.
    let raw = (t.len() - 1) as f64 / span;
    let unit = 10f64.powi(raw.log10().floor() as i32 - 11);
    let sample_rate = (raw / unit).round() * unit;
    Ok(Trace { samples, sample_rate })
}
