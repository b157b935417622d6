//! Line-aware CSV reading with collected rule violations.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;

use crate::error::{DataIssue, Error, Result};

/// Opens a file, transparently decompressing `.gz`.
pub(crate) fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::data(path, 0, format!("cannot open: {e}")))?;
    let reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

/// Accumulates violations so a load reports every problem at once.
#[derive(Debug, Default)]
pub(crate) struct Issues(pub Vec<DataIssue>);

impl Issues {
    pub fn push(&mut self, file: &Path, line: usize, rule: impl Into<String>) {
        self.0.push(DataIssue::new(file, line, rule));
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(self.0))
        }
    }
}

/// A parsed CSV file: header plus records tagged with their 1-based line.
pub(crate) struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(open_maybe_gz(path)?);
        let header = reader
            .headers()
            .map_err(|e| Error::data(path, 1, format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::data(path, line, format!("malformed record: {e}"))
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record));
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    /// Checks the header equals `expected`; returns false after recording an issue.
    pub fn expect_header(&self, expected: &[&str], issues: &mut Issues) -> bool {
        if self.header.iter().map(String::as_str).eq(expected.iter().copied()) {
            true
        } else {
            issues.push(
                &self.path,
                1,
                format!("header must be `{}`, found `{}`", expected.join(","), self.header.join(",")),
            );
            false
        }
    }

    /// Parses column `col` of a record, recording an issue on failure.
    pub fn field<T: FromStr>(&self, line: usize, rec: &csv::StringRecord, col: usize, issues: &mut Issues) -> Option<T> {
        let name = self.header.get(col).map_or("?", String::as_str);
        match rec.get(col) {
            None => {
                issues.push(&self.path, line, format!("missing column {name}"));
                None
            }
            Some(raw) => match raw.parse() {
                Ok(v) => Some(v),
                Err(_) => {
                    issues.push(&self.path, line, format!("{name} = `{raw}` is not a valid {}", kind::<T>()));
                    None
                }
            },
        }
    }

    /// Non-negative integer column; negative values get their own message.
    pub fn count(&self, line: usize, rec: &csv::StringRecord, col: usize, issues: &mut Issues) -> Option<u64> {
        let v: i64 = self.field(line, rec, col, issues)?;
        if v < 0 {
            let name = &self.header[col];
            issues.push(&self.path, line, format!("{name} must be non-negative, got {v}"));
            return None;
        }
        Some(v as u64)
    }

    /// Finite real column.
    pub fn real(&self, line: usize, rec: &csv::StringRecord, col: usize, issues: &mut Issues) -> Option<f64> {
        let v: f64 = self.field(line, rec, col, issues)?;
        if !v.is_finite() {
            issues.push(&self.path, line, format!("{} must be finite", self.header[col]));
            return None;
        }
        Some(v)
    }
}

fn kind<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name.contains("f64") {
        "number"
    } else {
        "integer"
    }
}
