// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and the JSON output envelope.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::segstats::TimeSeriesDataset;

pub const SCHEMA_VERSION: &str = "1";

/// Numeric table read from CSV: first column is the dependent series, the
/// rest are covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn series(&self) -> &[f64] {
        &self.columns[0]
    }

    /// Regression dataset: `y` on an intercept plus the remaining columns,
    /// or on the remaining columns alone with `no_intercept` (then the first
    /// of them must be the constant one).
    pub fn regression(&self, no_intercept: bool) -> Result<TimeSeriesDataset> {
        let y = self.columns[0].clone();
        let rows: Vec<Vec<f64>> = (0..self.n_rows())
            .map(|i| {
                let mut row = Vec::with_capacity(self.columns.len());
                if !no_intercept {
                    row.push(1.0);
                }
                row.extend(self.columns[1..].iter().map(|c| c[i]));
                row
            })
            .collect();
        if no_intercept && self.columns.len() < 2 {
            return Err(Error::DimensionMismatch("--no-intercept needs covariate columns".into()));
        }
        TimeSeriesDataset::new(y, rows)
    }
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

/// Parses CSV text. A first row with any non-numeric cell is a header.
/// Row numbers in errors count physical lines from 1.
pub fn parse_csv<R: Read>(input: R) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(input);
    let mut header = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::Parse { row: line, col: 0, msg: e.to_string() })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if idx == 0 && rec.iter().any(|c| !is_number(c)) {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        if columns.is_empty() {
            let width = header.as_ref().map(|h: &Vec<String>| h.len()).unwrap_or(rec.len());
            columns = vec![Vec::new(); width];
        }
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                row: line,
                col: rec.len().min(columns.len()) + 1,
                msg: format!("expected {} fields, found {}", columns.len(), rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                col: c + 1,
                msg: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: line, col: c + 1, msg: format!("non-finite value '{cell}'") });
            }
            columns[c].push(v);
        }
    }
    if columns.is_empty() || columns[0].is_empty() {
        return Err(Error::TooShort("input has no data rows".into()));
    }
    Ok(Table { header, columns })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_csv(std::io::BufReader::new(file))
}

/// Top-level JSON document written by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: String,
    pub command: String,
    pub config_echo: Value,
    pub results: Value,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u64,
}

impl Envelope {
    pub fn new(command: &str, config_echo: Value, results: Value, total_ms: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            config_echo,
            results,
            timing: Timing { total_ms },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Writes JSON to `path`, or to standard output when `path` is `None`.
pub fn emit(envelope: &Envelope, path: Option<&Path>) -> Result<()> {
    let text = envelope.to_json()?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
