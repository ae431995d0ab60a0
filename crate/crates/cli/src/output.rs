//! Result rows and their CSV / JSON-lines encodings.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use polylab_core::rational::{format_rational, Rational};
use polylab_core::{LabError, Result};
use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 9] = [
    "schema_version",
    "experiment",
    "params",
    "seed",
    "metric",
    "value",
    "kind",
    "precision",
    "wall_us",
];

/// A metric value. Rationals keep their exact `num/den` form; decimals
/// record how many significant digits they carry.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Rational(Rational),
    Integer(i128),
    Decimal { value: f64, precision: u32 },
    Flag(bool),
    Text(String),
}

/// Significant digits used for floating point metrics.
pub const DECIMAL_PRECISION: u32 = 12;

impl Value {
    pub fn decimal(value: f64) -> Self {
        Self::Decimal {
            value,
            precision: DECIMAL_PRECISION,
        }
    }

    pub fn int(value: impl Into<i128>) -> Self {
        Self::Integer(value.into())
    }

    pub fn count(value: usize) -> Self {
        Self::Integer(value as i128)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Rational(_) => "rational",
            Self::Integer(_) => "integer",
            Self::Decimal { .. } => "decimal",
            Self::Flag(_) => "flag",
            Self::Text(_) => "text",
        }
    }

    pub fn render(&self) -> String {
        match self {
            Self::Rational(r) => format_rational(r),
            Self::Integer(n) => n.to_string(),
            Self::Decimal { value, precision } => format_significant(*value, *precision),
            Self::Flag(b) => b.to_string(),
            Self::Text(s) => s.clone(),
        }
    }

    fn precision(&self) -> Option<u32> {
        match self {
            Self::Decimal { precision, .. } => Some(*precision),
            _ => None,
        }
    }
}

fn format_significant(value: f64, digits: u32) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.*e}", digits.saturating_sub(1) as usize, value);
    // normalise through a parse so trailing zeros disappear
    s.parse::<f64>().map(|v| v.to_string()).unwrap_or(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub experiment: String,
    /// `key=value` pairs joined by `;`, in grid order.
    pub params: String,
    pub seed: u64,
    pub metric: String,
    pub value: String,
    pub kind: String,
    pub precision: Option<u32>,
    pub wall_us: u64,
}

impl ResultRow {
    pub fn new(experiment: &str, params: &str, seed: u64, metric: &str, value: Value, wall_us: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            params: params.to_string(),
            seed,
            metric: metric.to_string(),
            value: value.render(),
            kind: value.kind().to_string(),
            precision: value.precision(),
            wall_us,
        }
    }

    /// Equal in every field except the wall time.
    pub fn same_result(&self, other: &Self) -> bool {
        Self { wall_us: 0, ..self.clone() } == Self { wall_us: 0, ..other.clone() }
    }
}

/// Collects rows for one grid point with a shared parameter tuple and seed.
pub struct RowBuilder<'a> {
    experiment: &'a str,
    params: String,
    seed: u64,
    rows: Vec<(String, Value)>,
}

impl<'a> RowBuilder<'a> {
    pub fn new(experiment: &'a str, params: String, seed: u64) -> Self {
        Self {
            experiment,
            params,
            seed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, metric: impl Into<String>, value: Value) -> &mut Self {
        self.rows.push((metric.into(), value));
        self
    }

    pub fn finish(self, wall_us: u64) -> Vec<ResultRow> {
        self.rows
            .into_iter()
            .map(|(metric, value)| ResultRow::new(self.experiment, &self.params, self.seed, &metric, value, wall_us))
            .collect()
    }
}

fn csv_error(e: csv::Error) -> LabError {
    LabError::Io(io::Error::other(e))
}

/// Writes rows to `w`; the CSV header is written only when `header` is set.
pub fn write_rows<W: Write>(w: W, rows: &[ResultRow], format: OutputFormat, header: bool) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            if header {
                out.write_record(CSV_HEADER).map_err(csv_error)?;
            }
            for row in rows {
                out.serialize(row).map_err(csv_error)?;
            }
            out.flush()?;
        }
        OutputFormat::Json => {
            let mut w = w;
            for row in rows {
                serde_json::to_writer(&mut w, row).map_err(|e| LabError::Io(io::Error::other(e)))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Appends rows to `path`, writing the CSV header for a new or empty file
/// and refusing to mix schemas.
pub fn append_rows(path: &Path, rows: &[ResultRow], format: OutputFormat) -> Result<()> {
    let fresh = match File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f).read_line(&mut first)?;
            let first = first.trim_end();
            if format == OutputFormat::Csv && !first.is_empty() && first != CSV_HEADER.join(",") {
                return Err(LabError::Parse(format!(
                    "{} has a different header; refusing to append",
                    path.display()
                )));
            }
            first.is_empty()
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => true,
        Err(e) => return Err(e.into()),
    };
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    write_rows(file, rows, format, fresh)
}

pub fn read_csv_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    reader
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

pub fn read_json_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| LabError::Parse(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use polylab_core::rational::ratio;

    fn sample_rows() -> Vec<ResultRow> {
        let mut b = RowBuilder::new("cheeger", "d=3;p=1/2".into(), 7);
        b.push("exact_h", Value::Rational(ratio(4, 6)))
            .push("vertices", Value::count(5))
            .push("spectral_lower", Value::decimal(0.1 + 0.2))
            .push("connected", Value::Flag(true))
            .push("witness", Value::Text("0x1,0x3".into()));
        b.finish(1234)
    }

    #[test]
    fn values_render() {
        assert_eq!(Value::Rational(ratio(4, 6)).render(), "2/3");
        assert_eq!(Value::Rational(ratio(3, 1)).render(), "3/1");
        assert_eq!(Value::decimal(0.1 + 0.2).render(), "0.3");
        assert_eq!(Value::decimal(0.0).render(), "0");
        assert_eq!(Value::decimal(1.0 / 3.0).render(), "0.333333333333");
        assert_eq!(Value::Flag(false).render(), "false");
    }

    #[test]
    fn csv_and_json_carry_the_same_rows() {
        let rows = sample_rows();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        let json_path = dir.path().join("r.jsonl");
        append_rows(&csv_path, &rows, OutputFormat::Csv).unwrap();
        append_rows(&json_path, &rows, OutputFormat::Json).unwrap();
        assert_eq!(read_csv_rows(&csv_path).unwrap(), rows);
        assert_eq!(read_json_rows(&json_path).unwrap(), rows);

        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "1,cheeger,d=3;p=1/2,7,exact_h,2/3,rational,,1234");
    }

    #[test]
    fn appending_writes_one_header() {
        let rows = sample_rows();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        append_rows(&path, &rows, OutputFormat::Csv).unwrap();
        append_rows(&path, &rows, OutputFormat::Csv).unwrap();
        let back = read_csv_rows(&path).unwrap();
        assert_eq!(back.len(), 2 * rows.len());
        assert!(back[..rows.len()].iter().zip(&back[rows.len()..]).all(|(a, b)| a.same_result(b)));
    }

    #[test]
    fn foreign_header_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "a,b,c\n").unwrap();
        assert!(append_rows(&path, &sample_rows(), OutputFormat::Csv).is_err());
    }

    #[test]
    fn same_result_ignores_wall_time() {
        let a = sample_rows();
        let mut b = a.clone();
        b[0].wall_us = 99;
        assert!(a[0].same_result(&b[0]));
        b[0].seed = 8;
        assert!(!a[0].same_result(&b[0]));
    }
}
