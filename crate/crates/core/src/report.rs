//! Tabular report emission (CSV and JSON) and atomic file writes.
//!
//! Numbers are rendered with a fixed number of decimals and `.` as the
//! separator, independent of locale, so reruns produce identical bytes.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{MixkitError, Result};

/// Decimals used for every real-valued field.
pub const DECIMALS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = MixkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(MixkitError::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
    /// Rendered as an empty CSV field and JSON `null`.
    Missing,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Fixed-point rendering; non-finite values become `nan`, `inf`, `-inf`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let s = format!("{v:.DECIMALS$}");
        // Avoid "-0.000000".
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

impl Cell {
    fn to_field(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            // Round-trip the fixed-point text so JSON and CSV agree.
            Cell::Real(v) if v.is_finite() => format_real(*v).parse::<f64>().map_or(Value::Null, Value::from),
            Cell::Real(_) | Cell::Missing => Value::Null,
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

/// A header plus rows of cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let to_err = |e: csv::Error| MixkitError::Format(e.to_string());
        w.write_record(&self.header).map_err(to_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_field)).map_err(to_err)?;
        }
        w.into_inner().map_err(|e| MixkitError::Format(e.to_string()))
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.header.iter().cloned().zip(row.iter().map(Cell::to_json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn render(&self, format: ReportFormat) -> Result<Vec<u8>> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json_value())
                    .map_err(|e| MixkitError::Format(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| MixkitError::Io(e.error))?;
    Ok(())
}

/// Ordered `key = value` lines, used for resolved-config files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_real(&mut self, key: &str, value: f64) -> &mut Self {
        // Shortest round-trip form keeps the file sufficient for an exact rerun.
        self.0.push((key.to_string(), format!("{value:?}")));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MixkitError::Format(format!("expected key = value, got {line:?}")))?;
            out.0.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new(&["name", "value", "flag", "opt"]);
        t.push(vec!["a".into(), 1.5.into(), true.into(), Cell::Missing]);
        t.push(vec!["b,c".into(), (-1e-9).into(), false.into(), 2usize.into()]);
        t
    }

    #[test]
    fn fixed_decimal_rendering() {
        assert_eq!(format_real(1.0 / 3.0), "0.333333");
        assert_eq!(format_real(-1e-9), "0.000000");
        assert_eq!(format_real(-2.5), "-2.500000");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_and_json_share_schema() {
        let t = table();
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv, "name,value,flag,opt\na,1.500000,true,\n\"b,c\",0.000000,false,2\n");
        let json = t.to_json_value();
        assert_eq!(json[0]["value"], Value::from(1.5));
        assert_eq!(json[0]["opt"], Value::Null);
        assert_eq!(json[1]["name"], Value::from("b,c"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn key_values_round_trip() {
        let mut kv = KeyValues::new();
        kv.set("seed", 7).set_real("lambda", 0.1);
        let back = KeyValues::parse(&kv.render()).unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.get("lambda"), Some("0.1"));
    }
}
