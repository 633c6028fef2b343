//! Tables and their CSV/JSON rendering.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

/// Significant digits for every printed float.
pub const SIG_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Str(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `%.12g`-style rendering: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl Cell {
    fn to_text(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) => {
                let rounded: f64 = fmt_num(*v).parse().unwrap_or(*v);
                serde_json::Number::from_f64(rounded)
                    .map_or_else(|| Value::String(fmt_num(*v)), Value::Number)
            }
            Cell::Int(v) => Value::from(*v),
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_text))
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    fn rows_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.to_json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Provenance stored next to every table.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub version: String,
    pub command: String,
    pub config: Value,
    pub overrides: Vec<String>,
}

impl Metadata {
    fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("version".into(), Value::String(self.version.clone()));
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert(
            "overrides".into(),
            Value::Array(self.overrides.iter().cloned().map(Value::String).collect()),
        );
        m
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("json serializes");
    out.push(b'\n');
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::invalid("output", format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Renders the table; returns the bytes destined for stdout, if any.
///
/// CSV written to a file gets a `<file>.meta.json` sidecar with the metadata.
pub fn emit(
    table: &Table,
    meta: &Metadata,
    format: Format,
    path: Option<&Path>,
) -> Result<Option<Vec<u8>>, CliError> {
    let body = match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut doc = meta.to_json();
            doc.insert("rows".into(), table.rows_json());
            json_bytes(&Value::Object(doc))
        }
    };
    match path {
        None => Ok(Some(body)),
        Some(p) => {
            write_atomic(p, &body)?;
            if format == Format::Csv {
                let mut side = p.as_os_str().to_owned();
                side.push(".meta.json");
                write_atomic(
                    Path::new(&side),
                    &json_bytes(&Value::Object(meta.to_json())),
                )?;
            }
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.8525128684), "0.8525128684");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(45.0), "45");
        assert_eq!(fmt_num(-4.375), "-4.375");
        assert_eq!(fmt_num(4.896334164e-21), "4.896334164e-21");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(fmt_num(123456789012.7), "123456789013");
        assert_eq!(fmt_num(1.5e15), "1.5e15");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![1.5.into(), Cell::Empty, "x,y".into()]);
        assert_eq!(
            String::from_utf8(t.to_csv()).unwrap(),
            "a,b,c\n1.5,,\"x,y\"\n"
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
