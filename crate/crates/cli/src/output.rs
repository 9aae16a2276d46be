use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};
use ssr_core::{Result, SsrError};

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Field {
    pub fn text(s: impl Into<String>) -> Self {
        Field::Text(s.into())
    }

    /// 17 significant digits, enough to round-trip any `f64`.
    fn csv(&self) -> String {
        match self {
            Field::Num(x) => format!("{x:.16e}"),
            Field::Int(n) => n.to_string(),
            Field::Text(s) => s.clone(),
            Field::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // non-finite numbers have no JSON literal
            Field::Num(x) => Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Field::Int(n) => Value::from(*n),
            Field::Text(s) => Value::String(s.clone()),
            Field::Empty => Value::Null,
        }
    }
}

/// Rows under a fixed header. Every row has one field per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[&'static str] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Field>] {
        &self.rows
    }

    /// Starts an all-empty row to be filled with [`RowBuilder::set`].
    pub fn row(&mut self) -> RowBuilder<'_> {
        let n = self.columns.len();
        self.rows.push(vec![Field::Empty; n]);
        RowBuilder { table: self }
    }

    /// Builder over the most recent row.
    pub fn last_row(&mut self) -> RowBuilder<'_> {
        assert!(!self.rows.is_empty(), "no row started");
        RowBuilder { table: self }
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Field> {
        let c = self.columns.iter().position(|&name| name == column)?;
        self.rows.get(row).map(|r| &r[c])
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| SsrError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Field::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| SsrError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, f)| (c.to_string(), f.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&Value::Array(records)).expect("json value serializes");
        out.push(b'\n');
        out
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

pub struct RowBuilder<'a> {
    table: &'a mut Table,
}

impl RowBuilder<'_> {
    /// Panics on an unknown column: the schemas are static.
    pub fn set(self, column: &str, value: Field) -> Self {
        let c = self
            .table
            .columns
            .iter()
            .position(|&name| name == column)
            .unwrap_or_else(|| panic!("unknown column {column}"));
        let row = self.table.rows.last_mut().expect("row started");
        row[c] = value;
        self
    }

    pub fn num(self, column: &str, x: f64) -> Self {
        self.set(column, Field::Num(x))
    }
}

/// Writes to a temporary file beside `path` and renames it into place, so a
/// failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let ctx = |e: std::io::Error| SsrError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(ctx)?;
    tmp.write_all(bytes).map_err(ctx)?;
    tmp.as_file().sync_all().map_err(ctx)?;
    tmp.persist(path).map_err(|e| ctx(e.error))?;
    Ok(())
}

/// To `path` atomically, or to standard output.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
