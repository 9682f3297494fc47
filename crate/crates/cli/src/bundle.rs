//! Result tables and their CSV/JSON serialization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Number, Value};

use crate::config::Format;
use crate::error::CliError;

pub const UNITS_LINE: &str = "# units: omega_c=1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    /// Floats use the shortest text that round-trips to the same binary64.
    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, columns: &[&str]) -> Self {
        Self::new(name, columns.iter().map(|c| c.to_string()).collect())
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    /// Numeric column as floats; non-numeric cells become NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        Some(
            self.column(name)?
                .into_iter()
                .map(|c| match c {
                    Cell::Num(x) => *x,
                    Cell::Int(i) => *i as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub subcommand: String,
    pub version: String,
    /// TOML echo of the effective configuration.
    pub config: String,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl Bundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn metadata_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("subcommand".into(), json!(self.metadata.subcommand));
        m.insert("version".into(), json!(self.metadata.version));
        m.insert("units".into(), json!("omega_c=1"));
        m.insert("config".into(), json!(self.metadata.config));
        if let Some(t) = self.metadata.wall_time_s {
            m.insert("wall_time_s".into(), json!(t));
        }
        Value::Object(m)
    }

    pub fn to_json(&self) -> Value {
        let tables: Map<String, Value> = self
            .tables
            .iter()
            .map(|t| {
                let rows: Vec<Value> = t
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
                    .collect();
                (
                    t.name.clone(),
                    json!({ "columns": t.columns, "rows": rows }),
                )
            })
            .collect();
        json!({ "metadata": self.metadata_json(), "tables": tables })
    }
}

/// CSV text of one table: units comment, header, rows, `\n` line endings.
pub fn table_csv(table: &Table) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::to_csv))
            .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
    format!("{UNITS_LINE}\n{body}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

/// Writes `bundle` under `dir`. CSV gives one `<table>.csv` per table plus
/// `metadata.json`; JSON gives a single `<subcommand>.json`. Returns the
/// written paths.
pub fn write_bundle(bundle: &Bundle, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            for table in &bundle.tables {
                let path = dir.join(format!("{}.csv", table.name));
                write_file(&path, &table_csv(table))?;
                written.push(path);
            }
            let path = dir.join("metadata.json");
            let text = serde_json::to_string_pretty(&bundle.metadata_json()).expect("json value");
            write_file(&path, &format!("{text}\n"))?;
            written.push(path);
        }
        Format::Json => {
            let path = dir.join(format!("{}.json", bundle.metadata.subcommand));
            let text = serde_json::to_string_pretty(&bundle.to_json()).expect("json value");
            write_file(&path, &format!("{text}\n"))?;
            written.push(path);
        }
    }
    Ok(written)
}
