//! Result bundles: metadata, long-format payload tables and diagnostics.
//!
//! JSON writes one document. CSV writes a directory with one file per
//! table plus `metadata.csv` and `diagnostics.csv`. Complex columns become
//! `re_<name>`/`im_<name>` pairs in CSV and `{"re", "im"}` objects in JSON.

use std::collections::BTreeMap;

use koopman_core::observables::SnapshotMatrix;
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::io::{emit_snapshots_csv, fmt17, format_complex17, BUNDLE_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Int,
    Real,
    Complex,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Complex(Complex64),
    Text(String),
}

impl Cell {
    fn kind(&self) -> ColumnKind {
        match self {
            Cell::Int(_) => ColumnKind::Int,
            Cell::Real(_) => ColumnKind::Real,
            Cell::Complex(_) => ColumnKind::Complex,
            Cell::Text(_) => ColumnKind::Text,
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        match self {
            Cell::Int(i) => vec![i.to_string()],
            Cell::Real(x) => vec![fmt17(*x)],
            Cell::Complex(z) => vec![fmt17(z.re), fmt17(z.im)],
            Cell::Text(s) => vec![s.clone()],
        }
    }

    /// Single CSV field; complex values as `re+imj`.
    fn csv_scalar(&self) -> String {
        match self {
            Cell::Complex(z) => format_complex17(*z),
            other => other.csv_fields().remove(0),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Real(x) => json_real(*x),
            Cell::Complex(z) => json!({ "re": json_real(z.re), "im": json_real(z.im) }),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<Complex64> for Cell {
    fn from(z: Complex64) -> Self {
        Cell::Complex(z)
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

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

/// JSON has no NaN or infinity; those travel as the strings Rust prints.
fn json_real(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// Long-format table with typed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(String, ColumnKind)>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, ColumnKind)]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<(String, ColumnKind)>) -> Self {
        Table { name: name.to_string(), columns, rows: Vec::new() }
    }

    /// Appends a row. Panics on a row that does not match the schema, which
    /// is a programming error in the command that builds the table.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match table {}", self.name);
        for (cell, (name, kind)) in row.iter().zip(&self.columns) {
            assert_eq!(cell.kind(), *kind, "column {name} of table {}", self.name);
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn csv_header(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|(n, k)| match k {
                ColumnKind::Complex => vec![format!("re_{n}"), format!("im_{n}")],
                _ => vec![n.clone()],
            })
            .collect()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.csv_header()).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().flat_map(Cell::csv_fields)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    /// Array of row objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|((n, _), c)| (n.clone(), c.to_json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Everything needed to rerun the command, plus timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub version: String,
    pub command: String,
    pub system: Option<String>,
    pub input: Option<String>,
    /// Every parameter in effect, defaults included.
    pub params: BTreeMap<String, String>,
    pub format: String,
    pub out: Option<String>,
    pub started: String,
    pub finished: String,
}

impl Metadata {
    /// Command line that reproduces the run.
    pub fn invocation(&self) -> String {
        let mut parts = vec!["koopman".to_string(), self.command.clone()];
        if let Some(s) = &self.system {
            parts.push(format!("--system {s}"));
        }
        if let Some(i) = &self.input {
            parts.push(format!("--input {i}"));
        }
        if !self.params.is_empty() {
            let kv: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            parts.push(format!("--params {}", kv.join(",")));
        }
        parts.push(format!("--format {}", self.format));
        if let Some(o) = &self.out {
            parts.push(format!("--out {o}"));
        }
        parts.join(" ")
    }

    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("tool".to_string(), "koopman".to_string()),
            ("version".to_string(), self.version.clone()),
            ("command".to_string(), self.command.clone()),
            ("system".to_string(), self.system.clone().unwrap_or_default()),
            ("input".to_string(), self.input.clone().unwrap_or_default()),
            ("format".to_string(), self.format.clone()),
            ("out".to_string(), self.out.clone().unwrap_or_default()),
            ("started".to_string(), self.started.clone()),
            ("finished".to_string(), self.finished.clone()),
            ("invocation".to_string(), self.invocation()),
        ];
        rows.extend(self.params.iter().map(|(k, v)| (format!("param.{k}"), v.clone())));
        rows
    }

    fn to_json(&self) -> Value {
        json!({
            "tool": "koopman",
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "config": {
                "command": self.command,
                "system": self.system,
                "input": self.input,
                "params": self.params,
                "format": self.format,
                "out": self.out,
                "invocation": self.invocation(),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
    /// Snapshot matrix in the ingestible layout, for `simulate`.
    pub snapshots: Option<SnapshotMatrix>,
    pub diagnostics: Vec<(String, Cell)>,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn diagnostic(&self, key: &str) -> Option<&Cell> {
        self.diagnostics.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_json(&self) -> Value {
        let mut payload = Map::new();
        for t in &self.tables {
            payload.insert(t.name.clone(), t.to_json());
        }
        if let Some(s) = &self.snapshots {
            let data = s.matrix();
            let rows: Vec<Value> = (0..data.nrows())
                .map(|i| Value::Array((0..data.ncols()).map(|j| Cell::Complex(data[(i, j)]).to_json()).collect()))
                .collect();
            payload.insert("snapshots".to_string(), Value::Array(rows));
        }
        let diagnostics: Map<String, Value> = self.diagnostics.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        json!({
            "metadata": self.metadata.to_json(),
            "payload": payload,
            "diagnostics": diagnostics,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("bundle serializes");
        s.push('\n');
        s
    }

    fn key_value_csv(rows: impl IntoIterator<Item = (String, String)>) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "value"]).expect("in-memory write");
        for (k, v) in rows {
            w.write_record([k, v]).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    /// Files of the CSV directory layout, by name.
    pub fn csv_files(&self) -> Vec<(String, Vec<u8>)> {
        let mut files = vec![(BUNDLE_MARKER.to_string(), Self::key_value_csv(self.metadata.rows()))];
        files.push((
            "diagnostics.csv".to_string(),
            Self::key_value_csv(self.diagnostics.iter().map(|(k, v)| (k.clone(), v.csv_scalar()))),
        ));
        for t in &self.tables {
            files.push((format!("{}.csv", t.name), t.to_csv()));
        }
        if let Some(s) = &self.snapshots {
            files.push(("snapshots.csv".to_string(), emit_snapshots_csv(s).into_bytes()));
        }
        files
    }

    /// All CSV files concatenated, each introduced by a `# <file>` line.
    pub fn csv_stream(&self) -> String {
        let mut out = String::new();
        for (name, bytes) in self.csv_files() {
            out.push_str(&format!("# {name}\n"));
            out.push_str(&String::from_utf8_lossy(&bytes));
        }
        out
    }
}
