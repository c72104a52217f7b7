//! Tabular results rendered as CSV (with `#` metadata lines) or one JSON object.

use std::io::Write;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A run's result: metadata, one table, and optional summary values.
pub struct Artifact {
    pub meta: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
}

impl Artifact {
    pub fn new(meta: Map<String, Value>, columns: Vec<&'static str>) -> Self {
        Self {
            meta,
            columns,
            rows: Vec::new(),
            summary: Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> std::io::Result<Vec<u8>> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => {
                let mut obj = self.meta.clone();
                let rows = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                    .collect();
                obj.insert("rows".into(), Value::Array(rows));
                if !self.summary.is_empty() {
                    obj.insert("summary".into(), Value::Object(self.summary.clone()));
                }
                let mut out = serde_json::to_vec_pretty(&Value::Object(obj))?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    fn render_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in self.meta.iter().chain(self.summary.iter()) {
            writeln!(out, "# {k}: {}", compact(v))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Array(items) => items.iter().map(compact).collect::<Vec<_>>().join(";"),
        other => compact(other),
    }
}

/// JSON number for a float; non-finite values become strings so the output stays valid JSON.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string()))
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}
