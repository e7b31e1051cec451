//! Tables and reports written to the output directory.
//!
//! Every artifact is a metadata block followed by a data section. Only the
//! metadata carries the timestamp and timings, so reruns with the same config
//! produce identical data sections.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, JobConfig, JobKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Rows in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// What a job produced.
pub enum Artifact {
    Table(Table),
    /// Data section and extra metadata (timings and the like).
    Report { data: Value, extra: Value },
}

/// Parameter echo, library version, tolerances and a timestamp.
pub fn metadata(kind: JobKind, cfg: &JobConfig) -> Result<Map<String, Value>> {
    let mut meta = Map::new();
    meta.insert("tool".into(), json!("cpexit"));
    meta.insert("version".into(), json!(cpexit::VERSION));
    meta.insert("job".into(), json!(kind.name()));
    meta.insert("params".into(), serde_json::to_value(&cfg.params)?);
    meta.insert("method".into(), serde_json::to_value(cfg.method)?);
    meta.insert("tolerances".into(), serde_json::to_value(cfg.tolerances)?);
    if matches!(kind, JobKind::Simulate | JobKind::Validate) {
        meta.insert("sim".into(), serde_json::to_value(cfg.sim.config())?);
    }
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    meta.insert("generated_unix".into(), json!(now));
    Ok(meta)
}

fn csv_body(table: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
}

fn table_json(table: &Table) -> Value {
    Value::Array(
        table
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

fn report_csv(data: &Value) -> Result<String> {
    // Flattens a list of objects; nested values are written as JSON.
    let rows = data.as_array().context("CSV reports need a list of records")?;
    let mut columns: Vec<String> = Vec::new();
    for r in rows {
        if let Some(obj) = r.as_object() {
            for k in obj.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns)?;
    for r in rows {
        w.write_record(columns.iter().map(|c| match r.get(c) {
            Some(Value::Number(n)) => n.as_f64().map(|v| format!("{v:.16e}")).unwrap_or_else(|| n.to_string()),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        }))?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
}

fn render<T: Serialize>(meta: &Map<String, Value>, extra: &Value, data: &T) -> Result<String> {
    let mut meta = meta.clone();
    if let Value::Object(more) = extra {
        meta.extend(more.clone());
    }
    let doc = json!({ "metadata": meta, "data": data });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn comment_header(meta: &Map<String, Value>, extra: &Value) -> String {
    let mut out = String::new();
    for (k, v) in meta.iter().chain(extra.as_object().into_iter().flatten()) {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out
}

/// Writes the artifact and returns its path.
pub fn write(artifact: &Artifact, kind: JobKind, cfg: &JobConfig, dir: &Path) -> Result<PathBuf> {
    let default_format = match artifact {
        Artifact::Table(_) => Format::Csv,
        Artifact::Report { .. } => Format::Json,
    };
    let format = cfg.output.format.unwrap_or(default_format);
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let name = cfg.output.path.clone().unwrap_or_else(|| format!("{}.{ext}", kind.name()));
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let meta = metadata(kind, cfg)?;
    let none = Value::Null;
    let text = match (artifact, format) {
        (Artifact::Table(t), Format::Csv) => comment_header(&meta, &none) + &csv_body(t)?,
        (Artifact::Table(t), Format::Json) => render(&meta, &none, &table_json(t))?,
        (Artifact::Report { data, extra }, Format::Csv) => comment_header(&meta, extra) + &report_csv(data)?,
        (Artifact::Report { data, extra }, Format::Json) => render(&meta, extra, data)?,
    };
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
