//! Reading run sets from CSV or JSON-lines files.
//!
//! Each record is one observation `(run, position, value)`. Records may come
//! in any order; runs are sorted numerically when every run id is an
//! integer and lexicographically otherwise, and values within a run are
//! ordered by position.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use purity_core::error::{Error, Result};
use purity_core::{RunSet, Sample};
use serde::{Deserialize, Serialize};

use crate::numfmt::format_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl` / `.ndjson` mean JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Error,
    SkipWithWarning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSchema {
    pub format: Format,
    pub run_column: String,
    pub index_column: String,
    pub value_column: String,
    pub missing_policy: MissingPolicy,
}

impl IngestSchema {
    pub fn new(format: Format) -> Self {
        IngestSchema {
            format,
            run_column: "run".into(),
            index_column: "t".into(),
            value_column: "v".into(),
            missing_policy: MissingPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub runset: RunSet,
    pub warnings: Vec<String>,
}

struct Record {
    line: usize,
    run: String,
    pos: f64,
    value: f64,
}

pub fn ingest(path: &Path, schema: &IngestSchema) -> Result<Ingested> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("experiment")
        .to_string();
    ingest_bytes(&bytes, &id, schema)
}

pub fn ingest_bytes(bytes: &[u8], experiment_id: &str, schema: &IngestSchema) -> Result<Ingested> {
    let mut warnings = Vec::new();
    let records = match schema.format {
        Format::Csv => read_csv(bytes, schema, &mut warnings)?,
        Format::Jsonl => read_jsonl(bytes, schema, &mut warnings)?,
    };
    assemble(records, experiment_id, warnings)
}

/// Applies the missing-value policy to a bad row.
fn reject(line: usize, msg: String, schema: &IngestSchema, warnings: &mut Vec<String>) -> Result<()> {
    match schema.missing_policy {
        MissingPolicy::Error => Err(Error::Row { row: line, message: msg }),
        MissingPolicy::SkipWithWarning => {
            warnings.push(format!("row {line}: {msg}; skipped"));
            Ok(())
        }
    }
}

fn parse_num(field: &str, what: &str) -> std::result::Result<f64, String> {
    let t = field.trim();
    if t.is_empty() {
        return Err(format!("missing {what}"));
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{what} {t:?} is not a finite number")),
    }
}

fn read_csv(bytes: &[u8], schema: &IngestSchema, warnings: &mut Vec<String>) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Row { row: 1, message: e.to_string() })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Row {
            row: 1,
            message: format!("header has no column {name:?}"),
        })
    };
    let (ri, ti, vi) = (col(&schema.run_column)?, col(&schema.index_column)?, col(&schema.value_column)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Row {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let run = rec.get(ri).unwrap_or("").trim().to_string();
        if run.is_empty() {
            reject(line, "missing run id".into(), schema, warnings)?;
            continue;
        }
        let parsed = parse_num(rec.get(ti).unwrap_or(""), "position")
            .and_then(|p| Ok((p, parse_num(rec.get(vi).unwrap_or(""), "value")?)));
        match parsed {
            Ok((pos, value)) => out.push(Record { line, run, pos, value }),
            Err(msg) => reject(line, msg, schema, warnings)?,
        }
    }
    Ok(out)
}

fn json_field(obj: &serde_json::Map<String, serde_json::Value>, key: &str, what: &str) -> std::result::Result<f64, String> {
    match obj.get(key) {
        None | Some(serde_json::Value::Null) => Err(format!("missing {what}")),
        Some(serde_json::Value::Number(n)) => n.as_f64().filter(|v| v.is_finite()).ok_or_else(|| format!("{what} {n} is out of range")),
        Some(serde_json::Value::String(s)) => parse_num(s, what),
        Some(other) => Err(format!("{what} {other} is not a number")),
    }
}

fn read_jsonl(bytes: &[u8], schema: &IngestSchema, warnings: &mut Vec<String>) -> Result<Vec<Record>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Io(format!("input is not UTF-8: {e}")))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<serde_json::Value>(raw) {
            Ok(serde_json::Value::Object(o)) => o,
            Ok(_) => {
                reject(line, "not a JSON object".into(), schema, warnings)?;
                continue;
            }
            Err(e) => {
                reject(line, format!("invalid JSON: {e}"), schema, warnings)?;
                continue;
            }
        };
        let run = match obj.get(&schema.run_column) {
            Some(serde_json::Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => {
                reject(line, "missing run id".into(), schema, warnings)?;
                continue;
            }
        };
        let parsed = json_field(&obj, &schema.index_column, "position")
            .and_then(|p| Ok((p, json_field(&obj, &schema.value_column, "value")?)));
        match parsed {
            Ok((pos, value)) => out.push(Record { line, run, pos, value }),
            Err(msg) => reject(line, msg, schema, warnings)?,
        }
    }
    Ok(out)
}

fn assemble(records: Vec<Record>, experiment_id: &str, warnings: Vec<String>) -> Result<Ingested> {
    let mut by_run: BTreeMap<String, Vec<Record>> = BTreeMap::new();
    for r in records {
        by_run.entry(r.run.clone()).or_default().push(r);
    }
    if by_run.is_empty() {
        return Err(Error::InvalidInput("no observations found".into()));
    }
    let mut ids: Vec<String> = by_run.keys().cloned().collect();
    if ids.iter().all(|id| id.parse::<i64>().is_ok()) {
        ids.sort_by_key(|id| id.parse::<i64>().expect("checked"));
    }
    let mut runs = Vec::with_capacity(ids.len());
    for id in ids {
        let mut recs = by_run.remove(&id).expect("key exists");
        recs.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        if let Some(w) = recs.windows(2).find(|w| w[0].pos == w[1].pos) {
            return Err(Error::Row {
                row: w[0].line.max(w[1].line),
                message: format!(
                    "duplicate position {} in run {id:?} (also on row {})",
                    w[1].pos,
                    w[0].line.min(w[1].line)
                ),
            });
        }
        runs.push(Sample::new(id, recs.iter().map(|r| r.value).collect())?);
    }
    Ok(Ingested {
        runset: RunSet::new(experiment_id, runs),
        warnings,
    })
}

/// Writes `rs` in the ingest format with positions `0..len` per run.
pub fn write_runset<W: Write>(rs: &RunSet, format: Format, out: &mut W) -> std::io::Result<()> {
    let mut buf = String::new();
    match format {
        Format::Csv => {
            buf.push_str("run,t,v\n");
            for run in &rs.runs {
                for (t, v) in run.values().iter().enumerate() {
                    let _ = writeln!(buf, "{},{t},{}", csv_field(&run.run_id), format_f64(*v));
                }
            }
        }
        Format::Jsonl => {
            for run in &rs.runs {
                let id = serde_json::to_string(&run.run_id).expect("string");
                for (t, v) in run.values().iter().enumerate() {
                    let _ = writeln!(buf, "{{\"run\":{id},\"t\":{t},\"v\":{}}}", format_f64(*v));
                }
            }
        }
    }
    out.write_all(buf.as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
