//! File formats: JSON matrices as row-major `[re, im]` pairs, CSV tables keyed
//! by weight-vector columns, and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use qmacro::ops::{Operator, C64};
use qmacro::zd::{weight_label_names, WeightVector};
use qmacro::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

fn parse_pair(v: &Value) -> Option<C64> {
    match v {
        Value::Array(p) if p.len() == 2 => Some(C64::new(p[0].as_f64()?, p[1].as_f64()?)),
        Value::Number(x) => Some(C64::new(x.as_f64()?, 0.0)),
        _ => None,
    }
}

/// Reads `{"matrix": [[[re, im], …], …]}`, `{"vector": [[re, im], …]}`, or a
/// bare matrix or vector. Vectors become normalized projectors.
pub fn read_state_file(path: &Path) -> Result<Operator> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| io_error(path, e))?;
    let body = match &value {
        Value::Object(map) => map
            .get("matrix")
            .or_else(|| map.get("vector"))
            .ok_or_else(|| io_error(path, "expected a \"matrix\" or \"vector\" field"))?,
        other => other,
    };
    let rows = body.as_array().ok_or_else(|| io_error(path, "not an array"))?;
    let is_matrix = rows.first().and_then(|r| r.as_array()).and_then(|r| r.first()).is_some_and(|x| x.is_array());
    if is_matrix {
        let n = rows.len();
        let mut out = Operator::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| io_error(path, "matrix is not square"))?;
            for (j, x) in row.iter().enumerate() {
                out[(i, j)] = parse_pair(x).ok_or_else(|| io_error(path, format!("bad entry at ({i},{j})")))?;
            }
        }
        Ok(out)
    } else {
        let v: Vec<C64> = rows
            .iter()
            .map(|x| parse_pair(x).ok_or_else(|| io_error(path, "bad vector entry")))
            .collect::<Result<_>>()?;
        let v = qmacro::ops::StateVector::from_vec(v);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(io_error(path, "zero vector"));
        }
        Ok(qmacro::ops::projector(&(v / C64::new(norm, 0.0))))
    }
}

pub fn matrix_to_json(m: &Operator) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

/// Writes to `path`, or to standard output when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| io_error(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(|e| Error::Input(e.to_string()))
        }
    }
}

pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Input(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

/// Reads a CSV keyed by the `m_kl` columns and returns `(m, value)` for the
/// named value column.
pub fn read_weight_table(path: &Path, d: u32, n: usize, column: &str) -> Result<Vec<(WeightVector, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = reader.headers().map_err(|e| io_error(path, e))?.clone();
    let names = weight_label_names(d);
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| io_error(path, format!("missing column {name}")))
    };
    let m_cols = names.iter().map(|s| find(s)).collect::<Result<Vec<_>>>()?;
    let value_col = find(column)?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_error(path, e))?;
        let parse_u = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<u32>().ok())
                .ok_or_else(|| io_error(path, format!("row {}: bad integer", line + 2)))
        };
        let entries = m_cols.iter().map(|&i| parse_u(i)).collect::<Result<Vec<_>>>()?;
        let m = WeightVector::new(d, n, entries).map_err(|e| io_error(path, format!("row {}: {e}", line + 2)))?;
        let v = record
            .get(value_col)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| io_error(path, format!("row {}: bad {column}", line + 2)))?;
        out.push((m, v));
    }
    Ok(out)
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    let path = manifest_path(out);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Input(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}
