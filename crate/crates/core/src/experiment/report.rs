use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::ExperimentConfig;
use crate::error::{Error, Result};

/// 17 significant digits in scientific notation, enough to round-trip
/// every `f64`. Negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) if !n.is_f64() => u.to_string(),
            (_, Some(i)) if !n.is_f64() => i.to_string(),
            _ => format_float(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Serializes rows with a header taken from the field names, `\n` line
/// endings and fixed float formatting. No rows gives an empty table.
pub fn write_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for (i, row) in rows.iter().enumerate() {
        let Value::Object(map) = serde_json::to_value(row)? else {
            return Err(Error::Config("report rows must be structs".into()));
        };
        if i == 0 {
            w.write_record(map.keys())?;
        }
        w.write_record(map.values().map(cell))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// A CSV report ready to be written.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub file: String,
    pub bytes: Vec<u8>,
}

impl Table {
    pub fn new<T: Serialize>(file: &str, rows: &[T]) -> Result<Self> {
        Ok(Self { file: file.into(), bytes: write_csv(rows)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub units: String,
    pub method: String,
    /// `ok`, or `non_finite` when the value could not be represented.
    pub status: String,
}

impl Estimate {
    pub fn new(name: &str, value: f64, stderr: Option<f64>, units: &str, method: &str) -> Self {
        let finite = value.is_finite();
        Self {
            name: name.into(),
            value: finite.then_some(value),
            stderr: stderr.filter(|s| s.is_finite()),
            units: units.into(),
            method: method.into(),
            status: if finite { "ok" } else { "non_finite" }.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub experiment: String,
    pub seed: u64,
    pub group: String,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    pub flags: BTreeMap<String, String>,
    pub files: Vec<String>,
    /// `pass` when every check passed, else `fail`.
    pub status: String,
}

impl Summary {
    pub(crate) fn new(
        config: &ExperimentConfig,
        group: String,
        estimates: Vec<Estimate>,
        checks: Vec<Check>,
        flags: BTreeMap<String, String>,
        files: Vec<String>,
    ) -> Self {
        let status = if checks.iter().all(|c| c.passed) { "pass" } else { "fail" };
        Self {
            name: config.name.clone(),
            experiment: config.experiment.to_string(),
            seed: config.seed,
            group,
            estimates,
            checks,
            flags,
            files,
            status: status.into(),
        }
    }
}
