use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::stats::angle_between;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldTolerance {
    pub abs: Option<f64>,
    /// Angle (rad) between numeric vectors.
    pub angle: Option<f64>,
}

/// Per-field tolerances. A rule applies to a field when its dotted path equals
/// the key or ends with `.key`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub default_abs: f64,
    pub ignore: Vec<String>,
    /// Compare only rows whose `record` is listed.
    pub records: Option<Vec<String>>,
    pub fields: BTreeMap<String, FieldTolerance>,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec { default_abs: 0.0, ignore: vec!["config_hash".into()], records: None, fields: BTreeMap::new() }
    }
}

impl ToleranceSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn matches(key: &str, path: &str) -> bool {
        path == key || path.ends_with(&format!(".{key}"))
    }

    fn ignored(&self, path: &str) -> bool {
        self.ignore.iter().any(|k| Self::matches(k, path))
    }

    fn rule(&self, path: &str) -> Option<&FieldTolerance> {
        self.fields.iter().find(|(k, _)| Self::matches(k, path)).map(|(_, t)| t)
    }
}

/// One out-of-tolerance field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDiff {
    pub row: usize,
    pub path: String,
    pub a: Value,
    pub b: Value,
    pub difference: Option<f64>,
    pub tolerance: Option<f64>,
}

/// Parses a JSON-lines results file.
pub fn parse_results(text: &str) -> Result<Vec<Value>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Value = serde_json::from_str(l).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            if !v.is_object() {
                return Err(Error::Config(format!("line {}: not a JSON object", i + 1)));
            }
            Ok(v)
        })
        .collect()
}

fn mismatch(row: usize, path: &str, what: &str) -> Error {
    Error::Config(format!("schema mismatch at row {row}, field {path:?}: {what}"))
}

fn numeric_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(|x| x.as_f64()).collect()
}

fn walk(row: usize, path: &str, a: &Value, b: &Value, tol: &ToleranceSpec, out: &mut Vec<FieldDiff>) -> Result<()> {
    if !path.is_empty() && tol.ignored(path) {
        return Ok(());
    }
    let rule = tol.rule(path);
    if let Some(max_angle) = rule.and_then(|r| r.angle) {
        if let (Some(x), Some(y)) = (numeric_vec(a), numeric_vec(b)) {
            if x.len() != y.len() {
                return Err(mismatch(row, path, "vector lengths differ"));
            }
            let angle = angle_between(&x, &y);
            if !(angle <= max_angle) {
                out.push(FieldDiff { row, path: path.into(), a: a.clone(), b: b.clone(), difference: Some(angle), tolerance: Some(max_angle) });
            }
            return Ok(());
        }
    }
    let child = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            if x.keys().ne(y.keys()) {
                return Err(mismatch(row, path, "key sets differ"));
            }
            for (k, va) in x {
                walk(row, &child(k), va, &y[k], tol, out)?;
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(FieldDiff { row, path: path.into(), a: a.clone(), b: b.clone(), difference: None, tolerance: None });
                return Ok(());
            }
            for (va, vb) in x.iter().zip(y) {
                walk(row, path, va, vb, tol, out)?;
            }
        }
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let t = rule.and_then(|r| r.abs).unwrap_or(tol.default_abs);
            let d = (x - y).abs();
            if !(d <= t) {
                out.push(FieldDiff { row, path: path.into(), a: a.clone(), b: b.clone(), difference: Some(d), tolerance: Some(t) });
            }
        }
        (Value::Null, _) | (_, Value::Null) | (Value::String(_), Value::String(_)) | (Value::Bool(_), Value::Bool(_)) => {
            if a != b {
                out.push(FieldDiff { row, path: path.into(), a: a.clone(), b: b.clone(), difference: None, tolerance: None });
            }
        }
        _ => return Err(mismatch(row, path, "value types differ")),
    }
    Ok(())
}

/// Field-wise comparison of two result files. An error means the files do not
/// share a schema; an empty diff means every field is within tolerance.
pub fn compare(a: &[Value], b: &[Value], tol: &ToleranceSpec) -> Result<Vec<FieldDiff>> {
    let keep = |rows: &[Value]| -> Vec<Value> {
        rows.iter()
            .filter(|r| match &tol.records {
                Some(list) => r.get("record").and_then(Value::as_str).is_some_and(|k| list.iter().any(|x| x == k)),
                None => true,
            })
            .cloned()
            .collect()
    };
    let (a, b) = (keep(a), keep(b));
    if a.len() != b.len() {
        return Err(Error::Config(format!("schema mismatch: {} rows vs {} rows", a.len(), b.len())));
    }
    let mut out = Vec::new();
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if x.get("record") != y.get("record") {
            return Err(mismatch(i, "record", "record types differ"));
        }
        walk(i, "", x, y, tol, &mut out)?;
    }
    Ok(out)
}
