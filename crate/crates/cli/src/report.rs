//! JSON report envelope. Arrays of homogeneous records are stored as one
//! array per field, so every numeric array in a report is flat.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA: &str = "maxmin-report/1";

/// Keys holding elapsed seconds; the only fields that vary between runs.
pub const TIMING_KEYS: &[&str] = &["wall_time", "t_eval", "t_md"];

/// Rewrites arrays of objects with identical keys into objects of arrays,
/// recursively.
pub fn columnar(v: Value) -> Value {
    match v {
        Value::Array(items) => {
            let items: Vec<Value> = items.into_iter().map(columnar).collect();
            let keys: Option<Vec<String>> = match items.first() {
                Some(Value::Object(m)) => Some(m.keys().cloned().collect()),
                _ => None,
            };
            let uniform = keys.as_ref().is_some_and(|k| {
                items.iter().all(|it| match it {
                    Value::Object(m) => m.len() == k.len() && k.iter().all(|key| m.contains_key(key)),
                    _ => false,
                })
            });
            if !uniform {
                return Value::Array(items);
            }
            let keys = keys.expect("checked above");
            let mut cols: Map<String, Value> = keys.iter().map(|k| (k.clone(), Value::Array(Vec::new()))).collect();
            for it in items {
                if let Value::Object(m) = it {
                    for (k, val) in m {
                        if let Some(Value::Array(col)) = cols.get_mut(&k) {
                            col.push(val);
                        }
                    }
                }
            }
            Value::Object(cols)
        }
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, columnar(v))).collect()),
        other => other,
    }
}

/// Removes every timing key, recursively.
pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for k in TIMING_KEYS {
                m.remove(*k);
            }
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub seed: u64,
}

pub fn envelope(config: &RunConfig, body: Map<String, Value>, failure: Option<Failure>) -> Result<Value, CliError> {
    let mut m = Map::new();
    m.insert("schema".into(), Value::from(SCHEMA));
    m.insert("status".into(), Value::from(if failure.is_some() { "failed" } else { "ok" }));
    m.insert("config".into(), serde_json::to_value(config)?);
    for (k, v) in body {
        m.insert(k, columnar(v));
    }
    m.insert("failure".into(), serde_json::to_value(failure)?);
    Ok(Value::Object(m))
}

pub fn write(path: &Path, report: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn records_become_columns() {
        let v = columnar(json!({"it": [{"a": 1, "b": 2.5}, {"a": 3, "b": 4.5}], "x": [1, 2]}));
        assert_eq!(v, json!({"it": {"a": [1, 3], "b": [2.5, 4.5]}, "x": [1, 2]}));
    }

    #[test]
    fn mixed_records_stay_rows() {
        let v = json!([{"a": 1}, {"b": 2}]);
        assert_eq!(columnar(v.clone()), v);
    }

    #[test]
    fn timing_is_stripped_everywhere() {
        let mut v = json!({"wall_time": 1.0, "r": {"t_eval": 2.0, "k": [{"t_md": 3.0, "z": 0}]}});
        strip_timing(&mut v);
        assert_eq!(v, json!({"r": {"k": [{"z": 0}]}}));
    }
}
