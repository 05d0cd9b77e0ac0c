//! JSON and CSV emission. Every real is rounded to 12 significant digits so
//! reports are stable across platforms.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::Failure;

pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Rounds every float in a JSON tree; integers are left alone.
pub fn rounded(value: Value) -> Value {
    match value {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            let x = round12(n.as_f64().expect("finite number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) if items.iter().any(|v| v.is_object() || v.is_array()) => {
            items.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out))
        }
        Value::Array(items) => out.push((prefix.to_string(), items.iter().map(scalar).collect::<Vec<_>>().join(";"))),
        v => out.push((prefix.to_string(), scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub enum Format {
    Json,
    Csv,
}

pub struct Sink {
    writer: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, Failure> {
        let writer: Box<dyn Write> = match path {
            Some(p) => Box::new(
                File::create(p).map_err(|e| Failure::config(format!("cannot create {}: {e}", p.display())))?,
            ),
            None => Box::new(io::stdout()),
        };
        Ok(Self { writer })
    }

    pub fn json(&mut self, value: Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(&rounded(value)).expect("values serialize");
        writeln!(self.writer, "{text}").map_err(Failure::io)
    }

    /// One row per record; columns are the given header in order.
    pub fn table(&mut self, header: &[&str], rows: &[Map<String, Value>]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(&mut self.writer);
        w.write_record(header).map_err(Failure::csv)?;
        for row in rows {
            let record: Vec<String> = header
                .iter()
                .map(|h| scalar(&rounded(row.get(*h).cloned().unwrap_or(Value::Null))))
                .collect();
            w.write_record(&record).map_err(Failure::csv)?;
        }
        w.flush().map_err(Failure::io)
    }

    /// A nested report as `key,value` rows with dotted keys.
    pub fn key_values(&mut self, value: Value) -> Result<(), Failure> {
        let mut pairs = Vec::new();
        flatten("", &rounded(value), &mut pairs);
        let mut w = csv::Writer::from_writer(&mut self.writer);
        w.write_record(["key", "value"]).map_err(Failure::csv)?;
        for (k, v) in pairs {
            w.write_record([k, v]).map_err(Failure::csv)?;
        }
        w.flush().map_err(Failure::io)
    }

    pub fn report(&mut self, format: &Format, value: Value) -> Result<(), Failure> {
        match format {
            Format::Json => self.json(value),
            Format::Csv => self.key_values(value),
        }
    }
}
