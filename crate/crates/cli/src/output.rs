use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use serde_json::Value;

use crate::cli::{Common, Format};

/// What a subcommand produced: a JSON document and, for tabular results,
/// a CSV table with a leading seed column.
pub struct Rendered {
    pub json: Value,
    pub csv: Option<String>,
}

impl Rendered {
    pub fn doc(json: Value) -> Self {
        Self { json, csv: None }
    }

    pub fn table(json: Value, csv: String) -> Self {
        Self {
            json,
            csv: Some(csv),
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json)?;
                s.push('\n');
                s
            }
            Format::Csv => match &self.csv {
                Some(t) => t.clone(),
                None => {
                    let mut s = String::from("key,value\n");
                    for (k, v) in flatten(&self.json) {
                        let _ = writeln!(s, "{},{}", csv_field(&k), csv_field(&v));
                    }
                    s
                }
            },
            Format::Text => {
                let mut s = String::new();
                for (k, v) in flatten(&self.json) {
                    let _ = writeln!(s, "{k}: {v}");
                }
                s
            }
        })
    }
}

pub fn emit(common: &Common, rendered: &Rendered) -> Result<()> {
    let body = rendered.render(common.format)?;
    match &common.out {
        Some(path) => {
            fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// Dotted paths to every scalar. Arrays of scalars stay whole.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    walk(v, String::new(), &mut out);
    out
}

fn walk(v: &Value, prefix: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                walk(child, join(k), out);
            }
        }
        Value::Array(items) if items.iter().any(|c| c.is_object() || c.is_array()) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push((prefix, s.clone())),
        other => out.push((prefix, other.to_string())),
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Prepends a `seed` column to a CSV table.
pub fn with_seed_column(table: &str, seed: u64) -> String {
    let mut out = String::with_capacity(table.len() + 16 * table.lines().count());
    for (i, line) in table.lines().enumerate() {
        if i == 0 {
            let _ = writeln!(out, "seed,{line}");
        } else {
            let _ = writeln!(out, "{seed},{line}");
        }
    }
    out
}
