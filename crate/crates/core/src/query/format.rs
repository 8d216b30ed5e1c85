use std::fmt::Write as _;
use std::str::FromStr;

use super::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Jsonl,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(Self::Table),
            "jsonl" | "json" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown output format `{other}` (expected table, jsonl or csv)")),
        }
    }
}

/// Name used for the single column of bare `VALUE` rows.
pub const VALUE_COLUMN: &str = "$value";

/// Union of row field names in first-appearance order.
pub fn columns(rows: &[Value]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for row in rows {
        match row {
            Value::Object(fields) => {
                for k in fields.keys() {
                    if !cols.contains(k) {
                        cols.push(k.clone());
                    }
                }
            }
            _ => {
                if !cols.iter().any(|c| c == VALUE_COLUMN) {
                    cols.push(VALUE_COLUMN.to_string());
                }
            }
        }
    }
    cols
}

fn cell(row: &Value, col: &str) -> String {
    let v = match row {
        Value::Object(fields) => fields.get(col),
        other if col == VALUE_COLUMN => Some(other),
        _ => None,
    };
    match v.and_then(Value::to_json) {
        None => String::new(),
        Some(serde_json::Value::String(s)) => s,
        Some(j) => j.to_string(),
    }
}

pub fn render(rows: &[Value], format: OutputFormat) -> String {
    match format {
        OutputFormat::Jsonl => {
            let mut out = String::new();
            for row in rows {
                if let Some(j) = row.to_json() {
                    let _ = writeln!(out, "{j}");
                }
            }
            out
        }
        OutputFormat::Csv => {
            let cols = columns(rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            let _ = w.write_record(&cols);
            for row in rows {
                let _ = w.write_record(cols.iter().map(|c| cell(row, c)));
            }
            String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
        }
        OutputFormat::Table => {
            let cols = columns(rows);
            let cells: Vec<Vec<String>> = rows.iter().map(|r| cols.iter().map(|c| cell(r, c).replace('\n', " ")).collect()).collect();
            let widths: Vec<usize> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| cells.iter().map(|r| r[i].chars().count()).chain([c.chars().count()]).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            let line = |out: &mut String, vals: &[String]| {
                let parts: Vec<String> = vals.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
                let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
            };
            line(&mut out, &cols);
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
            for r in &cells {
                line(&mut out, r);
            }
            let _ = writeln!(out, "({} row{})", rows.len(), if rows.len() == 1 { "" } else { "s" });
            out
        }
    }
}
