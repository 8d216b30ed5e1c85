use std::borrow::Cow;
use std::fmt::Write as _;

use indexmap::IndexMap;

/// Evaluation domain of the query dialect.
///
/// `Undefined` stands for "no value here" (a missing field, an index past
/// the end). It is produced during evaluation only and never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Undefined,
    Null,
    Bool(bool),
    Number(f64),
    String(String),
    Array(Vec<Value>),
    Object(IndexMap<String, Value>),
}

pub(crate) static UNDEFINED: Value = Value::Undefined;

/// One step of a path: `.field` / `["field"]` or `[index]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Field(String),
    Index(usize),
}

impl Value {
    pub fn is_undefined(&self) -> bool {
        matches!(self, Value::Undefined)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&IndexMap<String, Value>> {
        match self {
            Value::Object(o) => Some(o),
            _ => None,
        }
    }

    /// Object field or array element; `Undefined` for anything else.
    pub fn step(&self, step: &Step) -> &Value {
        match (self, step) {
            (Value::Object(fields), Step::Field(name)) => fields.get(name).unwrap_or(&UNDEFINED),
            (Value::Array(items), Step::Index(i)) => items.get(*i).unwrap_or(&UNDEFINED),
            _ => &UNDEFINED,
        }
    }

    /// Converts to JSON. `Undefined` (at top level) becomes `None`; inside
    /// arrays and objects undefined members are dropped.
    pub fn to_json(&self) -> Option<serde_json::Value> {
        use serde_json::Value as J;
        Some(match self {
            Value::Undefined => return None,
            Value::Null => J::Null,
            Value::Bool(b) => J::Bool(*b),
            Value::Number(n) => {
                if n.fract() == 0.0 && n.abs() < 9.007_199_254_740_992e15 {
                    J::from(*n as i64)
                } else {
                    serde_json::Number::from_f64(*n).map(J::Number).unwrap_or(J::Null)
                }
            }
            Value::String(s) => J::String(s.clone()),
            Value::Array(items) => J::Array(items.iter().filter_map(Value::to_json).collect()),
            Value::Object(fields) => J::Object(fields.iter().filter_map(|(k, v)| v.to_json().map(|j| (k.clone(), j))).collect()),
        })
    }

    /// A string that is equal for two values iff they are deeply equal
    /// (object field order ignored).
    pub fn canonical_key(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Value::Undefined => out.push('u'),
            Value::Null => out.push('n'),
            Value::Bool(b) => out.push(if *b { 't' } else { 'f' }),
            Value::Number(n) => {
                let n = if *n == 0.0 { 0.0 } else { *n };
                let _ = write!(out, "d{:x};", n.to_bits());
            }
            Value::String(s) => {
                let _ = write!(out, "s{}:{s}", s.len());
            }
            Value::Array(items) => {
                out.push('[');
                for item in items {
                    item.write_canonical(out);
                    out.push(',');
                }
                out.push(']');
            }
            Value::Object(fields) => {
                let mut keys: Vec<&String> = fields.keys().collect();
                keys.sort();
                out.push('{');
                for k in keys {
                    let _ = write!(out, "{}:{k}=", k.len());
                    fields[k].write_canonical(out);
                    out.push(',');
                }
                out.push('}');
            }
        }
    }
}

impl From<&serde_json::Value> for Value {
    fn from(v: &serde_json::Value) -> Self {
        use serde_json::Value as J;
        match v {
            J::Null => Value::Null,
            J::Bool(b) => Value::Bool(*b),
            J::Number(n) => Value::Number(n.as_f64().unwrap_or(f64::NAN)),
            J::String(s) => Value::String(s.clone()),
            J::Array(items) => Value::Array(items.iter().map(Value::from).collect()),
            J::Object(fields) => Value::Object(fields.iter().map(|(k, v)| (k.clone(), Value::from(v))).collect()),
        }
    }
}

impl From<serde_json::Value> for Value {
    fn from(v: serde_json::Value) -> Self {
        Value::from(&v)
    }
}

/// Field-by-field descent; a missing field or a non-object step yields
/// `Undefined`.
pub fn resolve_path<'a>(value: &'a Value, steps: &[Step]) -> &'a Value {
    steps.iter().fold(value, |v, s| v.step(s))
}

pub(crate) fn resolve_cow<'a>(value: Cow<'a, Value>, steps: &[Step]) -> Cow<'a, Value> {
    match value {
        Cow::Borrowed(v) => Cow::Borrowed(resolve_path(v, steps)),
        Cow::Owned(v) => Cow::Owned(resolve_path(&v, steps).clone()),
    }
}
