use chrono::NaiveDate;

use super::Instance;
use crate::format::ChemicalEquation;

/// A slot value. Integer and PositiveInteger attributes both hold
/// [`Value::Integer`]; relations hold primary-key text.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    String(String),
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Date(NaiveDate),
    Url(String),
    Enum(String),
    Equation(ChemicalEquation),
    Ref(String),
    RefList(Vec<String>),
    Embedded(Box<Instance>),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::String(_) => "string",
            Value::Integer(_) => "integer",
            Value::Float(_) => "float",
            Value::Boolean(_) => "boolean",
            Value::Date(_) => "date",
            Value::Url(_) => "url",
            Value::Enum(_) => "enum",
            Value::Equation(_) => "equation",
            Value::Ref(_) => "reference",
            Value::RefList(_) => "reference list",
            Value::Embedded(_) => "embedded instance",
        }
    }

    /// Canonical cell text. Integers are ungrouped; embedded instances and
    /// nulls render empty because they have no single-cell form.
    pub fn to_cell_string(&self) -> String {
        match self {
            Value::Null | Value::Embedded(_) => String::new(),
            Value::String(s) | Value::Url(s) | Value::Enum(s) | Value::Ref(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Float(f) => format!("{f}"),
            Value::Boolean(b) => if *b { "True" } else { "False" }.to_string(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::Equation(e) => e.to_string(),
            Value::RefList(keys) => keys.join(", "),
        }
    }

    /// Text used in diff and conflict reports; `None` for null.
    pub fn display(&self) -> Option<String> {
        match self {
            Value::Null => None,
            Value::Embedded(inner) => {
                let parts: Vec<String> = inner
                    .slots
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.display().unwrap_or_default()))
                    .collect();
                Some(format!("{{{}}}", parts.join(", ")))
            }
            other => Some(other.to_cell_string()),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<Instance> for Value {
    fn from(i: Instance) -> Self {
        Value::Embedded(Box::new(i))
    }
}
