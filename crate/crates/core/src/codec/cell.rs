//! Single-cell text to typed values and back.

use std::fmt;

use chrono::NaiveDate;

use crate::dataset::Value;
use crate::format::parse_chemical_equation;
use crate::schema::{AttributeFormat, AttributeKind};
use crate::validation::Code;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellError {
    /// `BAD_TYPE` when the text is not of the attribute's kind, `BAD_VALUE`
    /// when it is but falls outside the allowed range.
    pub code: Code,
    pub message: String,
}

impl CellError {
    fn bad_type(message: impl Into<String>) -> Self {
        CellError {
            code: Code::BadType,
            message: message.into(),
        }
    }

    fn bad_value(message: impl Into<String>) -> Self {
        CellError {
            code: Code::BadValue,
            message: message.into(),
        }
    }
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CellError {}

/// Base-10 integer with optional `,` grouping in threes.
fn parse_integer(text: &str) -> Result<i64, CellError> {
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", text.strip_prefix('+').unwrap_or(text)),
    };
    let not_integer = || CellError::bad_type(format!("{text:?} is not an integer"));
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit() || c == ',') {
        return Err(not_integer());
    }
    if digits.contains(',') {
        let groups: Vec<&str> = digits.split(',').collect();
        let first_ok = (1..=3).contains(&groups[0].len());
        let rest_ok = groups[1..].iter().all(|g| g.len() == 3);
        if !first_ok || !rest_ok {
            return Err(CellError::bad_type(format!(
                "{text:?} has malformed digit grouping"
            )));
        }
    }
    format!("{sign}{}", digits.replace(',', ""))
        .parse()
        .map_err(|_| CellError::bad_type(format!("{text:?} is out of integer range")))
}

/// Parses raw cell text. Empty or blank text is null; relation cells keep
/// the key text for later resolution.
pub fn parse_cell(format: &AttributeFormat, text: &str) -> Result<Value, CellError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Value::Null);
    }
    let value = match format.kind {
        AttributeKind::String => Value::String(text.to_string()),
        AttributeKind::Integer => Value::Integer(parse_integer(trimmed)?),
        AttributeKind::PositiveInteger => {
            let n = parse_integer(trimmed)?;
            if n < 1 {
                return Err(CellError::bad_value(format!(
                    "{n} is not a positive integer"
                )));
            }
            Value::Integer(n)
        }
        AttributeKind::Float => {
            let f: f64 = trimmed
                .parse()
                .map_err(|_| CellError::bad_type(format!("{trimmed:?} is not a number")))?;
            if !f.is_finite() {
                return Err(CellError::bad_value(format!("{trimmed:?} is not finite")));
            }
            Value::Float(f)
        }
        AttributeKind::Boolean => match trimmed.to_ascii_lowercase().as_str() {
            "true" => Value::Boolean(true),
            "false" => Value::Boolean(false),
            _ => {
                return Err(CellError::bad_type(format!(
                    "{trimmed:?} is not True or False"
                )))
            }
        },
        AttributeKind::Date => {
            Value::Date(NaiveDate::parse_from_str(trimmed, "%Y-%m-%d").map_err(|_| {
                CellError::bad_type(format!("{trimmed:?} is not a YYYY-MM-DD date"))
            })?)
        }
        AttributeKind::Url => {
            url::Url::parse(trimmed).map_err(|e| {
                CellError::bad_type(format!("{trimmed:?} is not an absolute URL: {e}"))
            })?;
            Value::Url(trimmed.to_string())
        }
        AttributeKind::Enum => {
            if !format.enum_values.iter().any(|v| v == trimmed) {
                return Err(CellError::bad_value(format!(
                    "{trimmed:?} is not one of {}",
                    format.enum_values.join(", ")
                )));
            }
            Value::Enum(trimmed.to_string())
        }
        AttributeKind::ChemicalEquation => Value::Equation(
            parse_chemical_equation(trimmed)
                .map_err(|e| CellError::bad_type(format!("{trimmed:?} is not an equation: {e}")))?,
        ),
        AttributeKind::ManyToOne | AttributeKind::OneToOne => Value::Ref(trimmed.to_string()),
        AttributeKind::OneToMany | AttributeKind::ManyToMany => Value::RefList(
            trimmed
                .split(',')
                .map(str::trim)
                .filter(|k| !k.is_empty())
                .map(str::to_string)
                .collect(),
        ),
    };
    Ok(value)
}

/// Canonical cell text; inverse of [`parse_cell`].
pub fn format_cell(value: &Value) -> String {
    value.to_cell_string()
}
