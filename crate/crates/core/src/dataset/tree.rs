//! JSON/YAML document trees for datasets.
//!
//! Shape: a `_documentMetadata` map, then one key per class holding a list
//! of records. Records carry non-null slots by attribute name; embedded
//! instances nest as maps; relations to sheet-bearing classes appear as the
//! target's primary-key text. Reverse relations are derivable and omitted.

use std::sync::Arc;

use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use super::{Dataset, Instance, Value};
use crate::codec::parse_cell;
use crate::schema::{AttributeKind, ClassDef, Schema};

pub const METADATA_KEY: &str = "_documentMetadata";

#[derive(Debug, Error, PartialEq)]
pub enum SerializeError {
    #[error("{class}.{attribute} refers to missing {target} {key:?}")]
    UnresolvedReference {
        class: String,
        attribute: String,
        target: String,
        key: String,
    },
    #[error("{class}.{attribute} holds a non-finite number")]
    NonFinite { class: String, attribute: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum ImportError {
    #[error("document is not valid {format}: {message}")]
    Syntax {
        format: &'static str,
        message: String,
    },
    #[error("{path}: {message}")]
    Shape { path: String, message: String },
}

fn shape(path: &str, message: impl Into<String>) -> ImportError {
    ImportError::Shape {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn to_document_tree(dataset: &Dataset) -> Result<Json, SerializeError> {
    let dataset = dataset.normalize();
    let schema = dataset.schema();
    let mut root = Map::new();
    let metadata: Map<String, Json> = dataset
        .document_metadata
        .iter()
        .map(|(k, v)| (k.clone(), Json::String(v.clone())))
        .collect();
    root.insert(METADATA_KEY.to_string(), Json::Object(metadata));

    let keys = dataset.key_index();
    for (class_name, instances) in dataset.classes() {
        let Some(class) = schema.class(class_name) else {
            continue;
        };
        let mut records = Vec::with_capacity(instances.len());
        for inst in instances {
            records.push(Json::Object(record(schema, class, inst, &keys)?));
        }
        root.insert(class_name.to_string(), Json::Array(records));
    }
    Ok(Json::Object(root))
}

fn record(
    schema: &Schema,
    class: &ClassDef,
    inst: &Instance,
    keys: &std::collections::HashMap<(&str, String), usize>,
) -> Result<Map<String, Json>, SerializeError> {
    let mut out = Map::new();
    for attr in &class.attributes {
        let value = inst.get(&attr.name);
        let check = |key: &str| -> Result<(), SerializeError> {
            let target = attr.format.target_class.as_deref().unwrap_or_default();
            if keys.contains_key(&(target, key.to_string())) {
                Ok(())
            } else {
                Err(SerializeError::UnresolvedReference {
                    class: class.name.clone(),
                    attribute: attr.name.clone(),
                    target: target.to_string(),
                    key: key.to_string(),
                })
            }
        };
        let json = match value {
            Value::Null => continue,
            Value::String(s) | Value::Url(s) | Value::Enum(s) => Json::String(s.clone()),
            Value::Integer(i) => Json::Number(Number::from(*i)),
            Value::Float(f) => {
                Json::Number(
                    Number::from_f64(*f).ok_or_else(|| SerializeError::NonFinite {
                        class: class.name.clone(),
                        attribute: attr.name.clone(),
                    })?,
                )
            }
            Value::Boolean(b) => Json::Bool(*b),
            Value::Date(_) | Value::Equation(_) => Json::String(value.to_cell_string()),
            Value::Ref(key) => {
                check(key)?;
                Json::String(key.clone())
            }
            Value::RefList(list) => {
                for key in list {
                    check(key)?;
                }
                Json::Array(list.iter().cloned().map(Json::String).collect())
            }
            Value::Embedded(inner) => {
                let Some(inner_class) = schema.class(&inner.class_name) else {
                    continue;
                };
                Json::Object(record(schema, inner_class, inner, keys)?)
            }
        };
        out.insert(attr.name.clone(), json);
    }
    Ok(out)
}

/// Rebuilds a dataset from a document tree produced by [`to_document_tree`].
pub fn from_document_tree(tree: &Json, schema: Arc<Schema>) -> Result<Dataset, ImportError> {
    let root = tree
        .as_object()
        .ok_or_else(|| shape("$", "expected a map at the top level"))?;
    let mut dataset = Dataset::new(Arc::clone(&schema));
    for (key, value) in root {
        if key == METADATA_KEY {
            let map = value
                .as_object()
                .ok_or_else(|| shape(METADATA_KEY, "expected a map of strings"))?;
            for (k, v) in map {
                let text = v
                    .as_str()
                    .ok_or_else(|| shape(&format!("{METADATA_KEY}.{k}"), "expected a string"))?;
                dataset
                    .document_metadata
                    .insert(k.clone(), text.to_string());
            }
            continue;
        }
        let class = schema
            .class(key)
            .filter(|c| c.layout.has_sheet())
            .ok_or_else(|| shape(key, "not a sheet-bearing class of the schema"))?;
        let list = value
            .as_array()
            .ok_or_else(|| shape(key, "expected a list of records"))?;
        for (i, item) in list.iter().enumerate() {
            let path = format!("{key}[{i}]");
            dataset.push(import_record(&schema, class, item, &path)?);
        }
    }
    Ok(dataset)
}

fn import_record(
    schema: &Schema,
    class: &ClassDef,
    item: &Json,
    path: &str,
) -> Result<Instance, ImportError> {
    let map = item
        .as_object()
        .ok_or_else(|| shape(path, "expected a record map"))?;
    let mut inst = Instance::new(class);
    for (name, json) in map {
        let path = format!("{path}.{name}");
        let attr = class
            .attribute(name)
            .ok_or_else(|| shape(&path, format!("{} has no attribute {name:?}", class.name)))?;
        let kind = attr.format.kind;
        let value = match json {
            Json::Null => Value::Null,
            Json::Object(_) if schema.is_embedding(attr) => {
                let target = attr
                    .format
                    .target_class
                    .as_deref()
                    .and_then(|t| schema.class(t))
                    .ok_or_else(|| shape(&path, "embedded class missing from schema"))?;
                Value::Embedded(Box::new(import_record(schema, target, json, &path)?))
            }
            Json::Number(n) if kind.is_integer() => Value::Integer(
                n.as_i64()
                    .ok_or_else(|| shape(&path, "expected an integer"))?,
            ),
            Json::Number(n) if kind == AttributeKind::Float => Value::Float(
                n.as_f64()
                    .ok_or_else(|| shape(&path, "expected a number"))?,
            ),
            Json::Bool(b) if kind == AttributeKind::Boolean => Value::Boolean(*b),
            Json::Array(items)
                if matches!(kind, AttributeKind::OneToMany | AttributeKind::ManyToMany) =>
            {
                let keys = items
                    .iter()
                    .map(|k| k.as_str().map(str::to_string))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| shape(&path, "expected a list of key strings"))?;
                Value::RefList(keys)
            }
            Json::String(s)
                if !kind.is_integer()
                    && kind != AttributeKind::Float
                    && !schema.is_embedding(attr) =>
            {
                if kind == AttributeKind::String {
                    Value::String(s.clone())
                } else if kind.is_single_valued_relation() {
                    Value::Ref(s.clone())
                } else {
                    parse_cell(&attr.format, s).map_err(|e| shape(&path, e.message))?
                }
            }
            other => {
                return Err(shape(
                    &path,
                    format!(
                        "{} value {} does not fit a {} attribute",
                        json_kind(other),
                        other,
                        kind
                    ),
                ))
            }
        };
        inst.set(name, value);
    }
    Ok(inst)
}

fn json_kind(json: &Json) -> &'static str {
    match json {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "list",
        Json::Object(_) => "map",
    }
}

/// UTF-8 JSON with 2-space indentation and a trailing newline.
pub fn render_json(tree: &Json) -> String {
    let mut text = serde_json::to_string_pretty(tree).unwrap_or_default();
    text.push('\n');
    text
}

pub fn render_yaml(tree: &Json) -> String {
    serde_yaml::to_string(tree).unwrap_or_default()
}

pub fn parse_json(text: &str) -> Result<Json, ImportError> {
    serde_json::from_str(text).map_err(|e| ImportError::Syntax {
        format: "JSON",
        message: e.to_string(),
    })
}

pub fn parse_yaml(text: &str) -> Result<Json, ImportError> {
    serde_yaml::from_str(text).map_err(|e| ImportError::Syntax {
        format: "YAML",
        message: e.to_string(),
    })
}
