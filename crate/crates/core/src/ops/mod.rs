//! Compare, compose and migrate datasets.

mod diff;
mod merge;
mod migrate;

use thiserror::Error;

pub use diff::{diff, DiffReport, KeyRef, Modification};
pub use merge::{merge, Conflict, ConflictReport, MergeOutcome, PartValue};
pub use migrate::{
    derive_schema, encode_migration_grid, find_migration_grid, migrate, parse_migration_grid,
    MigrationError, MigrationOp, MigrationSpec,
};

use crate::dataset::{Instance, Value, METADATA_KEY};
use crate::schema::{ClassDef, Schema};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OpsError {
    #[error("datasets follow structurally different schemas")]
    SchemaMismatch,
    #[error("merge needs at least one dataset")]
    NoParts,
}

/// Pseudo-class under which document metadata differences are reported.
pub const METADATA_CLASS: &str = METADATA_KEY;

/// Identity of a top-level instance: its primary key, or its full content
/// for classes without one.
pub(crate) fn identity(class: &ClassDef, inst: &Instance) -> String {
    inst.key(class).unwrap_or_else(|| {
        let parts: Vec<String> = inst
            .slots
            .iter()
            .map(|(k, v)| format!("{k}={}", v.display().unwrap_or_default()))
            .collect();
        format!("{{{}}}", parts.join(", "))
    })
}

/// Every attribute value of `inst` in schema order, embedded instances
/// flattened to dotted paths. An absent embedded instance yields a single
/// null entry at the owner attribute.
pub(crate) fn leaves<'a>(
    schema: &Schema,
    class: &ClassDef,
    inst: &'a Instance,
) -> Vec<(String, &'a Value)> {
    static NULL: Value = Value::Null;
    let mut out = Vec::new();
    for attr in &class.attributes {
        let value = inst.slots.get(&attr.name).unwrap_or(&NULL);
        let target = attr
            .format
            .target_class
            .as_deref()
            .and_then(|t| schema.class(t));
        match (value, target) {
            (Value::Embedded(inner), Some(target)) if schema.is_embedding(attr) => {
                for (path, v) in leaves(schema, target, inner) {
                    out.push((format!("{}.{path}", attr.name), v));
                }
            }
            _ => out.push((attr.name.clone(), value)),
        }
    }
    out
}

/// Values under `path` for two instances of the same class, treating a
/// missing embedded instance as all-null.
pub(crate) fn aligned<'a>(
    schema: &Schema,
    class: &ClassDef,
    insts: &[&'a Instance],
) -> Vec<(String, Vec<&'a Value>)> {
    static NULL: Value = Value::Null;
    let mut paths: Vec<String> = Vec::new();
    let flattened: Vec<Vec<(String, &Value)>> =
        insts.iter().map(|i| leaves(schema, class, i)).collect();
    for list in &flattened {
        for (path, _) in list {
            if !paths.contains(path) {
                paths.push(path.clone());
            }
        }
    }
    // Keep schema order: owner attribute order first, then embedded order.
    let rank = |p: &String| {
        let head = p.split('.').next().unwrap_or_default();
        class
            .attributes
            .iter()
            .position(|a| a.name == head)
            .unwrap_or(usize::MAX)
    };
    paths.sort_by_key(rank);
    let mut out = Vec::new();
    for path in paths {
        let values: Vec<&Value> = flattened
            .iter()
            .map(|list| {
                list.iter()
                    .find(|(p, _)| *p == path)
                    .map(|(_, v)| *v)
                    .unwrap_or(&NULL)
            })
            .collect();
        // A path that exists only because one side lacks the embedded
        // instance is covered by the leaf paths of the other side.
        let is_prefix_of_other = path_has_children(&path, &out_paths(&flattened));
        if !is_prefix_of_other {
            out.push((path, values));
        }
    }
    out
}

fn out_paths(flattened: &[Vec<(String, &Value)>]) -> Vec<String> {
    flattened.iter().flatten().map(|(p, _)| p.clone()).collect()
}

fn path_has_children(path: &str, all: &[String]) -> bool {
    let prefix = format!("{path}.");
    all.iter().any(|p| p.starts_with(&prefix))
}
