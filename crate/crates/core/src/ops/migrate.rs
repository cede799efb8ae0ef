//! Schema migration: an ordered list of rename/add/remove operations
//! applied to a schema and to every instance that follows it.

use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::codec::{parse_cell, parse_declaration, Declaration, SheetType};
use crate::dataset::{Dataset, Instance, Value, SCHEMA_VERSION_KEY};
use crate::format::parse_attribute_format;
use crate::grid::{Grid, RawWorkbook};
use crate::schema::{
    is_identifier, validate_schema, AttributeDef, AttributeFormat, Schema, SchemaError,
};

pub const MIGRATION_SHEET: &str = "!!_Migration";
const FROM_VERSION: &str = "fromVersion";
const TO_VERSION: &str = "toVersion";
const HEADINGS: [&str; 6] = [
    "!Operation",
    "!Class",
    "!Attribute",
    "!New name",
    "!Format",
    "!Default",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MigrationOp {
    RenameClass {
        from: String,
        to: String,
    },
    RenameAttribute {
        class: String,
        from: String,
        to: String,
    },
    /// `default` is cell text, parsed against `format`.
    AddAttribute {
        class: String,
        name: String,
        format: AttributeFormat,
        default: Option<String>,
    },
    RemoveAttribute {
        class: String,
        name: String,
    },
}

impl MigrationOp {
    pub fn name(&self) -> &'static str {
        match self {
            MigrationOp::RenameClass { .. } => "rename_class",
            MigrationOp::RenameAttribute { .. } => "rename_attribute",
            MigrationOp::AddAttribute { .. } => "add_attribute",
            MigrationOp::RemoveAttribute { .. } => "remove_attribute",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationSpec {
    pub from_version: Option<String>,
    pub to_version: Option<String>,
    pub operations: Vec<MigrationOp>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MigrationError {
    #[error("operation {step} ({op}): class {class:?} does not exist")]
    MissingClass {
        step: usize,
        op: &'static str,
        class: String,
    },
    #[error("operation {step} ({op}): {class}.{attribute} does not exist")]
    MissingAttribute {
        step: usize,
        op: &'static str,
        class: String,
        attribute: String,
    },
    #[error("operation {step} ({op}): name {name:?} is already taken")]
    NameTaken {
        step: usize,
        op: &'static str,
        name: String,
    },
    #[error("operation {step} ({op}): {name:?} is not an identifier")]
    InvalidName {
        step: usize,
        op: &'static str,
        name: String,
    },
    #[error("operation {step} (remove_attribute): {class}.{attribute} is the primary key of a referenced class")]
    KeylessTarget {
        step: usize,
        class: String,
        attribute: String,
    },
    #[error(
        "operation {step} (add_attribute): default {default:?} for {class}.{attribute}: {message}"
    )]
    BadDefault {
        step: usize,
        class: String,
        attribute: String,
        default: String,
        message: String,
    },
    #[error("the migrated schema is incoherent: {}", join(.0))]
    InvalidSchema(Vec<SchemaError>),
    #[error("dataset is at schema version {found:?}, migration expects {expected:?}")]
    VersionMismatch { expected: String, found: String },
    #[error("migration worksheet {worksheet:?} row {row}: {message}")]
    Sheet {
        worksheet: String,
        row: usize,
        message: String,
    },
    #[error("migration worksheet {worksheet:?} row {row}: {operation:?} is not supported (supported: rename_class, rename_attribute, add_attribute, remove_attribute); relation retargeting in particular has no migration operation")]
    Unsupported {
        worksheet: String,
        row: usize,
        operation: String,
    },
}

fn join(errors: &[SchemaError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Applies the schema side of `spec` to `from`, checking each operation.
pub fn derive_schema(spec: &MigrationSpec, from: &Schema) -> Result<Schema, MigrationError> {
    let mut schema = from.clone();
    for (i, op) in spec.operations.iter().enumerate() {
        apply_to_schema(&mut schema, i + 1, op)?;
    }
    let errors = validate_schema(&schema);
    if !errors.is_empty() {
        return Err(MigrationError::InvalidSchema(errors));
    }
    if let Some(version) = &spec.to_version {
        schema
            .document_metadata
            .insert(SCHEMA_VERSION_KEY.to_string(), version.clone());
    }
    Ok(schema)
}

fn apply_to_schema(
    schema: &mut Schema,
    step: usize,
    op: &MigrationOp,
) -> Result<(), MigrationError> {
    let name = op.name();
    let missing_class = |class: &str| MigrationError::MissingClass {
        step,
        op: name,
        class: class.to_string(),
    };
    let check_new = |new: &str, taken: bool| {
        if !is_identifier(new) {
            Err(MigrationError::InvalidName {
                step,
                op: name,
                name: new.to_string(),
            })
        } else if taken {
            Err(MigrationError::NameTaken {
                step,
                op: name,
                name: new.to_string(),
            })
        } else {
            Ok(())
        }
    };
    match op {
        MigrationOp::RenameClass { from, to } => {
            schema.class(from).ok_or_else(|| missing_class(from))?;
            check_new(to, schema.class(to).is_some())?;
            for class in &mut schema.classes {
                if class.name == *from {
                    class.name = to.clone();
                }
                for attr in &mut class.attributes {
                    if attr.parent_class == *from {
                        attr.parent_class = to.clone();
                    }
                    if attr.format.target_class.as_deref() == Some(from) {
                        attr.format.target_class = Some(to.clone());
                    }
                }
            }
        }
        MigrationOp::RenameAttribute { class, from, to } => {
            let def = schema
                .class_mut(class)
                .ok_or_else(|| missing_class(class))?;
            let taken = def.attribute(to).is_some();
            let attr = def
                .attributes
                .iter_mut()
                .find(|a| a.name == *from)
                .ok_or_else(|| MigrationError::MissingAttribute {
                    step,
                    op: name,
                    class: class.clone(),
                    attribute: from.clone(),
                })?;
            check_new(to, taken)?;
            attr.name = to.clone();
        }
        MigrationOp::AddAttribute {
            class,
            name: attr_name,
            format,
            default,
        } => {
            let def = schema.class(class).ok_or_else(|| missing_class(class))?;
            check_new(attr_name, def.attribute(attr_name).is_some())?;
            if let Some(text) = default {
                let bad = |message: String| MigrationError::BadDefault {
                    step,
                    class: class.clone(),
                    attribute: attr_name.clone(),
                    default: text.clone(),
                    message,
                };
                let probe = AttributeDef::new(class, attr_name, attr_name, format.clone());
                if schema.is_embedding(&probe) {
                    return Err(bad("embedded attributes cannot take a default".into()));
                }
                parse_cell(format, text).map_err(|e| bad(e.message))?;
            }
            let attr = AttributeDef::new(class, attr_name, attr_name, format.clone());
            schema
                .class_mut(class)
                .ok_or_else(|| missing_class(class))?
                .attributes
                .push(attr);
        }
        MigrationOp::RemoveAttribute {
            class,
            name: attr_name,
        } => {
            let def = schema.class(class).ok_or_else(|| missing_class(class))?;
            let attr =
                def.attribute(attr_name)
                    .ok_or_else(|| MigrationError::MissingAttribute {
                        step,
                        op: name,
                        class: class.clone(),
                        attribute: attr_name.clone(),
                    })?;
            let referenced = schema
                .relations_into(class)
                .any(|a| !schema.is_embedding(a));
            if attr.format.primary && referenced {
                return Err(MigrationError::KeylessTarget {
                    step,
                    class: class.clone(),
                    attribute: attr_name.clone(),
                });
            }
            let def = schema
                .class_mut(class)
                .ok_or_else(|| missing_class(class))?;
            def.attributes.retain(|a| a.name != *attr_name);
        }
    }
    Ok(())
}

fn rename_slot(slots: &mut IndexMap<String, Value>, from: &str, to: &str) {
    if let Some(index) = slots.get_index_of(from) {
        let value = slots.shift_remove(from).unwrap_or(Value::Null);
        slots.shift_insert(index, to.to_string(), value);
    }
}

fn apply_to_instance(inst: &mut Instance, op: &MigrationOp, default: &Value) {
    for value in inst.slots.values_mut() {
        if let Value::Embedded(inner) = value {
            apply_to_instance(inner, op, default);
        }
    }
    match op {
        MigrationOp::RenameClass { from, to } => {
            if inst.class_name == *from {
                inst.class_name = to.clone();
            }
        }
        MigrationOp::RenameAttribute { class, from, to } if inst.class_name == *class => {
            rename_slot(&mut inst.slots, from, to);
            if let Some(p) = inst.provenance.as_mut() {
                if let Some(cell) = p.cells.remove(from) {
                    p.cells.insert(to.clone(), cell);
                }
            }
        }
        MigrationOp::AddAttribute { class, name, .. } if inst.class_name == *class => {
            inst.slots.insert(name.clone(), default.clone());
        }
        MigrationOp::RemoveAttribute { class, name } if inst.class_name == *class => {
            inst.slots.shift_remove(name);
        }
        _ => {}
    }
}

/// Rewrites `dataset` from `from_schema` to the schema `spec` derives.
/// Returns the migrated dataset and that schema.
pub fn migrate(
    dataset: &Dataset,
    spec: &MigrationSpec,
    from_schema: &Schema,
) -> Result<(Dataset, Schema), MigrationError> {
    if let (Some(expected), Some(found)) = (
        &spec.from_version,
        dataset.document_metadata.get(SCHEMA_VERSION_KEY),
    ) {
        if expected != found {
            return Err(MigrationError::VersionMismatch {
                expected: expected.clone(),
                found: found.clone(),
            });
        }
    }
    let to_schema = derive_schema(spec, from_schema)?;

    let mut lists: IndexMap<String, Vec<Instance>> = dataset
        .classes()
        .map(|(class, list)| (class.to_string(), list.to_vec()))
        .collect();
    for op in &spec.operations {
        let default = match op {
            MigrationOp::AddAttribute {
                format,
                default: Some(text),
                ..
            } => parse_cell(format, text).unwrap_or(Value::Null),
            _ => Value::Null,
        };
        for list in lists.values_mut() {
            for inst in list.iter_mut() {
                apply_to_instance(inst, op, &default);
            }
        }
        if let MigrationOp::RenameClass { from, to } = op {
            if let Some(index) = lists.get_index_of(from) {
                let list = lists.shift_remove(from).unwrap_or_default();
                lists.shift_insert(index, to.clone(), list);
            }
        }
    }

    let mut out = Dataset::new(Arc::new(to_schema.clone()));
    out.document_metadata = dataset.document_metadata.clone();
    if let Some(version) = &spec.to_version {
        out.document_metadata
            .insert(SCHEMA_VERSION_KEY.to_string(), version.clone());
    }
    for inst in lists.into_values().flatten() {
        out.push(inst);
    }
    Ok((out, to_schema))
}

/// The first grid declared `type='Migration'`.
pub fn find_migration_grid(workbook: &RawWorkbook) -> Option<&Grid> {
    workbook.grids.iter().find(|g| {
        (0..2).any(|r| {
            g.get(r, 0)
                .filter(|t| t.starts_with("!!") && !t.starts_with("!!!"))
                .and_then(|t| parse_declaration(t).ok())
                .is_some_and(|d| d.sheet_type() == Some(SheetType::Migration))
        })
    })
}

pub fn parse_migration_grid(grid: &Grid) -> Result<MigrationSpec, MigrationError> {
    let sheet_error = |row: usize, message: String| MigrationError::Sheet {
        worksheet: grid.name.clone(),
        row: row + 1,
        message,
    };
    let decl_row = usize::from(grid.get(0, 0).is_some_and(|t| t.starts_with("!!!")));
    let declaration = grid
        .get(decl_row, 0)
        .ok_or_else(|| sheet_error(decl_row, "missing declaration".into()))
        .and_then(|t| parse_declaration(t).map_err(|e| sheet_error(decl_row, e.to_string())))?;
    if declaration.sheet_type() != Some(SheetType::Migration) {
        return Err(sheet_error(
            decl_row,
            "worksheet is not declared type='Migration'".into(),
        ));
    }
    let mut spec = MigrationSpec {
        from_version: declaration.get(FROM_VERSION).map(str::to_string),
        to_version: declaration.get(TO_VERSION).map(str::to_string),
        operations: Vec::new(),
    };
    let heading_row = decl_row + 1;
    let mut columns = std::collections::HashMap::new();
    for col in 0..grid.width() {
        if let Some(h) = grid.get(heading_row, col) {
            match HEADINGS.iter().find(|k| **k == h.trim()) {
                Some(k) => {
                    columns.insert(*k, col);
                }
                None => return Err(sheet_error(heading_row, format!("unknown heading {h:?}"))),
            }
        }
    }
    if heading_row < grid.height() && !columns.contains_key("!Operation") {
        return Err(sheet_error(heading_row, "missing !Operation column".into()));
    }
    for row in heading_row + 1..grid.height() {
        let cell = |h: &str| {
            columns
                .get(h)
                .and_then(|&c| grid.get(row, c))
                .map(|s| s.trim().to_string())
        };
        let Some(operation) = cell("!Operation") else {
            if grid.rows()[row].iter().any(Option::is_some) {
                return Err(sheet_error(row, "row has no !Operation".into()));
            }
            continue;
        };
        let need =
            |h: &str| cell(h).ok_or_else(|| sheet_error(row, format!("{operation} needs {h}")));
        let op = match operation.as_str() {
            "rename_class" => MigrationOp::RenameClass {
                from: need("!Class")?,
                to: need("!New name")?,
            },
            "rename_attribute" => MigrationOp::RenameAttribute {
                class: need("!Class")?,
                from: need("!Attribute")?,
                to: need("!New name")?,
            },
            "add_attribute" => MigrationOp::AddAttribute {
                class: need("!Class")?,
                name: need("!Attribute")?,
                format: parse_attribute_format(&need("!Format")?)
                    .map_err(|e| sheet_error(row, e.to_string()))?,
                default: cell("!Default"),
            },
            "remove_attribute" => MigrationOp::RemoveAttribute {
                class: need("!Class")?,
                name: need("!Attribute")?,
            },
            other => {
                return Err(MigrationError::Unsupported {
                    worksheet: grid.name.clone(),
                    row: row + 1,
                    operation: other.to_string(),
                })
            }
        };
        spec.operations.push(op);
    }
    Ok(spec)
}

pub fn encode_migration_grid(spec: &MigrationSpec) -> Grid {
    let mut declaration = Declaration::sheet(SheetType::Migration);
    if let Some(v) = &spec.from_version {
        declaration = declaration.with(FROM_VERSION, v);
    }
    if let Some(v) = &spec.to_version {
        declaration = declaration.with(TO_VERSION, v);
    }
    let mut rows: Vec<Vec<String>> = vec![
        vec![declaration.to_string()],
        HEADINGS.map(String::from).to_vec(),
    ];
    for op in &spec.operations {
        let s = String::clone;
        let row = match op {
            MigrationOp::RenameClass { from, to } => [
                op.name().into(),
                s(from),
                String::new(),
                s(to),
                String::new(),
                String::new(),
            ],
            MigrationOp::RenameAttribute { class, from, to } => [
                op.name().into(),
                s(class),
                s(from),
                s(to),
                String::new(),
                String::new(),
            ],
            MigrationOp::AddAttribute {
                class,
                name,
                format,
                default,
            } => [
                op.name().into(),
                s(class),
                s(name),
                String::new(),
                format.to_string(),
                default.clone().unwrap_or_default(),
            ],
            MigrationOp::RemoveAttribute { class, name } => [
                op.name().into(),
                s(class),
                s(name),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        rows.push(row.to_vec());
    }
    Grid::from_rows(MIGRATION_SHEET, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::AttributeKind;
    use crate::testing::{sample_dataset, sample_schema};
    use crate::validation::validate_dataset;

    fn rename(class: &str, from: &str, to: &str) -> MigrationOp {
        MigrationOp::RenameAttribute {
            class: class.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    fn spec(operations: Vec<MigrationOp>) -> MigrationSpec {
        MigrationSpec {
            operations,
            ..MigrationSpec::default()
        }
    }

    #[test]
    fn empty_spec_is_identity() {
        let d = sample_dataset();
        let (out, schema) = migrate(&d, &MigrationSpec::default(), &sample_schema()).unwrap();
        assert_eq!(out, d);
        assert_eq!(schema, sample_schema());
    }

    #[test]
    fn rename_attribute_moves_values() {
        let d = sample_dataset();
        let (out, schema) = migrate(
            &d,
            &spec(vec![rename("Gene", "symbol", "gene_symbol")]),
            &sample_schema(),
        )
        .unwrap();
        let apoe = &out.instances("Gene")[0];
        assert_eq!(apoe.get("gene_symbol"), &Value::from("APOE"));
        assert!(apoe.slots.get("symbol").is_none());
        assert_eq!(apoe.slots.len(), 3);
        assert!(schema
            .class("Gene")
            .unwrap()
            .attribute("gene_symbol")
            .is_some());
        assert_eq!(validate_dataset(&out, &schema).entries, vec![]);
    }

    #[test]
    fn rename_and_back() {
        let d = sample_dataset();
        let there = spec(vec![
            MigrationOp::RenameClass {
                from: "Gene".into(),
                to: "Locus".into(),
            },
            rename("Location", "five_prime", "start"),
        ]);
        let back = spec(vec![
            rename("Location", "start", "five_prime"),
            MigrationOp::RenameClass {
                from: "Locus".into(),
                to: "Gene".into(),
            },
        ]);
        let (mid, mid_schema) = migrate(&d, &there, &sample_schema()).unwrap();
        assert_eq!(
            mid_schema
                .class("Transcript")
                .unwrap()
                .attribute("gene")
                .unwrap()
                .format
                .target_class
                .as_deref(),
            Some("Locus")
        );
        assert_eq!(validate_dataset(&mid, &mid_schema).entries, vec![]);
        let (out, schema) = migrate(&mid, &back, &mid_schema).unwrap();
        assert_eq!(schema, sample_schema());
        assert_eq!(out, d);
    }

    #[test]
    fn add_attribute_fills_default() {
        let op = MigrationOp::AddAttribute {
            class: "Gene".into(),
            name: "organism".into(),
            format: AttributeFormat::new(AttributeKind::String),
            default: Some("Homo sapiens".into()),
        };
        let mut s = spec(vec![op]);
        s.to_version = Some("2".into());
        let (out, schema) = migrate(&sample_dataset(), &s, &sample_schema()).unwrap();
        assert!(out
            .instances("Gene")
            .iter()
            .all(|g| g.get("organism") == &Value::from("Homo sapiens")));
        assert_eq!(out.document_metadata[SCHEMA_VERSION_KEY], "2");
        assert_eq!(validate_dataset(&out, &schema).entries, vec![]);
    }

    #[test]
    fn errors() {
        let schema = sample_schema();
        let d = sample_dataset();
        let cases = [
            rename("Genee", "symbol", "x"),
            rename("Gene", "sym", "x"),
            rename("Gene", "symbol", "id"),
            rename("Gene", "symbol", "2x"),
            MigrationOp::RemoveAttribute {
                class: "Gene".into(),
                name: "id".into(),
            },
            MigrationOp::AddAttribute {
                class: "Gene".into(),
                name: "length".into(),
                format: AttributeFormat::new(AttributeKind::PositiveInteger),
                default: Some("-3".into()),
            },
        ];
        for op in cases {
            assert!(
                migrate(&d, &spec(vec![op.clone()]), &schema).is_err(),
                "{op:?}"
            );
        }
    }

    #[test]
    fn worksheet_round_trip() {
        let s = MigrationSpec {
            from_version: Some("1".into()),
            to_version: Some("2".into()),
            operations: vec![
                rename("Gene", "symbol", "gene_symbol"),
                MigrationOp::AddAttribute {
                    class: "Gene".into(),
                    name: "organism".into(),
                    format: AttributeFormat::new(AttributeKind::String),
                    default: Some("Homo sapiens".into()),
                },
                MigrationOp::RemoveAttribute {
                    class: "Gene".into(),
                    name: "organism".into(),
                },
            ],
        };
        assert_eq!(parse_migration_grid(&encode_migration_grid(&s)).unwrap(), s);
    }

    #[test]
    fn retargeting_is_unsupported() {
        let grid = Grid::from_rows(
            MIGRATION_SHEET,
            [
                vec!["!!ObjTables type='Migration'"],
                HEADINGS.to_vec(),
                vec![
                    "retarget",
                    "Transcript",
                    "gene",
                    "",
                    "ManyToOne('Location', related_name='x')",
                    "",
                ],
            ],
        );
        assert!(matches!(
            parse_migration_grid(&grid),
            Err(MigrationError::Unsupported { .. })
        ));
    }
}
