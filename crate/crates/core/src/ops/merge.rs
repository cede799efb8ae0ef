use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Serialize;

use super::{aligned, identity, OpsError, METADATA_CLASS};
use crate::dataset::{render_json, Dataset, Instance};
use crate::validation::{validate_dataset, ValidationReport};

/// The value one input held for a conflicting attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartValue {
    /// Zero-based position of the input in the merge call.
    pub part: usize,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub class: String,
    pub key: String,
    pub attribute: String,
    pub values: Vec<PartValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn to_json(&self) -> String {
        render_json(&serde_json::to_value(self).unwrap_or_default())
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.conflicts {
            let values: Vec<String> = c
                .values
                .iter()
                .map(|v| {
                    format!(
                        "#{}={}",
                        v.part + 1,
                        v.value.as_deref().unwrap_or("(empty)")
                    )
                })
                .collect();
            out.push_str(&format!(
                "! {} {} {}: {}\n",
                c.class,
                c.key,
                c.attribute,
                values.join(" ")
            ));
        }
        out.push_str(&format!("{} conflicts\n", self.conflicts.len()));
        out
    }
}

#[derive(Debug, Clone)]
pub enum MergeOutcome {
    /// The union, normalized, with its validation report.
    Merged {
        dataset: Dataset,
        report: ValidationReport,
    },
    Conflicts(ConflictReport),
}

/// Unions datasets keyed on (class, primary key). Identical duplicates
/// collapse; any differing attribute is a conflict. References between
/// parts resolve in the union.
pub fn merge(parts: &[Dataset]) -> Result<MergeOutcome, OpsError> {
    let first = parts.first().ok_or(OpsError::NoParts)?;
    if parts
        .iter()
        .any(|p| !p.schema().same_structure(first.schema()))
    {
        return Err(OpsError::SchemaMismatch);
    }
    let schema = first.schema_arc();
    let normalized: Vec<Dataset> = parts.iter().map(Dataset::normalize).collect();
    let mut conflicts = Vec::new();

    let mut metadata: BTreeMap<String, Vec<PartValue>> = BTreeMap::new();
    for (part, d) in normalized.iter().enumerate() {
        for (k, v) in &d.document_metadata {
            metadata.entry(k.clone()).or_default().push(PartValue {
                part,
                value: Some(v.clone()),
            });
        }
    }
    let mut merged = Dataset::new(Arc::clone(&schema));
    for (k, values) in metadata {
        if values.iter().any(|v| v.value != values[0].value) {
            conflicts.push(Conflict {
                class: METADATA_CLASS.to_string(),
                key: String::new(),
                attribute: k,
                values,
            });
        } else if let Some(v) = values[0].value.clone() {
            merged.document_metadata.insert(k, v);
        }
    }

    for class in &schema.classes {
        // identity -> instances from each part, first-seen order
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, Vec<(usize, &Instance)>> = HashMap::new();
        for (part, d) in normalized.iter().enumerate() {
            for inst in d.instances(&class.name) {
                let id = identity(class, inst);
                let group = groups.entry(id.clone()).or_default();
                if group.is_empty() {
                    order.push(id);
                }
                group.push((part, inst));
            }
        }
        for id in order {
            let group = &groups[&id];
            let (_, first_inst) = group[0];
            if group.iter().all(|(_, i)| *i == first_inst) {
                merged.push(first_inst.clone());
                continue;
            }
            let insts: Vec<&Instance> = group.iter().map(|(_, i)| *i).collect();
            for (path, values) in aligned(&schema, class, &insts) {
                if values.iter().any(|v| *v != values[0]) {
                    conflicts.push(Conflict {
                        class: class.name.clone(),
                        key: id.clone(),
                        attribute: path,
                        values: group
                            .iter()
                            .zip(values)
                            .map(|((part, _), v)| PartValue {
                                part: *part,
                                value: v.display(),
                            })
                            .collect(),
                    });
                }
            }
        }
    }

    if !conflicts.is_empty() {
        return Ok(MergeOutcome::Conflicts(ConflictReport { conflicts }));
    }
    let dataset = merged.normalize();
    let report = validate_dataset(&dataset, &schema);
    Ok(MergeOutcome::Merged { dataset, report })
}
