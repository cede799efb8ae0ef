use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::{aligned, identity, OpsError, METADATA_CLASS};
use crate::dataset::{render_json, Dataset, Instance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyRef {
    pub class: String,
    pub key: String,
}

/// One attribute whose value differs between matched instances. Values
/// are canonical cell text; `None` is null.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Modification {
    pub class: String,
    pub key: String,
    pub attribute: String,
    pub left: Option<String>,
    pub right: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub added: Vec<KeyRef>,
    pub removed: Vec<KeyRef>,
    pub modified: Vec<Modification>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }

    /// The report `diff(right, left)` would give.
    pub fn swapped(&self) -> DiffReport {
        DiffReport {
            added: self.removed.clone(),
            removed: self.added.clone(),
            modified: self
                .modified
                .iter()
                .map(|m| Modification {
                    left: m.right.clone(),
                    right: m.left.clone(),
                    ..m.clone()
                })
                .collect(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} added, {} removed, {} modified",
            self.added.len(),
            self.removed.len(),
            self.modified.len()
        )
    }

    pub fn to_json(&self) -> String {
        render_json(&serde_json::to_value(self).unwrap_or_default())
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for k in &self.added {
            out.push_str(&format!("+ {} {}\n", k.class, k.key));
        }
        for k in &self.removed {
            out.push_str(&format!("- {} {}\n", k.class, k.key));
        }
        let show = |v: &Option<String>| v.clone().unwrap_or_else(|| "(empty)".into());
        for m in &self.modified {
            out.push_str(&format!(
                "~ {} {} {}: {} -> {}\n",
                m.class,
                m.key,
                m.attribute,
                show(&m.left),
                show(&m.right)
            ));
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }
}

/// Compares two datasets instance by instance, matched on (class, primary
/// key). Embedded instances are compared inside their owner.
pub fn diff(left: &Dataset, right: &Dataset) -> Result<DiffReport, OpsError> {
    if !left.schema().same_structure(right.schema()) {
        return Err(OpsError::SchemaMismatch);
    }
    let left = left.normalize();
    let right = right.normalize();
    let schema = left.schema();
    let mut report = DiffReport::default();

    let keys: BTreeSet<&String> = left
        .document_metadata
        .keys()
        .chain(right.document_metadata.keys())
        .collect();
    for key in keys {
        let (l, r) = (
            left.document_metadata.get(key),
            right.document_metadata.get(key),
        );
        if l != r {
            report.modified.push(Modification {
                class: METADATA_CLASS.to_string(),
                key: String::new(),
                attribute: key.clone(),
                left: l.cloned(),
                right: r.cloned(),
            });
        }
    }

    for class in &schema.classes {
        let index = |d: &'_ Dataset| -> Vec<(String, Instance)> {
            d.instances(&class.name)
                .iter()
                .map(|i| (identity(class, i), i.clone()))
                .collect()
        };
        let (l, r) = (index(&left), index(&right));
        let positions = |list: &[(String, Instance)]| -> HashMap<String, usize> {
            list.iter()
                .enumerate()
                .map(|(i, (k, _))| (k.clone(), i))
                .collect()
        };
        let (l_pos, r_pos) = (positions(&l), positions(&r));
        for (key, inst) in &l {
            match r_pos.get(key).copied() {
                None => report.removed.push(KeyRef {
                    class: class.name.clone(),
                    key: key.clone(),
                }),
                Some(pos) => {
                    let other = &r[pos].1;
                    if inst == other {
                        continue;
                    }
                    for (path, values) in aligned(schema, class, &[inst, other]) {
                        if values[0] != values[1] {
                            report.modified.push(Modification {
                                class: class.name.clone(),
                                key: key.clone(),
                                attribute: path,
                                left: values[0].display(),
                                right: values[1].display(),
                            });
                        }
                    }
                }
            }
        }
        for (key, _) in &r {
            if !l_pos.contains_key(key) {
                report.added.push(KeyRef {
                    class: class.name.clone(),
                    key: key.clone(),
                });
            }
        }
    }
    Ok(report)
}
