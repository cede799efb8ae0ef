//! The decoded object graph.
//!
//! Instances of sheet-bearing classes live in per-class lists. Instances of
//! `multiple_cells` classes are embedded inside the slot of their owner and
//! have no list of their own. Relations to sheet-bearing classes hold the
//! target's primary-key text; [`Dataset::resolve`] follows them.

mod tree;
mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

pub use tree::{
    from_document_tree, parse_json, parse_yaml, render_json, render_yaml, to_document_tree,
    ImportError, SerializeError, METADATA_KEY,
};
pub use value::Value;

use crate::schema::{ClassDef, Schema};
use crate::validation::ReportEntry;

/// Metadata key recording the markup format version.
pub const FORMAT_VERSION_KEY: &str = "objTablesVersion";
pub const FORMAT_VERSION: &str = "1.0.0";
/// Metadata key recording which schema version a dataset conforms to.
pub const SCHEMA_VERSION_KEY: &str = "schemaVersion";

/// Where an instance came from in its workbook.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub worksheet: String,
    /// 1-based (row, column) of the record's first cell.
    pub origin: (usize, usize),
    /// 1-based (row, column) per attribute name.
    pub cells: BTreeMap<String, (usize, usize)>,
    /// Attributes whose cell failed to parse and were left null.
    pub failed: BTreeSet<String>,
}

impl Provenance {
    pub fn cell(&self, attribute: &str) -> (usize, usize) {
        self.cells.get(attribute).copied().unwrap_or(self.origin)
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub class_name: String,
    pub slots: IndexMap<String, Value>,
    pub provenance: Option<Provenance>,
}

/// Equality ignores provenance.
impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.class_name == other.class_name && self.slots == other.slots
    }
}

impl Instance {
    /// A fresh instance with every attribute of `class` set to null.
    pub fn new(class: &ClassDef) -> Self {
        Instance {
            class_name: class.name.clone(),
            slots: class
                .attributes
                .iter()
                .map(|a| (a.name.clone(), Value::Null))
                .collect(),
            provenance: None,
        }
    }

    pub fn get(&self, attribute: &str) -> &Value {
        self.slots.get(attribute).unwrap_or(&Value::Null)
    }

    pub fn set(&mut self, attribute: &str, value: impl Into<Value>) -> &mut Self {
        self.slots.insert(attribute.to_string(), value.into());
        self
    }

    pub fn with(mut self, attribute: &str, value: impl Into<Value>) -> Self {
        self.set(attribute, value);
        self
    }

    /// Primary-key text, if the class has a primary attribute and it is set.
    pub fn key(&self, class: &ClassDef) -> Option<String> {
        let primary = class.primary_attribute()?;
        let value = self.get(&primary.name);
        (!value.is_null()).then(|| value.to_cell_string())
    }

    /// Every embedded instance directly under this one, with its slot name.
    pub fn embedded(&self) -> impl Iterator<Item = (&str, &Instance)> {
        self.slots.iter().filter_map(|(name, v)| match v {
            Value::Embedded(inner) => Some((name.as_str(), inner.as_ref())),
            _ => None,
        })
    }

    fn sort_reference_lists(&mut self) {
        for value in self.slots.values_mut() {
            match value {
                Value::RefList(keys) => keys.sort(),
                Value::Embedded(inner) => inner.sort_reference_lists(),
                _ => {}
            }
        }
    }

    fn order_slots(&mut self, schema: &Schema) {
        if let Some(class) = schema.class(&self.class_name) {
            let rank: HashMap<&str, usize> = class
                .attributes
                .iter()
                .enumerate()
                .map(|(i, a)| (a.name.as_str(), i))
                .collect();
            self.slots
                .sort_by_key(|name, _| rank.get(name.as_str()).copied().unwrap_or(usize::MAX));
        }
        for value in self.slots.values_mut() {
            if let Value::Embedded(inner) = value {
                inner.order_slots(schema);
            }
        }
    }
}

/// Decoder side-channel: cell-level findings and table-of-contents claims
/// that validation folds into its report. Not part of dataset identity.
#[derive(Debug, Clone, Default)]
pub struct Annotations {
    pub issues: Vec<ReportEntry>,
    pub toc: Vec<TocClaim>,
}

/// One `!Objects` count read from a table-of-contents sheet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TocClaim {
    pub toc_sheet: String,
    pub row: usize,
    pub column: usize,
    pub worksheet: String,
    /// Class of the data sheet the row names, if that sheet was decoded.
    pub class: Option<String>,
    pub claimed: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<Schema>,
    instances: IndexMap<String, Vec<Instance>>,
    pub document_metadata: BTreeMap<String, String>,
    pub annotations: Annotations,
}

/// Structural equality: same schema classes, instances and metadata.
/// Provenance and annotations are ignored.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        let non_empty = |d: &Dataset| -> Vec<(String, Vec<Instance>)> {
            d.instances
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<Vec<_>>()
        };
        let mut a = non_empty(self);
        let mut b = non_empty(other);
        a.sort_by(|x, y| x.0.cmp(&y.0));
        b.sort_by(|x, y| x.0.cmp(&y.0));
        self.schema.same_structure(&other.schema)
            && self.document_metadata == other.document_metadata
            && a == b
    }
}

impl Dataset {
    pub fn new(schema: Arc<Schema>) -> Self {
        Dataset {
            schema,
            instances: IndexMap::new(),
            document_metadata: BTreeMap::new(),
            annotations: Annotations::default(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn push(&mut self, instance: Instance) {
        self.instances
            .entry(instance.class_name.clone())
            .or_default()
            .push(instance);
    }

    pub fn instances(&self, class: &str) -> &[Instance] {
        self.instances.get(class).map_or(&[], Vec::as_slice)
    }

    /// Direct access to the per-class lists. Callers keep class names
    /// consistent with the map keys.
    pub fn instances_mut(&mut self) -> &mut IndexMap<String, Vec<Instance>> {
        &mut self.instances
    }

    /// Classes with at least one instance, with their instances.
    pub fn classes(&self) -> impl Iterator<Item = (&str, &[Instance])> {
        self.instances
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.instances.values().all(Vec::is_empty)
    }

    /// Visits every instance, embedded ones included, depth first.
    pub fn walk<'a>(&'a self, mut visit: impl FnMut(&'a Instance)) {
        fn go<'a>(inst: &'a Instance, visit: &mut impl FnMut(&'a Instance)) {
            visit(inst);
            for (_, inner) in inst.embedded() {
                go(inner, visit);
            }
        }
        for list in self.instances.values() {
            for inst in list {
                go(inst, &mut visit);
            }
        }
    }

    /// Number of instances of `class`, counting embedded ones.
    pub fn count(&self, class: &str) -> usize {
        let mut n = 0;
        self.walk(|inst| {
            if inst.class_name == class {
                n += 1;
            }
        });
        n
    }

    pub fn find(&self, class: &str, key: &str) -> Option<&Instance> {
        let def = self.schema.class(class)?;
        self.instances(class)
            .iter()
            .find(|i| i.key(def).as_deref() == Some(key))
    }

    /// Index of (class, primary key) to position in that class's list.
    pub fn key_index(&self) -> HashMap<(&str, String), usize> {
        let mut index = HashMap::new();
        for (class, list) in &self.instances {
            let Some(def) = self.schema.class(class) else {
                continue;
            };
            for (i, inst) in list.iter().enumerate() {
                if let Some(key) = inst.key(def) {
                    index.entry((class.as_str(), key)).or_insert(i);
                }
            }
        }
        index
    }

    /// Follows a reference stored in a relation slot.
    pub fn resolve(&self, target_class: &str, key: &str) -> Option<&Instance> {
        self.find(target_class, key)
    }

    /// Instances that point at `(class, key)` through the relation whose
    /// `related_name` is `related_name`.
    pub fn related(&self, class: &str, key: &str, related_name: &str) -> Vec<&Instance> {
        let mut out = Vec::new();
        for source in self.schema.classes.iter() {
            for attr in &source.attributes {
                let fmt = &attr.format;
                if fmt.target_class.as_deref() != Some(class)
                    || fmt.related_name.as_deref() != Some(related_name)
                {
                    continue;
                }
                for inst in self.instances(&source.name) {
                    let hit = match inst.get(&attr.name) {
                        Value::Ref(k) => k == key,
                        Value::RefList(keys) => keys.iter().any(|k| k == key),
                        _ => false,
                    };
                    if hit {
                        out.push(inst);
                    }
                }
            }
        }
        out
    }

    /// Canonical form: classes in schema order, instances by primary key,
    /// reference lists sorted, format version recorded. Idempotent.
    pub fn normalize(&self) -> Dataset {
        let mut out = self.clone();
        let schema = Arc::clone(&self.schema);
        let rank: HashMap<&str, usize> = schema
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();
        out.instances.retain(|_, v| !v.is_empty());
        out.instances
            .sort_by_key(|name, _| rank.get(name.as_str()).copied().unwrap_or(usize::MAX));
        for (class, list) in out.instances.iter_mut() {
            for inst in list.iter_mut() {
                inst.sort_reference_lists();
                inst.order_slots(&schema);
            }
            if let Some(def) = schema.class(class) {
                list.sort_by_cached_key(|inst| {
                    let key = inst.key(def);
                    (key.is_none(), key)
                });
            }
        }
        if !out.document_metadata.is_empty() {
            out.document_metadata
                .entry(FORMAT_VERSION_KEY.to_string())
                .or_insert_with(|| FORMAT_VERSION.to_string());
        }
        out
    }
}

/// Free-function form of [`Dataset::normalize`].
pub fn normalize(dataset: &Dataset) -> Dataset {
    dataset.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{sample_dataset, sample_schema};

    #[test]
    fn shuffled_transcripts_sort_by_key() {
        let mut dataset = sample_dataset();
        dataset
            .instances_mut()
            .get_mut("Transcript")
            .unwrap()
            .reverse();
        let normalized = dataset.normalize();
        let schema = sample_schema();
        let transcript = schema.class("Transcript").unwrap();
        let keys: Vec<_> = normalized
            .instances("Transcript")
            .iter()
            .map(|i| i.key(transcript).unwrap())
            .collect();
        assert_eq!(
            keys,
            [
                "ENST00000252486.9",
                "ENST00000380152.7",
                "ENST00000425718.1",
                "ENST00000544455.5"
            ]
        );
    }

    #[test]
    fn normalize_is_idempotent() {
        let once = sample_dataset().normalize();
        let twice = once.normalize();
        assert_eq!(once, twice);
        let order = |d: &Dataset| d.classes().map(|(c, _)| c.to_string()).collect::<Vec<_>>();
        assert_eq!(order(&once), order(&twice));
    }

    #[test]
    fn empty_dataset_normalizes_to_empty() {
        let empty = Dataset::new(Arc::new(sample_schema()));
        assert_eq!(empty.normalize(), empty);
        assert!(empty.normalize().document_metadata.is_empty());
    }

    #[test]
    fn counts_include_embedded_instances() {
        let dataset = sample_dataset();
        assert_eq!(dataset.count("Gene"), 2);
        assert_eq!(dataset.count("Transcript"), 4);
        assert_eq!(dataset.count("Location"), 6);
    }

    #[test]
    fn reverse_relation_lists_transcripts() {
        let dataset = sample_dataset();
        let apoe = dataset.related("Gene", "ENSG00000130203", "transcripts");
        assert_eq!(apoe.len(), 2);
        assert!(dataset.resolve("Gene", "ENSG00000139618").is_some());
        assert!(dataset.resolve("Gene", "ENSG00000000000").is_none());
    }
}
