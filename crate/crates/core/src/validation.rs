//! Schema-driven checks over a decoded dataset and the report they produce.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::dataset::{render_json, Dataset, Instance, Value};
use crate::schema::{AttributeDef, AttributeKind, ClassDef, Schema, SchemaErrorCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable report codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    DupPrimary,
    NonUnique,
    UnresolvedRef,
    BadType,
    BadValue,
    MissingRequired,
    TocMismatch,
    UnknownHeading,
    DuplicateHeading,
    IgnoredColumn,
    BadDeclaration,
    DeclarationMismatch,
    ReverseConflict,
    UnknownAttribute,
    UnknownClass,
    BadFormat,
    BadSchemaRow,
    Schema(SchemaErrorCode),
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::DupPrimary => "DUP_PRIMARY",
            Code::NonUnique => "NON_UNIQUE",
            Code::UnresolvedRef => "UNRESOLVED_REF",
            Code::BadType => "BAD_TYPE",
            Code::BadValue => "BAD_VALUE",
            Code::MissingRequired => "MISSING_REQUIRED",
            Code::TocMismatch => "TOC_MISMATCH",
            Code::UnknownHeading => "UNKNOWN_HEADING",
            Code::DuplicateHeading => "DUP_HEADING",
            Code::IgnoredColumn => "IGNORED_COLUMN",
            Code::BadDeclaration => "BAD_DECLARATION",
            Code::DeclarationMismatch => "DECLARATION_MISMATCH",
            Code::ReverseConflict => "REVERSE_CONFLICT",
            Code::UnknownAttribute => "UNKNOWN_ATTRIBUTE",
            Code::UnknownClass => "UNKNOWN_CLASS",
            Code::BadFormat => "BAD_FORMAT",
            Code::BadSchemaRow => "BAD_SCHEMA_ROW",
            Code::Schema(code) => code.as_str(),
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::TocMismatch | Code::IgnoredColumn => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Spreadsheet-style column letters for a 1-based column number.
pub fn column_letters(mut column: usize) -> String {
    let mut letters = Vec::new();
    while column > 0 {
        let rem = (column - 1) % 26;
        letters.push(b'A' + rem as u8);
        column = (column - 1) / 26;
    }
    letters.reverse();
    String::from_utf8(letters).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportEntry {
    pub severity: Severity,
    pub worksheet: String,
    /// 1-based; 0 when the finding has no cell.
    pub row: usize,
    pub column: usize,
    pub cell: String,
    pub class: String,
    pub attribute: String,
    pub code: Code,
    pub message: String,
}

impl ReportEntry {
    pub fn new(
        code: Code,
        worksheet: &str,
        (row, column): (usize, usize),
        message: impl Into<String>,
    ) -> Self {
        let cell = if row > 0 && column > 0 {
            format!("{}{}", column_letters(column), row)
        } else {
            String::new()
        };
        ReportEntry {
            severity: code.severity(),
            worksheet: worksheet.to_string(),
            row,
            column,
            cell,
            class: String::new(),
            attribute: String::new(),
            code,
            message: message.into(),
        }
    }

    pub fn on(mut self, class: &str, attribute: &str) -> Self {
        self.class = class.to_string();
        self.attribute = attribute.to_string();
        self
    }

    fn sort_key(&self) -> (&str, usize, usize, Code, &str, &str, &str) {
        (
            &self.worksheet,
            self.row,
            self.column,
            self.code,
            &self.class,
            &self.attribute,
            &self.message,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: usize,
    pub warnings: usize,
    pub summary: BTreeMap<String, usize>,
    pub entries: Vec<ReportEntry>,
}

impl ValidationReport {
    pub fn from_entries(mut entries: Vec<ReportEntry>) -> Self {
        entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut summary = BTreeMap::new();
        for e in &entries {
            *summary.entry(e.code.as_str().to_string()).or_insert(0) += 1;
        }
        let errors = entries
            .iter()
            .filter(|e| e.severity == Severity::Error)
            .count();
        ValidationReport {
            errors,
            warnings: entries.len() - errors,
            summary,
            entries,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.errors > 0
    }

    pub fn with_code(&self, code: Code) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(move |e| e.code == code)
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} error{}, {} warning{}",
            self.errors,
            if self.errors == 1 { "" } else { "s" },
            self.warnings,
            if self.warnings == 1 { "" } else { "s" }
        )
    }

    pub fn to_json(&self) -> String {
        render_json(&serde_json::to_value(self).unwrap_or_default())
    }

    /// Human-readable table followed by the summary line.
    pub fn render_text(&self) -> String {
        let rows: Vec<[String; 5]> = self
            .entries
            .iter()
            .map(|e| {
                let location = match (e.worksheet.is_empty(), e.cell.is_empty()) {
                    (true, _) => String::from("-"),
                    (false, true) => e.worksheet.clone(),
                    (false, false) => format!("{}!{}", e.worksheet, e.cell),
                };
                let target = match (e.class.is_empty(), e.attribute.is_empty()) {
                    (true, _) => String::from("-"),
                    (false, true) => e.class.clone(),
                    (false, false) => format!("{}.{}", e.class, e.attribute),
                };
                let severity = match e.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                [
                    severity.to_string(),
                    location,
                    e.code.to_string(),
                    target,
                    e.message.clone(),
                ]
            })
            .collect();
        let mut out = String::new();
        if !rows.is_empty() {
            let headers = ["SEVERITY", "LOCATION", "CODE", "ATTRIBUTE", "MESSAGE"];
            let mut widths = headers.map(str::len);
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: [&str; 5]| {
                let mut s = String::new();
                for (i, cell) in cells.iter().enumerate() {
                    if i == 4 {
                        s.push_str(cell);
                    } else {
                        s.push_str(&format!("{:<width$}  ", cell, width = widths[i]));
                    }
                }
                s.trim_end().to_string()
            };
            out.push_str(&line(headers));
            out.push('\n');
            for row in &rows {
                out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4]]));
                out.push('\n');
            }
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }
}

struct Site<'a> {
    worksheet: &'a str,
    cell: (usize, usize),
}

fn site<'a>(inst: &'a Instance, attribute: &str) -> Site<'a> {
    match &inst.provenance {
        Some(p) => Site {
            worksheet: &p.worksheet,
            cell: p.cell(attribute),
        },
        None => Site {
            worksheet: "",
            cell: (0, 0),
        },
    }
}

fn entry(code: Code, inst: &Instance, attr: &str, message: impl Into<String>) -> ReportEntry {
    let s = site(inst, attr);
    ReportEntry::new(code, s.worksheet, s.cell, message).on(&inst.class_name, attr)
}

fn failed(inst: &Instance, attr: &str) -> bool {
    inst.provenance
        .as_ref()
        .is_some_and(|p| p.failed.contains(attr))
}

/// (class, attribute, value) or (source class, attribute, target key).
type Slot = (String, String, String);

struct Checker<'a> {
    schema: &'a Schema,
    keys: HashSet<(String, String)>,
    entries: Vec<ReportEntry>,
    /// (class, attribute, canonical value) -> occurrences
    unique_values: HashMap<Slot, Vec<(&'a Instance, bool)>>,
    /// (source class, attribute, target key) -> referrers, for single-owner relations
    owners: HashMap<Slot, Vec<&'a Instance>>,
}

impl<'a> Checker<'a> {
    fn check_instance(&mut self, inst: &'a Instance, class: &'a ClassDef) {
        for name in inst.slots.keys() {
            if class.attribute(name).is_none() {
                self.entries.push(entry(
                    Code::UnknownAttribute,
                    inst,
                    name,
                    format!("{} has no attribute {name:?}", class.name),
                ));
            }
        }
        for attr in &class.attributes {
            let value = inst.get(&attr.name);
            if value.is_null() {
                if attr.is_required() && !failed(inst, &attr.name) {
                    self.entries.push(entry(
                        Code::MissingRequired,
                        inst,
                        &attr.name,
                        format!("required attribute '{}' is empty", attr.verbose_name),
                    ));
                }
                continue;
            }
            self.check_value(inst, attr, value);
            if attr.format.unique {
                self.unique_values
                    .entry((
                        class.name.clone(),
                        attr.name.clone(),
                        value.to_cell_string(),
                    ))
                    .or_default()
                    .push((inst, attr.format.primary));
            }
        }
    }

    fn check_value(&mut self, inst: &'a Instance, attr: &'a AttributeDef, value: &'a Value) {
        let kind = attr.format.kind;
        let bad_type = |expected: &str| {
            entry(
                Code::BadType,
                inst,
                &attr.name,
                format!("expected {expected}, found {}", value.variant_name()),
            )
        };
        match (kind, value) {
            (AttributeKind::String, Value::String(_))
            | (AttributeKind::Integer, Value::Integer(_))
            | (AttributeKind::Float, Value::Float(_))
            | (AttributeKind::Boolean, Value::Boolean(_))
            | (AttributeKind::Date, Value::Date(_))
            | (AttributeKind::Url, Value::Url(_))
            | (AttributeKind::ChemicalEquation, Value::Equation(_)) => {}
            (AttributeKind::PositiveInteger, Value::Integer(i)) => {
                if *i < 1 {
                    self.entries.push(entry(
                        Code::BadValue,
                        inst,
                        &attr.name,
                        format!("{i} is not a positive integer"),
                    ));
                }
            }
            (AttributeKind::Enum, Value::Enum(member)) => {
                if !attr.format.enum_values.contains(member) {
                    self.entries.push(entry(
                        Code::BadValue,
                        inst,
                        &attr.name,
                        format!("{member:?} is not one of {:?}", attr.format.enum_values),
                    ));
                }
            }
            (_, Value::Embedded(inner)) if self.schema.is_embedding(attr) => {
                let target = attr.format.target_class.as_deref().unwrap_or_default();
                match self.schema.class(target) {
                    Some(target_class) if inner.class_name == target => {
                        self.check_instance(inner, target_class)
                    }
                    _ => self.entries.push(bad_type(&format!("embedded {target}"))),
                }
            }
            (k, Value::Ref(key))
                if k.is_single_valued_relation() && !self.schema.is_embedding(attr) =>
            {
                self.check_reference(inst, attr, key);
            }
            (k, Value::RefList(keys)) if k.is_relation() && !k.is_single_valued_relation() => {
                for key in keys {
                    self.check_reference(inst, attr, key);
                }
            }
            _ => {
                let expected = if self.schema.is_embedding(attr) {
                    format!(
                        "embedded {}",
                        attr.format.target_class.as_deref().unwrap_or_default()
                    )
                } else {
                    kind.name().to_string()
                };
                self.entries.push(bad_type(&expected));
            }
        }
    }

    fn check_reference(&mut self, inst: &'a Instance, attr: &'a AttributeDef, key: &str) {
        let target = attr.format.target_class.as_deref().unwrap_or_default();
        if !self.keys.contains(&(target.to_string(), key.to_string())) {
            self.entries.push(entry(
                Code::UnresolvedRef,
                inst,
                &attr.name,
                format!("no {target} with key {key:?}"),
            ));
            return;
        }
        if matches!(
            attr.format.kind,
            AttributeKind::OneToOne | AttributeKind::OneToMany
        ) {
            self.owners
                .entry((inst.class_name.clone(), attr.name.clone(), key.to_string()))
                .or_default()
                .push(inst);
        }
    }
}

/// Checks every constraint the schema expresses and folds in the cell-level
/// findings the decoder attached. Never short-circuits.
pub fn validate_dataset(dataset: &Dataset, schema: &Schema) -> ValidationReport {
    let mut keys = HashSet::new();
    for (class_name, list) in dataset.classes() {
        let Some(class) = schema.class(class_name) else {
            continue;
        };
        for inst in list {
            if let Some(key) = inst.key(class) {
                keys.insert((class_name.to_string(), key));
            }
        }
    }
    let mut checker = Checker {
        schema,
        keys,
        entries: dataset.annotations.issues.clone(),
        unique_values: HashMap::new(),
        owners: HashMap::new(),
    };

    for (class_name, list) in dataset.classes() {
        match schema.class(class_name) {
            Some(class) if class.layout.has_sheet() => {
                for inst in list {
                    checker.check_instance(inst, class);
                }
            }
            Some(_) => {
                for inst in list {
                    checker.entries.push(entry(
                        Code::UnknownClass,
                        inst,
                        "",
                        format!("{class_name} is a multiple_cells class and cannot stand alone"),
                    ));
                }
            }
            None => {
                for inst in list {
                    checker.entries.push(entry(
                        Code::UnknownClass,
                        inst,
                        "",
                        format!("{class_name} is not a class of the schema"),
                    ));
                }
            }
        }
    }

    let mut duplicates: Vec<_> = checker
        .unique_values
        .iter()
        .filter(|(_, hits)| hits.len() > 1)
        .collect();
    duplicates.sort_by(|a, b| a.0.cmp(b.0));
    let mut dup_entries = Vec::new();
    for ((class, attr, value), hits) in duplicates {
        for (inst, primary) in hits {
            let code = if *primary {
                Code::DupPrimary
            } else {
                Code::NonUnique
            };
            dup_entries.push(
                entry(
                    code,
                    inst,
                    attr,
                    format!("{value:?} appears {} times in {class}.{attr}", hits.len()),
                )
                .on(class, attr),
            );
        }
    }
    checker.entries.extend(dup_entries);

    let mut shared: Vec<_> = checker.owners.iter().filter(|(_, v)| v.len() > 1).collect();
    shared.sort_by(|a, b| a.0.cmp(b.0));
    let mut shared_entries = Vec::new();
    for ((class, attr, key), referrers) in shared {
        for inst in referrers {
            shared_entries.push(entry(
                Code::ReverseConflict,
                inst,
                attr,
                format!(
                    "{key:?} is claimed by {} {class} instances through one-sided relation {attr}",
                    referrers.len()
                ),
            ));
        }
    }
    checker.entries.extend(shared_entries);

    for claim in &dataset.annotations.toc {
        let at = (claim.row, claim.column);
        let Some(class) = &claim.class else {
            checker.entries.push(ReportEntry::new(
                Code::TocMismatch,
                &claim.toc_sheet,
                at,
                format!(
                    "table of contents lists {:?}, which is not a data worksheet",
                    claim.worksheet
                ),
            ));
            continue;
        };
        let actual = dataset.count(class);
        let claimed = claim.claimed.as_deref().map(str::trim);
        if claimed.and_then(|c| c.parse::<usize>().ok()) != Some(actual) {
            checker.entries.push(
                ReportEntry::new(
                    Code::TocMismatch,
                    &claim.toc_sheet,
                    at,
                    format!(
                        "{:?} lists {} objects but the worksheet holds {actual}",
                        claim.worksheet,
                        claimed.unwrap_or("no")
                    ),
                )
                .on(class, ""),
            );
        }
    }

    ValidationReport::from_entries(checker.entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::sample_dataset;

    #[test]
    fn fixture_is_clean() {
        let dataset = sample_dataset();
        let report = validate_dataset(&dataset, dataset.schema());
        assert_eq!(report.entries, vec![]);
        assert_eq!(report.summary_line(), "0 errors, 0 warnings");
    }

    #[test]
    fn duplicated_gene_gives_two_dup_primary_entries() {
        let mut dataset = sample_dataset();
        let apoe = dataset.instances("Gene")[0].clone();
        dataset.push(apoe);
        let report = validate_dataset(&dataset, dataset.schema());
        let gene_dups: Vec<_> = report
            .with_code(Code::DupPrimary)
            .filter(|e| e.class == "Gene" && e.attribute == "id")
            .collect();
        assert_eq!(gene_dups.len(), 2);
        assert!(gene_dups
            .iter()
            .all(|e| e.message.contains("ENSG00000130203")));
    }

    #[test]
    fn empty_dataset_empty_report() {
        let dataset = crate::dataset::Dataset::new(sample_dataset().schema_arc());
        assert_eq!(
            validate_dataset(&dataset, dataset.schema()),
            ValidationReport::default()
        );
    }

    #[test]
    fn type_and_reference_problems() {
        let mut dataset = sample_dataset();
        {
            let genes = dataset.instances_mut().get_mut("Gene").unwrap();
            genes[0].set("symbol", Value::Integer(3));
            if let Value::Embedded(loc) = genes[1].slots.get_mut("location").unwrap() {
                loc.set("three_prime", Value::Integer(-2));
            }
            let transcripts = dataset.instances_mut().get_mut("Transcript").unwrap();
            transcripts[0].set("gene", Value::Ref("missing".into()));
            transcripts[1].set("id", Value::Null);
        }
        let report = validate_dataset(&dataset, dataset.schema());
        let codes: Vec<_> = report.entries.iter().map(|e| e.code).collect();
        for code in [
            Code::BadType,
            Code::BadValue,
            Code::UnresolvedRef,
            Code::MissingRequired,
        ] {
            assert_eq!(
                codes.iter().filter(|c| **c == code).count(),
                1,
                "{code}: {codes:?}"
            );
        }
        assert_eq!(report.entries.len(), 4);
    }

    #[test]
    fn column_letters_roll_over() {
        assert_eq!(column_letters(1), "A");
        assert_eq!(column_letters(26), "Z");
        assert_eq!(column_letters(27), "AA");
        assert_eq!(column_letters(703), "AAA");
    }

    #[test]
    fn text_report_ends_with_summary() {
        let report = ValidationReport::from_entries(vec![ReportEntry::new(
            Code::TocMismatch,
            "!!_Table of contents",
            (4, 3),
            "x",
        )]);
        let text = report.render_text();
        assert!(text.contains("!!_Table of contents!C4"));
        assert!(text.ends_with("0 errors, 1 warning\n"));
    }
}
