//! In-memory schema model: classes, attributes and their formats.
//!
//! A [`Schema`] is plain data. Nothing here enforces coherence at
//! construction time; call [`validate_schema`] to get the full list of
//! problems. Parsers in [`crate::codec`] run it before handing a schema out.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

/// How a class is laid out in a workbook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One record per row, headings across the top.
    Row,
    /// One record per column, headings down the first column.
    Column,
    /// Embedded under a relation column group of its owner.
    MultipleCells,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Row => "row",
            Layout::Column => "column",
            Layout::MultipleCells => "multiple_cells",
        }
    }

    pub fn parse(text: &str) -> Option<Layout> {
        match text.trim() {
            "row" => Some(Layout::Row),
            "column" => Some(Layout::Column),
            "multiple_cells" => Some(Layout::MultipleCells),
            _ => None,
        }
    }

    /// Whether instances of this layout get a worksheet of their own.
    pub fn has_sheet(self) -> bool {
        !matches!(self, Layout::MultipleCells)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AttributeKind {
    String,
    Integer,
    PositiveInteger,
    Float,
    Boolean,
    Date,
    Url,
    Enum,
    ChemicalEquation,
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 13] = [
        AttributeKind::String,
        AttributeKind::Integer,
        AttributeKind::PositiveInteger,
        AttributeKind::Float,
        AttributeKind::Boolean,
        AttributeKind::Date,
        AttributeKind::Url,
        AttributeKind::Enum,
        AttributeKind::ChemicalEquation,
        AttributeKind::OneToOne,
        AttributeKind::OneToMany,
        AttributeKind::ManyToOne,
        AttributeKind::ManyToMany,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::String => "String",
            AttributeKind::Integer => "Integer",
            AttributeKind::PositiveInteger => "PositiveInteger",
            AttributeKind::Float => "Float",
            AttributeKind::Boolean => "Boolean",
            AttributeKind::Date => "Date",
            AttributeKind::Url => "Url",
            AttributeKind::Enum => "Enum",
            AttributeKind::ChemicalEquation => "ChemicalEquation",
            AttributeKind::OneToOne => "OneToOne",
            AttributeKind::OneToMany => "OneToMany",
            AttributeKind::ManyToOne => "ManyToOne",
            AttributeKind::ManyToMany => "ManyToMany",
        }
    }

    pub fn from_name(name: &str) -> Option<AttributeKind> {
        AttributeKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_relation(self) -> bool {
        matches!(
            self,
            AttributeKind::OneToOne
                | AttributeKind::OneToMany
                | AttributeKind::ManyToOne
                | AttributeKind::ManyToMany
        )
    }

    /// Relation kinds whose cell holds a single reference.
    pub fn is_single_valued_relation(self) -> bool {
        matches!(self, AttributeKind::OneToOne | AttributeKind::ManyToOne)
    }

    pub fn is_integer(self) -> bool {
        matches!(
            self,
            AttributeKind::Integer | AttributeKind::PositiveInteger
        )
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parsed form of an attribute's `!Format` cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeFormat {
    pub kind: AttributeKind,
    pub primary: bool,
    pub unique: bool,
    pub target_class: Option<String>,
    pub related_name: Option<String>,
    pub enum_values: Vec<String>,
}

impl AttributeFormat {
    pub fn new(kind: AttributeKind) -> Self {
        AttributeFormat {
            kind,
            primary: false,
            unique: false,
            target_class: None,
            related_name: None,
            enum_values: Vec::new(),
        }
    }

    pub fn relation(kind: AttributeKind, target: &str, related_name: &str) -> Self {
        AttributeFormat {
            target_class: Some(target.to_string()),
            related_name: Some(related_name.to_string()),
            ..AttributeFormat::new(kind)
        }
    }

    pub fn primary(mut self) -> Self {
        self.primary = true;
        self.unique = true;
        self
    }

    pub fn unique(mut self) -> Self {
        self.unique = true;
        self
    }

    pub fn is_relation(&self) -> bool {
        self.kind.is_relation()
    }
}

impl fmt::Display for AttributeFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::format::print_attribute_format(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeDef {
    pub name: String,
    pub parent_class: String,
    pub format: AttributeFormat,
    pub verbose_name: String,
    pub description: Option<String>,
}

impl AttributeDef {
    pub fn new(parent: &str, name: &str, verbose_name: &str, format: AttributeFormat) -> Self {
        AttributeDef {
            name: name.to_string(),
            parent_class: parent.to_string(),
            format,
            verbose_name: verbose_name.to_string(),
            description: None,
        }
    }

    /// Primary attributes and single-valued relations must be filled in.
    pub fn is_required(&self) -> bool {
        self.format.primary || self.format.kind.is_single_valued_relation()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDef {
    pub name: String,
    pub verbose_name: String,
    pub layout: Layout,
    pub description: Option<String>,
    pub attributes: Vec<AttributeDef>,
}

impl ClassDef {
    pub fn new(name: &str, verbose_name: &str, layout: Layout) -> Self {
        ClassDef {
            name: name.to_string(),
            verbose_name: verbose_name.to_string(),
            layout,
            description: None,
            attributes: Vec::new(),
        }
    }

    /// Appends an attribute whose parent is this class.
    pub fn with_attribute(
        mut self,
        name: &str,
        verbose_name: &str,
        format: AttributeFormat,
    ) -> Self {
        let attr = AttributeDef::new(&self.name, name, verbose_name, format);
        self.attributes.push(attr);
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn primary_attribute(&self) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.format.primary)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub classes: Vec<ClassDef>,
    pub document_metadata: BTreeMap<String, String>,
}

impl Schema {
    pub fn new(classes: Vec<ClassDef>) -> Self {
        Schema {
            classes,
            document_metadata: BTreeMap::new(),
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassDef> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// Classes that get their own worksheet, in schema order.
    pub fn sheet_classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.iter().filter(|c| c.layout.has_sheet())
    }

    /// Whether `attr` is a relation into a `multiple_cells` class.
    pub fn is_embedding(&self, attr: &AttributeDef) -> bool {
        attr.format
            .target_class
            .as_deref()
            .and_then(|t| self.class(t))
            .is_some_and(|c| c.layout == Layout::MultipleCells)
    }

    /// Every relation in the schema that points at `target`.
    pub fn relations_into<'a>(
        &'a self,
        target: &'a str,
    ) -> impl Iterator<Item = &'a AttributeDef> + 'a {
        self.classes
            .iter()
            .flat_map(|c| c.attributes.iter())
            .filter(move |a| a.format.target_class.as_deref() == Some(target))
    }

    /// Structural equality ignoring document metadata.
    pub fn same_structure(&self, other: &Schema) -> bool {
        self.classes == other.classes
    }
}

/// Stable identifiers for schema coherence problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemaErrorCode {
    InvalidName,
    DuplicateClass,
    DuplicateAttribute,
    MultiplePrimary,
    EmptyVerboseName,
    ParentMismatch,
    MissingTarget,
    RelationArguments,
    PrimaryNotUnique,
    EmptyEnum,
    DuplicateRelatedName,
    RelatedNameClash,
    TargetWithoutPrimary,
    EmbeddedMultiValued,
    NestedEmbedding,
}

impl SchemaErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaErrorCode::InvalidName => "INVALID_NAME",
            SchemaErrorCode::DuplicateClass => "DUP_CLASS",
            SchemaErrorCode::DuplicateAttribute => "DUP_ATTRIBUTE",
            SchemaErrorCode::MultiplePrimary => "MULTIPLE_PRIMARY",
            SchemaErrorCode::EmptyVerboseName => "EMPTY_VERBOSE_NAME",
            SchemaErrorCode::ParentMismatch => "PARENT_MISMATCH",
            SchemaErrorCode::MissingTarget => "MISSING_TARGET",
            SchemaErrorCode::RelationArguments => "RELATION_ARGUMENTS",
            SchemaErrorCode::PrimaryNotUnique => "PRIMARY_NOT_UNIQUE",
            SchemaErrorCode::EmptyEnum => "EMPTY_ENUM",
            SchemaErrorCode::DuplicateRelatedName => "DUP_RELATED_NAME",
            SchemaErrorCode::RelatedNameClash => "RELATED_NAME_CLASH",
            SchemaErrorCode::TargetWithoutPrimary => "TARGET_WITHOUT_PRIMARY",
            SchemaErrorCode::EmbeddedMultiValued => "EMBEDDED_MULTI_VALUED",
            SchemaErrorCode::NestedEmbedding => "NESTED_EMBEDDING",
        }
    }
}

impl fmt::Display for SchemaErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    pub code: SchemaErrorCode,
    pub class: String,
    pub attribute: Option<String>,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.attribute {
            Some(attr) => write!(
                f,
                "{}.{}: {} ({})",
                self.class, attr, self.message, self.code
            ),
            None => write!(f, "{}: {} ({})", self.class, self.message, self.code),
        }
    }
}

impl std::error::Error for SchemaError {}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Returns every coherence problem in `schema`, in class/attribute order.
///
/// An empty list means the schema is usable for decoding. The scan never
/// stops early, so fixing one error never reveals another that was hidden.
pub fn validate_schema(schema: &Schema) -> Vec<SchemaError> {
    let mut errors = Vec::new();
    let mut push = |code, class: &str, attribute: Option<&str>, message: String| {
        errors.push(SchemaError {
            code,
            class: class.to_string(),
            attribute: attribute.map(str::to_string),
            message,
        })
    };

    let mut class_names = HashMap::new();
    for (index, class) in schema.classes.iter().enumerate() {
        if !is_identifier(&class.name) {
            push(
                SchemaErrorCode::InvalidName,
                &class.name,
                None,
                format!("class name '{}' is not an identifier", class.name),
            );
        }
        if class_names.insert(class.name.as_str(), index).is_some() {
            push(
                SchemaErrorCode::DuplicateClass,
                &class.name,
                None,
                format!("class '{}' is defined more than once", class.name),
            );
        }
        if class.verbose_name.trim().is_empty() {
            push(
                SchemaErrorCode::EmptyVerboseName,
                &class.name,
                None,
                "class verbose name is empty".to_string(),
            );
        }
    }

    // (target class, related_name) -> first attribute claiming it
    let mut related_names: HashMap<(&str, &str), (&str, &str)> = HashMap::new();

    for class in &schema.classes {
        let mut attribute_names = BTreeSet::new();
        let mut primaries = 0usize;
        for attr in &class.attributes {
            let name = Some(attr.name.as_str());
            if !is_identifier(&attr.name) {
                push(
                    SchemaErrorCode::InvalidName,
                    &class.name,
                    name,
                    format!("attribute name '{}' is not an identifier", attr.name),
                );
            }
            if !attribute_names.insert(attr.name.as_str()) {
                push(
                    SchemaErrorCode::DuplicateAttribute,
                    &class.name,
                    name,
                    format!("attribute '{}' is defined more than once", attr.name),
                );
            }
            if attr.parent_class != class.name {
                push(
                    SchemaErrorCode::ParentMismatch,
                    &class.name,
                    name,
                    format!(
                        "parent class '{}' does not match '{}'",
                        attr.parent_class, class.name
                    ),
                );
            }
            if attr.verbose_name.trim().is_empty() {
                push(
                    SchemaErrorCode::EmptyVerboseName,
                    &class.name,
                    name,
                    "attribute verbose name is empty".to_string(),
                );
            }

            let fmt = &attr.format;
            if fmt.primary {
                primaries += 1;
                if primaries == 2 {
                    push(
                        SchemaErrorCode::MultiplePrimary,
                        &class.name,
                        name,
                        "class has more than one primary attribute".to_string(),
                    );
                }
                if !fmt.unique {
                    push(
                        SchemaErrorCode::PrimaryNotUnique,
                        &class.name,
                        name,
                        "primary attribute must also be unique".to_string(),
                    );
                }
            }
            if fmt.kind == AttributeKind::Enum && fmt.enum_values.is_empty() {
                push(
                    SchemaErrorCode::EmptyEnum,
                    &class.name,
                    name,
                    "Enum attribute lists no values".to_string(),
                );
            }

            let is_relation = fmt.kind.is_relation();
            let has_relation_args = fmt.target_class.is_some() && fmt.related_name.is_some();
            let has_any_relation_arg = fmt.target_class.is_some() || fmt.related_name.is_some();
            if is_relation != has_relation_args || (!is_relation && has_any_relation_arg) {
                push(
                    SchemaErrorCode::RelationArguments,
                    &class.name,
                    name,
                    if is_relation {
                        format!("{} requires a target class and a related_name", fmt.kind)
                    } else {
                        format!(
                            "{} does not accept a target class or related_name",
                            fmt.kind
                        )
                    },
                );
            }
            if !is_relation {
                continue;
            }
            let Some(target_name) = fmt.target_class.as_deref() else {
                continue;
            };
            let Some(target) = schema.class(target_name) else {
                push(
                    SchemaErrorCode::MissingTarget,
                    &class.name,
                    name,
                    format!(
                        "relation target '{}' is not a class in the schema",
                        target_name
                    ),
                );
                continue;
            };

            if let Some(related) = fmt.related_name.as_deref() {
                if !is_identifier(related) {
                    push(
                        SchemaErrorCode::InvalidName,
                        &class.name,
                        name,
                        format!("related_name '{}' is not an identifier", related),
                    );
                }
                if let Some((other_class, other_attr)) =
                    related_names.insert((target_name, related), (&class.name, &attr.name))
                {
                    push(
                        SchemaErrorCode::DuplicateRelatedName,
                        &class.name,
                        name,
                        format!(
                            "related_name '{}' on '{}' is already used by {}.{}",
                            related, target_name, other_class, other_attr
                        ),
                    );
                }
                if target.attribute(related).is_some() {
                    push(
                        SchemaErrorCode::RelatedNameClash,
                        &class.name,
                        name,
                        format!(
                            "related_name '{}' clashes with attribute {}.{}",
                            related, target_name, related
                        ),
                    );
                }
            }

            if target.layout == Layout::MultipleCells {
                if !fmt.kind.is_single_valued_relation() {
                    push(
                        SchemaErrorCode::EmbeddedMultiValued,
                        &class.name,
                        name,
                        format!(
                            "{} cannot embed multiple_cells class '{}'",
                            fmt.kind, target_name
                        ),
                    );
                }
                if class.layout == Layout::MultipleCells {
                    push(
                        SchemaErrorCode::NestedEmbedding,
                        &class.name,
                        name,
                        "a multiple_cells class cannot embed another multiple_cells class"
                            .to_string(),
                    );
                }
            } else if target.primary_attribute().is_none() {
                push(
                    SchemaErrorCode::TargetWithoutPrimary,
                    &class.name,
                    name,
                    format!("relation target '{}' has no primary attribute", target_name),
                );
            }
        }
    }

    errors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::sample_schema;

    #[test]
    fn sample_schema_is_valid() {
        assert_eq!(validate_schema(&sample_schema()), vec![]);
    }

    #[test]
    fn empty_schema_is_valid() {
        assert!(validate_schema(&Schema::default()).is_empty());
    }

    #[test]
    fn renamed_target_yields_exactly_one_error() {
        let mut schema = sample_schema();
        let transcript = schema.class_mut("Transcript").unwrap();
        let gene = transcript
            .attributes
            .iter_mut()
            .find(|a| a.name == "gene")
            .unwrap();
        gene.format.target_class = Some("Genee".into());

        let errors = validate_schema(&schema);
        assert_eq!(errors.len(), 1, "{errors:?}");
        assert_eq!(errors[0].code, SchemaErrorCode::MissingTarget);
        assert_eq!(errors[0].class, "Transcript");
        assert_eq!(errors[0].attribute.as_deref(), Some("gene"));
        assert!(errors[0].message.contains("'Genee'"));
    }

    #[test]
    fn duplicate_related_name_is_reported() {
        let mut schema = sample_schema();
        let transcript = schema.class_mut("Transcript").unwrap();
        let loc = transcript
            .attributes
            .iter_mut()
            .find(|a| a.name == "location")
            .unwrap();
        loc.format.related_name = Some("genes".into());
        let codes: Vec<_> = validate_schema(&schema)
            .into_iter()
            .map(|e| e.code)
            .collect();
        assert_eq!(codes, vec![SchemaErrorCode::DuplicateRelatedName]);
    }

    #[test]
    fn keyless_relation_target_is_reported() {
        let mut schema = sample_schema();
        let gene = schema.class_mut("Gene").unwrap();
        gene.attributes[0].format.primary = false;
        let codes: Vec<_> = validate_schema(&schema)
            .into_iter()
            .map(|e| e.code)
            .collect();
        assert_eq!(codes, vec![SchemaErrorCode::TargetWithoutPrimary]);
    }

    #[test]
    fn structural_problems_are_all_reported() {
        let class = ClassDef::new("1bad", "", Layout::Row)
            .with_attribute(
                "a",
                "A",
                AttributeFormat::new(AttributeKind::String).primary(),
            )
            .with_attribute(
                "a",
                "A2",
                AttributeFormat::new(AttributeKind::Integer).primary(),
            )
            .with_attribute("e", "E", AttributeFormat::new(AttributeKind::Enum))
            .with_attribute("r", "R", AttributeFormat::new(AttributeKind::ManyToOne));
        let schema = Schema::new(vec![class.clone(), class]);
        let codes: BTreeSet<_> = validate_schema(&schema)
            .into_iter()
            .map(|e| e.code)
            .collect();
        for expected in [
            SchemaErrorCode::InvalidName,
            SchemaErrorCode::DuplicateClass,
            SchemaErrorCode::DuplicateAttribute,
            SchemaErrorCode::MultiplePrimary,
            SchemaErrorCode::EmptyVerboseName,
            SchemaErrorCode::EmptyEnum,
            SchemaErrorCode::RelationArguments,
        ] {
            assert!(codes.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn embedded_targets_must_be_single_valued() {
        let mut schema = sample_schema();
        let gene = schema.class_mut("Gene").unwrap();
        gene.attributes[2].format.kind = AttributeKind::ManyToMany;
        let codes: Vec<_> = validate_schema(&schema)
            .into_iter()
            .map(|e| e.code)
            .collect();
        assert_eq!(codes, vec![SchemaErrorCode::EmbeddedMultiValued]);
    }

    #[test]
    fn validation_is_deterministic() {
        let mut schema = sample_schema();
        schema.classes[1].attributes[1].format.target_class = Some("Nope".into());
        schema.classes[0].verbose_name.clear();
        assert_eq!(validate_schema(&schema), validate_schema(&schema));
    }
}
