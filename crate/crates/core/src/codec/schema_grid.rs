//! The `!!_Schema` worksheet: classes and attributes in tabular form.

use std::collections::HashMap;
use std::fmt;

use super::declaration::{Declaration, DeclarationLevel, SheetType};
use super::{read_head, strip_heading};
use crate::format::parse_attribute_format;
use crate::grid::{Grid, RawWorkbook};
use crate::schema::{
    validate_schema, AttributeDef, ClassDef, Layout, Schema, SchemaError, SchemaErrorCode,
};
use crate::validation::{Code, ReportEntry};

pub const SCHEMA_SHEET: &str = "!!_Schema";

const NAME: &str = "Name";
const TYPE: &str = "Type";
const PARENT: &str = "Parent";
const FORMAT: &str = "Format";
const VERBOSE: &str = "Verbose name";
const DESCRIPTION: &str = "Description";

/// Every problem found while reading a schema worksheet, located at cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaLoadError {
    pub entries: Vec<ReportEntry>,
}

impl fmt::Display for SchemaLoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}!{}: {} ({})", e.worksheet, e.cell, e.message, e.code)?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaLoadError {}

/// A parsed schema worksheet that remembers where each definition lives.
#[derive(Debug, Clone)]
pub struct SchemaSheet {
    pub schema: Schema,
    pub worksheet: String,
    columns: HashMap<&'static str, usize>,
    class_rows: HashMap<String, usize>,
    attribute_rows: HashMap<(String, String), usize>,
}

impl SchemaSheet {
    fn cell(&self, row: usize, heading: &'static str) -> (usize, usize) {
        let column = self
            .columns
            .get(heading)
            .or_else(|| self.columns.get(NAME))
            .copied()
            .unwrap_or(0);
        (row + 1, column + 1)
    }

    /// Report entry for a coherence error, placed on the offending row.
    pub fn locate(&self, error: &SchemaError) -> ReportEntry {
        let heading = match error.code {
            SchemaErrorCode::InvalidName
            | SchemaErrorCode::DuplicateClass
            | SchemaErrorCode::DuplicateAttribute => NAME,
            SchemaErrorCode::EmptyVerboseName => VERBOSE,
            SchemaErrorCode::ParentMismatch => PARENT,
            _ => FORMAT,
        };
        let row = match &error.attribute {
            Some(attr) => self
                .attribute_rows
                .get(&(error.class.clone(), attr.clone()))
                .copied(),
            None => self.class_rows.get(&error.class).copied(),
        };
        let at = row.map_or((0, 0), |r| self.cell(r, heading));
        ReportEntry::new(
            Code::Schema(error.code),
            &self.worksheet,
            at,
            error.message.clone(),
        )
        .on(&error.class, error.attribute.as_deref().unwrap_or_default())
    }
}

/// Reads the worksheet without checking schema coherence.
pub fn read_schema_sheet(grid: &Grid) -> Result<SchemaSheet, SchemaLoadError> {
    let name = grid.name.as_str();
    let fail = |code: Code, at: (usize, usize), message: String| SchemaLoadError {
        entries: vec![ReportEntry::new(code, name, at, message)],
    };
    let head = read_head(grid);
    let (decl_row, declaration) = match head.sheet {
        Some((row, Ok(d))) => (row, d),
        Some((row, Err(e))) => {
            return Err(fail(
                Code::BadDeclaration,
                (row + 1, 1),
                format!("malformed declaration: {e}"),
            ))
        }
        None => {
            return Err(fail(
                Code::BadDeclaration,
                (1, 1),
                "schema worksheet has no declaration".into(),
            ))
        }
    };
    if declaration.sheet_type() != Some(SheetType::Schema) {
        return Err(fail(
            Code::BadDeclaration,
            (decl_row + 1, 1),
            "worksheet is not declared type='Schema'".into(),
        ));
    }
    let mut schema = Schema::default();
    for (k, v) in &declaration.pairs {
        if k != "type" {
            schema.document_metadata.insert(k.clone(), v.clone());
        }
    }
    let mut sheet = SchemaSheet {
        schema,
        worksheet: name.to_string(),
        columns: HashMap::new(),
        class_rows: HashMap::new(),
        attribute_rows: HashMap::new(),
    };
    let heading_row = decl_row + 1;
    if heading_row >= grid.height() {
        return Ok(sheet);
    }

    let mut entries = Vec::new();
    for col in 0..grid.width() {
        let Some(text) = grid.get(heading_row, col) else {
            continue;
        };
        let known = [NAME, TYPE, PARENT, FORMAT, VERBOSE, DESCRIPTION];
        match strip_heading(text).and_then(|h| known.into_iter().find(|k| *k == h)) {
            Some(heading) => {
                if sheet.columns.insert(heading, col).is_some() {
                    entries.push(ReportEntry::new(
                        Code::DuplicateHeading,
                        name,
                        (heading_row + 1, col + 1),
                        format!("heading {text:?} appears twice"),
                    ));
                }
            }
            None => entries.push(ReportEntry::new(
                Code::UnknownHeading,
                name,
                (heading_row + 1, col + 1),
                format!("{text:?} is not a schema heading"),
            )),
        }
    }
    for required in [NAME, TYPE, PARENT, FORMAT] {
        if !sheet.columns.contains_key(required) {
            entries.push(ReportEntry::new(
                Code::BadSchemaRow,
                name,
                (heading_row + 1, 1),
                format!("schema worksheet lacks the !{required} column"),
            ));
        }
    }
    if !entries.is_empty() {
        return Err(SchemaLoadError { entries });
    }

    let columns = sheet.columns.clone();
    let locate = |row: usize, heading: &str| {
        let column = columns
            .get(heading)
            .or_else(|| columns.get(NAME))
            .copied()
            .unwrap_or(0);
        (row + 1, column + 1)
    };
    let text = |row: usize, heading: &str| -> String {
        columns
            .get(heading)
            .and_then(|&c| grid.get(row, c))
            .map(|s| s.trim().to_string())
            .unwrap_or_default()
    };
    let all_classes: Vec<String> = (heading_row + 1..grid.height())
        .filter(|&r| text(r, TYPE) == "Class")
        .map(|r| text(r, NAME))
        .collect();

    let mut current: Option<usize> = None;
    for row in heading_row + 1..grid.height() {
        if grid.rows()[row].iter().all(Option::is_none) {
            continue;
        }
        let name_text = text(row, NAME);
        let verbose = Some(text(row, VERBOSE))
            .filter(|v| !v.is_empty())
            .unwrap_or_else(|| name_text.clone());
        let description = Some(text(row, DESCRIPTION)).filter(|d| !d.is_empty());
        let at = |heading| locate(row, heading);
        match text(row, TYPE).as_str() {
            "Class" => {
                let format_text = text(row, FORMAT);
                let Some(layout) = Layout::parse(&format_text) else {
                    entries.push(ReportEntry::new(
                        Code::BadFormat,
                        name,
                        at(FORMAT),
                        format!("row {}: {format_text:?} is not a layout (row, column or multiple_cells)", row + 1),
                    ));
                    current = None;
                    continue;
                };
                let mut class = ClassDef::new(&name_text, &verbose, layout);
                class.description = description;
                sheet.class_rows.insert(name_text.clone(), row);
                sheet.schema.classes.push(class);
                current = Some(sheet.schema.classes.len() - 1);
            }
            "Attribute" => {
                let Some(index) = current else {
                    entries.push(ReportEntry::new(
                        Code::BadSchemaRow,
                        name,
                        at(TYPE),
                        format!(
                            "row {}: attribute {name_text:?} does not follow a class row",
                            row + 1
                        ),
                    ));
                    continue;
                };
                let class_name = sheet.schema.classes[index].name.clone();
                let parent = text(row, PARENT);
                if !parent.is_empty() && parent != class_name {
                    let message = if all_classes.contains(&parent) {
                        format!(
                            "row {}: attribute {name_text:?} sits under class {class_name:?} but names parent {parent:?}",
                            row + 1
                        )
                    } else {
                        format!("row {}: unknown parent class {parent:?}", row + 1)
                    };
                    entries.push(
                        ReportEntry::new(Code::BadSchemaRow, name, at(PARENT), message)
                            .on(&parent, &name_text),
                    );
                    continue;
                }
                let format_text = text(row, FORMAT);
                let format = match parse_attribute_format(&format_text) {
                    Ok(f) => f,
                    Err(e) => {
                        entries.push(
                            ReportEntry::new(
                                Code::BadFormat,
                                name,
                                at(FORMAT),
                                format!("row {}: {format_text:?}: {e}", row + 1),
                            )
                            .on(&class_name, &name_text),
                        );
                        continue;
                    }
                };
                let mut attr = AttributeDef::new(&class_name, &name_text, &verbose, format);
                attr.description = description;
                sheet.attribute_rows.insert((class_name, name_text), row);
                sheet.schema.classes[index].attributes.push(attr);
            }
            other => entries.push(ReportEntry::new(
                Code::BadSchemaRow,
                name,
                at(TYPE),
                format!(
                    "row {}: !Type must be Class or Attribute, not {other:?}",
                    row + 1
                ),
            )),
        }
    }
    if entries.is_empty() {
        Ok(sheet)
    } else {
        Err(SchemaLoadError { entries })
    }
}

/// Reads a schema worksheet and checks it; any problem aborts.
pub fn parse_schema_grid(grid: &Grid) -> Result<Schema, SchemaLoadError> {
    let sheet = read_schema_sheet(grid)?;
    let errors = validate_schema(&sheet.schema);
    if errors.is_empty() {
        Ok(sheet.schema)
    } else {
        Err(SchemaLoadError {
            entries: errors.iter().map(|e| sheet.locate(e)).collect(),
        })
    }
}

/// The first grid declared `type='Schema'`.
pub fn find_schema_grid(workbook: &RawWorkbook) -> Option<&Grid> {
    workbook.grids.iter().find(|g| {
        matches!(read_head(g).sheet, Some((_, Ok(ref d))) if d.sheet_type() == Some(SheetType::Schema))
    })
}

pub fn encode_schema_grid(schema: &Schema) -> Grid {
    let mut declaration = Declaration::sheet(SheetType::Schema);
    debug_assert_eq!(declaration.level, DeclarationLevel::Sheet);
    for (k, v) in &schema.document_metadata {
        declaration = declaration.with(k, v);
    }
    let described = schema
        .classes
        .iter()
        .any(|c| c.description.is_some() || c.attributes.iter().any(|a| a.description.is_some()));
    let mut headings = vec!["!Name", "!Type", "!Parent", "!Format", "!Verbose name"];
    if described {
        headings.push("!Description");
    }
    let mut rows: Vec<Vec<String>> = vec![
        vec![declaration.to_string()],
        headings.iter().map(|h| h.to_string()).collect(),
    ];
    for class in &schema.classes {
        let mut row = vec![
            class.name.clone(),
            "Class".into(),
            String::new(),
            class.layout.as_str().into(),
            class.verbose_name.clone(),
        ];
        if described {
            row.push(class.description.clone().unwrap_or_default());
        }
        rows.push(row);
        for attr in &class.attributes {
            let mut row = vec![
                attr.name.clone(),
                "Attribute".into(),
                class.name.clone(),
                attr.format.to_string(),
                attr.verbose_name.clone(),
            ];
            if described {
                row.push(attr.description.clone().unwrap_or_default());
            }
            rows.push(row);
        }
    }
    Grid::from_rows(SCHEMA_SHEET, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{sample_schema, sample_workbook, SCHEMA_ROWS};

    fn sample_schema_grid(mutate: impl FnOnce(&mut Vec<Vec<String>>)) -> Grid {
        let mut rows: Vec<Vec<String>> = vec![
            vec!["!!ObjTables type='Schema'".into()],
            ["!Name", "!Type", "!Parent", "!Format", "!Verbose name"]
                .map(String::from)
                .to_vec(),
        ];
        rows.extend(SCHEMA_ROWS.iter().map(|r| r.map(String::from).to_vec()));
        mutate(&mut rows);
        Grid::from_rows(SCHEMA_SHEET, rows)
    }

    #[test]
    fn sample_schema_grid_parses() {
        let schema = parse_schema_grid(&sample_schema_grid(|_| {})).unwrap();
        assert_eq!(schema, sample_schema());
        let counts: Vec<_> = schema.classes.iter().map(|c| c.attributes.len()).collect();
        assert_eq!(counts, [3, 3, 3]);
        assert_eq!(
            schema.class("Location").unwrap().layout,
            Layout::MultipleCells
        );
    }

    #[test]
    fn workbook_schema_is_found() {
        let workbook = sample_workbook();
        let grid = find_schema_grid(&workbook).unwrap();
        assert_eq!(parse_schema_grid(grid).unwrap(), sample_schema());
    }

    #[test]
    fn declaration_only_is_empty_schema() {
        let grid = Grid::from_rows(SCHEMA_SHEET, [["!!ObjTables type='Schema'"]]);
        assert_eq!(parse_schema_grid(&grid).unwrap(), Schema::default());
    }

    #[test]
    fn wrong_parent_names_the_row() {
        // grid row 13 holds the Location.five_prime attribute
        let grid = sample_schema_grid(|rows| rows[12][2] = "Gene".into());
        let err = parse_schema_grid(&grid).unwrap_err();
        assert_eq!(err.entries.len(), 1);
        let entry = &err.entries[0];
        assert_eq!(
            (entry.row, entry.column, entry.code),
            (13, 3, Code::BadSchemaRow)
        );
        assert!(entry.message.starts_with("row 13:"), "{}", entry.message);
    }

    #[test]
    fn unknown_parent_and_type() {
        let grid = sample_schema_grid(|rows| {
            rows[3][2] = "Genee".into();
            rows[4][1] = "Attr".into();
        });
        let err = parse_schema_grid(&grid).unwrap_err();
        let codes: Vec<_> = err.entries.iter().map(|e| (e.row, e.code)).collect();
        assert_eq!(codes, [(4, Code::BadSchemaRow), (5, Code::BadSchemaRow)]);
        assert!(err.entries[0].message.contains("unknown parent"));
    }

    #[test]
    fn duplicate_related_name_is_located() {
        let grid = sample_schema_grid(|rows| {
            rows[9][3] = "OneToOne('Location', related_name='genes')".into();
        });
        let err = parse_schema_grid(&grid).unwrap_err();
        assert_eq!(err.entries.len(), 1);
        let e = &err.entries[0];
        assert_eq!(e.code, Code::Schema(SchemaErrorCode::DuplicateRelatedName));
        assert_eq!(
            (e.row, e.column, e.class.as_str(), e.attribute.as_str()),
            (10, 4, "Transcript", "location")
        );
    }

    #[test]
    fn bad_format_is_reported_at_format_cell() {
        let grid = sample_schema_grid(|rows| rows[4][3] = "Strin".into());
        let err = parse_schema_grid(&grid).unwrap_err();
        assert_eq!(
            (
                err.entries[0].row,
                err.entries[0].column,
                err.entries[0].code
            ),
            (5, 4, Code::BadFormat)
        );
    }

    #[test]
    fn encode_then_parse() {
        let mut schema = sample_schema();
        schema.classes[0].description = Some("A gene".into());
        assert_eq!(
            parse_schema_grid(&encode_schema_grid(&schema)).unwrap(),
            schema
        );
        assert_eq!(encode_schema_grid(&sample_schema()), sample_schema_grid(|_| {}));
    }
}
