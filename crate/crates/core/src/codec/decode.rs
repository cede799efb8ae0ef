use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use super::declaration::{Declaration, SheetType};
use super::{parse_cell, read_head, strip_heading, CodecError, SHEET_PREFIX};
use crate::dataset::{Dataset, Instance, Provenance, TocClaim, Value};
use crate::grid::{Grid, RawWorkbook};
use crate::schema::{ClassDef, Layout, Schema};
use crate::validation::{validate_dataset, Code, ReportEntry, ValidationReport};

type Rows = Vec<Vec<Option<String>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binding {
    Direct(usize),
    /// (embedding attribute of the owner, attribute of the embedded class)
    Grouped(usize, usize),
}

struct Group {
    /// Owner attribute index; `None` for an unrecognized group whose
    /// columns are skipped.
    attr: Option<usize>,
    bound: HashSet<usize>,
}

struct Plan {
    bindings: Vec<Option<Binding>>,
    data_start: usize,
}

struct SheetDecoder<'a> {
    grid: &'a Grid,
    class: &'a ClassDef,
    schema: &'a Schema,
    decl_row: usize,
    transposed: bool,
    issues: &'a mut Vec<ReportEntry>,
}

fn transpose(rows: &Rows) -> Rows {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .map(|c| rows.iter().map(|r| r[c].clone()).collect())
        .collect()
}

fn is_leaf_heading(text: &str) -> bool {
    strip_heading(text).is_some()
}

impl<'a> SheetDecoder<'a> {
    /// 1-based grid cell of body position (i, j).
    fn cell(&self, i: usize, j: usize) -> (usize, usize) {
        let first = self.decl_row + 2;
        if self.transposed {
            (first + j, i + 1)
        } else {
            (first + i, j + 1)
        }
    }

    fn issue(&mut self, code: Code, (i, j): (usize, usize), message: String) {
        let at = self.cell(i, j);
        self.issues
            .push(ReportEntry::new(code, &self.grid.name, at, message).on(&self.class.name, ""));
    }

    fn direct_attribute(&self, name: &str) -> Option<usize> {
        self.class
            .attributes
            .iter()
            .position(|a| a.verbose_name == name && !self.schema.is_embedding(a))
    }

    fn group_attribute(&self, name: &str) -> Option<usize> {
        self.class
            .attributes
            .iter()
            .position(|a| a.verbose_name == name && self.schema.is_embedding(a))
    }

    fn target(&self, group_attr: usize) -> &'a ClassDef {
        let (class, schema) = (self.class, self.schema);
        let attr = &class.attributes[group_attr];
        attr.format
            .target_class
            .as_deref()
            .and_then(|t| schema.class(t))
            .expect("embedding attributes have a target class")
    }

    fn bind_plain(
        &mut self,
        at: (usize, usize),
        text: Option<&str>,
        bound: &mut HashSet<usize>,
    ) -> Option<Binding> {
        let text = text?;
        let Some(name) = strip_heading(text) else {
            self.issue(
                Code::IgnoredColumn,
                at,
                format!("column {text:?} has no `!` heading and is ignored"),
            );
            return None;
        };
        match self.direct_attribute(name) {
            Some(ai) if bound.insert(ai) => Some(Binding::Direct(ai)),
            Some(_) => {
                self.issue(
                    Code::DuplicateHeading,
                    at,
                    format!("heading {text:?} appears more than once"),
                );
                None
            }
            None => {
                self.issue(
                    Code::UnknownHeading,
                    at,
                    format!("{text:?} does not name an attribute of {}", self.class.name),
                );
                None
            }
        }
    }

    fn plan(&mut self, body: &Rows) -> Plan {
        let width = body.first().map_or(0, Vec::len);
        // Two heading rows when the first names a group, or when the second
        // consists of headings only.
        let names_group = body[0]
            .iter()
            .flatten()
            .any(|t| strip_heading(t).is_some_and(|n| self.group_attribute(n).is_some()));
        let two_rows = body.len() >= 2
            && (names_group
                || (body[1].iter().any(Option::is_some)
                    && body[1].iter().flatten().all(|t| is_leaf_heading(t))));
        let mut bindings = vec![None; width];
        let mut bound_direct = HashSet::new();
        if !two_rows {
            for (j, binding) in bindings.iter_mut().enumerate() {
                *binding = self.bind_plain((0, j), body[0][j].as_deref(), &mut bound_direct);
            }
            return Plan {
                bindings,
                data_start: 1,
            };
        }

        let mut seen_groups = HashSet::new();
        let mut active: Option<Group> = None;
        for j in 0..width {
            let group_text = body[0][j].as_deref();
            let leaf = body[1][j].as_deref();
            if let Some(text) = group_text {
                match strip_heading(text) {
                    None => {
                        self.issue(
                            Code::IgnoredColumn,
                            (0, j),
                            format!("group cell {text:?} has no `!` prefix and is ignored"),
                        );
                        active = None;
                    }
                    Some(name) => {
                        let attr = match self.group_attribute(name) {
                            Some(ai) if seen_groups.insert(ai) => Some(ai),
                            Some(_) => {
                                self.issue(
                                    Code::DuplicateHeading,
                                    (0, j),
                                    format!("group {text:?} appears twice"),
                                );
                                None
                            }
                            None => {
                                self.issue(
                                    Code::UnknownHeading,
                                    (0, j),
                                    format!(
                                        "{text:?} does not name an embedded attribute of {}",
                                        self.class.name
                                    ),
                                );
                                None
                            }
                        };
                        let mut group = Group {
                            attr,
                            bound: HashSet::new(),
                        };
                        bindings[j] = self.bind_member(&mut group, (1, j), leaf, true);
                        active = Some(group);
                        continue;
                    }
                }
            }
            if let Some(mut group) = active.take() {
                let Some(leaf_text) = leaf else {
                    active = Some(group);
                    continue;
                };
                let stays = match (group.attr, strip_heading(leaf_text)) {
                    (Some(ai), Some(name)) => {
                        let target = self.target(ai);
                        target
                            .attributes
                            .iter()
                            .position(|a| a.verbose_name == name)
                            .is_some_and(|k| !group.bound.contains(&k))
                    }
                    (None, Some(name)) => self
                        .direct_attribute(name)
                        .is_none_or(|ai| bound_direct.contains(&ai)),
                    (_, None) => false,
                };
                if stays {
                    bindings[j] = self.bind_member(&mut group, (1, j), leaf, false);
                    active = Some(group);
                    continue;
                }
            }
            bindings[j] = self.bind_plain((1, j), leaf, &mut bound_direct);
        }
        Plan {
            bindings,
            data_start: 2,
        }
    }

    fn bind_member(
        &mut self,
        group: &mut Group,
        at: (usize, usize),
        leaf: Option<&str>,
        first: bool,
    ) -> Option<Binding> {
        let text = leaf?;
        let ai = group.attr?;
        let Some(name) = strip_heading(text) else {
            self.issue(
                Code::IgnoredColumn,
                at,
                format!("column {text:?} has no `!` heading and is ignored"),
            );
            return None;
        };
        let target = self.target(ai);
        match target
            .attributes
            .iter()
            .position(|a| a.verbose_name == name)
        {
            Some(k) if group.bound.insert(k) => Some(Binding::Grouped(ai, k)),
            Some(_) => {
                self.issue(
                    Code::DuplicateHeading,
                    at,
                    format!("heading {text:?} appears twice in its group"),
                );
                None
            }
            None => {
                let message = if first {
                    format!("{text:?} does not name an attribute of {}", target.name)
                } else {
                    format!("{text:?} does not name an attribute of {}", self.class.name)
                };
                self.issue(Code::UnknownHeading, at, message);
                None
            }
        }
    }

    fn decode(mut self, dataset: &mut Dataset) {
        let rows: Rows = self.grid.rows()[self.decl_row + 1..].to_vec();
        let body = if self.transposed {
            transpose(&rows)
        } else {
            rows
        };
        if body.is_empty() {
            return;
        }
        let plan = self.plan(&body);
        let class = self.class;
        let worksheet = self.grid.name.clone();

        for (i, row) in body.iter().enumerate().skip(plan.data_start) {
            if row.iter().all(Option::is_none) {
                continue;
            }
            let mut inst = Instance::new(class);
            let mut prov = Provenance {
                worksheet: worksheet.clone(),
                origin: self.cell(i, 0),
                ..Provenance::default()
            };
            // group attribute -> (instance, provenance, any non-empty cell)
            let mut groups: BTreeMap<usize, (Instance, Provenance, bool)> = BTreeMap::new();
            for (j, binding) in plan.bindings.iter().enumerate() {
                let Some(binding) = *binding else { continue };
                let text = row[j].as_deref().unwrap_or("");
                let at = self.cell(i, j);
                match binding {
                    Binding::Direct(ai) => {
                        let attr = &class.attributes[ai];
                        prov.cells.insert(attr.name.clone(), at);
                        match parse_cell(&attr.format, text) {
                            Ok(value) => {
                                inst.set(&attr.name, value);
                            }
                            Err(e) => {
                                self.issues.push(
                                    ReportEntry::new(e.code, &worksheet, at, e.message)
                                        .on(&class.name, &attr.name),
                                );
                                prov.failed.insert(attr.name.clone());
                            }
                        }
                    }
                    Binding::Grouped(ai, k) => {
                        let target = self.target(ai);
                        let owner_attr = &class.attributes[ai];
                        prov.cells.entry(owner_attr.name.clone()).or_insert(at);
                        let (inner, inner_prov, any) = groups.entry(ai).or_insert_with(|| {
                            let p = Provenance {
                                worksheet: worksheet.clone(),
                                origin: at,
                                ..Provenance::default()
                            };
                            (Instance::new(target), p, false)
                        });
                        let attr = &target.attributes[k];
                        inner_prov.cells.insert(attr.name.clone(), at);
                        if !text.trim().is_empty() {
                            *any = true;
                        }
                        match parse_cell(&attr.format, text) {
                            Ok(value) => {
                                inner.set(&attr.name, value);
                            }
                            Err(e) => {
                                self.issues.push(
                                    ReportEntry::new(e.code, &worksheet, at, e.message)
                                        .on(&target.name, &attr.name),
                                );
                                inner_prov.failed.insert(attr.name.clone());
                            }
                        }
                    }
                }
            }
            for (ai, (mut inner, inner_prov, any)) in groups {
                if any {
                    inner.provenance = Some(inner_prov);
                    inst.set(&class.attributes[ai].name, Value::Embedded(Box::new(inner)));
                }
            }
            inst.provenance = Some(prov);
            dataset.push(inst);
        }
    }
}

fn bad_declaration(grid: &Grid, row: usize, message: String) -> ReportEntry {
    ReportEntry::new(Code::BadDeclaration, &grid.name, (row + 1, 1), message)
}

/// Decodes every Data worksheet of `workbook` against `schema` and
/// validates the result. Cell-level problems go into the report; only
/// container-level problems fail.
pub fn decode_dataset(
    workbook: &RawWorkbook,
    schema: &Schema,
) -> Result<(Dataset, ValidationReport), CodecError> {
    let schema = Arc::new(schema.clone());
    let mut dataset = Dataset::new(Arc::clone(&schema));
    let mut issues = Vec::new();
    let mut decoded: HashMap<&str, String> = HashMap::new();
    let mut failed: HashSet<&str> = HashSet::new();
    let mut tocs: Vec<(&Grid, usize)> = Vec::new();
    let mut document: Option<Declaration> = None;

    for grid in &workbook.grids {
        if grid.is_empty() {
            continue;
        }
        let head = read_head(grid);
        match head.document {
            Some(Ok(d)) => match &document {
                None => {
                    for (k, v) in &d.pairs {
                        dataset.document_metadata.insert(k.clone(), v.clone());
                    }
                    document = Some(d);
                }
                Some(first)
                    if first.pairs.iter().collect::<BTreeMap<_, _>>()
                        == d.pairs.iter().collect() => {}
                Some(_) => issues.push(ReportEntry::new(
                    Code::DeclarationMismatch,
                    &grid.name,
                    (1, 1),
                    "document declaration differs from the one seen earlier",
                )),
            },
            Some(Err(e)) => issues.push(bad_declaration(
                grid,
                0,
                format!("malformed document declaration: {e}"),
            )),
            None => {}
        }
        let (row, declaration) = match head.sheet {
            Some((row, Ok(d))) => (row, d),
            Some((row, Err(e))) => {
                issues.push(bad_declaration(
                    grid,
                    row,
                    format!("malformed sheet declaration: {e}"),
                ));
                failed.insert(&grid.name);
                continue;
            }
            None => {
                let has_document_row = grid.get(0, 0).is_some_and(|t| t.trim().starts_with("!!!"));
                if grid.name.starts_with(SHEET_PREFIX) && !has_document_row {
                    return Err(CodecError::MissingDeclaration {
                        worksheet: grid.name.clone(),
                    });
                }
                continue;
            }
        };
        match declaration.sheet_type() {
            Some(SheetType::Data) => {
                let class_name = declaration.class().unwrap_or_default();
                let class = schema
                    .class(class_name)
                    .ok_or_else(|| CodecError::UnknownClass {
                        worksheet: grid.name.clone(),
                        class: class_name.to_string(),
                    })?;
                if !class.layout.has_sheet() {
                    return Err(CodecError::EmbeddedClassSheet {
                        worksheet: grid.name.clone(),
                        class: class_name.to_string(),
                    });
                }
                SheetDecoder {
                    grid,
                    class,
                    schema: &schema,
                    decl_row: row,
                    transposed: class.layout == Layout::Column,
                    issues: &mut issues,
                }
                .decode(&mut dataset);
                decoded.insert(&grid.name, class.name.clone());
            }
            Some(SheetType::TableOfContents) => tocs.push((grid, row)),
            _ => {}
        }
    }

    for (grid, row) in tocs {
        let heading_row = row + 1;
        let mut columns: HashMap<&str, usize> = HashMap::new();
        for col in 0..grid.width() {
            if let Some(name) = grid.get(heading_row, col).and_then(strip_heading) {
                columns.entry(name).or_insert(col);
            }
        }
        let Some(&worksheet_col) = columns.get("Worksheet") else {
            continue;
        };
        let objects_col = columns.get("Objects").copied();
        for r in heading_row + 1..grid.height() {
            let Some(listed) = grid.get(r, worksheet_col).map(str::trim) else {
                continue;
            };
            let prefixed = format!("{SHEET_PREFIX}{listed}");
            let names = [prefixed.as_str(), listed];
            if names.iter().any(|n| failed.contains(n)) {
                continue;
            }
            let class = names.iter().find_map(|n| decoded.get(n)).cloned();
            let claimed = objects_col.and_then(|c| grid.get(r, c)).map(str::to_string);
            dataset.annotations.toc.push(TocClaim {
                toc_sheet: grid.name.clone(),
                row: r + 1,
                column: objects_col.unwrap_or(worksheet_col) + 1,
                worksheet: listed.to_string(),
                class,
                claimed,
            });
        }
    }

    dataset.annotations.issues = issues;
    let report = validate_dataset(&dataset, &schema);
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ContainerFormat;
    use crate::schema::{AttributeFormat, AttributeKind};
    use crate::testing::{sample_dataset, sample_delimited_workbook, sample_schema, sample_workbook};

    fn decode(workbook: &RawWorkbook) -> (Dataset, ValidationReport) {
        decode_dataset(workbook, &sample_schema()).unwrap()
    }

    fn set(workbook: &mut RawWorkbook, sheet: &str, row: usize, col: usize, text: &str) {
        let grid = workbook.grids.iter_mut().find(|g| g.name == sheet).unwrap();
        grid.set(row, col, text);
    }

    #[test]
    fn sample_decodes_cleanly() {
        let (dataset, report) = decode(&sample_workbook());
        assert_eq!(report.entries, vec![]);
        assert_eq!(dataset, sample_dataset());
        assert_eq!(
            (
                dataset.count("Gene"),
                dataset.count("Transcript"),
                dataset.count("Location")
            ),
            (2, 4, 6)
        );
        assert_eq!(
            dataset
                .related("Gene", "ENSG00000130203", "transcripts")
                .len(),
            2
        );
        let apoe = dataset.find("Gene", "ENSG00000130203").unwrap();
        let Value::Embedded(location) = apoe.get("location") else {
            panic!()
        };
        assert_eq!(location.get("five_prime"), &Value::Integer(44905791));
    }

    #[test]
    fn delimited_variant_matches() {
        let (csv, report) = decode(&sample_delimited_workbook(ContainerFormat::CsvDir));
        assert_eq!(report.entries, vec![]);
        assert_eq!(csv, decode(&sample_workbook()).0);
    }

    #[test]
    fn provenance_points_at_cells() {
        let (dataset, _) = decode(&sample_workbook());
        let brca2 = dataset.find("Gene", "ENSG00000139618").unwrap();
        let prov = brca2.provenance.as_ref().unwrap();
        assert_eq!(prov.worksheet, "!!Genes");
        assert_eq!(prov.cell("symbol"), (5, 2));
        let Value::Embedded(location) = brca2.get("location") else {
            panic!()
        };
        assert_eq!(
            location.provenance.as_ref().unwrap().cell("three_prime"),
            (5, 5)
        );
    }

    #[test]
    fn document_declaration_only_is_empty() {
        let workbook = RawWorkbook::new(
            vec![Grid::from_rows(
                "Sheet1",
                [["!!!ObjTables objTablesVersion='1.0.0'"]],
            )],
            ContainerFormat::Xlsx,
        );
        let (dataset, report) = decode(&workbook);
        assert!(dataset.is_empty());
        assert!(report.entries.is_empty());
    }

    #[test]
    fn dangling_gene_reference() {
        let mut workbook = sample_workbook();
        set(
            &mut workbook,
            "!!Transcript variants",
            3,
            1,
            "ENSG00000000000",
        );
        let (_, report) = decode(&workbook);
        assert_eq!(report.entries.len(), 1);
        let e = &report.entries[0];
        assert_eq!(
            (e.code, e.worksheet.as_str(), e.cell.as_str()),
            (Code::UnresolvedRef, "!!Transcript variants", "B4")
        );
    }

    #[test]
    fn malformed_grouping_suppresses_missing_required() {
        let mut workbook = sample_workbook();
        set(&mut workbook, "!!Genes", 3, 3, "4,49,05");
        let (_, report) = decode(&workbook);
        let codes: Vec<_> = report
            .entries
            .iter()
            .map(|e| (e.code, e.cell.as_str()))
            .collect();
        assert_eq!(codes, [(Code::BadType, "D4")]);
    }

    #[test]
    fn unknown_and_ignored_headings() {
        let mut workbook = sample_workbook();
        set(&mut workbook, "!!Genes", 2, 1, "!Symbl");
        set(&mut workbook, "!!Genes", 2, 5, "Notes");
        set(&mut workbook, "!!Genes", 3, 5, "hello");
        let (dataset, report) = decode(&workbook);
        let codes: Vec<_> = report
            .entries
            .iter()
            .map(|e| (e.code, e.cell.as_str()))
            .collect();
        assert_eq!(
            codes,
            [(Code::UnknownHeading, "B3"), (Code::IgnoredColumn, "F3")]
        );
        assert!(dataset
            .instances("Gene")
            .iter()
            .all(|g| g.get("symbol").is_null()));
    }

    #[test]
    fn bad_sheet_declaration_is_reported_and_skipped() {
        let mut workbook = sample_workbook();
        set(
            &mut workbook,
            "!!Transcript variants",
            0,
            0,
            "!!ObjTables type='Data'",
        );
        let (dataset, report) = decode(&workbook);
        assert_eq!(dataset.count("Transcript"), 0);
        let codes: Vec<_> = report
            .entries
            .iter()
            .map(|e| (e.code, e.cell.as_str()))
            .collect();
        assert_eq!(codes, [(Code::BadDeclaration, "A1")]);
    }

    #[test]
    fn toc_mismatch_is_a_warning() {
        let mut workbook = sample_workbook();
        set(&mut workbook, "!!_Table of contents", 3, 2, "3");
        let (_, report) = decode(&workbook);
        assert_eq!(report.errors, 0);
        assert_eq!(report.warnings, 1);
        assert_eq!(report.entries[0].cell, "C4");
    }

    #[test]
    fn container_errors() {
        let schema = sample_schema();
        let unknown = RawWorkbook::new(
            vec![Grid::from_rows(
                "!!Things",
                [["!!ObjTables type='Data' class='Thing'"]],
            )],
            ContainerFormat::Xlsx,
        );
        assert!(matches!(
            decode_dataset(&unknown, &schema),
            Err(CodecError::UnknownClass { .. })
        ));
        let bare = RawWorkbook::new(
            vec![Grid::from_rows("!!Genes", [["!Id"]])],
            ContainerFormat::Xlsx,
        );
        assert!(matches!(
            decode_dataset(&bare, &schema),
            Err(CodecError::MissingDeclaration { .. })
        ));
    }

    #[test]
    fn column_layout_reads_transposed() {
        let mut schema = Schema::new(vec![ClassDef::new("Param", "Parameter", Layout::Column)
            .with_attribute(
                "id",
                "Id",
                AttributeFormat::new(AttributeKind::String).primary(),
            )
            .with_attribute("value", "Value", AttributeFormat::new(AttributeKind::Float))]);
        schema.document_metadata.clear();
        let grid = Grid::from_rows(
            "!!Parameters",
            [
                vec!["!!ObjTables type='Data' class='Param'"],
                vec!["!Id", "k1", "k2"],
                vec!["!Value", "0.5", "x"],
            ],
        );
        let workbook = RawWorkbook::new(vec![grid], ContainerFormat::Xlsx);
        let (dataset, report) = decode_dataset(&workbook, &schema).unwrap();
        assert_eq!(dataset.instances("Param").len(), 2);
        assert_eq!(
            dataset.instances("Param")[0].get("value"),
            &Value::Float(0.5)
        );
        let codes: Vec<_> = report
            .entries
            .iter()
            .map(|e| (e.code, e.cell.as_str()))
            .collect();
        assert_eq!(codes, [(Code::BadType, "C3")]);
    }
}
