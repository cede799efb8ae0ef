use std::collections::BTreeMap;

use thiserror::Error;

use super::declaration::{Declaration, SheetType};
use super::{encode_schema_grid, format_cell, read_head, strip_heading, SHEET_PREFIX, TOC_SHEET};
use crate::dataset::{Dataset, Instance, Value, FORMAT_VERSION_KEY};
use crate::grid::{CellStyle, ContainerFormat, Grid, GridError, RawWorkbook};
use crate::schema::{ClassDef, Layout, Schema};

/// Light blue heading fill used by pretty output.
pub const HEADING_FILL: u32 = 0xDDEBF7;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SheetInfo {
    /// Worksheet name without the `!!` prefix.
    pub title: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeOptions {
    pub toc: bool,
    pub pretty: bool,
    pub schema_sheet: bool,
    /// Per-class worksheet titles and TOC descriptions.
    pub sheets: BTreeMap<String, SheetInfo>,
    /// Target container; decides where the document declaration goes.
    pub container: ContainerFormat,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            toc: false,
            pretty: false,
            schema_sheet: true,
            sheets: BTreeMap::new(),
            container: ContainerFormat::Xlsx,
        }
    }
}

impl EncodeOptions {
    /// Keeps the sheet titles, TOC descriptions and TOC presence of an
    /// existing workbook so that re-encoding it changes as little as possible.
    pub fn from_workbook(workbook: &RawWorkbook) -> Self {
        let mut options = EncodeOptions {
            container: workbook.source_format,
            ..EncodeOptions::default()
        };
        let mut descriptions: BTreeMap<String, String> = BTreeMap::new();
        for grid in &workbook.grids {
            let Some((row, Ok(declaration))) = read_head(grid).sheet else {
                continue;
            };
            match declaration.sheet_type() {
                Some(SheetType::Data) => {
                    let class = declaration.class().unwrap_or_default().to_string();
                    let title = grid
                        .name
                        .strip_prefix(SHEET_PREFIX)
                        .unwrap_or(&grid.name)
                        .to_string();
                    options.sheets.entry(class).or_insert(SheetInfo {
                        title,
                        description: None,
                    });
                }
                Some(SheetType::TableOfContents) => {
                    options.toc = true;
                    let heading = row + 1;
                    let find = |name: &str| {
                        (0..grid.width())
                            .find(|&c| grid.get(heading, c).and_then(strip_heading) == Some(name))
                    };
                    let (Some(ws), Some(desc)) = (find("Worksheet"), find("Description")) else {
                        continue;
                    };
                    for r in heading + 1..grid.height() {
                        if let (Some(w), Some(d)) = (grid.get(r, ws), grid.get(r, desc)) {
                            descriptions.insert(w.trim().to_string(), d.to_string());
                        }
                    }
                }
                _ => {}
            }
        }
        for info in options.sheets.values_mut() {
            info.description = descriptions.get(&info.title).cloned();
        }
        options
    }

    pub fn with_toc(mut self, toc: bool) -> Self {
        self.toc = toc;
        self
    }

    pub fn with_pretty(mut self, pretty: bool) -> Self {
        self.pretty = pretty;
        self
    }

    pub fn with_container(mut self, container: ContainerFormat) -> Self {
        self.container = container;
        self
    }

    fn title(&self, class: &ClassDef) -> String {
        self.sheets
            .get(&class.name)
            .map_or_else(|| class.verbose_name.clone(), |s| s.title.clone())
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("dataset holds instances of {class:?}, which the schema does not define")]
    UnknownClass { class: String },
    #[error("{class:?} is multiple_cells and can only appear embedded in its owner")]
    EmbeddedOnly { class: String },
    #[error("{class}.{attribute} refers to {target:?}, which has no primary attribute")]
    KeylessTarget {
        class: String,
        attribute: String,
        target: String,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Grid under construction: string rows plus style hints.
#[derive(Default)]
struct Sheet {
    rows: Vec<Vec<String>>,
    styles: BTreeMap<(usize, usize), CellStyle>,
}

impl Sheet {
    fn put(&mut self, row: usize, col: usize, text: String) {
        while self.rows.len() <= row {
            self.rows.push(Vec::new());
        }
        let r = &mut self.rows[row];
        if r.len() <= col {
            r.resize(col + 1, String::new());
        }
        r[col] = text;
    }

    fn style(&mut self, row: usize, col: usize) -> &mut CellStyle {
        self.styles.entry((row, col)).or_default()
    }

    fn heading(
        &mut self,
        row: usize,
        col: usize,
        text: String,
        note: Option<String>,
        pretty: bool,
    ) {
        self.put(row, col, text);
        if pretty {
            let style = self.style(row, col);
            style.bold = true;
            style.fill = Some(HEADING_FILL);
            style.note = note;
        }
    }

    fn transposed(self) -> Sheet {
        let mut out = Sheet::default();
        for (r, row) in self.rows.into_iter().enumerate() {
            for (c, text) in row.into_iter().enumerate() {
                out.put(c, r, text);
            }
        }
        out.styles = self
            .styles
            .into_iter()
            .map(|((r, c), s)| ((c, r), s))
            .collect();
        out
    }

    /// Places `header` lines above the body and builds the grid.
    fn finish(self, name: String, header: &[String]) -> Grid {
        let offset = header.len();
        let rows: Vec<Vec<String>> = header
            .iter()
            .map(|h| vec![h.clone()])
            .chain(self.rows)
            .collect();
        let mut grid = Grid::from_rows(name, rows);
        for ((r, c), style) in self.styles {
            *grid.style_mut(r + offset, c) = style;
        }
        grid
    }
}

/// The `!!!ObjTables` line for `metadata`, version key first; `None` when
/// there is no metadata.
pub fn document_declaration(metadata: &BTreeMap<String, String>) -> Option<String> {
    if metadata.is_empty() {
        return None;
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(v) = metadata.get(FORMAT_VERSION_KEY) {
        pairs.push((FORMAT_VERSION_KEY.to_string(), v.clone()));
    }
    pairs.extend(
        metadata
            .iter()
            .filter(|(k, _)| k.as_str() != FORMAT_VERSION_KEY)
            .map(|(k, v)| (k.clone(), v.clone())),
    );
    Some(Declaration::document(pairs).to_string())
}

fn check_references(schema: &Schema, class: &ClassDef, inst: &Instance) -> Result<(), EncodeError> {
    for attr in &class.attributes {
        match inst.get(&attr.name) {
            Value::Embedded(inner) => {
                if let Some(inner_class) = schema.class(&inner.class_name) {
                    check_references(schema, inner_class, inner)?;
                }
            }
            Value::Ref(_) | Value::RefList(_) => {
                let target = attr.format.target_class.as_deref().unwrap_or_default();
                if schema
                    .class(target)
                    .is_none_or(|t| t.primary_attribute().is_none())
                {
                    return Err(EncodeError::KeylessTarget {
                        class: class.name.clone(),
                        attribute: attr.name.clone(),
                        target: target.to_string(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn data_sheet(schema: &Schema, class: &ClassDef, instances: &[Instance], pretty: bool) -> Sheet {
    // (owner attribute, embedded attribute) per column
    let mut columns: Vec<(usize, Option<usize>)> = Vec::new();
    let mut body = Sheet::default();
    let grouped = class.attributes.iter().any(|a| schema.is_embedding(a));
    let leaf_row = usize::from(grouped);
    for (ai, attr) in class.attributes.iter().enumerate() {
        let target = attr
            .format
            .target_class
            .as_deref()
            .and_then(|t| schema.class(t));
        match target {
            Some(target) if schema.is_embedding(attr) => {
                for (k, leaf) in target.attributes.iter().enumerate() {
                    let col = columns.len();
                    if k == 0 {
                        body.heading(
                            0,
                            col,
                            format!("!{}", attr.verbose_name),
                            attr.description.clone(),
                            pretty,
                        );
                    } else if pretty {
                        body.heading(0, col, String::new(), None, pretty);
                    }
                    body.heading(
                        leaf_row,
                        col,
                        format!("!{}", leaf.verbose_name),
                        leaf.description.clone(),
                        pretty,
                    );
                    columns.push((ai, Some(k)));
                }
            }
            _ => {
                let col = columns.len();
                if grouped && pretty {
                    body.heading(0, col, String::new(), None, pretty);
                }
                body.heading(
                    leaf_row,
                    col,
                    format!("!{}", attr.verbose_name),
                    attr.description.clone(),
                    pretty,
                );
                columns.push((ai, None));
            }
        }
    }
    let first = leaf_row + 1;
    for (i, inst) in instances.iter().enumerate() {
        for (col, &(ai, leaf)) in columns.iter().enumerate() {
            let attr = &class.attributes[ai];
            let value = match (leaf, inst.get(&attr.name)) {
                (None, v) => v.clone(),
                (Some(k), Value::Embedded(inner)) => {
                    let target = schema.class(&inner.class_name);
                    target
                        .and_then(|t| t.attributes.get(k))
                        .map_or(Value::Null, |a| inner.get(&a.name).clone())
                }
                (Some(_), _) => Value::Null,
            };
            let text = format_cell(&value);
            if !text.is_empty() {
                body.put(first + i, col, text);
                if matches!(value, Value::Integer(_)) {
                    body.style(first + i, col).numeric = true;
                }
            }
        }
    }
    if body.rows.len() <= leaf_row {
        body.put(leaf_row, 0, String::new());
    }
    body
}

/// Renders `dataset` as marked-up grids: optional table of contents, one
/// Data sheet per populated sheet-bearing class, then the schema sheet.
pub fn encode_dataset(
    dataset: &Dataset,
    schema: &Schema,
    options: &EncodeOptions,
) -> Result<RawWorkbook, EncodeError> {
    let dataset = dataset.normalize();
    for (class_name, instances) in dataset.classes() {
        let class = schema
            .class(class_name)
            .ok_or_else(|| EncodeError::UnknownClass {
                class: class_name.to_string(),
            })?;
        if !class.layout.has_sheet() {
            return Err(EncodeError::EmbeddedOnly {
                class: class_name.to_string(),
            });
        }
        for inst in instances {
            check_references(schema, class, inst)?;
        }
    }

    let populated: Vec<&ClassDef> = schema
        .sheet_classes()
        .filter(|c| !dataset.instances(&c.name).is_empty())
        .collect();
    let mut sheets: Vec<(String, Vec<String>, Sheet)> = Vec::new();
    let pretty = options.pretty;

    if options.toc {
        let mut toc = Sheet::default();
        for (col, heading) in ["!Worksheet", "!Description", "!Objects"]
            .into_iter()
            .enumerate()
        {
            toc.heading(0, col, heading.to_string(), None, pretty);
        }
        for (i, class) in populated.iter().enumerate() {
            let description = options
                .sheets
                .get(&class.name)
                .and_then(|s| s.description.clone())
                .or_else(|| class.description.clone())
                .unwrap_or_default();
            toc.put(i + 1, 0, options.title(class));
            toc.put(i + 1, 1, description);
            toc.put(i + 1, 2, dataset.count(&class.name).to_string());
            toc.style(i + 1, 2).numeric = true;
        }
        let declaration = Declaration::sheet(SheetType::TableOfContents).to_string();
        sheets.push((TOC_SHEET.to_string(), vec![declaration], toc));
    }

    for class in &populated {
        let mut body = data_sheet(schema, class, dataset.instances(&class.name), pretty);
        if class.layout == Layout::Column {
            body = body.transposed();
        }
        let name = format!("{SHEET_PREFIX}{}", options.title(class));
        sheets.push((name, vec![Declaration::data(&class.name).to_string()], body));
    }

    if options.schema_sheet {
        let grid = encode_schema_grid(schema);
        let mut body = Sheet::default();
        for (r, row) in grid.rows().iter().enumerate().skip(1) {
            for (c, cell) in row.iter().enumerate() {
                let text = cell.clone().unwrap_or_default();
                if r == 1 {
                    body.heading(0, c, text, None, pretty);
                } else if !text.is_empty() {
                    body.put(r - 1, c, text);
                }
            }
        }
        let declaration = grid.get(0, 0).unwrap_or_default().to_string();
        sheets.push((grid.name.clone(), vec![declaration], body));
    }

    let document = document_declaration(&dataset.document_metadata);
    let grids = sheets
        .into_iter()
        .enumerate()
        .map(|(i, (name, mut header, body))| {
            if let Some(doc) = &document {
                if i == 0 || options.container != ContainerFormat::Xlsx {
                    header.insert(0, doc.clone());
                }
            }
            body.finish(name, &header)
        })
        .collect();
    let workbook = RawWorkbook::new(grids, options.container);
    workbook.check_names()?;
    Ok(workbook)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::codec::decode_dataset;
    use crate::schema::{AttributeFormat, AttributeKind};
    use crate::testing::{sample_dataset, sample_schema, sample_workbook};

    fn sample_options() -> EncodeOptions {
        EncodeOptions::from_workbook(&sample_workbook())
    }

    #[test]
    fn options_harvest_titles_and_descriptions() {
        let options = sample_options();
        assert!(options.toc);
        assert_eq!(options.sheets["Gene"].title, "Genes");
        assert_eq!(
            options.sheets["Transcript"].description.as_deref(),
            Some("Splice variants expressed from the genome")
        );
    }

    #[test]
    fn toc_lists_counts() {
        let workbook = encode_dataset(&sample_dataset(), &sample_schema(), &sample_options()).unwrap();
        assert_eq!(
            workbook.names(),
            [
                "!!_Table of contents",
                "!!Genes",
                "!!Transcript variants",
                "!!_Schema"
            ]
        );
        let toc = &workbook.grids[0];
        assert_eq!(toc.get(3, 0), Some("Genes"));
        assert_eq!(toc.get(3, 2), Some("2"));
        assert_eq!(toc.get(4, 0), Some("Transcript variants"));
        assert_eq!(toc.get(4, 2), Some("4"));
        assert!(toc
            .get(0, 0)
            .unwrap()
            .starts_with("!!!ObjTables objTablesVersion='1.0.0' author="));
        assert!(workbook.grids[1]
            .get(0, 0)
            .unwrap()
            .starts_with("!!ObjTables"));
    }

    #[test]
    fn integers_are_ungrouped() {
        let workbook = encode_dataset(&sample_dataset(), &sample_schema(), &sample_options()).unwrap();
        let genes = workbook.grid("!!Genes").unwrap();
        assert_eq!(genes.get(1, 2), Some("!Location"));
        assert_eq!(genes.get(3, 3), Some("44905791"));
        assert!(genes.styles[&(3, 3)].numeric);
    }

    #[test]
    fn empty_dataset_with_toc() {
        let empty = Dataset::new(Arc::new(sample_schema()));
        let workbook = encode_dataset(
            &empty,
            &sample_schema(),
            &EncodeOptions::default().with_toc(true),
        )
        .unwrap();
        assert_eq!(workbook.names(), ["!!_Table of contents", "!!_Schema"]);
        assert_eq!(workbook.grids[0].height(), 2);
    }

    #[test]
    fn round_trip_all_containers() {
        let dataset = sample_dataset();
        for container in [
            ContainerFormat::Xlsx,
            ContainerFormat::CsvDir,
            ContainerFormat::TsvDir,
        ] {
            let options = sample_options().with_container(container).with_pretty(true);
            let workbook = encode_dataset(&dataset, &sample_schema(), &options).unwrap();
            let (back, report) = decode_dataset(&workbook, &sample_schema()).unwrap();
            assert_eq!(report.entries, vec![], "{container}");
            assert_eq!(back.normalize(), dataset.normalize());
        }
    }

    #[test]
    fn delimited_sets_repeat_the_document_line() {
        let options = sample_options().with_container(ContainerFormat::CsvDir);
        let workbook = encode_dataset(&sample_dataset(), &sample_schema(), &options).unwrap();
        assert!(workbook
            .grids
            .iter()
            .all(|g| g.get(0, 0).unwrap().starts_with("!!!")));
    }

    fn parameter_schema() -> Schema {
        Schema::new(vec![ClassDef::new("Param", "Parameter", Layout::Column)
            .with_attribute(
                "id",
                "Id",
                AttributeFormat::new(AttributeKind::String).primary(),
            )
            .with_attribute(
                "value",
                "Value",
                AttributeFormat::new(AttributeKind::Float),
            )])
    }

    #[test]
    fn column_layout_is_the_transpose() {
        let schema = parameter_schema();
        let mut dataset = Dataset::new(Arc::new(schema.clone()));
        let class = schema.class("Param").unwrap();
        dataset.push(Instance::new(class).with("id", "k1").with("value", 0.5));
        dataset.push(Instance::new(class).with("id", "k2").with("value", 2.0));
        let workbook = encode_dataset(&dataset, &schema, &EncodeOptions::default()).unwrap();
        let grid = workbook.grid("!!Parameter").unwrap();
        assert_eq!(grid.get(1, 0), Some("!Id"));
        assert_eq!(grid.get(2, 0), Some("!Value"));
        assert_eq!(grid.get(1, 2), Some("k2"));

        let mut row_schema = schema.clone();
        row_schema.classes[0].layout = Layout::Row;
        let row_book = encode_dataset(&dataset, &row_schema, &EncodeOptions::default()).unwrap();
        let row_grid = row_book.grid("!!Parameter").unwrap();
        let body = |g: &Grid| Grid::new("b", g.rows()[1..].to_vec());
        assert_eq!(body(grid).rows(), body(row_grid).transpose().rows());

        let (back, report) = decode_dataset(&workbook, &schema).unwrap();
        assert!(report.entries.is_empty());
        assert_eq!(back, dataset);
    }

    #[test]
    fn keyless_target_is_refused() {
        let mut schema = sample_schema();
        schema.classes[0].attributes[0].format.primary = false;
        let dataset = sample_dataset();
        assert!(matches!(
            encode_dataset(&dataset, &schema, &EncodeOptions::default()),
            Err(EncodeError::KeylessTarget { .. })
        ));
    }
}
