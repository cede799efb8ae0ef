//! The gene / splice-variant example workbook, available to tests in this
//! and downstream crates through the `testing` feature.

use std::path::Path;
use std::sync::Arc;

use rust_xlsxwriter::{Format, Workbook};

use crate::dataset::{Dataset, Instance, Value};
use crate::grid::{ContainerFormat, Grid, RawWorkbook};
use crate::schema::{AttributeFormat, AttributeKind, ClassDef, Layout, Schema};

pub const DOC_DECLARATION: &str =
    "!!!ObjTables objTablesVersion='1.0.0' author='John Doe' date='2020-05-01'";

pub const GENES: [[&str; 5]; 2] = [
    ["ENSG00000130203", "APOE", "19", "44,905,791", "44,909,393"],
    ["ENSG00000139618", "BRCA2", "13", "32,315,086", "32,400,266"],
];

pub const TRANSCRIPTS: [[&str; 5]; 4] = [
    [
        "ENST00000252486.9",
        "ENSG00000130203",
        "19",
        "44,905,796",
        "44,909,393",
    ],
    [
        "ENST00000425718.1",
        "ENSG00000130203",
        "19",
        "44,906,360",
        "44,908,954",
    ],
    [
        "ENST00000380152.7",
        "ENSG00000139618",
        "13",
        "32,315,474",
        "32,400,266",
    ],
    [
        "ENST00000544455.5",
        "ENSG00000139618",
        "13",
        "32,315,480",
        "32,399,668",
    ],
];

pub const SCHEMA_ROWS: [[&str; 5]; 12] = [
    ["Gene", "Class", "", "row", "Gene"],
    [
        "id",
        "Attribute",
        "Gene",
        "String(primary=True, unique=True)",
        "Id",
    ],
    ["symbol", "Attribute", "Gene", "String", "Symbol"],
    [
        "location",
        "Attribute",
        "Gene",
        "OneToOne('Location', related_name='genes')",
        "Location",
    ],
    ["Transcript", "Class", "", "row", "Transcript"],
    [
        "id",
        "Attribute",
        "Transcript",
        "String(primary=True, unique=True)",
        "Id",
    ],
    [
        "gene",
        "Attribute",
        "Transcript",
        "ManyToOne('Gene', related_name='transcripts')",
        "Gene",
    ],
    [
        "location",
        "Attribute",
        "Transcript",
        "OneToOne('Location', related_name='transcripts')",
        "Location",
    ],
    ["Location", "Class", "", "multiple_cells", "Location"],
    [
        "chromosome",
        "Attribute",
        "Location",
        "String",
        "Chromosome",
    ],
    [
        "five_prime",
        "Attribute",
        "Location",
        "PositiveInteger(primary=True, unique=True)",
        "5'",
    ],
    [
        "three_prime",
        "Attribute",
        "Location",
        "PositiveInteger",
        "3'",
    ],
];

pub fn sample_schema() -> Schema {
    let positive = || AttributeFormat::new(AttributeKind::PositiveInteger);
    let string = || AttributeFormat::new(AttributeKind::String);
    Schema::new(vec![
        ClassDef::new("Gene", "Gene", Layout::Row)
            .with_attribute("id", "Id", string().primary())
            .with_attribute("symbol", "Symbol", string())
            .with_attribute(
                "location",
                "Location",
                AttributeFormat::relation(AttributeKind::OneToOne, "Location", "genes"),
            ),
        ClassDef::new("Transcript", "Transcript", Layout::Row)
            .with_attribute("id", "Id", string().primary())
            .with_attribute(
                "gene",
                "Gene",
                AttributeFormat::relation(AttributeKind::ManyToOne, "Gene", "transcripts"),
            )
            .with_attribute(
                "location",
                "Location",
                AttributeFormat::relation(AttributeKind::OneToOne, "Location", "transcripts"),
            ),
        ClassDef::new("Location", "Location", Layout::MultipleCells)
            .with_attribute("chromosome", "Chromosome", string())
            .with_attribute("five_prime", "5'", positive().primary())
            .with_attribute("three_prime", "3'", positive()),
    ])
}

fn ungroup(text: &str) -> i64 {
    text.replace(',', "")
        .parse()
        .expect("fixture integers are well formed")
}

fn location(schema: &Schema, chromosome: &str, five: &str, three: &str) -> Value {
    let class = schema
        .class("Location")
        .expect("fixture schema has Location");
    Instance::new(class)
        .with("chromosome", chromosome)
        .with("five_prime", ungroup(five))
        .with("three_prime", ungroup(three))
        .into()
}

/// The example dataset built directly, without any decoding.
pub fn sample_dataset() -> Dataset {
    let schema = Arc::new(sample_schema());
    let mut dataset = Dataset::new(Arc::clone(&schema));
    for (key, value) in [
        ("objTablesVersion", "1.0.0"),
        ("author", "John Doe"),
        ("date", "2020-05-01"),
    ] {
        dataset.document_metadata.insert(key.into(), value.into());
    }
    let gene = schema.class("Gene").expect("Gene");
    for [id, symbol, chr, five, three] in GENES {
        let inst = Instance::new(gene)
            .with("id", id)
            .with("symbol", symbol)
            .with("location", location(&schema, chr, five, three));
        dataset.push(inst);
    }
    let transcript = schema.class("Transcript").expect("Transcript");
    for [id, gene_id, chr, five, three] in TRANSCRIPTS {
        let inst = Instance::new(transcript)
            .with("id", id)
            .with("gene", Value::Ref(gene_id.into()))
            .with("location", location(&schema, chr, five, three));
        dataset.push(inst);
    }
    dataset
}

fn data_grid(name: &str, class: &str, second_heading: &str, rows: &[[&str; 5]], doc: bool) -> Grid {
    let mut all: Vec<Vec<String>> = Vec::new();
    if doc {
        all.push(vec![DOC_DECLARATION.into()]);
    }
    all.push(vec![format!("!!ObjTables type='Data' class='{class}'")]);
    all.push(["", "", "!Location", "", ""].map(String::from).to_vec());
    all.push(
        ["!Id", second_heading, "!Chromosome", "!5'", "!3'"]
            .map(String::from)
            .to_vec(),
    );
    all.extend(rows.iter().map(|r| r.map(String::from).to_vec()));
    Grid::from_rows(name, all)
}

fn toc_grid() -> Grid {
    Grid::from_rows(
        "!!_Table of contents",
        [
            vec![DOC_DECLARATION],
            vec!["!!ObjTables type='TableOfContents'"],
            vec!["!Worksheet", "!Description", "!Objects"],
            vec!["Genes", "Genes in the genome", "2"],
            vec![
                "Transcript variants",
                "Splice variants expressed from the genome",
                "4",
            ],
        ],
    )
}

fn schema_grid(doc: bool) -> Grid {
    let mut all: Vec<Vec<&str>> = Vec::new();
    if doc {
        all.push(vec![DOC_DECLARATION]);
    }
    all.push(vec!["!!ObjTables type='Schema'"]);
    all.push(vec![
        "!Name",
        "!Type",
        "!Parent",
        "!Format",
        "!Verbose name",
    ]);
    all.extend(SCHEMA_ROWS.iter().map(|r| r.to_vec()));
    Grid::from_rows("!!_Schema", all)
}

/// The four worksheets as authored, document declaration on the first only.
pub fn sample_workbook() -> RawWorkbook {
    RawWorkbook::new(
        vec![
            toc_grid(),
            data_grid("!!Genes", "Gene", "!Symbol", &GENES, false),
            data_grid(
                "!!Transcript variants",
                "Transcript",
                "!Gene",
                &TRANSCRIPTS,
                false,
            ),
            schema_grid(false),
        ],
        ContainerFormat::Xlsx,
    )
}

/// The same worksheets as a CSV/TSV set: every file repeats the document
/// declaration.
pub fn sample_delimited_workbook(format: ContainerFormat) -> RawWorkbook {
    RawWorkbook::new(
        vec![
            toc_grid(),
            data_grid("!!Genes", "Gene", "!Symbol", &GENES, true),
            data_grid(
                "!!Transcript variants",
                "Transcript",
                "!Gene",
                &TRANSCRIPTS,
                true,
            ),
            schema_grid(true),
        ],
        format,
    )
}

/// Writes the example as an Excel user would: coordinates and counts as
/// number cells with a thousands-separator display format.
pub fn write_sample_xlsx(path: &Path) -> Result<(), rust_xlsxwriter::XlsxError> {
    let mut book = Workbook::new();
    let grouped = Format::new().set_num_format("#,##0");
    let bold = Format::new().set_bold();
    for grid in sample_workbook().grids {
        let sheet = book.add_worksheet();
        sheet.set_name(&grid.name)?;
        for (r, row) in grid.rows().iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let Some(text) = cell else { continue };
                let (r, c) = (r as u32, c as u16);
                let numeric = text.replace(',', "");
                if !text.starts_with('!')
                    && grid.name != "!!_Schema"
                    && numeric.parse::<f64>().is_ok()
                    && c >= 2
                {
                    sheet.write_number_with_format(
                        r,
                        c,
                        numeric.parse::<f64>().unwrap_or_default(),
                        &grouped,
                    )?;
                } else if text.starts_with('!') && !text.starts_with("!!") {
                    sheet.write_string_with_format(r, c, text, &bold)?;
                } else {
                    sheet.write_string(r, c, text)?;
                }
            }
        }
    }
    book.save(path)
}

/// Reorders the body rows and the columns of a row-layout Data grid.
/// `permutation(n)` supplies a permutation of `0..n`; it is asked once for
/// the rows, once for the column blocks and once per group for its leaves.
/// Grouped columns move as a block so the bi-level heading stays intact.
/// Other grids are returned unchanged.
pub fn permute_data_grid(
    grid: &Grid,
    schema: &Schema,
    mut permutation: impl FnMut(usize) -> Vec<usize>,
) -> Grid {
    let declared = (0..grid.height().min(2)).find_map(|r| {
        let text = grid.get(r, 0)?;
        let declaration = crate::codec::parse_declaration(text).ok()?;
        let class = schema.class(declaration.class()?)?;
        (declaration.sheet_type() == Some(crate::codec::SheetType::Data)).then_some((r, class))
    });
    let Some((decl_row, class)) = declared else {
        return grid.clone();
    };
    if class.layout != Layout::Row {
        return grid.clone();
    }
    let group_of = |text: &str| {
        let name = text.strip_prefix('!')?.trim();
        let attr = class
            .attributes
            .iter()
            .find(|a| a.verbose_name == name || a.name == name)?;
        schema
            .is_embedding(attr)
            .then(|| schema.class(attr.format.target_class.as_deref()?))?
    };
    let group_row = decl_row + 1;
    let grouped = (0..grid.width()).any(|c| grid.get(group_row, c).and_then(group_of).is_some());
    let leaf_row = if grouped { group_row + 1 } else { group_row };

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut col = 0;
    while col < grid.width() {
        let span = match grid
            .get(group_row, col)
            .filter(|_| grouped)
            .and_then(group_of)
        {
            Some(target) => target.attributes.len().max(1),
            None => 1,
        };
        blocks.push((col..(col + span).min(grid.width())).collect());
        col += span;
    }
    let mut columns = Vec::with_capacity(grid.width());
    for b in permutation(blocks.len()) {
        let block = &blocks[b];
        if block.len() == 1 {
            columns.push(block[0]);
        } else {
            columns.extend(permutation(block.len()).into_iter().map(|i| block[i]));
        }
    }
    let body: Vec<usize> = (leaf_row + 1..grid.height()).collect();
    let row_order: Vec<usize> = permutation(body.len())
        .into_iter()
        .map(|i| body[i])
        .collect();

    let mut rows: Vec<Vec<Option<String>>> = grid.rows()[..=decl_row].to_vec();
    let header_rows = if grouped {
        vec![group_row, leaf_row]
    } else {
        vec![leaf_row]
    };
    for &r in &header_rows {
        let mut out: Vec<Option<String>> = columns
            .iter()
            .map(|&c| grid.get(r, c).map(String::from))
            .collect();
        if r == group_row && grouped {
            // Each group heading goes to the first column of its block.
            out = vec![None; columns.len()];
            let mut at = 0;
            for b in &blocks_in_order(&blocks, &columns) {
                out[at] = grid.get(r, b[0]).map(String::from);
                at += b.len();
            }
        }
        rows.push(out);
    }
    for r in row_order {
        rows.push(
            columns
                .iter()
                .map(|&c| grid.get(r, c).map(String::from))
                .collect(),
        );
    }
    Grid::new(grid.name.clone(), rows)
}

/// The blocks in the order their columns appear in `columns`.
fn blocks_in_order(blocks: &[Vec<usize>], columns: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < columns.len() {
        let block = blocks
            .iter()
            .find(|b| b.contains(&columns[i]))
            .cloned()
            .unwrap_or_else(|| vec![columns[i]]);
        i += block.len();
        out.push(block);
    }
    out
}

/// One single-cell edit of [`sample_workbook`] and the report entries it
/// must produce, as (worksheet, A1 cell, code). Nothing else may appear.
#[derive(Debug, Clone)]
pub struct Mutation {
    pub name: &'static str,
    pub worksheet: &'static str,
    /// Zero-based (row, column) of the edited cell.
    pub at: (usize, usize),
    pub text: &'static str,
    pub expected: Vec<(&'static str, &'static str, &'static str)>,
}

impl Mutation {
    pub fn apply(&self, workbook: &RawWorkbook) -> RawWorkbook {
        let mut out = workbook.clone();
        if let Some(grid) = out.grids.iter_mut().find(|g| g.name == self.worksheet) {
            let mut rows = grid.rows().to_vec();
            let (r, c) = self.at;
            if rows.len() <= r {
                rows.resize(r + 1, Vec::new());
            }
            if rows[r].len() <= c {
                rows[r].resize(c + 1, None);
            }
            rows[r][c] = (!self.text.is_empty()).then(|| self.text.to_string());
            *grid = Grid::new(grid.name.clone(), rows);
        }
        out
    }
}

const GENES_SHEET: &str = "!!Genes";
const TRANSCRIPTS_SHEET: &str = "!!Transcript variants";

/// Single-cell mutations of the example workbook, one per kind of defect.
pub fn error_catalog() -> Vec<Mutation> {
    let m = |name, worksheet, at, text, expected| Mutation {
        name,
        worksheet,
        at,
        text,
        expected,
    };
    vec![
        m(
            "duplicate primary key",
            TRANSCRIPTS_SHEET,
            (4, 0),
            "ENST00000252486.9",
            vec![
                (TRANSCRIPTS_SHEET, "A4", "DUP_PRIMARY"),
                (TRANSCRIPTS_SHEET, "A5", "DUP_PRIMARY"),
            ],
        ),
        m(
            "dangling reference",
            TRANSCRIPTS_SHEET,
            (5, 1),
            "ENSG00000000000",
            vec![(TRANSCRIPTS_SHEET, "B6", "UNRESOLVED_REF")],
        ),
        m(
            "negative PositiveInteger",
            GENES_SHEET,
            (3, 3),
            "-44,905,791",
            vec![(GENES_SHEET, "D4", "BAD_VALUE")],
        ),
        m(
            "malformed grouping",
            GENES_SHEET,
            (4, 4),
            "32,40,0266",
            vec![(GENES_SHEET, "E5", "BAD_TYPE")],
        ),
        m(
            "missing required cell",
            TRANSCRIPTS_SHEET,
            (6, 1),
            "",
            vec![(TRANSCRIPTS_SHEET, "B7", "MISSING_REQUIRED")],
        ),
        m(
            "unknown heading",
            GENES_SHEET,
            (2, 1),
            "!Symbl",
            vec![(GENES_SHEET, "B3", "UNKNOWN_HEADING")],
        ),
        m(
            "bad declaration",
            TRANSCRIPTS_SHEET,
            (0, 0),
            "!!ObjTables type='Data' class='Transcript",
            vec![(TRANSCRIPTS_SHEET, "A1", "BAD_DECLARATION")],
        ),
        m(
            "TOC count mismatch",
            "!!_Table of contents",
            (3, 2),
            "3",
            vec![("!!_Table of contents", "C4", "TOC_MISMATCH")],
        ),
        m(
            "type mismatch",
            TRANSCRIPTS_SHEET,
            (3, 4),
            "end",
            vec![(TRANSCRIPTS_SHEET, "E4", "BAD_TYPE")],
        ),
        m(
            "duplicate related_name",
            "!!_Schema",
            (9, 3),
            "OneToOne('Location', related_name='genes')",
            vec![("!!_Schema", "D10", "DUP_RELATED_NAME")],
        ),
        m(
            "duplicate embedded primary",
            TRANSCRIPTS_SHEET,
            (4, 3),
            "44,905,796",
            vec![
                (TRANSCRIPTS_SHEET, "D4", "DUP_PRIMARY"),
                (TRANSCRIPTS_SHEET, "D5", "DUP_PRIMARY"),
            ],
        ),
        m(
            "undeclared class",
            GENES_SHEET,
            (0, 0),
            "!!ObjTables type='Data' class='Genes'",
            vec![(GENES_SHEET, "A1", "UNKNOWN_CLASS")],
        ),
    ]
}
