//! Markup layer between raw grids and datasets.

mod cell;
mod declaration;
mod decode;
mod encode;
mod schema_grid;

use thiserror::Error;

pub use cell::{format_cell, parse_cell, CellError};
pub use declaration::{
    parse_declaration, print_declaration, Declaration, DeclarationLevel, SheetType,
    DOCUMENT_PREFIX, KEYWORD, SHEET_PREFIX,
};
pub use decode::decode_dataset;
pub use encode::{document_declaration, encode_dataset, EncodeError, EncodeOptions, SheetInfo};
pub use schema_grid::{
    encode_schema_grid, find_schema_grid, parse_schema_grid, read_schema_sheet, SchemaLoadError,
    SchemaSheet, SCHEMA_SHEET,
};

use crate::format::ParseError;
use crate::grid::Grid;

pub const TOC_SHEET: &str = "!!_Table of contents";

/// Container-level failures; everything cell-level goes into the report.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("worksheet {worksheet:?} is named like a marked-up sheet but has no `!!ObjTables` declaration")]
    MissingDeclaration { worksheet: String },
    #[error("worksheet {worksheet:?} declares class {class:?}, which the schema does not define")]
    UnknownClass { worksheet: String, class: String },
    #[error("worksheet {worksheet:?} declares class {class:?}, which is multiple_cells and has no worksheet of its own")]
    EmbeddedClassSheet { worksheet: String, class: String },
}

/// The declaration rows at the top of a grid.
pub(crate) struct Head {
    pub document: Option<Result<Declaration, ParseError>>,
    /// Zero-based row of the sheet declaration and its parse.
    pub sheet: Option<(usize, Result<Declaration, ParseError>)>,
}

pub(crate) fn read_head(grid: &Grid) -> Head {
    let first = grid.get(0, 0).map(str::trim);
    let (document, next) = match first {
        Some(text) if text.starts_with(DOCUMENT_PREFIX) => (Some(parse_declaration(text)), 1),
        _ => (None, 0),
    };
    let sheet = match grid.get(next, 0).map(str::trim) {
        Some(text) if text.starts_with(SHEET_PREFIX) => {
            let parsed = parse_declaration(text).and_then(|d| match d.level {
                DeclarationLevel::Sheet => Ok(d),
                DeclarationLevel::Document => {
                    Err(ParseError::new(0, "expected a `!!` sheet declaration"))
                }
            });
            Some((next, parsed))
        }
        _ => None,
    };
    Head { document, sheet }
}

/// Heading text without its `!` prefix; `None` for non-heading text.
pub(crate) fn strip_heading(text: &str) -> Option<&str> {
    let text = text.trim();
    if text.starts_with(SHEET_PREFIX) {
        return None;
    }
    text.strip_prefix('!').map(str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headings() {
        assert_eq!(strip_heading(" !5' "), Some("5'"));
        assert_eq!(strip_heading("!!Genes"), None);
        assert_eq!(strip_heading("Notes"), None);
    }

    #[test]
    fn head_with_and_without_document_line() {
        let grid = Grid::from_rows(
            "x",
            [
                ["!!!ObjTables objTablesVersion='1.0.0'"],
                ["!!ObjTables type='Schema'"],
            ],
        );
        let head = read_head(&grid);
        assert!(matches!(head.document, Some(Ok(_))));
        assert!(matches!(head.sheet, Some((1, Ok(_)))));
        let plain = Grid::from_rows("x", [["a"]]);
        let head = read_head(&plain);
        assert!(head.document.is_none() && head.sheet.is_none());
    }
}
