//! Schema-governed structured spreadsheets.
//!
//! A workbook's worksheets carry `!!ObjTables` declarations that bind them
//! to classes of a schema. This crate reads such workbooks from XLSX or
//! CSV/TSV sets, decodes them into a typed object graph, validates it,
//! and offers diff, merge and schema migration over the result.

pub mod codec;
pub mod dataset;
pub mod format;
pub mod grid;
pub mod ops;
pub mod pipeline;
pub mod schema;
pub mod validation;

#[cfg(any(test, feature = "testing"))]
pub mod testing;

/// Version of this toolkit.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use codec::{
    decode_dataset, encode_dataset, parse_cell, parse_declaration, parse_schema_grid, EncodeOptions,
};
pub use dataset::{normalize, Dataset, Instance, Value, FORMAT_VERSION};
pub use format::{
    parse_attribute_format, parse_chemical_equation, print_attribute_format,
    print_chemical_equation,
};
pub use grid::{read_grids, write_grids, ContainerFormat, Grid, RawWorkbook};
pub use schema::{
    validate_schema, AttributeDef, AttributeFormat, AttributeKind, ClassDef, Layout, Schema,
};
pub use validation::{validate_dataset, ReportEntry, ValidationReport};
