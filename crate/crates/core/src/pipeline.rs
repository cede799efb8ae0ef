//! End-to-end steps shared by the command line and the HTTP service, so
//! both produce the same reports for the same inputs.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde_json::Value as Json;
use thiserror::Error;

use crate::codec::{
    decode_dataset, encode_dataset, encode_schema_grid, find_schema_grid, parse_schema_grid,
    CodecError, EncodeError, EncodeOptions, SCHEMA_SHEET,
};
use crate::dataset::{
    from_document_tree, parse_json, parse_yaml, render_json, render_yaml, to_document_tree,
    Dataset, ImportError, SerializeError,
};
use crate::grid::{
    read_delimited, read_grids, read_xlsx_bytes, ContainerFormat, Grid, GridError, RawWorkbook,
};
use crate::ops::{
    self, find_migration_grid, parse_migration_grid, MergeOutcome, MigrationError, OpsError,
};
use crate::schema::{AttributeFormat, AttributeKind, ClassDef, Layout, Schema};
use crate::validation::{validate_dataset, Code, ReportEntry, Severity, ValidationReport};

/// Every format a dataset can be read from or written to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DocFormat {
    Xlsx,
    Csv,
    Tsv,
    Json,
    Yaml,
}

impl DocFormat {
    pub const ALL: [DocFormat; 5] = [
        DocFormat::Xlsx,
        DocFormat::Csv,
        DocFormat::Tsv,
        DocFormat::Json,
        DocFormat::Yaml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DocFormat::Xlsx => "xlsx",
            DocFormat::Csv => "csv",
            DocFormat::Tsv => "tsv",
            DocFormat::Json => "json",
            DocFormat::Yaml => "yaml",
        }
    }

    pub fn from_name(name: &str) -> Option<DocFormat> {
        match name.to_ascii_lowercase().as_str() {
            "xlsx" => Some(DocFormat::Xlsx),
            "csv" => Some(DocFormat::Csv),
            "tsv" => Some(DocFormat::Tsv),
            "json" => Some(DocFormat::Json),
            "yaml" | "yml" => Some(DocFormat::Yaml),
            _ => None,
        }
    }

    pub fn container(self) -> Option<ContainerFormat> {
        match self {
            DocFormat::Xlsx => Some(ContainerFormat::Xlsx),
            DocFormat::Csv => Some(ContainerFormat::CsvDir),
            DocFormat::Tsv => Some(ContainerFormat::TsvDir),
            DocFormat::Json | DocFormat::Yaml => None,
        }
    }

    /// Format named by a file's extension.
    pub fn from_file_name(name: &str) -> Option<DocFormat> {
        let ext = Path::new(name).extension()?.to_str()?;
        DocFormat::from_name(ext)
    }

    /// Format of an existing path: the extension for files, the contents
    /// for CSV/TSV directories.
    pub fn infer(path: &Path) -> Option<DocFormat> {
        if path.is_dir() {
            return ContainerFormat::infer(path).map(DocFormat::from);
        }
        DocFormat::from_file_name(&path.to_string_lossy())
    }
}

impl From<ContainerFormat> for DocFormat {
    fn from(format: ContainerFormat) -> Self {
        match format {
            ContainerFormat::Xlsx => DocFormat::Xlsx,
            ContainerFormat::CsvDir => DocFormat::Csv,
            ContainerFormat::TsvDir => DocFormat::Tsv,
        }
    }
}

impl fmt::Display for DocFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Failures that stop a step before any report exists.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot tell the format of {0:?}; name it explicitly")]
    UnknownFormat(String),
    #[error("no schema: pass one explicitly or embed a `{SCHEMA_SHEET}` worksheet")]
    NoSchema,
    #[error("schemas must come from a workbook, not {0}")]
    SchemaSource(DocFormat),
    #[error("no worksheet declared type='Migration' was found")]
    NoMigration,
    #[error("{0} output is a set of files and needs a destination directory")]
    NeedsDirectory(DocFormat),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Import(#[from] ImportError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Serialize(#[from] SerializeError),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Migration(#[from] MigrationError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A loaded input: marked-up grids, or an exported document tree.
#[derive(Debug, Clone)]
pub enum Input {
    Workbook(RawWorkbook),
    Tree(Json),
}

impl Input {
    pub fn format(&self) -> DocFormat {
        match self {
            Input::Workbook(w) => w.source_format.into(),
            Input::Tree(_) => DocFormat::Json,
        }
    }
}

pub fn load_path(path: &Path, format: Option<DocFormat>) -> Result<Input, PipelineError> {
    let format = format
        .or_else(|| DocFormat::infer(path))
        .ok_or_else(|| PipelineError::UnknownFormat(path.display().to_string()))?;
    match format.container() {
        Some(container) => Ok(Input::Workbook(read_grids(path, container)?)),
        None => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_tree(&text, format)
        }
    }
}

/// Loads one uploaded file. A lone `.csv`/`.tsv` file is a one-sheet set
/// named after the file.
pub fn load_bytes(file_name: &str, bytes: &[u8]) -> Result<Input, PipelineError> {
    let format = DocFormat::from_file_name(file_name)
        .ok_or_else(|| PipelineError::UnknownFormat(file_name.into()))?;
    match format {
        DocFormat::Xlsx => Ok(Input::Workbook(read_xlsx_bytes(bytes)?)),
        DocFormat::Csv | DocFormat::Tsv => {
            let container = format.container().unwrap_or(ContainerFormat::CsvDir);
            let files = [(file_name.to_string(), bytes.to_vec())];
            Ok(Input::Workbook(load_delimited_set(&files, container)?))
        }
        DocFormat::Json | DocFormat::Yaml => {
            let text = std::str::from_utf8(bytes).map_err(|e| ImportError::Syntax {
                format: format.name(),
                message: e.to_string(),
            })?;
            parse_tree(text, format)
        }
    }
}

/// Builds a CSV/TSV set from in-memory files, ordered by file name as a
/// directory read would be. Files of the other extensions are skipped.
pub fn load_delimited_set(
    files: &[(String, Vec<u8>)],
    format: ContainerFormat,
) -> Result<RawWorkbook, GridError> {
    let delimiter = format.delimiter().unwrap_or(b',');
    let mut files: Vec<&(String, Vec<u8>)> = files
        .iter()
        .filter(|(name, _)| DocFormat::from_file_name(name) == Some(format.into()))
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut grids = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let base = Path::new(name.as_str())
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let stem = base.rsplit_once('.').map_or(base.as_str(), |(s, _)| s);
        grids.push(read_delimited(stem, bytes, delimiter)?);
    }
    let workbook = RawWorkbook::new(grids, format);
    workbook.check_names()?;
    Ok(workbook)
}

fn parse_tree(text: &str, format: DocFormat) -> Result<Input, PipelineError> {
    let tree = match format {
        DocFormat::Yaml => parse_yaml(text)?,
        _ => parse_json(text)?,
    };
    Ok(Input::Tree(tree))
}

/// A successfully decoded input with its validation report.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub schema: Schema,
    pub report: ValidationReport,
    pub options: EncodeOptions,
}

/// The outcome of decoding: a dataset, or a report explaining why the
/// schema or the workbook structure could not be used.
#[derive(Debug, Clone)]
pub enum Decoded {
    Loaded(Box<Loaded>),
    Rejected(ValidationReport),
}

impl Decoded {
    pub fn report(&self) -> &ValidationReport {
        match self {
            Decoded::Loaded(l) => &l.report,
            Decoded::Rejected(r) => r,
        }
    }
}

fn codec_entry(error: &CodecError) -> ReportEntry {
    let (code, worksheet) = match error {
        CodecError::MissingDeclaration { worksheet } => (Code::BadDeclaration, worksheet),
        CodecError::UnknownClass { worksheet, .. }
        | CodecError::EmbeddedClassSheet { worksheet, .. } => (Code::UnknownClass, worksheet),
    };
    ReportEntry::new(code, worksheet, (1, 1), error.to_string())
}

/// Finds the schema: `schema_source` when given, else the input's own
/// `!!_Schema` worksheet.
pub fn resolve_schema(
    input: &Input,
    schema_source: Option<&Input>,
) -> Result<Result<Schema, ValidationReport>, PipelineError> {
    let workbook = match (schema_source, input) {
        (Some(Input::Workbook(w)), _) | (None, Input::Workbook(w)) => w,
        (Some(Input::Tree(_)), _) => return Err(PipelineError::SchemaSource(DocFormat::Json)),
        (None, Input::Tree(_)) => return Err(PipelineError::NoSchema),
    };
    let grid = find_schema_grid(workbook).ok_or(PipelineError::NoSchema)?;
    Ok(parse_schema_grid(grid).map_err(|e| ValidationReport::from_entries(e.entries)))
}

pub fn decode(input: &Input, schema_source: Option<&Input>) -> Result<Decoded, PipelineError> {
    let schema = match resolve_schema(input, schema_source)? {
        Ok(schema) => schema,
        Err(report) => return Ok(Decoded::Rejected(report)),
    };
    let loaded = match input {
        Input::Workbook(workbook) => match decode_dataset(workbook, &schema) {
            Ok((dataset, report)) => Loaded {
                dataset,
                schema,
                report,
                options: EncodeOptions::from_workbook(workbook),
            },
            Err(e) => {
                return Ok(Decoded::Rejected(ValidationReport::from_entries(vec![
                    codec_entry(&e),
                ])))
            }
        },
        Input::Tree(tree) => {
            let dataset = from_document_tree(tree, Arc::new(schema.clone()))?;
            let report = validate_dataset(&dataset, &schema);
            Loaded {
                dataset,
                schema,
                report,
                options: EncodeOptions::default(),
            }
        }
    };
    Ok(Decoded::Loaded(Box::new(loaded)))
}

/// Decodes and validates; the report is the whole answer.
pub fn validate(
    input: &Input,
    schema_source: Option<&Input>,
) -> Result<ValidationReport, PipelineError> {
    Ok(decode(input, schema_source)?.report().clone())
}

/// Rendered output of a conversion.
#[derive(Debug, Clone)]
pub enum Output {
    Workbook(RawWorkbook),
    Text(String),
}

/// Encodes a dataset into `format`. Workbook output reuses `options` with
/// the container switched.
pub fn render(
    dataset: &Dataset,
    schema: &Schema,
    format: DocFormat,
    options: &EncodeOptions,
) -> Result<Output, PipelineError> {
    match format.container() {
        Some(container) => {
            let options = options.clone().with_container(container);
            Ok(Output::Workbook(encode_dataset(dataset, schema, &options)?))
        }
        None => {
            let tree = to_document_tree(dataset)?;
            Ok(Output::Text(match format {
                DocFormat::Yaml => render_yaml(&tree),
                _ => render_json(&tree),
            }))
        }
    }
}

/// Writes `output` to `dest`; CSV/TSV sets go into a directory.
pub fn write_output(output: &Output, format: DocFormat, dest: &Path) -> Result<(), PipelineError> {
    match output {
        Output::Workbook(workbook) => {
            let container = format
                .container()
                .ok_or(PipelineError::NeedsDirectory(format))?;
            crate::grid::write_grids(workbook, container, dest)?;
        }
        Output::Text(text) => std::fs::write(dest, text).map_err(|source| PipelineError::Io {
            path: dest.display().to_string(),
            source,
        })?,
    }
    Ok(())
}

/// A step that produced output (when decoding allowed it) and a report.
#[derive(Debug, Clone)]
pub struct Produced {
    pub output: Option<Output>,
    pub report: ValidationReport,
}

/// Decodes, then re-encodes into `format`. `pretty` forces the table of
/// contents and heading styles. Output is withheld when the report has
/// errors that leave references unresolvable for tree formats.
pub fn convert(
    input: &Input,
    schema_source: Option<&Input>,
    format: DocFormat,
    pretty: bool,
) -> Result<Produced, PipelineError> {
    let loaded = match decode(input, schema_source)? {
        Decoded::Loaded(l) => l,
        Decoded::Rejected(report) => {
            return Ok(Produced {
                output: None,
                report,
            })
        }
    };
    let mut options = loaded.options.clone();
    if pretty {
        options = options.with_toc(true).with_pretty(true);
    }
    let output = match render(&loaded.dataset, &loaded.schema, format, &options) {
        Ok(output) => Some(output),
        Err(PipelineError::Serialize(_)) if loaded.report.has_errors() => None,
        Err(e) => return Err(e),
    };
    Ok(Produced {
        output,
        report: loaded.report,
    })
}

/// Result of comparing or combining several inputs.
#[derive(Debug, Clone)]
pub enum Compared<T> {
    Done(T),
    /// An input failed validation; the report of the first such input,
    /// with its position.
    Invalid(usize, ValidationReport),
}

fn decode_all(
    inputs: &[Input],
    schema_source: Option<&Input>,
    tolerate: impl Fn(&ReportEntry) -> bool,
) -> Result<Result<Vec<Loaded>, (usize, ValidationReport)>, PipelineError> {
    let mut out = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        match decode(input, schema_source)? {
            Decoded::Loaded(l)
                if !l
                    .report
                    .entries
                    .iter()
                    .any(|e| e.severity == Severity::Error && !tolerate(e)) =>
            {
                out.push(*l)
            }
            decoded => return Ok(Err((i, decoded.report().clone()))),
        }
    }
    Ok(Ok(out))
}

pub fn diff(
    left: &Input,
    right: &Input,
    schema_source: Option<&Input>,
) -> Result<Compared<ops::DiffReport>, PipelineError> {
    let parts = match decode_all(&[left.clone(), right.clone()], schema_source, |_| false)? {
        Ok(parts) => parts,
        Err((i, report)) => return Ok(Compared::Invalid(i, report)),
    };
    Ok(Compared::Done(ops::diff(
        &parts[0].dataset,
        &parts[1].dataset,
    )?))
}

/// A finished merge: the merged dataset, its schema, and the encode
/// options of the first input.
#[derive(Debug, Clone)]
pub struct Merged {
    pub outcome: MergeOutcome,
    pub schema: Schema,
    pub options: EncodeOptions,
}

/// Merges inputs; dangling references are tolerated in the parts since
/// another part may supply the target.
pub fn merge(
    inputs: &[Input],
    schema_source: Option<&Input>,
) -> Result<Compared<Merged>, PipelineError> {
    let parts = match decode_all(inputs, schema_source, |e| e.code == Code::UnresolvedRef)? {
        Ok(parts) => parts,
        Err((i, report)) => return Ok(Compared::Invalid(i, report)),
    };
    let datasets: Vec<Dataset> = parts.iter().map(|p| p.dataset.clone()).collect();
    let outcome = ops::merge(&datasets)?;
    let first = parts.into_iter().next().ok_or(OpsError::NoParts)?;
    Ok(Compared::Done(Merged {
        outcome,
        schema: first.schema,
        options: first.options,
    }))
}

/// Applies the migration worksheet found in `migration` (or, failing
/// that, in the input itself) and validates the result against the
/// derived schema.
pub fn migrate(
    input: &Input,
    migration: Option<&Input>,
    schema_source: Option<&Input>,
) -> Result<Compared<Loaded>, PipelineError> {
    let grid = [migration, Some(input)]
        .into_iter()
        .flatten()
        .find_map(|i| match i {
            Input::Workbook(w) => find_migration_grid(w),
            Input::Tree(_) => None,
        })
        .ok_or(PipelineError::NoMigration)?;
    let spec = parse_migration_grid(grid)?;
    let loaded = match decode(input, schema_source)? {
        Decoded::Loaded(l) if !l.report.has_errors() => l,
        decoded => return Ok(Compared::Invalid(0, decoded.report().clone())),
    };
    let (dataset, schema) = ops::migrate(&loaded.dataset, &spec, &loaded.schema)?;
    let report = validate_dataset(&dataset, &schema);
    Ok(Compared::Done(Loaded {
        dataset,
        schema,
        report,
        options: loaded.options,
    }))
}

/// A schema worksheet to start from: one example class keyed on `id`.
pub fn skeleton_schema() -> Grid {
    let schema = Schema::new(vec![ClassDef::new("Example", "Example", Layout::Row)
        .with_attribute(
            "id",
            "Id",
            AttributeFormat::new(AttributeKind::String).primary(),
        )
        .with_attribute("name", "Name", AttributeFormat::new(AttributeKind::String))]);
    encode_schema_grid(&schema)
}
