//! Stateless HTTP facade over the structsheet pipeline.
//!
//! [`handle`] is a pure function from an [`ApiRequest`] to an
//! [`ApiResponse`]; [`router`] adapts it to axum. Report bodies are the
//! same bytes the command line prints with `--json-report`.

mod http;

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use serde_json::json;
use structsheet_core::grid::{
    delimited_files, write_delimited, write_xlsx_bytes, ContainerFormat, RawWorkbook,
};
use structsheet_core::ops::MergeOutcome;
use structsheet_core::pipeline::{
    self, Compared, DocFormat, Input, Output, PipelineError, Produced,
};
use structsheet_core::{ValidationReport, FORMAT_VERSION, VERSION};

pub use http::{router, router_with_limit, serve};

/// Largest accepted request body.
pub const MAX_PAYLOAD: usize = 32 * 1024 * 1024;

const JSON: &str = "application/json";
const XLSX: &str = "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet";
const ZIP: &str = "application/zip";
const YAML: &str = "application/yaml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Validate,
    Convert,
    Diff,
    Merge,
    Version,
}

/// One uploaded file. `field` is the multipart field name: `file` for
/// inputs, `schema` for a schema workbook.
#[derive(Debug, Clone)]
pub struct Upload {
    pub field: String,
    pub file_name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ApiRequest {
    pub endpoint: Endpoint,
    pub uploads: Vec<Upload>,
    /// Query options; `to` names the output format.
    pub options: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
    /// Suggested download name for file responses.
    pub file_name: Option<String>,
}

impl ApiResponse {
    fn json(status: u16, body: String) -> Self {
        ApiResponse {
            status,
            content_type: JSON,
            body: body.into_bytes(),
            file_name: None,
        }
    }

    pub fn error(status: u16, message: &str) -> Self {
        let mut body =
            serde_json::to_string_pretty(&json!({ "error": message })).unwrap_or_default();
        body.push('\n');
        ApiResponse::json(status, body)
    }

    fn report(report: &ValidationReport) -> Self {
        ApiResponse::json(
            if report.has_errors() { 422 } else { 200 },
            report.to_json(),
        )
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

fn failure(error: PipelineError) -> ApiResponse {
    let status = match error {
        PipelineError::UnknownFormat(_) | PipelineError::SchemaSource(_) => 415,
        _ => 400,
    };
    ApiResponse::error(status, &error.to_string())
}

/// Reads an upload. A `.zip` holds a CSV or TSV set; anything else is
/// loaded by extension.
fn load(upload: &Upload) -> Result<Input, PipelineError> {
    if DocFormat::from_file_name(&upload.file_name).is_some() {
        return pipeline::load_bytes(&upload.file_name, &upload.bytes);
    }
    if !upload.file_name.to_ascii_lowercase().ends_with(".zip") {
        return Err(PipelineError::UnknownFormat(upload.file_name.clone()));
    }
    let bad = |message: String| {
        PipelineError::Grid(structsheet_core::grid::GridError::Format(format!(
            "{}: {message}",
            upload.file_name
        )))
    };
    let mut archive =
        zip::ZipArchive::new(Cursor::new(&upload.bytes)).map_err(|e| bad(e.to_string()))?;
    let mut files = Vec::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(|e| bad(e.to_string()))?;
        if !entry.is_file() {
            continue;
        }
        let name = entry.name().map_err(|e| bad(e.to_string()))?.into_owned();
        let mut bytes = Vec::new();
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| bad(e.to_string()))?;
        files.push((name, bytes));
    }
    let format = [ContainerFormat::CsvDir, ContainerFormat::TsvDir]
        .into_iter()
        .find(|f| {
            files
                .iter()
                .any(|(n, _)| DocFormat::from_file_name(n) == Some((*f).into()))
        })
        .ok_or_else(|| bad("archive holds no .csv or .tsv files".into()))?;
    Ok(Input::Workbook(pipeline::load_delimited_set(
        &files, format,
    )?))
}

fn zip_set(workbook: &RawWorkbook, format: ContainerFormat) -> Result<Vec<u8>, String> {
    let delimiter = format.delimiter().unwrap_or(b',');
    let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default();
    for (name, grid) in delimited_files(workbook, format).map_err(|e| e.to_string())? {
        let bytes = write_delimited(grid, delimiter).map_err(|e| e.to_string())?;
        writer
            .start_file(name, options)
            .map_err(|e| e.to_string())?;
        writer.write_all(&bytes).map_err(|e| e.to_string())?;
    }
    Ok(writer.finish().map_err(|e| e.to_string())?.into_inner())
}

fn file_response(output: &Output, format: DocFormat) -> ApiResponse {
    let (content_type, body) = match output {
        Output::Text(text) => (
            if format == DocFormat::Yaml {
                YAML
            } else {
                JSON
            },
            Ok(text.clone().into_bytes()),
        ),
        Output::Workbook(workbook) => match format.container() {
            Some(ContainerFormat::Xlsx) => {
                (XLSX, write_xlsx_bytes(workbook).map_err(|e| e.to_string()))
            }
            Some(container) => (ZIP, zip_set(workbook, container)),
            None => (JSON, Err(format!("{format} is not a workbook format"))),
        },
    };
    let extension = match format {
        DocFormat::Csv | DocFormat::Tsv => "zip",
        other => other.name(),
    };
    match body {
        Ok(body) => ApiResponse {
            status: 200,
            content_type,
            body,
            file_name: Some(format!("dataset.{extension}")),
        },
        Err(message) => ApiResponse::error(500, &message),
    }
}

fn target_format(
    request: &ApiRequest,
    fallback: Option<DocFormat>,
) -> Result<DocFormat, ApiResponse> {
    match request.options.get("to") {
        Some(name) => DocFormat::from_name(name)
            .ok_or_else(|| ApiResponse::error(415, &format!("unknown output format {name:?}"))),
        None => fallback.ok_or_else(|| ApiResponse::error(400, "missing ?to= output format")),
    }
}

/// Answers one request.
pub fn handle(request: ApiRequest) -> ApiResponse {
    handle_with_limit(request, MAX_PAYLOAD)
}

pub fn handle_with_limit(request: ApiRequest, limit: usize) -> ApiResponse {
    if request.endpoint == Endpoint::Version {
        let body = json!({ "toolkit": VERSION, "objTablesVersion": FORMAT_VERSION });
        return ApiResponse::json(200, structsheet_core::dataset::render_json(&body));
    }
    if request.uploads.iter().map(|u| u.bytes.len()).sum::<usize>() > limit {
        return ApiResponse::error(413, &format!("payload exceeds {limit} bytes"));
    }
    let mut inputs = Vec::new();
    let mut schema = None;
    for upload in &request.uploads {
        let loaded = match load(upload) {
            Ok(input) => input,
            Err(e) => return failure(e),
        };
        match upload.field.as_str() {
            "schema" if schema.is_none() => schema = Some(loaded),
            "schema" => return ApiResponse::error(400, "more than one schema upload"),
            _ => inputs.push(loaded),
        }
    }
    let schema = schema.as_ref();
    let wanted = match request.endpoint {
        Endpoint::Validate | Endpoint::Convert => 1..=1,
        Endpoint::Diff => 2..=2,
        _ => 1..=usize::MAX,
    };
    if !wanted.contains(&inputs.len()) {
        return ApiResponse::error(
            400,
            &format!("expected {wanted:?} file uploads, got {}", inputs.len()),
        );
    }
    let result = match request.endpoint {
        Endpoint::Validate => {
            pipeline::validate(&inputs[0], schema).map(|r| ApiResponse::report(&r))
        }
        Endpoint::Convert => {
            let format = match target_format(&request, None) {
                Ok(f) => f,
                Err(response) => return response,
            };
            let pretty = request
                .options
                .get("pretty")
                .is_some_and(|v| v == "true" || v == "1");
            pipeline::convert(&inputs[0], schema, format, pretty).map(
                |Produced { output, report }| match output {
                    Some(output) if !report.has_errors() => file_response(&output, format),
                    _ => ApiResponse::report(&report),
                },
            )
        }
        Endpoint::Diff => pipeline::diff(&inputs[0], &inputs[1], schema).map(|c| match c {
            Compared::Invalid(_, report) => ApiResponse::report(&report),
            Compared::Done(d) => {
                ApiResponse::json(if d.is_empty() { 200 } else { 422 }, d.to_json())
            }
        }),
        Endpoint::Merge => {
            let format = match target_format(&request, Some(inputs[0].format())) {
                Ok(f) => f,
                Err(response) => return response,
            };
            pipeline::merge(&inputs, schema).and_then(|c| match c {
                Compared::Invalid(_, report) => Ok(ApiResponse::report(&report)),
                Compared::Done(merged) => match merged.outcome {
                    MergeOutcome::Conflicts(c) => Ok(ApiResponse::json(422, c.to_json())),
                    MergeOutcome::Merged { report, .. } if report.has_errors() => {
                        Ok(ApiResponse::report(&report))
                    }
                    MergeOutcome::Merged { dataset, .. } => {
                        pipeline::render(&dataset, &merged.schema, format, &merged.options)
                            .map(|output| file_response(&output, format))
                    }
                },
            })
        }
        Endpoint::Version => unreachable!("answered above"),
    };
    result.unwrap_or_else(failure)
}
