//! `structsheet`: validate, convert, compare and migrate schema-governed
//! workbooks.
//!
//! Exit status: 0 when clean, 1 when a report holds errors, conflicts or
//! differences, 2 on usage or I/O failure.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use structsheet_core::grid::write_grids;
use structsheet_core::ops::MergeOutcome;
use structsheet_core::pipeline::{self, Compared, DocFormat, Input, Output, Produced};
use structsheet_core::{RawWorkbook, ValidationReport};

#[derive(Parser)]
#[command(
    name = "structsheet",
    version,
    about = "Schema-governed structured spreadsheets"
)]
struct Cli {
    /// Workbook holding the `!!_Schema` worksheet to use instead of the
    /// input's own.
    #[arg(long, global = true, value_name = "PATH")]
    schema: Option<PathBuf>,
    /// Format of the inputs when the path does not tell.
    #[arg(long, global = true, value_name = "FORMAT", value_parser = parse_format)]
    from: Option<DocFormat>,
    /// Suppress human-readable output. Exit codes are unchanged.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Print the machine-readable report on standard output.
    #[arg(long, global = true)]
    json_report: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    /// Output format: xlsx, csv, tsv, json or yaml.
    #[arg(long, short, value_name = "FORMAT", value_parser = parse_format)]
    format: Option<DocFormat>,
    /// Output path; a directory for csv/tsv. json/yaml go to standard
    /// output when omitted.
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decode and check a workbook, printing the report.
    Validate { input: PathBuf },
    /// Re-encode a workbook into another format.
    Convert {
        input: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Compare two datasets.
    Diff { left: PathBuf, right: PathBuf },
    /// Combine datasets, failing on conflicting values.
    Merge {
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        target: Target,
    },
    /// Apply a migration worksheet.
    Migrate {
        input: PathBuf,
        /// Workbook with a `type='Migration'` worksheet; defaults to the
        /// input itself.
        migration: Option<PathBuf>,
        #[command(flatten)]
        target: Target,
    },
    /// Rewrite a workbook in canonical order.
    Normalize {
        input: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Rewrite with a table of contents, styled headings and notes.
    Pretty {
        input: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Export the dataset as a JSON or YAML document.
    Export {
        input: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Write a starter `!!_Schema` worksheet.
    InitSchema {
        #[command(flatten)]
        target: Target,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
}

fn parse_format(text: &str) -> Result<DocFormat, String> {
    DocFormat::from_name(text)
        .ok_or_else(|| format!("unknown format {text:?} (expected xlsx, csv, tsv, json or yaml)"))
}

struct Runner {
    schema: Option<Input>,
    from: Option<DocFormat>,
    quiet: bool,
    json_report: bool,
}

impl Runner {
    fn load(&self, path: &Path) -> Result<Input> {
        pipeline::load_path(path, self.from)
            .with_context(|| format!("cannot read {}", path.display()))
    }

    fn emit(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }

    fn note(&self, text: &str) {
        if !self.quiet {
            eprint!("{text}");
        }
    }

    /// Prints a validation report: JSON on stdout with `--json-report`,
    /// otherwise the table (on stdout for `validate`, stderr elsewhere).
    fn report(&self, report: &ValidationReport, primary: bool) -> u8 {
        if self.json_report {
            print!("{}", report.to_json());
        } else if primary {
            self.emit(&report.render_text());
        } else if !report.entries.is_empty() {
            self.note(&report.render_text());
        }
        u8::from(report.has_errors())
    }

    fn write(&self, output: &Output, format: DocFormat, dest: Option<&Path>) -> Result<()> {
        match (output, dest) {
            (_, Some(dest)) => pipeline::write_output(output, format, dest)?,
            (Output::Text(text), None) if !self.json_report => {
                std::io::stdout().write_all(text.as_bytes())?;
            }
            (Output::Text(_), None) => bail!("--json-report uses standard output; pass --output"),
            (Output::Workbook(_), None) => bail!("{format} output needs --output"),
        }
        Ok(())
    }

    fn produce(&self, produced: Produced, format: DocFormat, dest: Option<&Path>) -> Result<u8> {
        if let Some(output) = &produced.output {
            self.write(output, format, dest)?;
        }
        Ok(self.report(&produced.report, false))
    }

    fn run(&self, command: Command) -> Result<u8> {
        let schema = self.schema.as_ref();
        match command {
            Command::Validate { input } => {
                Ok(self.report(&pipeline::validate(&self.load(&input)?, schema)?, true))
            }
            Command::Convert { input, target } => {
                let format = target
                    .format
                    .ok_or_else(|| anyhow!("convert needs --format"))?;
                let produced = pipeline::convert(&self.load(&input)?, schema, format, false)?;
                self.produce(produced, format, target.output.as_deref())
            }
            Command::Normalize { input, target } => self.rewrite(&input, target, false),
            Command::Pretty { input, target } => self.rewrite(&input, target, true),
            Command::Export { input, target } => {
                let format = target.format.unwrap_or(DocFormat::Json);
                if format.container().is_some() {
                    bail!("export writes json or yaml; use convert for {format}");
                }
                let produced = pipeline::convert(&self.load(&input)?, schema, format, false)?;
                self.produce(produced, format, target.output.as_deref())
            }
            Command::Diff { left, right } => {
                match pipeline::diff(&self.load(&left)?, &self.load(&right)?, schema)? {
                    Compared::Invalid(i, report) => {
                        self.note(&format!(
                            "{} does not validate:\n",
                            [&left, &right][i].display()
                        ));
                        Ok(self.report(&report, false).max(1))
                    }
                    Compared::Done(diff) => {
                        if self.json_report {
                            print!("{}", diff.to_json());
                        } else {
                            self.emit(&diff.render_text());
                        }
                        Ok(u8::from(!diff.is_empty()))
                    }
                }
            }
            Command::Merge { inputs, target } => {
                let loaded = inputs
                    .iter()
                    .map(|p| self.load(p))
                    .collect::<Result<Vec<_>>>()?;
                match pipeline::merge(&loaded, schema)? {
                    Compared::Invalid(i, report) => {
                        self.note(&format!("{} does not validate:\n", inputs[i].display()));
                        Ok(self.report(&report, false).max(1))
                    }
                    Compared::Done(merged) => match merged.outcome {
                        MergeOutcome::Conflicts(conflicts) => {
                            if self.json_report {
                                print!("{}", conflicts.to_json());
                            } else {
                                self.note(&conflicts.render_text());
                            }
                            Ok(1)
                        }
                        MergeOutcome::Merged { dataset, report } => {
                            let format = target.format.unwrap_or(loaded[0].format());
                            let output = pipeline::render(
                                &dataset,
                                &merged.schema,
                                format,
                                &merged.options,
                            )?;
                            self.write(&output, format, target.output.as_deref())?;
                            Ok(self.report(&report, false))
                        }
                    },
                }
            }
            Command::Migrate {
                input,
                migration,
                target,
            } => {
                let source = self.load(&input)?;
                let migration = migration.map(|p| self.load(&p)).transpose()?;
                match pipeline::migrate(&source, migration.as_ref(), schema)? {
                    Compared::Invalid(_, report) => Ok(self.report(&report, false).max(1)),
                    Compared::Done(loaded) => {
                        let format = target.format.unwrap_or(source.format());
                        let output = pipeline::render(
                            &loaded.dataset,
                            &loaded.schema,
                            format,
                            &loaded.options,
                        )?;
                        self.write(&output, format, target.output.as_deref())?;
                        Ok(self.report(&loaded.report, false))
                    }
                }
            }
            Command::InitSchema { target } => {
                let dest = target
                    .output
                    .ok_or_else(|| anyhow!("init-schema needs --output"))?;
                let format = target
                    .format
                    .or_else(|| DocFormat::from_file_name(&dest.to_string_lossy()))
                    .unwrap_or(DocFormat::Xlsx);
                let container = format.container().ok_or_else(|| {
                    anyhow!("a schema worksheet is xlsx, csv or tsv, not {format}")
                })?;
                let workbook = RawWorkbook::new(vec![pipeline::skeleton_schema()], container);
                write_grids(&workbook, container, &dest)?;
                self.note(&format!("wrote {}\n", dest.display()));
                Ok(0)
            }
            Command::Serve { listen } => {
                let runtime = tokio::runtime::Runtime::new()?;
                self.note(&format!("listening on http://{listen}\n"));
                runtime.block_on(structsheet_service::serve(listen))?;
                Ok(0)
            }
        }
    }

    fn rewrite(&self, input: &Path, target: Target, pretty: bool) -> Result<u8> {
        let source = self.load(input)?;
        let format = target.format.unwrap_or(source.format());
        let produced = pipeline::convert(&source, self.schema.as_ref(), format, pretty)?;
        self.produce(produced, format, target.output.as_deref())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let schema = match cli.schema.as_deref().map(|p| pipeline::load_path(p, None)) {
        None => None,
        Some(Ok(input)) => Some(input),
        Some(Err(e)) => {
            eprintln!("error: cannot read schema: {e}");
            return ExitCode::from(2);
        }
    };
    let runner = Runner {
        schema,
        from: cli.from,
        quiet: cli.quiet,
        json_report: cli.json_report,
    };
    match runner.run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain joined with `: `, skipping causes that the previous
/// message already quotes.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}
