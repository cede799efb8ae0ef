//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Thresholds are the constants below; every equality is exact.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use axum::body::{to_bytes, Body};
use axum::http::Request;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use structsheet_core::dataset::{from_document_tree, parse_json, parse_yaml, to_document_tree};
use structsheet_core::grid::write_xlsx_bytes;
use structsheet_core::ops::{
    self, encode_migration_grid, MergeOutcome, MigrationOp, MigrationSpec,
};
use structsheet_core::pipeline::{self, Compared, Decoded, DocFormat, Input, Loaded, Output};
use structsheet_core::testing::{
    error_catalog, sample_dataset, sample_schema, sample_workbook, permute_data_grid,
};
use structsheet_core::{
    encode_dataset, parse_attribute_format, parse_chemical_equation, print_attribute_format,
    print_chemical_equation, read_grids, write_grids, AttributeFormat, AttributeKind,
    ContainerFormat, Dataset, EncodeOptions, RawWorkbook, Value,
};
use tower::ServiceExt;

const GENES: usize = 2;
const TRANSCRIPTS: usize = 4;
const LOCATIONS: usize = 6;
const APOE: &str = "ENSG00000130203";
const APOE_FIVE_PRIME: i64 = 44_905_791;
const PERMUTATION_TRIALS: u64 = 100;
const MIN_CATALOG: usize = 10;
const PARTITION_TRIALS: u64 = 25;
const FUZZ_CASES: usize = 10_000;
const FUZZ_MAX_LEN: usize = 64;
const TOKENS: [&str; 22] = [
    "String",
    "Enum",
    "OneToOne",
    "ManyToMany",
    "PositiveInteger",
    "(",
    ")",
    "'Gene'",
    ", ",
    "primary=True",
    "unique=False",
    "related_name=",
    "'x'",
    "2 ",
    "H2O",
    " + ",
    " ==> ",
    " <=> ",
    "0.5 ",
    "ATP",
    "[c]",
    " ",
];
const FORMATS: [ContainerFormat; 3] = [
    ContainerFormat::Xlsx,
    ContainerFormat::CsvDir,
    ContainerFormat::TsvDir,
];

type Outcome = Result<String, String>;

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn loaded(input: &Input) -> Result<Loaded, String> {
    match pipeline::decode(input, None).map_err(|e| e.to_string())? {
        Decoded::Loaded(l) => Ok(*l),
        Decoded::Rejected(r) => Err(r.render_text()),
    }
}

fn clean(input: &Input) -> Result<Dataset, String> {
    let l = loaded(input)?;
    check(l.report.entries.is_empty(), || l.report.render_text())?;
    Ok(l.dataset)
}

fn workbook_of(dataset: &Dataset) -> Input {
    Input::Workbook(encode_dataset(dataset, &sample_schema(), &EncodeOptions::default()).unwrap())
}

fn fixture_fidelity(dir: &Path) -> Outcome {
    let xlsx = dir.join("sample.xlsx");
    structsheet_core::testing::write_sample_xlsx(&xlsx).map_err(|e| e.to_string())?;
    let from_xlsx = clean(&pipeline::load_path(&xlsx, None).map_err(|e| e.to_string())?)?;
    let from_csv = clean(&Input::Workbook(
        read_grids(&fixtures().join("sample-csv"), ContainerFormat::CsvDir)
            .map_err(|e| e.to_string())?,
    ))?;
    let from_tsv = clean(&Input::Workbook(
        read_grids(&fixtures().join("sample-tsv"), ContainerFormat::TsvDir)
            .map_err(|e| e.to_string())?,
    ))?;
    check(from_xlsx == from_csv && from_csv == from_tsv, || {
        "xlsx, csv and tsv decode differently".into()
    })?;
    let counts = (
        from_xlsx.count("Gene"),
        from_xlsx.count("Transcript"),
        from_xlsx.count("Location"),
    );
    check(counts == (GENES, TRANSCRIPTS, LOCATIONS), || {
        format!("counts {counts:?}")
    })?;
    let apoe = from_xlsx.find("Gene", APOE).ok_or("APOE missing")?;
    let Value::Embedded(location) = apoe.get("location") else {
        return Err("APOE has no location".into());
    };
    check(
        location.get("five_prime") == &Value::Integer(APOE_FIVE_PRIME),
        || format!("APOE 5' is {:?}", location.get("five_prime")),
    )?;
    Ok(format!("3 formats agree, {GENES}/{TRANSCRIPTS}/{LOCATIONS} objects, APOE 5'={APOE_FIVE_PRIME}, 0 errors"))
}

fn permuted_round_trip(dir: &Path) -> Outcome {
    let schema = sample_schema();
    let expected = sample_dataset().normalize();
    for seed in 0..PERMUTATION_TRIALS {
        for format in FORMATS {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut permutation = |n: usize| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            };
            let options = EncodeOptions::default()
                .with_toc(true)
                .with_container(format);
            let mut workbook =
                encode_dataset(&sample_dataset(), &schema, &options).map_err(|e| e.to_string())?;
            for grid in &mut workbook.grids {
                *grid = permute_data_grid(grid, &schema, &mut permutation);
            }
            let dest = dir.join(format!("permuted-{seed}.{}", format.name()));
            write_grids(&workbook, format, &dest).map_err(|e| e.to_string())?;
            let back = clean(&Input::Workbook(
                read_grids(&dest, format).map_err(|e| e.to_string())?,
            ))?;
            check(back.normalize() == expected, || {
                format!("seed {seed} through {} differs", format.name())
            })?;
        }
    }
    Ok(format!(
        "{PERMUTATION_TRIALS} permutations x 3 formats decode exactly"
    ))
}

fn error_catalog_check() -> Outcome {
    let catalog = error_catalog();
    check(catalog.len() >= MIN_CATALOG, || {
        format!("only {} mutations", catalog.len())
    })?;
    for m in &catalog {
        let report = pipeline::validate(&Input::Workbook(m.apply(&sample_workbook())), None)
            .map_err(|e| e.to_string())?;
        let mut found: Vec<(&str, &str, &str)> = report
            .entries
            .iter()
            .map(|e| (e.worksheet.as_str(), e.cell.as_str(), e.code.as_str()))
            .collect();
        let mut expected = m.expected.clone();
        found.sort_unstable();
        expected.sort_unstable();
        check(found == expected, || {
            format!("{}: expected {expected:?}, found {found:?}", m.name)
        })?;
    }
    Ok(format!(
        "{} mutations, each exact code at exact cell, nothing spurious",
        catalog.len()
    ))
}

fn merged(outcome: MergeOutcome) -> Result<Dataset, String> {
    match outcome {
        MergeOutcome::Merged { dataset, .. } => Ok(dataset),
        MergeOutcome::Conflicts(c) => Err(c.render_text()),
    }
}

fn diff_merge() -> Outcome {
    let d = sample_dataset();
    let fixture = Input::Workbook(sample_workbook());
    match pipeline::diff(&fixture, &fixture, None).map_err(|e| e.to_string())? {
        Compared::Done(report) => check(report.is_empty(), || report.render_text())?,
        Compared::Invalid(_, r) => return Err(r.render_text()),
    }

    let mut genes = d.clone();
    genes.instances_mut().shift_remove("Transcript");
    let mut transcripts = d.clone();
    transcripts.instances_mut().shift_remove("Gene");
    let parts = [workbook_of(&genes), workbook_of(&transcripts)];
    match pipeline::merge(&parts, None).map_err(|e| e.to_string())? {
        Compared::Done(m) => {
            let out = merged(m.outcome)?;
            check(out == d.normalize(), || {
                "split halves do not merge back".into()
            })?;
        }
        Compared::Invalid(i, r) => return Err(format!("part {i}: {}", r.render_text())),
    }

    let mut edited = d.clone();
    edited.instances_mut().get_mut("Gene").unwrap()[0].set("symbol", "APO-E");
    match ops::merge(&[d.clone(), edited]).map_err(|e| e.to_string())? {
        MergeOutcome::Conflicts(c) => check(c.conflicts.len() == 1, || c.render_text())?,
        MergeOutcome::Merged { .. } => return Err("one-cell edit merged silently".into()),
    }

    let orderings = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for seed in 0..PARTITION_TRIALS {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut parts: Vec<Dataset> = (0..3)
            .map(|_| {
                let mut p = Dataset::new(d.schema_arc());
                p.document_metadata = d.document_metadata.clone();
                p
            })
            .collect();
        for (_, instances) in d.classes() {
            for inst in instances {
                parts[rng.random_range(0..3)].push(inst.clone());
            }
        }
        for order in orderings {
            let ordered: Vec<Dataset> = order.iter().map(|&i| parts[i].clone()).collect();
            let out = merged(ops::merge(&ordered).map_err(|e| e.to_string())?)?;
            check(out == d.normalize(), || {
                format!("seed {seed}, order {order:?} differs")
            })?;
        }
    }
    Ok(format!("self-diff empty, split merges back, 1 conflict, {PARTITION_TRIALS} partitions x 6 orders agree"))
}

fn migration() -> Outcome {
    let d = sample_dataset();
    let schema = sample_schema();
    let spec = |operations| MigrationSpec {
        operations,
        ..MigrationSpec::default()
    };
    let there = spec(vec![
        MigrationOp::RenameClass {
            from: "Gene".into(),
            to: "Locus".into(),
        },
        MigrationOp::RenameAttribute {
            class: "Location".into(),
            from: "five_prime".into(),
            to: "start".into(),
        },
    ]);
    let back = spec(vec![
        MigrationOp::RenameAttribute {
            class: "Location".into(),
            from: "start".into(),
            to: "five_prime".into(),
        },
        MigrationOp::RenameClass {
            from: "Locus".into(),
            to: "Gene".into(),
        },
    ]);
    let (mid, mid_schema) = ops::migrate(&d, &there, &schema).map_err(|e| e.to_string())?;
    let (out, out_schema) = ops::migrate(&mid, &back, &mid_schema).map_err(|e| e.to_string())?;
    check(out == d && out_schema == schema, || {
        "rename and inverse is not the identity".into()
    })?;

    let mut add = spec(vec![MigrationOp::AddAttribute {
        class: "Gene".into(),
        name: "organism".into(),
        format: AttributeFormat::new(AttributeKind::String),
        default: Some("Homo sapiens".into()),
    }]);
    add.to_version = Some("2".into());
    let mut workbook = sample_workbook();
    workbook.grids.push(encode_migration_grid(&add));
    let result = match pipeline::migrate(&Input::Workbook(workbook), None, None)
        .map_err(|e| e.to_string())?
    {
        Compared::Done(l) => l,
        Compared::Invalid(_, r) => return Err(r.render_text()),
    };
    let filled = result
        .dataset
        .instances("Gene")
        .iter()
        .filter(|g| g.get("organism") == &Value::from("Homo sapiens"))
        .count();
    check(filled == GENES, || {
        format!("{filled} genes have the default")
    })?;
    check(result.report.entries.is_empty(), || {
        result.report.render_text()
    })?;
    let Output::Workbook(rendered) = pipeline::render(
        &result.dataset,
        &result.schema,
        DocFormat::Xlsx,
        &result.options,
    )
    .map_err(|e| e.to_string())?
    else {
        return Err("xlsx rendered as text".into());
    };
    let report = pipeline::validate(&Input::Workbook(rendered), None).map_err(|e| e.to_string())?;
    check(report.entries.is_empty(), || report.render_text())?;
    Ok("rename+inverse is identity, default fills both genes, migrated workbook validates".into())
}

fn dsl_fuzzing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut formats, mut equations) = (0, 0);
    let mut one = |text: &str| -> Result<(), String> {
        let result = catch_unwind(AssertUnwindSafe(|| {
            let mut trips = (true, true);
            if let Ok(f) = parse_attribute_format(text) {
                formats += 1;
                trips.0 = parse_attribute_format(&print_attribute_format(&f)).as_ref() == Ok(&f);
            }
            if let Ok(eq) = parse_chemical_equation(text) {
                equations += 1;
                trips.1 =
                    parse_chemical_equation(&print_chemical_equation(&eq)).as_ref() == Ok(&eq);
            }
            trips
        }));
        match result {
            Err(_) => Err(format!("parser panicked on {text:?}")),
            Ok((true, true)) => Ok(()),
            Ok(_) => Err(format!("{text:?} does not round-trip")),
        }
    };
    for _ in 0..FUZZ_CASES {
        let len = rng.random_range(0..=FUZZ_MAX_LEN);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        one(&String::from_utf8_lossy(&bytes))?;
        // Token soup reaches deeper into both grammars than raw bytes.
        let soup: String = (0..rng.random_range(0..12))
            .map(|_| TOKENS[rng.random_range(0..TOKENS.len())])
            .collect();
        one(&soup)?;
    }
    for text in [
        "String(primary=True, unique=True)",
        "OneToOne('Location', related_name='genes')",
        "ManyToOne('Gene', related_name='transcripts')",
        "Enum('red', 'green', unique=True)",
        "PositiveInteger",
    ] {
        let f = parse_attribute_format(text).map_err(|e| format!("{text}: {e}"))?;
        check(
            parse_attribute_format(&print_attribute_format(&f)).as_ref() == Ok(&f),
            || text.to_string(),
        )?;
    }
    for text in ["2 H2 + O2 ==> 2 H2O", "ATP + H2O <=> ADP + Pi"] {
        let eq = parse_chemical_equation(text).map_err(|e| format!("{text}: {e}"))?;
        check(
            parse_chemical_equation(&print_chemical_equation(&eq)).as_ref() == Ok(&eq),
            || text.to_string(),
        )?;
    }
    Ok(format!("{FUZZ_CASES} byte strings and {FUZZ_CASES} token strings per parser, no panic ({formats}/{equations} parsed and round-tripped)"))
}

fn export() -> Outcome {
    let fixture = Input::Workbook(sample_workbook());
    let tree = to_document_tree(&sample_dataset()).map_err(|e| e.to_string())?;
    for format in [DocFormat::Json, DocFormat::Yaml] {
        let produced =
            pipeline::convert(&fixture, None, format, false).map_err(|e| e.to_string())?;
        let Some(Output::Text(text)) = produced.output else {
            return Err(format!("no {format} output"));
        };
        let reparsed = match format {
            DocFormat::Json => parse_json(&text),
            _ => parse_yaml(&text),
        }
        .map_err(|e| e.to_string())?;
        check(reparsed == tree, || {
            format!("{format} re-parses to a different tree")
        })?;
        let back = from_document_tree(&reparsed, sample_dataset().schema_arc())
            .map_err(|e| e.to_string())?;
        check(back == sample_dataset().normalize(), || {
            format!("{format} imports to a different dataset")
        })?;
    }
    let apoe = &tree["Gene"][0];
    check(apoe["id"] == APOE && apoe["location"].is_object(), || {
        format!("APOE is {apoe}")
    })?;
    check(apoe["location"]["five_prime"] == APOE_FIVE_PRIME, || {
        format!("APOE is {apoe}")
    })?;
    Ok("json and yaml re-parse to the same tree; APOE location nested".into())
}

const BOUNDARY: &str = "acceptance-boundary";

async fn post_validate(bytes: &[u8]) -> (u16, Vec<u8>) {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"book.xlsx\"\r\n\
         Content-Type: application/octet-stream\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    let request = Request::post("/validate")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap();
    let response = structsheet_service::router()
        .oneshot(request)
        .await
        .unwrap();
    let status = response.status().as_u16();
    (
        status,
        to_bytes(response.into_body(), usize::MAX)
            .await
            .unwrap()
            .to_vec(),
    )
}

fn parity(dir: &Path) -> Outcome {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let mutation = error_catalog()
        .into_iter()
        .find(|m| m.name == "dangling reference")
        .ok_or("no mutation")?;
    let cases: [(&str, RawWorkbook, i32, u16); 2] = [
        ("fixture", sample_workbook(), 0, 200),
        ("mutated", mutation.apply(&sample_workbook()), 1, 422),
    ];
    for (name, workbook, exit, status) in cases {
        let bytes = write_xlsx_bytes(&workbook).map_err(|e| e.to_string())?;
        let file = dir.join(format!("{name}.xlsx"));
        std::fs::write(&file, &bytes).map_err(|e| e.to_string())?;
        let cli = Command::new(env!("CARGO_BIN_EXE_structsheet"))
            .args(["validate", "--json-report"])
            .arg(&file)
            .output()
            .map_err(|e| e.to_string())?;
        let (http_status, http_body) = runtime.block_on(post_validate(&bytes));
        check(cli.stdout == http_body, || {
            format!("{name}: CLI and service reports differ")
        })?;
        check(
            cli.status.code() == Some(exit) && http_status == status,
            || {
                format!(
                    "{name}: exit {:?} / HTTP {http_status}, expected {exit} / {status}",
                    cli.status.code()
                )
            },
        )?;
    }
    Ok("byte-identical reports; exit 0/1 matches HTTP 200/422 (fixture and mutation)".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: [(&str, &dyn Fn() -> Outcome); 8] = [
        ("fixture fidelity", &|| fixture_fidelity(dir.path())),
        ("permuted round trip", &|| permuted_round_trip(dir.path())),
        ("error catalog", &error_catalog_check),
        ("diff and merge", &diff_merge),
        ("migration", &migration),
        ("DSL fuzzing", &dsl_fuzzing),
        ("tree export", &export),
        ("CLI/service parity", &|| parity(dir.path())),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
