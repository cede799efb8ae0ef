use std::collections::HashMap;

use structsheet_core::pipeline::{self, Decoded, Input};
use structsheet_core::testing::{error_catalog, sample_schema, sample_workbook};
use structsheet_core::validation::Code;
use structsheet_core::{validate_dataset, Grid, ValidationReport};

fn report_for(workbook: structsheet_core::RawWorkbook) -> ValidationReport {
    pipeline::validate(&Input::Workbook(workbook), None).unwrap()
}

fn triples(report: &ValidationReport) -> Vec<(String, String, String)> {
    let mut out: Vec<_> = report
        .entries
        .iter()
        .map(|e| {
            (
                e.worksheet.clone(),
                e.cell.clone(),
                e.code.as_str().to_string(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn fixture_is_clean() {
    assert!(report_for(sample_workbook()).entries.is_empty());
}

#[test]
fn each_mutation_reports_exactly_its_defect() {
    let catalog = error_catalog();
    assert!(catalog.len() >= 10);
    for mutation in catalog {
        let report = report_for(mutation.apply(&sample_workbook()));
        let mut expected: Vec<(String, String, String)> = mutation
            .expected
            .iter()
            .map(|(w, c, k)| (w.to_string(), c.to_string(), k.to_string()))
            .collect();
        expected.sort();
        assert_eq!(
            triples(&report),
            expected,
            "{}:\n{}",
            mutation.name,
            report.render_text()
        );
    }
}

#[test]
fn reports_grow_monotonically() {
    // Stacking mutations on distinct cells never hides an earlier entry.
    let catalog: Vec<_> = error_catalog()
        .into_iter()
        .filter(|m| {
            !matches!(
                m.name,
                "bad declaration" | "duplicate related_name" | "undeclared class"
            )
        })
        .collect();
    let mut workbook = sample_workbook();
    let mut previous = report_for(workbook.clone());
    for mutation in catalog {
        workbook = mutation.apply(&workbook);
        let report = report_for(workbook.clone());
        let now = triples(&report);
        assert!(
            now.len() > previous.entries.len(),
            "{} added nothing",
            mutation.name
        );
        for entry in triples(&previous) {
            assert!(now.contains(&entry), "{} removed {entry:?}", mutation.name);
        }
        previous = report;
    }
}

#[test]
fn normalization_only_moves_locations() {
    let key = |r: &ValidationReport| {
        let mut counts: HashMap<(String, String, Code), usize> = HashMap::new();
        for e in &r.entries {
            *counts
                .entry((e.class.clone(), e.attribute.clone(), e.code))
                .or_default() += 1;
        }
        counts
    };
    for mutation in error_catalog() {
        let input = Input::Workbook(mutation.apply(&sample_workbook()));
        let Decoded::Loaded(loaded) = pipeline::decode(&input, None).unwrap() else {
            continue;
        };
        let renormalized = validate_dataset(&loaded.dataset.normalize(), &loaded.schema);
        assert_eq!(key(&renormalized), key(&loaded.report), "{}", mutation.name);
    }
}

#[test]
fn duplicated_gene_row_gives_two_primary_entries() {
    let mut workbook = sample_workbook();
    let genes = workbook
        .grids
        .iter_mut()
        .find(|g| g.name == "!!Genes")
        .unwrap();
    let mut rows = genes.rows().to_vec();
    rows.push(rows[3].clone());
    *genes = Grid::new(genes.name.clone(), rows);
    let report = report_for(workbook);
    let on_id: Vec<_> = report
        .with_code(Code::DupPrimary)
        .filter(|e| e.attribute == "id")
        .collect();
    assert_eq!(on_id.len(), 2);
    assert_eq!(
        [on_id[0].cell.as_str(), on_id[1].cell.as_str()],
        ["A4", "A6"]
    );
    assert!(on_id.iter().all(|e| e.message.contains("ENSG00000130203")));
    assert!(!sample_schema().classes.is_empty());
}
