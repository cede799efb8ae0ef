use std::sync::Arc;

use proptest::prelude::*;
use structsheet_core::testing::sample_schema;
use structsheet_core::{Dataset, Instance, Value};

fn text() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[A-Za-z0-9][A-Za-z0-9 ,.'-]{0,10}")
}

/// Clean random datasets over the example schema: distinct keys and
/// positions, every transcript pointing at an existing gene. Single-valued
/// relations are required, so every gene and transcript has a location.
pub fn dataset() -> impl Strategy<Value = Dataset> {
    let genes = prop::collection::vec((text(), text(), 1i64..1000), 0..5);
    let transcripts = prop::collection::vec((any::<prop::sample::Index>(), text()), 0..6);
    (genes, transcripts).prop_map(|(genes, transcripts)| {
        let schema = Arc::new(sample_schema());
        let mut d = Dataset::new(Arc::clone(&schema));
        let loc = |chromosome: Option<String>, five: i64, length: i64| -> Value {
            let mut l = Instance::new(schema.class("Location").unwrap());
            if let Some(c) = chromosome {
                l.set("chromosome", c);
            }
            l.set("five_prime", five).set("three_prime", five + length);
            l.into()
        };
        let mut position = 1_000_000;
        for (i, (symbol, chromosome, length)) in genes.iter().enumerate() {
            let mut g = Instance::new(schema.class("Gene").unwrap());
            g.set("id", format!("G{i:03}"));
            if let Some(s) = symbol {
                g.set("symbol", s.clone());
            }
            position += 7919;
            g.set("location", loc(chromosome.clone(), position, *length));
            d.push(g);
        }
        if genes.is_empty() {
            return d;
        }
        for (i, (gene, chromosome)) in transcripts.into_iter().enumerate() {
            let mut t = Instance::new(schema.class("Transcript").unwrap());
            t.set("id", format!("T{i:03}.1"));
            t.set(
                "gene",
                Value::Ref(format!("G{:03}", gene.index(genes.len()))),
            );
            position += 7919;
            t.set("location", loc(chromosome, position, 11));
            d.push(t);
        }
        d
    })
}
