use proptest::prelude::*;
use structsheet_core::format::{ChemicalEquation, Participant};
use structsheet_core::{
    parse_attribute_format, parse_chemical_equation, print_attribute_format,
    print_chemical_equation, AttributeFormat, AttributeKind,
};

fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,8}"
}

fn scalar_kind() -> impl Strategy<Value = AttributeKind> {
    prop::sample::select(
        AttributeKind::ALL
            .into_iter()
            .filter(|k| !k.is_relation() && *k != AttributeKind::Enum)
            .collect::<Vec<_>>(),
    )
}

fn relation_kind() -> impl Strategy<Value = AttributeKind> {
    prop::sample::select(
        AttributeKind::ALL
            .into_iter()
            .filter(|k| k.is_relation())
            .collect::<Vec<_>>(),
    )
}

fn attribute_format() -> impl Strategy<Value = AttributeFormat> {
    let scalar =
        (scalar_kind(), any::<bool>(), any::<bool>()).prop_map(|(kind, primary, unique)| {
            let mut f = AttributeFormat::new(kind);
            f.primary = primary;
            f.unique = unique || primary;
            f
        });
    // Enum values may hold quotes and backslashes, which printing escapes.
    let enumeration =
        (prop::collection::vec("[ -~]{0,6}", 1..4), any::<bool>()).prop_map(|(values, unique)| {
            let mut f = AttributeFormat::new(AttributeKind::Enum);
            f.enum_values = values;
            f.unique = unique;
            f
        });
    let relation = (relation_kind(), identifier(), identifier())
        .prop_map(|(kind, target, related)| AttributeFormat::relation(kind, &target, &related));
    prop_oneof![scalar, enumeration, relation]
}

fn participant() -> impl Strategy<Value = Participant> {
    (
        prop::sample::select(vec![1.0, 2.0, 3.0, 0.5, 1.25, 12.0]),
        "[A-Za-z][A-Za-z0-9_]{0,5}",
    )
        .prop_map(|(coefficient, species)| Participant {
            coefficient,
            species,
        })
}

fn equation() -> impl Strategy<Value = ChemicalEquation> {
    (
        prop::collection::vec(participant(), 1..4),
        prop::collection::vec(participant(), 1..4),
        any::<bool>(),
    )
        .prop_map(|(reactants, products, reversible)| ChemicalEquation {
            reactants,
            products,
            reversible,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn attribute_parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(format) = parse_attribute_format(&text) {
            // Whatever parses has a canonical form that parses back to it.
            let printed = print_attribute_format(&format);
            prop_assert_eq!(parse_attribute_format(&printed).unwrap(), format);
        }
    }

    #[test]
    fn equation_parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(eq) = parse_chemical_equation(&text) {
            let printed = print_chemical_equation(&eq);
            prop_assert_eq!(parse_chemical_equation(&printed).unwrap(), eq);
        }
    }

    #[test]
    fn near_miss_formats_never_panic(text in "(String|Enum|OneToOne|ManyToOne|PositiveInteger)[(),'=a-z_ TrueFals\\\\]{0,30}") {
        let _ = parse_attribute_format(&text);
    }

    #[test]
    fn near_miss_equations_never_panic(text in "[A-Z0-9 +.<=>-]{0,30}") {
        let _ = parse_chemical_equation(&text);
    }
}

proptest! {
    #[test]
    fn attribute_format_round_trip(format in attribute_format()) {
        let printed = print_attribute_format(&format);
        prop_assert_eq!(parse_attribute_format(&printed).unwrap(), format.clone());
        // Printing is canonical: a second trip yields the same text.
        prop_assert_eq!(print_attribute_format(&parse_attribute_format(&printed).unwrap()), printed);
    }

    #[test]
    fn equation_round_trip(eq in equation()) {
        let printed = print_chemical_equation(&eq);
        prop_assert_eq!(parse_chemical_equation(&printed).unwrap(), eq);
    }
}

#[test]
fn fixture_formats_print_verbatim() {
    for text in [
        "String(primary=True, unique=True)",
        "String",
        "OneToOne('Location', related_name='genes')",
        "ManyToOne('Gene', related_name='transcripts')",
        "PositiveInteger",
    ] {
        assert_eq!(
            print_attribute_format(&parse_attribute_format(text).unwrap()),
            text
        );
    }
}
