mod common;

use blockbench_core::meta::{
    AttributeSpec, BuildingBlock, Clause, ConstraintKind, ConstraintSpec, DocEntry, ElementKind, Endpoints,
    Literal, MethodStep, NuanceEffect, NuanceSpec, Params, PredicateKind, Role, Severity, ValueType,
};
use blockbench_core::{parse_block, parse_model, serialize_block, serialize_model, Model, ModelElement, ParseError};
use blockbench_core::syntax::{parse_block_bytes, parse_model_bytes};
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn fixture_blocks_round_trip() {
    for file in ["state_machine.dslbb", "traffic_signal.dslbb"] {
        let parsed = parse_block(&fixture_text(file)).unwrap();
        let text = serialize_block(&parsed);
        assert_eq!(parse_block(&text).unwrap(), parsed, "{file}");
        // canonical text is a fixed point
        assert_eq!(serialize_block(&parse_block(&text).unwrap()), text, "{file}");
    }
}

#[test]
fn fixture_models_round_trip() {
    for id in ["expo", "oven", "expo_draft"] {
        let text = fixture_text(&format!("models/{id}.dslm"));
        let parsed = parse_model(&text).unwrap();
        let again = serialize_model(&parsed);
        assert_eq!(parse_model(&again).unwrap(), parsed, "{id}");
        // fixtures are stored in canonical form
        assert_eq!(again, text, "{id}");
    }
}

#[test]
fn empty_block_input_is_one_error() {
    let errs = parse_block("").unwrap_err();
    assert_eq!(errs.len(), 1);
    assert!(errs[0].message.starts_with("expected 'block' header"), "{}", errs[0].message);
    assert_eq!((errs[0].span.line, errs[0].span.column), (1, 1));
    let errs = parse_block("# only a comment\n\n").unwrap_err();
    assert_eq!(errs.len(), 1);
}

#[test]
fn enum_without_values_is_rejected_with_position() {
    let errs = parse_block("block B\nelement node N\n  attr t: enum()\n").unwrap_err();
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].span.line, 3);
}

#[test]
fn table_two_row_parses_to_edge() {
    let m = model("model m : TrafficSignal\n\nedges\n  [Transition: 1] Go -> Slow { action = T1 }\n");
    let e = m.find("Transition", "1").unwrap();
    assert_eq!((e.source(), e.target()), ("Go", "Slow"));
    assert_eq!(e.attr_text("action").as_deref(), Some("T1"));
    assert_eq!(m.version, 1);
}

#[test]
fn bad_lines_do_not_hide_later_errors() {
    let text = "block B\nelement node\nelement wrong X\nconstraint C1 reachability(kind=N) severity=fatal message=\"m\"\n";
    let errs = parse_block(text).unwrap_err();
    let lines: Vec<usize> = errs.iter().map(|e| e.span.line).collect();
    assert_eq!(lines, vec![2, 3, 4]);
}

#[test]
fn invalid_utf8_is_a_single_error() {
    let mut bytes = fixture_text("state_machine.dslbb").into_bytes();
    bytes.insert(40, 0xff);
    assert_eq!(parse_block_bytes(&bytes).unwrap_err().len(), 1);
    let mut bytes = fixture_text("models/expo.dslm").into_bytes();
    bytes.push(0xc3);
    assert_eq!(parse_model_bytes(&bytes).unwrap_err().len(), 1);
}

#[test]
fn crlf_input_parses_like_lf() {
    let text = fixture_text("models/expo.dslm");
    assert_eq!(parse_model(&text.replace('\n', "\r\n")).unwrap(), parse_model(&text).unwrap());
    let text = fixture_text("state_machine.dslbb");
    assert_eq!(parse_block(&text.replace('\n', "\r\n")).unwrap(), parse_block(&text).unwrap());
}

fn spans_in_bounds(input: &[u8], errs: &[ParseError]) -> bool {
    let text = String::from_utf8_lossy(input);
    let lines: Vec<&str> = text.split('\n').collect();
    errs.iter().all(|e| {
        let l = e.span.line;
        l >= 1 && l <= lines.len() && e.span.column >= 1 && e.span.column <= lines[l - 1].chars().count() + 1
    })
}

fn mutate(rng: &mut StdRng, base: &[u8]) -> Vec<u8> {
    let mut bytes = base.to_vec();
    for _ in 0..rng.gen_range(1..=8) {
        let pos = if bytes.is_empty() { 0 } else { rng.gen_range(0..bytes.len()) };
        match rng.gen_range(0..4) {
            0 if !bytes.is_empty() => bytes[pos] = rng.gen(),
            1 => bytes.insert(pos, *b"[]{}()=,:&\"\\->#\n x1".get(rng.gen_range(0..19)).unwrap()),
            2 if !bytes.is_empty() => {
                let end = (pos + rng.gen_range(1..16)).min(bytes.len());
                bytes.drain(pos..end);
            }
            _ => {
                let end = (pos + rng.gen_range(1..32)).min(bytes.len());
                let chunk = bytes[pos..end].to_vec();
                let at = rng.gen_range(0..=bytes.len());
                bytes.splice(at..at, chunk);
            }
        }
    }
    bytes
}

/// A smaller run of the fuzz loop the acceptance target runs at 10,000.
#[test]
fn mutated_inputs_never_panic_and_spans_stay_in_bounds() {
    let seeds = [
        fixture_text("state_machine.dslbb"),
        fixture_text("traffic_signal.dslbb"),
        fixture_text("models/expo.dslm"),
        fixture_text("models/expo_draft.dslm"),
    ];
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..2000 {
        let input = mutate(&mut rng, seeds[i % seeds.len()].as_bytes());
        if let Err(errs) = parse_block_bytes(&input) {
            assert!(!errs.is_empty());
            assert!(spans_in_bounds(&input, &errs), "{errs:?}");
        }
        if let Err(errs) = parse_model_bytes(&input) {
            assert!(!errs.is_empty());
            assert!(spans_in_bounds(&input, &errs), "{errs:?}");
        }
    }
}

fn kind_name() -> impl Strategy<Value = String> {
    "K[a-z0-9_]{0,6}"
}

fn lower_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

fn text() -> impl Strategy<Value = String> {
    // quotes, escapes, newlines and non-ASCII must survive quoting
    "[a-zA-Z0-9 \"\\\\\n\t{}#é→-]{0,16}"
}

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        (-4000i32..4000).prop_map(|n| Literal::Number(n as f64 / 4.0)),
        text().prop_map(Literal::Text),
        "[A-Za-z][A-Za-z0-9_]{0,6}".prop_map(Literal::Symbol),
    ]
}

fn params() -> impl Strategy<Value = Params> {
    // keys are unique; the parser rejects repeats
    prop::collection::btree_map(lower_name(), literal(), 0..4).prop_map(|m| Params(m.into_iter().collect()))
}

fn value_type() -> impl Strategy<Value = ValueType> {
    prop_oneof![
        Just(ValueType::Text),
        Just(ValueType::Number),
        Just(ValueType::Duration),
        prop::collection::vec("[A-Z][a-z]{0,5}", 1..4).prop_map(|values| ValueType::Enum { values }),
        kind_name().prop_map(|kind| ValueType::Ref { kind }),
    ]
}

fn attribute() -> impl Strategy<Value = AttributeSpec> {
    (lower_name(), value_type(), any::<bool>(), prop::option::of(literal())).prop_map(
        |(name, value_type, required, default)| AttributeSpec { name, value_type, required, default },
    )
}

fn element() -> impl Strategy<Value = ElementKind> {
    (kind_name(), 0..3usize, kind_name(), kind_name(), prop::collection::vec(attribute(), 0..3)).prop_map(
        |(name, role, s, t, attributes)| {
            let role = [Role::Node, Role::Edge, Role::Datum][role];
            let endpoints = (role == Role::Edge).then(|| Endpoints { source: s, target: t });
            ElementKind { name, role, endpoints, attributes }
        },
    )
}

fn clauses<K: Copy + std::fmt::Debug + 'static>(all: &'static [K]) -> impl Strategy<Value = Vec<Clause<K>>> {
    prop::collection::vec((prop::sample::select(all), params()).prop_map(|(kind, params)| Clause { kind, params }), 1..3)
}

fn block() -> impl Strategy<Value = BuildingBlock> {
    let constraints = prop::collection::vec(
        ("C[0-9]{1,2}", clauses(ConstraintKind::ALL), any::<bool>(), text()).prop_map(|(id, clauses, err, message)| {
            ConstraintSpec { id, clauses, severity: if err { Severity::Error } else { Severity::Warning }, message }
        }),
        0..3,
    );
    let steps = prop::collection::vec(
        ("S[0-9]{1,2}", text(), text(), prop::sample::select(PredicateKind::ALL), params()).prop_map(
            |(id, title, description, kind, params)| MethodStep {
                id,
                title,
                description,
                completion: Clause { kind, params },
            },
        ),
        0..3,
    );
    let nuances = prop::collection::vec(
        ("N[0-9]{1,2}", clauses(NuanceEffect::ALL), text())
            .prop_map(|(id, effects, reason)| NuanceSpec { id, effects, reason }),
        0..3,
    );
    let docs = prop::collection::vec(
        (kind_name(), prop::option::of(lower_name()), text())
            .prop_map(|(element, attribute, description)| DocEntry { element, attribute, description }),
        0..3,
    );
    (
        kind_name(),
        prop::option::of(kind_name()),
        prop::collection::vec(element(), 0..4),
        constraints,
        steps,
        nuances,
        docs,
    )
        .prop_map(|(name, extends, elements, constraints, steps, nuances, docs)| {
            let mut b = BuildingBlock::new(name);
            b.extends = extends;
            b.elements = elements;
            b.constraints = constraints;
            b.method.steps = steps;
            b.nuances = nuances;
            b.docs = docs;
            b
        })
}

fn element_name() -> impl Strategy<Value = String> {
    prop_oneof!["[A-Za-z][A-Za-z0-9_]{0,5}", (1u32..50).prop_map(|n| n.to_string())]
}

fn model_strategy() -> impl Strategy<Value = Model> {
    let attrs = prop::collection::btree_map(lower_name(), literal(), 0..3);
    let el = (0..3usize, kind_name(), element_name(), element_name(), element_name(), attrs);
    ("[a-z][a-z0-9_-]{0,6}", kind_name(), 1u64..20, prop::collection::vec(el, 0..8)).prop_map(
        |(id, block_name, version, els)| {
            let mut m = Model::empty(&id, &block_name);
            m.version = version;
            for (role, kind, name, s, t, attrs) in els {
                if m.find(&kind, &name).is_some() {
                    continue;
                }
                let mut e = match role {
                    0 => ModelElement::node(&kind, &name),
                    1 => ModelElement::datum(&kind, &name),
                    _ => ModelElement::edge(&kind, &name, &s, &t),
                };
                e.attrs = attrs;
                m.insert(e);
            }
            m
        },
    )
}

proptest! {
    #[test]
    fn generated_blocks_round_trip(b in block()) {
        let text = serialize_block(&b);
        let parsed = parse_block(&text);
        prop_assert_eq!(parsed.as_ref().ok(), Some(&b), "{}\n{:?}", text, parsed.as_ref().err());
    }

    #[test]
    fn generated_models_round_trip(m in model_strategy()) {
        let text = serialize_model(&m);
        let parsed = parse_model(&text);
        prop_assert_eq!(parsed.as_ref().ok(), Some(&m), "{}\n{:?}", text, parsed.as_ref().err());
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        if let Err(errs) = parse_block(&s) {
            prop_assert!(spans_in_bounds(s.as_bytes(), &errs));
        }
        if let Err(errs) = parse_model(&s) {
            prop_assert!(spans_in_bounds(s.as_bytes(), &errs));
        }
    }
}
