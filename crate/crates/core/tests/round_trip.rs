//! Parser/printer round trips over the bundled corpus and over generated
//! models, plus golden canonical-form files.

use proptest::prelude::*;

use sbcpa::dsl::{analyze_model, parse_model, print_model};
use sbcpa::expr::CodeSnippet;
use sbcpa::model::{
    Agent, ChannelSignature, Definition, Direction, Interaction, Itg, Model, Parameter, Prefix,
    StateExpr, StateRef, Transition, ValueType,
};
use sbcpa::{parse_guard, parse_snippet, validate_model};

const COUNTER_SRC: &str = include_str!("../../../models/counter.sbc");
const ATM_SRC: &str = include_str!("../../../models/atm.sbc");
const COUNTER_GOLDEN: &str = include_str!("../../../models/golden/counter.canonical.sbc");
const ATM_GOLDEN: &str = include_str!("../../../models/golden/atm.canonical.sbc");

fn corpus() -> Vec<(&'static str, &'static str)> {
    vec![("counter.sbc", COUNTER_SRC), ("atm.sbc", ATM_SRC)]
}

#[test]
fn corpus_parses_clean() {
    for (name, src) in corpus() {
        let out = analyze_model(src);
        assert!(
            out.model.is_some() && out.diagnostics.is_empty(),
            "{name}: {:?}",
            out.diagnostics
        );
    }
}

#[test]
fn parse_print_parse_is_identity_on_corpus() {
    for (name, src) in corpus() {
        let model = parse_model(src).unwrap();
        let printed = print_model(&model);
        let reparsed = parse_model(&printed).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        assert_eq!(reparsed, model, "{name} round trip changed the model");
    }
}

#[test]
fn print_is_idempotent_byte_for_byte() {
    for (name, src) in corpus() {
        let model = parse_model(src).unwrap();
        let once = print_model(&model);
        let twice = print_model(&parse_model(&once).unwrap());
        assert_eq!(once, twice, "{name} printing is not idempotent");
    }
}

#[test]
fn canonical_form_matches_golden_files() {
    let counter = parse_model(COUNTER_SRC).unwrap();
    assert_eq!(print_model(&counter), COUNTER_GOLDEN);
    let atm = parse_model(ATM_SRC).unwrap();
    assert_eq!(print_model(&atm), ATM_GOLDEN);
}

#[test]
fn atm_counts_match_the_case_study() {
    let m = parse_model(ATM_SRC).unwrap();
    assert_eq!(m.actors.len(), 2);
    assert_eq!(m.components.len(), 2);
    assert_eq!(m.channels.len(), 7);
    assert_eq!(m.itgs.len(), 3);
    assert_eq!(m.defs.len(), 1);
    assert!(m.def("s_ATM").is_some());
    assert!(validate_model(&m).is_empty());
}

#[test]
fn programmatic_unsorted_model_prints_sorted() {
    let m = Model {
        actors: vec!["Zed".into(), "Abel".into()],
        components: vec!["Box2".into(), "Box1".into()],
        ..Model::default()
    };
    let printed = print_model(&m);
    let lines: Vec<&str> = printed.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(
        lines[1..],
        [
            "actor Abel;",
            "actor Zed;",
            "component Box1;",
            "component Box2;"
        ]
    );
}

// ---------------------------------------------------------------------------
// generated models

fn arb_guard() -> impl Strategy<Value = sbcpa::Guard> {
    prop_oneof![
        Just(sbcpa::Guard::True),
        prop::sample::select(vec!["x > 0", "x <= 10", "x == 3", "name == \"a b\"", "x != -2"])
            .prop_map(|s| parse_guard(s).unwrap()),
    ]
}

fn arb_snippet() -> impl Strategy<Value = CodeSnippet> {
    prop::sample::select(vec![
        "",
        "x = 1;",
        "x = x + 1;",
        "x = (x - 2) * 3;",
        "name = \"quoted \\\" slash \\\\\";",
        "x = 2; y = x / 2;",
    ])
    .prop_map(|s| parse_snippet(s).unwrap())
}

#[derive(Debug, Clone)]
struct GenTransition {
    source: usize,
    guard: sbcpa::Guard,
    interaction: usize,
    snippet: CodeSnippet,
    target: Option<usize>, // None = STOP
}

fn arb_model() -> impl Strategy<Value = Model> {
    let transitions = prop::collection::vec(
        (
            0usize..4,
            arb_guard(),
            0usize..3,
            arb_snippet(),
            prop_oneof![Just(None), (0usize..4).prop_map(Some)],
        )
            .prop_map(|(source, guard, interaction, snippet, target)| GenTransition {
                source,
                guard,
                interaction,
                snippet,
                target,
            }),
        0..8,
    );
    (transitions, 0usize..4, any::<bool>()).prop_map(|(gen, init, with_def)| {
        let interactions: Vec<Interaction> = (0..3)
            .map(|i| Interaction {
                id: format!("act{i}"),
                caller: if i == 0 {
                    Agent::actor("Human")
                } else {
                    Agent::component("Core")
                },
                channel: format!("ch{i}"),
                callee: Agent::component("Core"),
            })
            .collect();
        let transitions: Vec<Transition> = gen
            .iter()
            .map(|t| Transition {
                source: format!("n{}", t.source),
                prefix: Prefix::new(
                    t.guard.clone(),
                    interactions[t.interaction].clone(),
                    t.snippet.clone(),
                ),
                target: match t.target {
                    Some(i) => StateRef::Named(format!("n{i}")),
                    None => StateRef::Stop,
                },
            })
            .collect();
        let itg = Itg::new(
            "gen",
            parse_snippet("x = 0; name = \"a b\";").unwrap(),
            format!("n{init}"),
            transitions,
        );
        let mut defs = Vec::new();
        if with_def {
            defs.push(Definition {
                name: "top".into(),
                expr: StateExpr::par(
                    StateExpr::Ref("gen".into()),
                    StateExpr::prefixed(
                        Prefix::new(
                            sbcpa::Guard::True,
                            interactions[0].clone(),
                            CodeSnippet::nil(),
                        ),
                        StateExpr::alt(StateExpr::Ref("gen".into()), StateExpr::Inactive),
                    ),
                ),
            });
        }
        let mut model = Model {
            actors: vec!["Human".into()],
            components: vec!["Core".into()],
            channels: (0..3)
                .map(|i| ChannelSignature {
                    name: format!("ch{i}"),
                    params: if i == 2 {
                        vec![Parameter {
                            direction: Direction::In,
                            name: "x".into(),
                            value_type: ValueType::Integer,
                        }]
                    } else {
                        vec![]
                    },
                })
                .collect(),
            interactions,
            itgs: vec![itg],
            defs,
        };
        model.normalize();
        model
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_models_round_trip(model in arb_model()) {
        let printed = print_model(&model);
        let reparsed = parse_model(&printed)
            .unwrap_or_else(|d| panic!("diagnostics: {d:?}\n{printed}"));
        prop_assert_eq!(&reparsed, &model);
        prop_assert_eq!(print_model(&reparsed), printed);
    }

    #[test]
    fn parser_is_total_on_noise(input in "\\PC{0,80}") {
        let _ = analyze_model(&input); // must not panic
    }

    #[test]
    fn parser_is_total_on_near_miss_models(
        seed in "(actor|itg|def|channel) [a-z]{1,4}[;{=\\(][^\u{0}]{0,24}"
    ) {
        let _ = analyze_model(&seed);
    }
}
