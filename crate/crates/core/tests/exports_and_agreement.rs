//! Cross-module checks: DOT output against an independent grammar checker,
//! agreement between expanded and on-the-fly simulation, and composition
//! properties over the whole corpus.

use sbcpa::export::export_dot;
use sbcpa::model::Model;
use sbcpa::sim::{simulate, SimOptions};
use sbcpa::{
    compose_sequence, expand, make_prefix, parallel_expand, parse_model, parse_snippet,
};

const COUNTER_SRC: &str = include_str!("../../../models/counter.sbc");
const ATM_SRC: &str = include_str!("../../../models/atm.sbc");

fn counter() -> Model {
    parse_model(COUNTER_SRC).unwrap()
}

/// Minimal graph-description grammar checker, independent of the exporter:
///
/// ```text
/// graph := 'digraph' id '{' stmt* '}'
/// stmt  := id '=' id ';' | id attrs? ';' | id '->' id attrs? ';'
/// attrs := '[' id '=' id (',' id '=' id)* ']'
/// id    := word | number | quoted string
/// ```
mod dot_grammar {
    #[derive(Debug, PartialEq)]
    enum Tok {
        Id(String),
        LBrace,
        RBrace,
        LBracket,
        RBracket,
        Eq,
        Semi,
        Comma,
        Arrow,
    }

    fn lex(src: &str) -> Result<Vec<Tok>, String> {
        let bytes = src.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b if (b as char).is_whitespace() => i += 1,
                b'{' => {
                    toks.push(Tok::LBrace);
                    i += 1;
                }
                b'}' => {
                    toks.push(Tok::RBrace);
                    i += 1;
                }
                b'[' => {
                    toks.push(Tok::LBracket);
                    i += 1;
                }
                b']' => {
                    toks.push(Tok::RBracket);
                    i += 1;
                }
                b'=' => {
                    toks.push(Tok::Eq);
                    i += 1;
                }
                b';' => {
                    toks.push(Tok::Semi);
                    i += 1;
                }
                b',' => {
                    toks.push(Tok::Comma);
                    i += 1;
                }
                b'-' if bytes.get(i + 1) == Some(&b'>') => {
                    toks.push(Tok::Arrow);
                    i += 2;
                }
                b'"' => {
                    let mut out = String::new();
                    i += 1;
                    loop {
                        match bytes.get(i) {
                            None => return Err("unterminated quoted id".into()),
                            Some(b'"') => {
                                i += 1;
                                break;
                            }
                            Some(b'\\') => {
                                let c = *bytes.get(i + 1).ok_or("dangling escape")?;
                                out.push(c as char);
                                i += 2;
                            }
                            Some(c) => {
                                out.push(*c as char);
                                i += 1;
                            }
                        }
                    }
                    toks.push(Tok::Id(out));
                }
                b if (b as char).is_ascii_alphanumeric() || b == b'_' || b == b'.' => {
                    let start = i;
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_alphanumeric()
                            || bytes[i] == b'_'
                            || bytes[i] == b'.')
                    {
                        i += 1;
                    }
                    toks.push(Tok::Id(
                        String::from_utf8_lossy(&bytes[start..i]).into_owned(),
                    ));
                }
                other => return Err(format!("unexpected character '{}'", other as char)),
            }
        }
        Ok(toks)
    }

    pub fn check(src: &str) -> Result<(), String> {
        let toks = lex(src)?;
        let mut at = 0;
        let expect_id = |toks: &[Tok], at: &mut usize| -> Result<(), String> {
            match toks.get(*at) {
                Some(Tok::Id(_)) => {
                    *at += 1;
                    Ok(())
                }
                other => Err(format!("expected id, found {other:?}")),
            }
        };
        let eat = |toks: &[Tok], at: &mut usize, t: Tok| -> Result<(), String> {
            if toks.get(*at) == Some(&t) {
                *at += 1;
                Ok(())
            } else {
                Err(format!("expected {t:?}, found {:?}", toks.get(*at)))
            }
        };
        let attrs = |toks: &[Tok], at: &mut usize| -> Result<(), String> {
            if toks.get(*at) != Some(&Tok::LBracket) {
                return Ok(());
            }
            *at += 1;
            loop {
                expect_id(toks, at)?;
                eat(toks, at, Tok::Eq)?;
                expect_id(toks, at)?;
                match toks.get(*at) {
                    Some(Tok::Comma) => *at += 1,
                    Some(Tok::RBracket) => {
                        *at += 1;
                        return Ok(());
                    }
                    other => return Err(format!("expected ',' or ']', found {other:?}")),
                }
            }
        };

        match toks.get(at) {
            Some(Tok::Id(w)) if w == "digraph" => at += 1,
            other => return Err(format!("expected 'digraph', found {other:?}")),
        }
        expect_id(&toks, &mut at)?;
        eat(&toks, &mut at, Tok::LBrace)?;
        while toks.get(at) != Some(&Tok::RBrace) {
            expect_id(&toks, &mut at)?;
            match toks.get(at) {
                Some(Tok::Eq) => {
                    at += 1;
                    expect_id(&toks, &mut at)?;
                }
                Some(Tok::Arrow) => {
                    at += 1;
                    expect_id(&toks, &mut at)?;
                    attrs(&toks, &mut at)?;
                }
                _ => attrs(&toks, &mut at)?,
            }
            eat(&toks, &mut at, Tok::Semi)?;
        }
        at += 1;
        if at != toks.len() {
            return Err("trailing tokens after '}'".into());
        }
        Ok(())
    }
}

#[test]
fn dot_output_passes_independent_grammar_check() {
    let counter = counter();
    let atm = parse_model(ATM_SRC).unwrap();
    let mut graphs = Vec::new();
    graphs.extend(counter.itgs.iter().cloned());
    graphs.extend(atm.itgs.iter().cloned());
    graphs.push(expand(&counter, "s81").unwrap()); // pair names with spaces and •
    graphs.push(expand(&atm, "s_ATM").unwrap());
    for g in &graphs {
        let dot = export_dot(g);
        dot_grammar::check(&dot).unwrap_or_else(|e| panic!("{}: {e}\n{dot}", g.name));
    }
}

#[test]
fn expanded_and_unexpanded_runs_are_label_identical() {
    let counter = counter();
    let mut model = counter.clone();
    let mut expanded = parallel_expand(
        counter.itg("s51").unwrap(),
        counter.itg("s61").unwrap(),
    );
    expanded.name = "s81_flat".into();
    model.itgs.push(expanded);
    model.normalize();

    for seed in 0..40u64 {
        let flat = simulate(&model, "s81_flat", None, seed, 500, SimOptions::default()).unwrap();
        let fly = simulate(&model, "s91", None, seed, 500, SimOptions::default()).unwrap();
        let labels = |t: &sbcpa::sim::Trace| -> Vec<String> {
            t.steps
                .iter()
                .map(|s| s.prefix.render_triple())
                .collect()
        };
        assert_eq!(labels(&flat), labels(&fly), "seed {seed}");
        assert_eq!(flat.final_env, fly.final_env, "seed {seed}");
        // terminal classification may differ: the expanded product ends in
        // the ordinary named state "• par •", the tree in true inactivity
        assert!(flat.steps.len() == fly.steps.len());
    }
}

#[test]
fn sequence_composition_always_clears_the_initial_snippet() {
    let counter = counter();
    let atm = parse_model(ATM_SRC).unwrap();
    let counter_prefixes = ["a41", "a55", "a61"].map(|id| {
        make_prefix(
            &counter,
            None,
            id,
            Some(parse_snippet("w = 1;").unwrap()),
        )
        .unwrap()
    });
    for (model, prefixes) in [(&counter, &counter_prefixes)] {
        for g in &model.itgs {
            for p in prefixes.iter() {
                let out = compose_sequence(p, g, "fresh_entry").unwrap();
                assert!(
                    out.initial_snippet.is_nil(),
                    "sequence over {} kept an initial snippet",
                    g.name
                );
            }
        }
    }
    for g in &atm.itgs {
        let p = make_prefix(&atm, None, "a101", None).unwrap();
        let out = compose_sequence(&p, g, "fresh_entry").unwrap();
        assert!(out.initial_snippet.is_nil());
    }
}
