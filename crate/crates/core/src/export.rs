//! JSON and DOT exporters for interaction transition graphs, plus the JSON
//! importer used for round-tripping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_guard, parse_snippet};
use crate::model::{Agent, Interaction, Itg, Prefix, StateRef, Transition};

#[derive(Debug, Serialize, Deserialize)]
struct ItgJson {
    states: Vec<String>,
    initial: InitialJson,
    transitions: Vec<TransitionJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InitialJson {
    snippet: String,
    state: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
struct TransitionJson {
    src: String,
    guard: String,
    #[serde(rename = "interactionId")]
    interaction_id: String,
    caller: String,
    channel: String,
    callee: String,
    snippet: String,
    dst: String,
}

/// Stable JSON rendering: sorted state array, transitions sorted by all
/// fields, fixed key order, `"STOP"` encoding the inactive target.
pub fn export_json(itg: &Itg) -> String {
    let mut transitions: Vec<TransitionJson> = itg
        .transitions
        .iter()
        .map(|t| TransitionJson {
            src: t.source.clone(),
            guard: t.prefix.guard.render(),
            interaction_id: t.prefix.interaction.id.clone(),
            caller: t.prefix.interaction.caller.to_string(),
            channel: t.prefix.interaction.channel.clone(),
            callee: t.prefix.interaction.callee.name.clone(),
            snippet: t.prefix.snippet.render(),
            dst: t.target.to_string(),
        })
        .collect();
    transitions.sort();
    let doc = ItgJson {
        states: itg.states.clone(), // already sorted
        initial: InitialJson {
            snippet: itg.initial_snippet.render(),
            state: itg.initial_state.clone(),
        },
        transitions,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    out.push('\n');
    out
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid {field}: {message}")]
    Field { field: &'static str, message: String },
}

fn field_err(field: &'static str, message: impl Into<String>) -> ImportError {
    ImportError::Field {
        field,
        message: message.into(),
    }
}

/// Rebuild a graph from its JSON export. The graph name is not part of the
/// wire format and is supplied by the caller.
pub fn import_json(name: &str, text: &str) -> Result<Itg, ImportError> {
    let doc: ItgJson = serde_json::from_str(text)?;
    let mut transitions = Vec::with_capacity(doc.transitions.len());
    for t in &doc.transitions {
        let guard = parse_guard(&t.guard)
            .map_err(|e| field_err("guard", format!("'{}': {}", t.guard, e.message)))?;
        let snippet = parse_snippet(&t.snippet)
            .map_err(|e| field_err("snippet", format!("'{}': {}", t.snippet, e.message)))?;
        let caller = match t.caller.strip_prefix(':') {
            Some(component) => Agent::component(component),
            None => Agent::actor(t.caller.clone()),
        };
        let target = if t.dst == "STOP" {
            StateRef::Stop
        } else {
            StateRef::Named(t.dst.clone())
        };
        transitions.push(Transition {
            source: t.src.clone(),
            prefix: Prefix::new(
                guard,
                Interaction {
                    id: t.interaction_id.clone(),
                    caller,
                    channel: t.channel.clone(),
                    callee: Agent::component(t.callee.clone()),
                },
                snippet,
            ),
            target,
        });
    }
    let initial_snippet = parse_snippet(&doc.initial.snippet).map_err(|e| {
        field_err(
            "initial.snippet",
            format!("'{}': {}", doc.initial.snippet, e.message),
        )
    })?;
    let mut itg = Itg::new(name, initial_snippet, doc.initial.state.clone(), transitions);

    // honor the explicit state list (it may include isolated states), but
    // insist it covers everything the transitions mention
    for needed in &itg.states {
        if !doc.states.contains(needed) {
            return Err(field_err(
                "states",
                format!("state '{needed}' is used but not listed"),
            ));
        }
    }
    let mut states = doc.states;
    states.sort();
    states.dedup();
    itg.states = states;
    Ok(itg)
}

fn dot_quote(s: &str) -> String {
    let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
    format!("\"{escaped}\"")
}

fn edge_label(prefix: &Prefix) -> String {
    let mut label = String::new();
    if !prefix.guard.is_true() {
        label.push_str(&format!("[{}] ", prefix.guard.render()));
    }
    label.push_str(&prefix.interaction.id);
    if !prefix.snippet.is_nil() {
        label.push_str(&format!(" / {}", prefix.snippet.render()));
    }
    label
}

/// Directed-graph text: rounded boxes for states, a point for the inactive
/// state, a source-less entry marker for the initial transition, and
/// `[guard] interaction / snippet` edge labels.
pub fn export_dot(itg: &Itg) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", dot_quote(&itg.name)));
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, style=rounded];\n");
    out.push_str("  __entry [shape=point, label=\"\"];\n");
    let has_stop = itg.transitions.iter().any(|t| t.target == StateRef::Stop);
    if has_stop {
        out.push_str("  __stop [shape=point, width=0.2, label=\"\"];\n");
    }
    for state in &itg.states {
        out.push_str(&format!("  {};\n", dot_quote(state)));
    }
    let init_label = if itg.initial_snippet.is_nil() {
        String::new()
    } else {
        itg.initial_snippet.render()
    };
    out.push_str(&format!(
        "  __entry -> {} [label={}];\n",
        dot_quote(&itg.initial_state),
        dot_quote(&init_label)
    ));
    for t in &itg.transitions {
        let dst = match &t.target {
            StateRef::Named(n) => dot_quote(n),
            StateRef::Stop => "__stop".to_string(),
        };
        out.push_str(&format!(
            "  {} -> {} [label={}];\n",
            dot_quote(&t.source),
            dst,
            dot_quote(&edge_label(&t.prefix))
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::model::Model;
    use crate::semantics::parallel_expand;

    const COUNTER_SRC: &str = include_str!("../../../models/counter.sbc");

    fn counter() -> Model {
        parse_model(COUNTER_SRC).unwrap()
    }

    #[test]
    fn json_single_shot_graph() {
        let m = counter();
        let text = export_json(m.itg("s61").unwrap());
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["states"], serde_json::json!(["s61"]));
        assert_eq!(doc["transitions"].as_array().unwrap().len(), 1);
        assert_eq!(doc["transitions"][0]["dst"], "STOP");
        assert_eq!(doc["transitions"][0]["interactionId"], "a61");
        assert_eq!(doc["initial"]["snippet"], "");
    }

    #[test]
    fn json_expanded_product() {
        let m = counter();
        let expanded = parallel_expand(m.itg("s51").unwrap(), m.itg("s61").unwrap());
        let text = export_json(&expanded);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["states"].as_array().unwrap().len(), 6);
        assert_eq!(doc["transitions"].as_array().unwrap().len(), 9);
        assert_eq!(doc["initial"]["snippet"], "c_count = 100;");
    }

    #[test]
    fn json_round_trips_every_corpus_graph() {
        let m = counter();
        for g in &m.itgs {
            let back = import_json(&g.name, &export_json(g)).unwrap();
            assert_eq!(&back, g, "round trip failed for {}", g.name);
        }
        let expanded = parallel_expand(m.itg("s51").unwrap(), m.itg("s61").unwrap());
        let back = import_json(&expanded.name, &export_json(&expanded)).unwrap();
        assert_eq!(back, expanded);
    }

    #[test]
    fn json_export_is_byte_stable() {
        let m = counter();
        let g = m.itg("s51").unwrap();
        assert_eq!(export_json(g), export_json(g));
    }

    #[test]
    fn json_import_rejects_missing_state() {
        let m = counter();
        let mut doc: serde_json::Value =
            serde_json::from_str(&export_json(m.itg("s51").unwrap())).unwrap();
        let states = doc["states"].as_array_mut().unwrap();
        states.retain(|s| s != "s52");
        let err = import_json("s51", &doc.to_string()).unwrap_err();
        assert!(matches!(err, ImportError::Field { field: "states", .. }));
    }

    #[test]
    fn dot_counts_for_branching_graph() {
        let m = counter();
        let dot = export_dot(m.itg("s41").unwrap());
        // two named nodes, entry marker, inactive point, 4 edges (3 + initial)
        assert_eq!(dot.matches("-> ").count(), 4);
        assert!(dot.contains("__entry"));
        assert!(dot.contains("__stop"));
        assert!(dot.contains("\"s41\""));
        assert!(dot.contains("\"s42\""));
        assert!(dot.contains("label=\"[A > 200] a43\""));
        assert!(dot.contains("label=\"A = 500;\""));
    }

    #[test]
    fn dot_init_only_graph_has_no_stop_node() {
        let m = counter();
        let lone = crate::model::Itg::new(
            "lone",
            crate::expr::CodeSnippet::nil(),
            "s0",
            Vec::new(),
        );
        let dot = export_dot(&lone);
        assert!(!dot.contains("__stop"));
        assert_eq!(dot.matches("-> ").count(), 1);
        drop(m);
    }
}
