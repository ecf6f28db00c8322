//! Canonical printer: declarations sorted by kind then name, one transition
//! per line. `parse_model(print_model(m))` is structurally equal to `m` and
//! printing is idempotent byte-for-byte.

use std::fmt::Write;

use crate::expr::Guard;
use crate::model::{Agent, AgentKind, Itg, Model, Prefix, StateExpr};

pub fn print_model(model: &Model) -> String {
    let mut model = model.clone();
    model.normalize();

    let mut out = String::from("// SBC-PA model (canonical form)\n");
    let sep = |out: &mut String| {
        if !out.ends_with("\n\n") {
            out.push('\n');
        }
    };

    if !model.actors.is_empty() {
        sep(&mut out);
        for a in &model.actors {
            writeln!(out, "actor {a};").unwrap();
        }
    }
    if !model.components.is_empty() {
        sep(&mut out);
        for c in &model.components {
            writeln!(out, "component {c};").unwrap();
        }
    }
    if !model.channels.is_empty() {
        sep(&mut out);
        for ch in &model.channels {
            writeln!(out, "channel {ch};").unwrap();
        }
    }
    if !model.interactions.is_empty() {
        sep(&mut out);
        for i in &model.interactions {
            writeln!(
                out,
                "interaction {} = {} -> {} . {};",
                i.id,
                print_agent(&i.caller),
                print_agent(&i.callee),
                i.channel
            )
            .unwrap();
        }
    }
    for itg in &model.itgs {
        sep(&mut out);
        print_itg(&mut out, itg);
    }
    if !model.defs.is_empty() {
        sep(&mut out);
        for def in &model.defs {
            writeln!(out, "def {} = {};", def.name, print_expr(&def.expr)).unwrap();
        }
    }
    out
}

fn print_agent(agent: &Agent) -> String {
    match agent.kind {
        AgentKind::Actor => agent.name.clone(),
        AgentKind::Component => format!(":{}", agent.name),
    }
}

fn print_itg(out: &mut String, itg: &Itg) {
    writeln!(out, "itg {} {{", itg.name).unwrap();
    if itg.initial_snippet.is_nil() {
        writeln!(out, "  init -> {};", itg.initial_state).unwrap();
    } else {
        writeln!(
            out,
            "  init [{}] -> {};",
            itg.initial_snippet.render(),
            itg.initial_state
        )
        .unwrap();
    }
    for t in &itg.transitions {
        writeln!(
            out,
            "  {} -[{}]-> {};",
            t.source,
            print_label(&t.prefix),
            t.target
        )
        .unwrap();
    }
    out.push_str("}\n");
}

fn print_label(prefix: &Prefix) -> String {
    let mut s = String::new();
    if let Guard::Cmp { .. } = &prefix.guard {
        write!(s, "{} ? ", prefix.guard.render()).unwrap();
    }
    s.push_str(&prefix.interaction.id);
    if !prefix.snippet.is_nil() {
        write!(s, " / {}", prefix.snippet.render()).unwrap();
    }
    s
}

/// Binary operands always get parentheses, so `(ref a) par (ref b)` and
/// `((ref a) par (ref b)) par (ref c)` come out in the conventional shape.
fn print_expr(expr: &StateExpr) -> String {
    match expr {
        StateExpr::Inactive => "STOP".to_string(),
        StateExpr::Loop(name) => format!("loop {name}"),
        StateExpr::Ref(name) => format!("ref {name}"),
        StateExpr::Prefixed { prefix, then } => {
            let then_text = match **then {
                StateExpr::Alt(..) | StateExpr::Par(..) => format!("({})", print_expr(then)),
                _ => print_expr(then),
            };
            format!("[{}] . {}", print_label(prefix), then_text)
        }
        StateExpr::Alt(l, r) => format!("({}) alt ({})", print_expr(l), print_expr(r)),
        StateExpr::Par(l, r) => format!("({}) par ({})", print_expr(l), print_expr(r)),
    }
}
