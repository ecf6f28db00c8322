//! Transitional semantics: reference resolution for state expressions, the
//! sequence/alternative/parallel composition rules over interaction
//! transition graphs, on-the-fly successor computation, derivatives and
//! loop detection.
//!
//! All operations are pure functions over immutable inputs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::expr::{concat_snippets, CodeSnippet};
use crate::model::{Itg, Model, Prefix, StateExpr, StateRef, Transition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("undefined definition or itg '{0}'")]
    UnknownName(String),
    #[error("'loop' target '{0}' is not a declared itg")]
    LoopTargetNotItg(String),
    #[error("definition cycle: {}", .0.join(" -> "))]
    DefinitionCycle(Vec<String>),
    #[error("state name '{0}' collides with an existing state")]
    StateNameCollision(String),
}

// ---------------------------------------------------------------------------
// reference resolution

/// Resolve a named definition (or itg) to a closed state expression: every
/// `ref` to another definition is inlined, every remaining `ref`/`loop`
/// names a declared itg. Chains of definitions that never reach an itg are
/// rejected as cycles.
pub fn resolve_refs(model: &Model, name: &str) -> Result<StateExpr, SemanticsError> {
    let mut stack = Vec::new();
    resolve_name(model, name, &mut stack)
}

fn resolve_name(
    model: &Model,
    name: &str,
    stack: &mut Vec<String>,
) -> Result<StateExpr, SemanticsError> {
    if model.itg(name).is_some() {
        return Ok(StateExpr::Ref(name.to_string()));
    }
    let Some(def) = model.def(name) else {
        return Err(SemanticsError::UnknownName(name.to_string()));
    };
    if let Some(at) = stack.iter().position(|n| n == name) {
        let mut cycle = stack[at..].to_vec();
        cycle.push(name.to_string());
        return Err(SemanticsError::DefinitionCycle(cycle));
    }
    stack.push(name.to_string());
    let out = resolve_expr(model, &def.expr, stack);
    stack.pop();
    out
}

fn resolve_expr(
    model: &Model,
    expr: &StateExpr,
    stack: &mut Vec<String>,
) -> Result<StateExpr, SemanticsError> {
    match expr {
        StateExpr::Inactive => Ok(StateExpr::Inactive),
        StateExpr::Prefixed { prefix, then } => Ok(StateExpr::Prefixed {
            prefix: prefix.clone(),
            then: Box::new(resolve_expr(model, then, stack)?),
        }),
        StateExpr::Alt(l, r) => Ok(StateExpr::Alt(
            Box::new(resolve_expr(model, l, stack)?),
            Box::new(resolve_expr(model, r, stack)?),
        )),
        StateExpr::Par(l, r) => Ok(StateExpr::Par(
            Box::new(resolve_expr(model, l, stack)?),
            Box::new(resolve_expr(model, r, stack)?),
        )),
        StateExpr::Loop(name) => {
            if model.itg(name).is_some() {
                Ok(StateExpr::Loop(name.clone()))
            } else {
                Err(SemanticsError::LoopTargetNotItg(name.clone()))
            }
        }
        StateExpr::Ref(name) => resolve_name(model, name, stack),
    }
}

// ---------------------------------------------------------------------------
// runtime configuration nodes

/// Composed runtime state: a tree over itg positions, inactive markers and
/// alt/par structure. `Alt` is still uncommitted; its first step commits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Stop,
    At { itg: String, state: String },
    Prefixed { prefix: Prefix, then: Box<Node> },
    Alt(Box<Node>, Box<Node>),
    Par(Box<Node>, Box<Node>),
}

impl Node {
    /// `true` once every parallel branch reached the inactive state.
    pub fn is_inactive(&self) -> bool {
        match self {
            Node::Stop => true,
            Node::Par(l, r) => l.is_inactive() && r.is_inactive(),
            _ => false,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Node::Stop => "\u{2022}".to_string(),
            Node::At { state, .. } => state.clone(),
            Node::Prefixed { prefix, then } => {
                format!("{} . {}", prefix.render_triple(), then.render())
            }
            Node::Alt(l, r) => format!("({} alt {})", l.render(), r.render()),
            Node::Par(l, r) => format!("({} par {})", l.render(), r.render()),
        }
    }

    /// Itg states mentioned anywhere in the tree, for "where am I" queries.
    pub fn active_states(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'n>(node: &'n Node, out: &mut Vec<&'n str>) {
            match node {
                Node::Stop => {}
                Node::At { state, .. } => out.push(state),
                Node::Prefixed { then, .. } => walk(then, out),
                Node::Alt(l, r) | Node::Par(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }
}

/// Build the runtime node for a resolved state expression. Itg references
/// enter at the itg's initial state.
pub fn node_of_expr(model: &Model, expr: &StateExpr) -> Result<Node, SemanticsError> {
    match expr {
        StateExpr::Inactive => Ok(Node::Stop),
        StateExpr::Prefixed { prefix, then } => Ok(Node::Prefixed {
            prefix: prefix.clone(),
            then: Box::new(node_of_expr(model, then)?),
        }),
        StateExpr::Alt(l, r) => Ok(Node::Alt(
            Box::new(node_of_expr(model, l)?),
            Box::new(node_of_expr(model, r)?),
        )),
        StateExpr::Par(l, r) => Ok(Node::Par(
            Box::new(node_of_expr(model, l)?),
            Box::new(node_of_expr(model, r)?),
        )),
        StateExpr::Loop(name) | StateExpr::Ref(name) => {
            let itg = model
                .itg(name)
                .ok_or_else(|| SemanticsError::UnknownName(name.clone()))?;
            Ok(Node::At {
                itg: itg.name.clone(),
                state: itg.initial_state.clone(),
            })
        }
    }
}

/// Concatenated initialization snippet of a freshly entered node, in
/// left-to-right order. Prefixed nodes contribute nothing here: the
/// continuation's initialization is folded into the prefix at firing time.
pub fn initial_snippet(model: &Model, node: &Node) -> Result<CodeSnippet, SemanticsError> {
    match node {
        Node::Stop | Node::Prefixed { .. } => Ok(CodeSnippet::nil()),
        Node::At { itg, .. } => {
            let g = model
                .itg(itg)
                .ok_or_else(|| SemanticsError::UnknownName(itg.clone()))?;
            Ok(g.initial_snippet.clone())
        }
        Node::Alt(l, r) | Node::Par(l, r) => Ok(concat_snippets(
            &initial_snippet(model, l)?,
            &initial_snippet(model, r)?,
        )),
    }
}

/// All one-step successors of a node, without guard evaluation
/// (structural enablement only). Parallel branches interleave; an
/// alternative offers both branches' first steps and commits on firing;
/// the inactive state has no successors.
pub fn successors(model: &Model, node: &Node) -> Result<Vec<(Prefix, Node)>, SemanticsError> {
    match node {
        Node::Stop => Ok(Vec::new()),
        Node::At { itg, state } => {
            let g = model
                .itg(itg)
                .ok_or_else(|| SemanticsError::UnknownName(itg.clone()))?;
            Ok(g.outgoing(state)
                .map(|t| {
                    let next = match &t.target {
                        StateRef::Named(n) => Node::At {
                            itg: itg.clone(),
                            state: n.clone(),
                        },
                        StateRef::Stop => Node::Stop,
                    };
                    (t.prefix.clone(), next)
                })
                .collect())
        }
        Node::Prefixed { prefix, then } => {
            // sequence rule: the continuation's initialization rides on the prefix
            let folded = Prefix {
                guard: prefix.guard.clone(),
                interaction: prefix.interaction.clone(),
                snippet: concat_snippets(&prefix.snippet, &initial_snippet(model, then)?),
            };
            Ok(vec![(folded, (**then).clone())])
        }
        Node::Alt(l, r) => {
            let mut out = successors(model, l)?;
            out.extend(successors(model, r)?);
            Ok(out)
        }
        Node::Par(l, r) => {
            let mut out = Vec::new();
            for (p, l2) in successors(model, l)? {
                out.push((p, Node::Par(Box::new(l2), r.clone())));
            }
            for (p, r2) in successors(model, r)? {
                out.push((p, Node::Par(l.clone(), Box::new(r2))));
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// composition rules

/// Sequence rule: prefix a graph. The new initial state fires `prefix` into
/// the target's old initial state; the target's initial transition is
/// deleted and its snippet is concatenated onto the prefix; the result's
/// own initial transition carries no snippet.
pub fn compose_sequence(
    prefix: &Prefix,
    target: &Itg,
    new_state: &str,
) -> Result<Itg, SemanticsError> {
    if target.has_state(new_state) {
        return Err(SemanticsError::StateNameCollision(new_state.to_string()));
    }
    let entry = Prefix {
        guard: prefix.guard.clone(),
        interaction: prefix.interaction.clone(),
        snippet: concat_snippets(&prefix.snippet, &target.initial_snippet),
    };
    let mut transitions = vec![Transition {
        source: new_state.to_string(),
        prefix: entry,
        target: StateRef::Named(target.initial_state.clone()),
    }];
    transitions.extend(target.transitions.iter().cloned());
    Ok(Itg::new(
        new_state.to_string(),
        CodeSnippet::nil(),
        new_state.to_string(),
        transitions,
    ))
}

/// Alternative rule: merge two graphs under a fresh initial state that
/// offers every first step of either side. Both original initial
/// transitions are deleted; their snippets concatenate into the result's
/// initial snippet; states left unreachable by the merge are dropped.
/// Overlapping state names on the right side are renamed with a `#k`
/// suffix.
pub fn compose_alternative(left: &Itg, right: &Itg, new_state: &str) -> Itg {
    let left = rename_avoiding(left, &BTreeSet::from([new_state.to_string()]));
    let mut reserved: BTreeSet<String> = left.states.iter().cloned().collect();
    reserved.insert(new_state.to_string());
    let right = rename_avoiding(right, &reserved);

    let mut transitions: Vec<Transition> = Vec::new();
    for side in [&left, &right] {
        for t in side.outgoing(&side.initial_state) {
            transitions.push(Transition {
                source: new_state.to_string(),
                prefix: t.prefix.clone(),
                target: t.target.clone(),
            });
        }
        transitions.extend(side.transitions.iter().cloned());
    }

    // keep only what the new initial state still reaches
    let kept = reachable_transitions(new_state, &transitions);
    Itg::new(
        new_state.to_string(),
        concat_snippets(&left.initial_snippet, &right.initial_snippet),
        new_state.to_string(),
        kept,
    )
}

fn reachable_transitions(start: &str, transitions: &[Transition]) -> Vec<Transition> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    while let Some(state) = queue.pop_front() {
        for t in transitions.iter().filter(|t| t.source == state) {
            if let StateRef::Named(n) = &t.target {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    transitions
        .iter()
        .filter(|t| seen.contains(t.source.as_str()))
        .cloned()
        .collect()
}

/// Rename states of `itg` that collide with `avoid`, using `#k` suffixes.
fn rename_avoiding(itg: &Itg, avoid: &BTreeSet<String>) -> Itg {
    let mut taken: BTreeSet<String> = avoid.clone();
    taken.extend(itg.states.iter().cloned());
    let mut mapping: BTreeMap<&str, String> = BTreeMap::new();
    for state in &itg.states {
        if avoid.contains(state) {
            let mut k = 1;
            loop {
                let candidate = format!("{state}#{k}");
                if !taken.contains(&candidate) {
                    taken.insert(candidate.clone());
                    mapping.insert(state, candidate);
                    break;
                }
                k += 1;
            }
        }
    }
    if mapping.is_empty() {
        return itg.clone();
    }
    let rename = |name: &str| -> String {
        mapping
            .get(name)
            .cloned()
            .unwrap_or_else(|| name.to_string())
    };
    let transitions = itg
        .transitions
        .iter()
        .map(|t| Transition {
            source: rename(&t.source),
            prefix: t.prefix.clone(),
            target: match &t.target {
                StateRef::Named(n) => StateRef::Named(rename(n)),
                StateRef::Stop => StateRef::Stop,
            },
        })
        .collect();
    Itg::new(
        itg.name.clone(),
        itg.initial_snippet.clone(),
        rename(&itg.initial_state),
        transitions,
    )
}

/// How a pair state is named when a parallel composition is expanded.
/// `None` is an inactive side.
pub type PairNamer<'n> = dyn Fn(Option<&str>, Option<&str>) -> String + 'n;

/// Default pair naming, `u par v` with `•` for an inactive side.
pub fn default_pair_name(left: Option<&str>, right: Option<&str>) -> String {
    let l = left.unwrap_or("\u{2022}");
    let r = right.unwrap_or("\u{2022}");
    format!("{l} par {r}")
}

/// Parallel rule, expanded: the reachable part of the Cartesian product.
/// Each side steps independently while the other holds still; pairs with an
/// inactive component are ordinary named states of the product. The initial
/// snippet is the concatenation of both sides' initial snippets.
pub fn compose_parallel_expand(left: &Itg, right: &Itg, namer: &PairNamer) -> Itg {
    let right = rename_avoiding(right, &left.states.iter().cloned().collect());

    type Elem = Option<String>; // None = inactive side
    let elem_of = |target: &StateRef| -> Elem {
        match target {
            StateRef::Named(n) => Some(n.clone()),
            StateRef::Stop => None,
        }
    };
    let name_of = |l: &Elem, r: &Elem| namer(l.as_deref(), r.as_deref());

    let start = (
        Some(left.initial_state.clone()),
        Some(right.initial_state.clone()),
    );
    let mut seen: BTreeSet<(Elem, Elem)> = BTreeSet::from([start.clone()]);
    let mut queue: VecDeque<(Elem, Elem)> = VecDeque::from([start.clone()]);
    let mut transitions = Vec::new();
    while let Some((u, v)) = queue.pop_front() {
        let source = name_of(&u, &v);
        let mut push = |pair: (Elem, Elem), prefix: &Prefix, transitions: &mut Vec<Transition>| {
            let target_name = name_of(&pair.0, &pair.1);
            transitions.push(Transition {
                source: source.clone(),
                prefix: prefix.clone(),
                target: StateRef::Named(target_name),
            });
            if seen.insert(pair.clone()) {
                queue.push_back(pair);
            }
        };
        if let Some(u_name) = &u {
            for t in left.outgoing(u_name) {
                push((elem_of(&t.target), v.clone()), &t.prefix, &mut transitions);
            }
        }
        if let Some(v_name) = &v {
            for t in right.outgoing(v_name) {
                push((u.clone(), elem_of(&t.target)), &t.prefix, &mut transitions);
            }
        }
    }

    let mut itg = Itg::new(
        format!("{} par {}", left.name, right.name),
        concat_snippets(&left.initial_snippet, &right.initial_snippet),
        name_of(&start.0, &start.1),
        transitions,
    );
    // make sure isolated-but-reachable pairs (such as the all-inactive one)
    // stay in the state set even if Itg::new saw no transition touching them
    let all_states: BTreeSet<String> = itg
        .states
        .iter()
        .cloned()
        .chain(seen.iter().map(|(u, v)| name_of(u, v)))
        .collect();
    itg.states = all_states.into_iter().collect();
    itg
}

/// [`compose_parallel_expand`] with the default pair naming.
pub fn parallel_expand(left: &Itg, right: &Itg) -> Itg {
    compose_parallel_expand(left, right, &default_pair_name)
}

// ---------------------------------------------------------------------------
// expansion of whole definitions

/// Expand a named definition (or itg) into a single flat graph by applying
/// the composition rules bottom-up. Synthesized initial states are named
/// after the definition (`name`, then `name#1`, `name#2`, ...).
pub fn expand(model: &Model, name: &str) -> Result<Itg, SemanticsError> {
    if let Some(itg) = model.itg(name) {
        return Ok(itg.clone());
    }
    let expr = resolve_refs(model, name)?;
    let mut namer = StateNamer::new(name);
    let mut itg = expand_expr(model, &expr, &mut namer)?;
    itg.name = name.to_string();
    Ok(itg)
}

struct StateNamer {
    base: String,
    counter: usize,
}

impl StateNamer {
    fn new(base: &str) -> StateNamer {
        StateNamer {
            base: base.to_string(),
            counter: 0,
        }
    }

    fn fresh(&mut self, avoid: &Itg) -> String {
        loop {
            let candidate = if self.counter == 0 {
                self.base.clone()
            } else {
                format!("{}#{}", self.base, self.counter)
            };
            self.counter += 1;
            if !avoid.has_state(&candidate) {
                return candidate;
            }
        }
    }

    fn fresh2(&mut self, a: &Itg, b: &Itg) -> String {
        loop {
            let candidate = if self.counter == 0 {
                self.base.clone()
            } else {
                format!("{}#{}", self.base, self.counter)
            };
            self.counter += 1;
            if !a.has_state(&candidate) && !b.has_state(&candidate) {
                return candidate;
            }
        }
    }
}

fn expand_expr(model: &Model, expr: &StateExpr, namer: &mut StateNamer) -> Result<Itg, SemanticsError> {
    match expr {
        StateExpr::Inactive => {
            let empty = Itg::new("STOP", CodeSnippet::nil(), "inactive", Vec::new());
            let state = namer.fresh(&empty);
            Ok(Itg::new(
                state.clone(),
                CodeSnippet::nil(),
                state,
                Vec::new(),
            ))
        }
        StateExpr::Loop(name) | StateExpr::Ref(name) => model
            .itg(name)
            .cloned()
            .ok_or_else(|| SemanticsError::UnknownName(name.clone())),
        StateExpr::Prefixed { prefix, then } => {
            let inner = expand_expr(model, then, namer)?;
            let state = namer.fresh(&inner);
            compose_sequence(prefix, &inner, &state)
        }
        StateExpr::Alt(l, r) => {
            let left = expand_expr(model, l, namer)?;
            let right = expand_expr(model, r, namer)?;
            let state = namer.fresh2(&left, &right);
            Ok(compose_alternative(&left, &right, &state))
        }
        StateExpr::Par(l, r) => {
            let left = expand_expr(model, l, namer)?;
            let right = expand_expr(model, r, namer)?;
            Ok(parallel_expand(&left, &right))
        }
    }
}

// ---------------------------------------------------------------------------
// derivatives and loops

/// A multi-step run witness: the fired prefixes in order and the state
/// reached. Traces are nonempty by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Derivative {
    pub trace: Vec<Prefix>,
    pub end: StateRef,
}

/// Every derivative of `from` with trace length `1..=max_depth`, as a set.
pub fn derivatives(itg: &Itg, from: &StateRef, max_depth: usize) -> BTreeSet<Derivative> {
    let mut out = BTreeSet::new();
    let StateRef::Named(start) = from else {
        return out; // the inactive state has no derivatives
    };
    let mut stack: Vec<(String, Vec<Prefix>)> = vec![(start.clone(), Vec::new())];
    while let Some((state, trace)) = stack.pop() {
        if trace.len() >= max_depth {
            continue;
        }
        for t in itg.outgoing(&state) {
            let mut next_trace = trace.clone();
            next_trace.push(t.prefix.clone());
            out.insert(Derivative {
                trace: next_trace.clone(),
                end: t.target.clone(),
            });
            if let StateRef::Named(n) = &t.target {
                stack.push((n.clone(), next_trace));
            }
        }
    }
    out
}

/// A graph is a loop definition iff its initial state lies on a directed
/// cycle, i.e. some derivative of the initial state ends at it again.
pub fn is_loop(itg: &Itg) -> bool {
    let mut queue: VecDeque<&str> = itg
        .outgoing(&itg.initial_state)
        .filter_map(|t| t.target.name())
        .collect();
    let mut seen: BTreeSet<&str> = queue.iter().copied().collect();
    while let Some(state) = queue.pop_front() {
        if state == itg.initial_state {
            return true;
        }
        for t in itg.outgoing(state) {
            if let Some(n) = t.target.name() {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::expr::parse_snippet;
    use crate::model::make_prefix;

    const COUNTER_SRC: &str = include_str!("../../../models/counter.sbc");
    const ATM_SRC: &str = include_str!("../../../models/atm.sbc");

    fn counter() -> Model {
        parse_model(COUNTER_SRC).expect("counter.sbc parses")
    }

    fn atm() -> Model {
        parse_model(ATM_SRC).expect("atm.sbc parses")
    }

    fn labels(successors: &[(Prefix, Node)]) -> Vec<&str> {
        successors
            .iter()
            .map(|(p, _)| p.interaction.id.as_str())
            .collect()
    }

    #[test]
    fn resolve_atm_definition_shape() {
        let m = atm();
        let expr = resolve_refs(&m, "s_ATM").unwrap();
        let expected = StateExpr::par(
            StateExpr::par(StateExpr::Ref("s101".into()), StateExpr::Ref("s201".into())),
            StateExpr::Ref("s301".into()),
        );
        assert_eq!(expr, expected);
    }

    #[test]
    fn resolve_inlines_definition_chains() {
        let src = "\
actor U;
component C;
channel ch();
interaction a1 = U -> :C . ch;
itg g { init -> s1; s1 -[a1]-> STOP; }
def inner = (ref g) alt STOP;
def outer = ref inner;
";
        let m = parse_model(src).unwrap();
        let expr = resolve_refs(&m, "outer").unwrap();
        assert_eq!(
            expr,
            StateExpr::alt(StateExpr::Ref("g".into()), StateExpr::Inactive)
        );
    }

    #[test]
    fn resolve_unknown_name() {
        let m = counter();
        assert_eq!(
            resolve_refs(&m, "nope"),
            Err(SemanticsError::UnknownName("nope".into()))
        );
    }

    #[test]
    fn resolve_detects_definition_cycle() {
        // hand-built: the parser-level validator would reject this too
        let mut m = counter();
        m.defs.push(crate::model::Definition {
            name: "x".into(),
            expr: StateExpr::Ref("y".into()),
        });
        m.defs.push(crate::model::Definition {
            name: "y".into(),
            expr: StateExpr::Ref("x".into()),
        });
        assert!(matches!(
            resolve_refs(&m, "x"),
            Err(SemanticsError::DefinitionCycle(_))
        ));
    }

    #[test]
    fn resolve_nested_overview_diagram() {
        // mixed par/alt with an inline prefixed reference
        let src = "\
actor U;
component C;
channel ch();
interaction r36 = U -> :C . ch;
itg s01 { init -> q01; q01 -[r36]-> STOP; }
itg s21 { init -> q21; q21 -[r36]-> STOP; }
itg s31 { init -> q31; q31 -[r36]-> STOP; }
itg s35 { init -> q35; q35 -[r36]-> STOP; }
def s34 = ((ref s35) par [r36] . (ref s01)) par ((ref s21) alt (ref s31));
";
        let m = parse_model(src).unwrap();
        let expr = resolve_refs(&m, "s34").unwrap();
        let r36 = make_prefix(&m, None, "r36", None).unwrap();
        let expected = StateExpr::par(
            StateExpr::par(
                StateExpr::Ref("s35".into()),
                StateExpr::prefixed(r36, StateExpr::Ref("s01".into())),
            ),
            StateExpr::alt(StateExpr::Ref("s21".into()), StateExpr::Ref("s31".into())),
        );
        assert_eq!(expr, expected);
    }

    #[test]
    fn sequence_rule_builds_the_prefixed_counter() {
        let m = counter();
        let r55 = make_prefix(
            &m,
            None,
            "a55",
            Some(parse_snippet("credit = 3000;").unwrap()),
        )
        .unwrap();
        let itg55 = compose_sequence(&r55, m.itg("s51").unwrap(), "s55").unwrap();

        assert!(itg55.initial_snippet.is_nil());
        assert_eq!(itg55.initial_state, "s55");
        assert_eq!(itg55.transitions.len(), 4);

        let entry: Vec<_> = itg55.outgoing("s55").collect();
        assert_eq!(entry.len(), 1);
        assert_eq!(entry[0].prefix.interaction.id, "a55");
        assert_eq!(
            entry[0].prefix.snippet.render(),
            "credit = 3000; c_count = 100;"
        );
        assert_eq!(entry[0].target, StateRef::Named("s51".into()));
        // the copied graph keeps its own states and transitions
        assert!(itg55.has_state("s51") && itg55.has_state("s52"));
    }

    #[test]
    fn sequence_rule_single_transition_target() {
        let m = counter();
        let r = make_prefix(&m, None, "a55", None).unwrap();
        let out = compose_sequence(&r, m.itg("s61").unwrap(), "s0").unwrap();
        // two-transition chain ending at the inactive state
        assert_eq!(out.transitions.len(), 2);
        let d = derivatives(&out, &StateRef::Named("s0".into()), 2);
        assert!(d.contains(&Derivative {
            trace: vec![
                out.outgoing("s0").next().unwrap().prefix.clone(),
                out.outgoing("s61").next().unwrap().prefix.clone()
            ],
            end: StateRef::Stop,
        }));
    }

    #[test]
    fn sequence_rule_nil_snippets_stay_nil() {
        let m = counter();
        let r = make_prefix(&m, None, "a55", None).unwrap();
        let out = compose_sequence(&r, m.itg("s61").unwrap(), "sX").unwrap();
        assert!(out.outgoing("sX").next().unwrap().prefix.snippet.is_nil());
    }

    #[test]
    fn sequence_rule_rejects_state_collision() {
        let m = counter();
        let r = make_prefix(&m, None, "a55", None).unwrap();
        assert_eq!(
            compose_sequence(&r, m.itg("s51").unwrap(), "s52"),
            Err(SemanticsError::StateNameCollision("s52".into()))
        );
    }

    #[test]
    fn alternative_rule_merges_counter_and_single_shot() {
        let m = counter();
        let itg71 = compose_alternative(m.itg("s51").unwrap(), m.itg("s61").unwrap(), "s71");

        assert_eq!(itg71.initial_snippet.render(), "c_count = 100;");
        assert_eq!(itg71.transitions.len(), 6);
        let first_steps: BTreeSet<&str> = itg71
            .outgoing("s71")
            .map(|t| t.prefix.interaction.id.as_str())
            .collect();
        assert_eq!(first_steps, BTreeSet::from(["a51", "a53", "a61"]));
        // s61 became unreachable and is gone; the cycle states survive
        assert!(!itg71.has_state("s61"));
        assert!(itg71.has_state("s51") && itg71.has_state("s52"));
    }

    #[test]
    fn alternative_rule_on_two_single_shots() {
        let m = counter();
        let g = m.itg("s61").unwrap();
        let out = compose_alternative(g, g, "sX");
        // both branches' only transitions move to the new initial state; the
        // originals are unreachable and dropped
        assert_eq!(out.transitions.len(), 2);
        assert!(out
            .transitions
            .iter()
            .all(|t| t.source == "sX" && t.target == StateRef::Stop));
        assert_eq!(out.states, vec!["sX".to_string()]);
    }

    #[test]
    fn alternative_rule_acyclic_branch_contributes_one_transition() {
        let m = counter();
        let itg41 = m.itg("s41").unwrap();
        let out = compose_alternative(m.itg("s61").unwrap(), itg41, "sY");
        // s61 contributes its single first step from sY
        let a61: Vec<_> = out
            .outgoing("sY")
            .filter(|t| t.prefix.interaction.id == "a61")
            .collect();
        assert_eq!(a61.len(), 1);
    }

    #[test]
    fn alternative_rule_renames_colliding_states() {
        let m = counter();
        let g = m.itg("s41").unwrap();
        let out = compose_alternative(g, g, "merge");
        // right copy's s42 still reachable under a renamed label
        assert!(out.has_state("s42") && out.has_state("s42#1"), "{:?}", out.states);
    }

    #[test]
    fn parallel_expansion_matches_product_counts() {
        let m = counter();
        let itg81 = parallel_expand(m.itg("s51").unwrap(), m.itg("s61").unwrap());
        assert_eq!(itg81.states.len(), 6);
        assert_eq!(itg81.transitions.len(), 9);
        assert_eq!(itg81.initial_snippet.render(), "c_count = 100;");
        assert_eq!(itg81.initial_state, "s51 par s61");
    }

    #[test]
    fn parallel_expansion_unit() {
        let m = counter();
        let unit = Itg::new("unit", CodeSnippet::nil(), "u0", Vec::new());
        let g = m.itg("s41").unwrap();
        let out = parallel_expand(&unit, g);
        assert_eq!(out.states.len(), g.states.len() + 1); // plus the inactive side
        assert_eq!(out.transitions.len(), g.transitions.len());
    }

    #[test]
    fn parallel_expansion_of_two_single_shots() {
        let m = counter();
        let g = m.itg("s61").unwrap();
        let out = parallel_expand(g, g);
        assert_eq!(out.states.len(), 4);
        assert_eq!(out.transitions.len(), 4);
    }

    #[test]
    fn parallel_expansion_swap_is_isomorphic() {
        let m = counter();
        let left = m.itg("s51").unwrap();
        let right = m.itg("s61").unwrap();
        let ab = parallel_expand(left, right);
        let swapped_namer =
            |l: Option<&str>, r: Option<&str>| default_pair_name(r, l);
        let ba = compose_parallel_expand(right, left, &swapped_namer);
        assert_eq!(ab.states, ba.states);
        assert_eq!(ab.initial_state, ba.initial_state);
        let key = |t: &Transition| (t.source.clone(), t.prefix.clone(), t.target.clone());
        let ab_set: BTreeSet<_> = ab.transitions.iter().map(key).collect();
        let ba_set: BTreeSet<_> = ba.transitions.iter().map(key).collect();
        assert_eq!(ab_set, ba_set);
    }

    #[test]
    fn expand_definition_names_new_states_after_it() {
        let m = counter();
        let itg55 = expand(&m, "s55").unwrap();
        assert_eq!(itg55.name, "s55");
        assert_eq!(itg55.initial_state, "s55");
        assert_eq!(itg55.transitions.len(), 4);
        let itg71 = expand(&m, "s71").unwrap();
        assert_eq!(itg71.initial_state, "s71");
        assert_eq!(itg71.transitions.len(), 6);
    }

    #[test]
    fn successors_within_a_graph() {
        let m = counter();
        let node = Node::At {
            itg: "s41".into(),
            state: "s41".into(),
        };
        let succ = successors(&m, &node).unwrap();
        assert_eq!(labels(&succ), vec!["a41", "a42"]);
        assert_eq!(
            succ[0].1,
            Node::At {
                itg: "s41".into(),
                state: "s42".into()
            }
        );
        assert_eq!(succ[1].1, Node::Stop);
    }

    #[test]
    fn successors_interleave_parallel_branches() {
        let m = counter();
        let node = Node::Par(
            Box::new(Node::At {
                itg: "s51".into(),
                state: "s51".into(),
            }),
            Box::new(Node::At {
                itg: "s61".into(),
                state: "s61".into(),
            }),
        );
        let succ = successors(&m, &node).unwrap();
        assert_eq!(labels(&succ), vec!["a51", "a53", "a61"]);
        // a51 advances the left branch only
        assert_eq!(
            succ[0].1.render(),
            "(s52 par s61)"
        );
        // a53 left to inactive, a61 right to inactive
        assert_eq!(succ[1].1.render(), "(\u{2022} par s61)");
        assert_eq!(succ[2].1.render(), "(s51 par \u{2022})");
    }

    #[test]
    fn successors_of_inactive_is_empty() {
        let m = counter();
        assert!(successors(&m, &Node::Stop).unwrap().is_empty());
    }

    #[test]
    fn successors_fold_initial_snippet_into_prefix() {
        let m = counter();
        let expr = resolve_refs(&m, "s55").unwrap();
        let node = node_of_expr(&m, &expr).unwrap();
        let succ = successors(&m, &node).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(
            succ[0].0.snippet.render(),
            "credit = 3000; c_count = 100;"
        );
    }

    #[test]
    fn alt_node_offers_both_then_commits() {
        let m = counter();
        let node = Node::Alt(
            Box::new(Node::At {
                itg: "s51".into(),
                state: "s51".into(),
            }),
            Box::new(Node::At {
                itg: "s61".into(),
                state: "s61".into(),
            }),
        );
        let succ = successors(&m, &node).unwrap();
        assert_eq!(labels(&succ), vec!["a51", "a53", "a61"]);
        // firing the left branch drops the alternative entirely
        assert_eq!(
            succ[0].1,
            Node::At {
                itg: "s51".into(),
                state: "s52".into()
            }
        );
    }

    #[test]
    fn derivatives_on_branching_graph() {
        let m = counter();
        let itg41 = m.itg("s41").unwrap();
        let d = derivatives(itg41, &StateRef::Named("s41".into()), 2);
        let rendered: BTreeSet<(Vec<String>, String)> = d
            .iter()
            .map(|d| {
                (
                    d.trace.iter().map(|p| p.interaction.id.clone()).collect(),
                    d.end.to_string(),
                )
            })
            .collect();
        let expected: BTreeSet<(Vec<String>, String)> = [
            (vec!["a41".to_string()], "s42".to_string()),
            (vec!["a42".to_string()], "STOP".to_string()),
            (vec!["a41".to_string(), "a43".to_string()], "STOP".to_string()),
        ]
        .into_iter()
        .collect();
        assert_eq!(rendered, expected);
    }

    #[test]
    fn derivatives_from_inactive_is_empty() {
        let m = counter();
        assert!(derivatives(m.itg("s41").unwrap(), &StateRef::Stop, 3).is_empty());
    }

    #[test]
    fn derivatives_on_looping_graph() {
        let m = counter();
        let itg51 = m.itg("s51").unwrap();
        let d = derivatives(itg51, &StateRef::Named("s51".into()), 2);
        assert_eq!(d.len(), 3);
        assert!(d
            .iter()
            .any(|d| d.trace.len() == 2 && d.end == StateRef::Named("s51".into())));
    }

    #[test]
    fn derivatives_depth_one_equals_outgoing() {
        let m = counter();
        for g in &m.itgs {
            for state in &g.states {
                let d = derivatives(g, &StateRef::Named(state.clone()), 1);
                let outgoing: BTreeSet<Derivative> = g
                    .outgoing(state)
                    .map(|t| Derivative {
                        trace: vec![t.prefix.clone()],
                        end: t.target.clone(),
                    })
                    .collect();
                assert_eq!(d, outgoing);
            }
        }
    }

    #[test]
    fn loop_detection() {
        let m = counter();
        assert!(is_loop(m.itg("s51").unwrap()));
        assert!(!is_loop(m.itg("s41").unwrap()));
        let atm = atm();
        assert!(is_loop(atm.itg("s201").unwrap()));
        assert!(is_loop(atm.itg("s301").unwrap()));
        assert!(is_loop(atm.itg("s101").unwrap()));
    }

    #[test]
    fn expanded_parallel_agrees_with_on_the_fly_successors() {
        // every reachable pair state offers the same prefix multiset in the
        // expanded product and in the unexpanded pair
        let m = counter();
        let expanded = parallel_expand(m.itg("s51").unwrap(), m.itg("s61").unwrap());
        let root = Node::Par(
            Box::new(Node::At {
                itg: "s51".into(),
                state: "s51".into(),
            }),
            Box::new(Node::At {
                itg: "s61".into(),
                state: "s61".into(),
            }),
        );

        let mut queue = VecDeque::from([root]);
        let mut seen = BTreeSet::new();
        while let Some(node) = queue.pop_front() {
            if !seen.insert(node.clone()) {
                continue;
            }
            let pair_name = match &node {
                Node::Par(l, r) => {
                    let part = |n: &Node| match n {
                        Node::At { state, .. } => Some(state.clone()),
                        Node::Stop => None,
                        _ => unreachable!(),
                    };
                    default_pair_name(part(l).as_deref(), part(r).as_deref())
                }
                _ => unreachable!(),
            };
            let fly = successors(&m, &node).unwrap();
            let mut fly_labels: Vec<String> =
                fly.iter().map(|(p, _)| p.render_triple()).collect();
            let mut exp_labels: Vec<String> = expanded
                .outgoing(&pair_name)
                .map(|t| t.prefix.render_triple())
                .collect();
            fly_labels.sort();
            exp_labels.sort();
            assert_eq!(fly_labels, exp_labels, "at {pair_name}");
            for (_, next) in fly {
                queue.push_back(next);
            }
        }
        assert_eq!(seen.len(), 6);
    }
}
