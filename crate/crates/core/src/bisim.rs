//! Strong bisimulation checking between two labelled transition systems:
//! expanded graphs, on-the-fly state expressions, or one of each.
//!
//! States are compared over canonical labels (normalized guard text,
//! interaction id, normalized snippet text) by partition refinement; a
//! negative verdict comes with a distinguishing trace. Initial snippets are
//! part of observable behavior and must also agree.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{Itg, Model, Prefix, StateRef};
use crate::semantics::{self, Node, SemanticsError};

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Canonical transition label. Two prefixes are label-equal iff guard,
/// interaction id and snippet all render to the same text (`TRUE` guards
/// and empty snippets render empty).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub interaction: String,
    pub guard: String,
    pub snippet: String,
}

impl Label {
    pub fn of_prefix(prefix: &Prefix) -> Label {
        Label {
            interaction: prefix.interaction.id.clone(),
            guard: prefix.guard.render(),
            snippet: prefix.snippet.render(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let guard = if self.guard.is_empty() { "nil" } else { &self.guard };
        let snippet = if self.snippet.is_empty() {
            "nil"
        } else {
            &self.snippet
        };
        write!(f, "({guard}, {}, {snippet})", self.interaction)
    }
}

/// A finite-branching transition system with a distinguished initial state
/// and an initialization snippet.
pub trait Lts {
    type State: Clone + Eq + Ord + fmt::Debug;

    fn initial_state(&self) -> Self::State;
    fn initial_snippet_text(&self) -> String;
    fn successors(&self, state: &Self::State) -> Result<Vec<(Label, Self::State)>, SemanticsError>;
}

/// An expanded graph viewed as an LTS.
pub struct ItgLts<'a> {
    itg: &'a Itg,
}

impl<'a> ItgLts<'a> {
    pub fn new(itg: &'a Itg) -> ItgLts<'a> {
        ItgLts { itg }
    }
}

impl Lts for ItgLts<'_> {
    type State = StateRef;

    fn initial_state(&self) -> StateRef {
        StateRef::Named(self.itg.initial_state.clone())
    }

    fn initial_snippet_text(&self) -> String {
        self.itg.initial_snippet.render()
    }

    fn successors(&self, state: &StateRef) -> Result<Vec<(Label, StateRef)>, SemanticsError> {
        let StateRef::Named(name) = state else {
            return Ok(Vec::new());
        };
        Ok(self
            .itg
            .outgoing(name)
            .map(|t| (Label::of_prefix(&t.prefix), t.target.clone()))
            .collect())
    }
}

/// A resolved state expression viewed as an LTS, expanded on the fly.
pub struct ExprLts<'a> {
    model: &'a Model,
    root: Node,
    initial_snippet: String,
}

impl<'a> ExprLts<'a> {
    /// Build the on-the-fly LTS for a named definition or itg.
    pub fn for_name(model: &'a Model, name: &str) -> Result<ExprLts<'a>, SemanticsError> {
        let expr = semantics::resolve_refs(model, name)?;
        let root = semantics::node_of_expr(model, &expr)?;
        let initial_snippet = semantics::initial_snippet(model, &root)?.render();
        Ok(ExprLts {
            model,
            root,
            initial_snippet,
        })
    }
}

impl Lts for ExprLts<'_> {
    type State = Node;

    fn initial_state(&self) -> Node {
        self.root.clone()
    }

    fn initial_snippet_text(&self) -> String {
        self.initial_snippet.clone()
    }

    fn successors(&self, state: &Node) -> Result<Vec<(Label, Node)>, SemanticsError> {
        Ok(semantics::successors(self.model, state)?
            .into_iter()
            .map(|(p, n)| (Label::of_prefix(&p), n))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error("state-space bound exceeded ({0} states)")]
    BoundExceeded(usize),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Why two systems are not bisimilar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// The initialization snippets differ.
    InitialSnippet { left: String, right: String },
    /// A run one side can take that the other cannot match.
    Trace(Vec<Label>),
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::InitialSnippet { left, right } => write!(
                f,
                "initial snippets differ: '{left}' vs '{right}'"
            ),
            Witness::Trace(labels) => {
                write!(f, "distinguishing trace:")?;
                for l in labels {
                    write!(f, " {l}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisimResult {
    pub bisimilar: bool,
    pub witness: Option<Witness>,
}

/// Check strong bisimilarity of the two systems' initial states, bounding
/// reachable-state enumeration by `cap` per side.
pub fn bisimilar_capped<A: Lts, B: Lts>(
    a: &A,
    b: &B,
    cap: usize,
) -> Result<BisimResult, BisimError> {
    if a.initial_snippet_text() != b.initial_snippet_text() {
        return Ok(BisimResult {
            bisimilar: false,
            witness: Some(Witness::InitialSnippet {
                left: a.initial_snippet_text(),
                right: b.initial_snippet_text(),
            }),
        });
    }

    let mut labels = LabelInterner::default();
    let (init_a, adj_a) = explore(a, cap, &mut labels)?;
    let (init_b, adj_b) = explore(b, cap, &mut labels)?;

    // disjoint union, b's states offset past a's
    let offset = adj_a.len();
    let mut adj = adj_a;
    adj.extend(adj_b.into_iter().map(|row| {
        row.into_iter()
            .map(|(l, t)| (l, t + offset))
            .collect::<Vec<_>>()
    }));
    let init_b = init_b + offset;

    let rounds = refine(&adj);
    let last = rounds.last().expect("at least the initial round");
    if last[init_a] == last[init_b] {
        return Ok(BisimResult {
            bisimilar: true,
            witness: None,
        });
    }
    let trace = distinguish(init_a, init_b, &adj, &rounds, &labels.by_id);
    Ok(BisimResult {
        bisimilar: false,
        witness: Some(Witness::Trace(trace)),
    })
}

/// [`bisimilar_capped`] with the default state cap.
pub fn bisimilar<A: Lts, B: Lts>(a: &A, b: &B) -> Result<BisimResult, BisimError> {
    bisimilar_capped(a, b, DEFAULT_STATE_CAP)
}

#[derive(Default)]
struct LabelInterner {
    ids: BTreeMap<Label, usize>,
    by_id: Vec<Label>,
}

impl LabelInterner {
    fn intern(&mut self, label: Label) -> usize {
        if let Some(id) = self.ids.get(&label) {
            return *id;
        }
        let id = self.by_id.len();
        self.ids.insert(label.clone(), id);
        self.by_id.push(label);
        id
    }
}

type Adjacency = Vec<Vec<(usize, usize)>>;

fn explore<L: Lts>(
    lts: &L,
    cap: usize,
    labels: &mut LabelInterner,
) -> Result<(usize, Adjacency), BisimError> {
    let mut index: BTreeMap<L::State, usize> = BTreeMap::new();
    let mut order: Vec<L::State> = Vec::new();
    let init = lts.initial_state();
    index.insert(init.clone(), 0);
    order.push(init);
    let mut adj: Adjacency = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    while let Some(at) = queue.pop_front() {
        let state = order[at].clone();
        let mut row = Vec::new();
        for (label, next) in lts.successors(&state)? {
            let next_id = match index.get(&next) {
                Some(id) => *id,
                None => {
                    let id = order.len();
                    if id >= cap {
                        return Err(BisimError::BoundExceeded(cap));
                    }
                    index.insert(next.clone(), id);
                    order.push(next);
                    queue.push_back(id);
                    id
                }
            };
            row.push((labels.intern(label), next_id));
        }
        debug_assert_eq!(adj.len(), at);
        adj.push(row);
    }
    Ok((0, adj))
}

/// Partition refinement over block signatures; returns the block assignment
/// of every round (round 0 is the trivial partition). Each round strictly
/// refines the previous one, so the loop stops when the block count stops
/// growing.
fn refine(adj: &Adjacency) -> Vec<Vec<u32>> {
    let n = adj.len();
    let mut rounds: Vec<Vec<u32>> = vec![vec![0; n]];
    let mut block_count = 1usize;
    loop {
        let prev = rounds.last().unwrap();
        let mut keys: BTreeMap<(u32, Vec<(usize, u32)>), u32> = BTreeMap::new();
        let mut next = Vec::with_capacity(n);
        for state in 0..n {
            let mut sig: Vec<(usize, u32)> =
                adj[state].iter().map(|(l, t)| (*l, prev[*t])).collect();
            sig.sort_unstable();
            sig.dedup();
            let fresh = keys.len() as u32;
            let block = *keys.entry((prev[state], sig)).or_insert(fresh);
            next.push(block);
        }
        let new_count = keys.len();
        if new_count == block_count {
            return rounds;
        }
        block_count = new_count;
        rounds.push(next);
    }
}

fn separation_round(s: usize, t: usize, rounds: &[Vec<u32>]) -> Option<usize> {
    rounds.iter().position(|round| round[s] != round[t])
}

/// Build a distinguishing trace for two states in different final blocks:
/// pick a move one side has into an equivalence class the other cannot
/// reach under the same label, and recurse on the mismatched continuations.
fn distinguish(
    s: usize,
    t: usize,
    adj: &Adjacency,
    rounds: &[Vec<u32>],
    labels: &[Label],
) -> Vec<Label> {
    let r = separation_round(s, t, rounds).expect("states are in different blocks");
    debug_assert!(r >= 1, "round 0 is the trivial partition");
    let prev = &rounds[r - 1];

    for (from, other) in [(s, t), (t, s)] {
        let mut moves: Vec<(&Label, usize)> = adj[from]
            .iter()
            .map(|(l, target)| (&labels[*l], *target))
            .collect();
        moves.sort();
        for (label, target) in moves {
            let beta = prev[target];
            let matching: Vec<usize> = adj[other]
                .iter()
                .filter(|(l, _)| &labels[*l] == label)
                .map(|(_, t2)| *t2)
                .collect();
            if matching.iter().any(|t2| prev[*t2] == beta) {
                continue;
            }
            if matching.is_empty() {
                return vec![label.clone()];
            }
            // recurse on the closest mismatch (latest separation round)
            let follow = matching
                .into_iter()
                .max_by_key(|t2| separation_round(target, *t2, rounds).unwrap_or(usize::MAX))
                .unwrap();
            let mut trace = distinguish(target, follow, adj, rounds, labels);
            trace.insert(0, label.clone());
            return trace;
        }
    }
    unreachable!("separated states must have a distinguishing move");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::semantics::parallel_expand;

    const COUNTER_SRC: &str = include_str!("../../../models/counter.sbc");

    fn counter() -> Model {
        parse_model(COUNTER_SRC).unwrap()
    }

    #[test]
    fn expanded_and_on_the_fly_parallel_agree() {
        let m = counter();
        let expanded = parallel_expand(m.itg("s51").unwrap(), m.itg("s61").unwrap());
        let left = ItgLts::new(&expanded);
        let right = ExprLts::for_name(&m, "s91").unwrap();
        let out = bisimilar(&left, &right).unwrap();
        assert!(out.bisimilar, "witness: {:?}", out.witness);
    }

    #[test]
    fn reflexive_on_every_corpus_graph() {
        let m = counter();
        for g in &m.itgs {
            let out = bisimilar(&ItgLts::new(g), &ItgLts::new(g)).unwrap();
            assert!(out.bisimilar, "{} not self-bisimilar", g.name);
        }
    }

    #[test]
    fn different_graphs_distinguished_with_witness() {
        let m = counter();
        let a = ItgLts::new(m.itg("s51").unwrap());
        let b = ItgLts::new(m.itg("s61").unwrap());
        // initial snippets differ (c_count = 100; vs nil), that alone decides
        let out = bisimilar(&a, &b).unwrap();
        assert!(!out.bisimilar);
        assert!(matches!(out.witness, Some(Witness::InitialSnippet { .. })));

        // strip the snippet difference to exercise the trace witness
        let mut bare51 = m.itg("s51").unwrap().clone();
        bare51.initial_snippet = crate::expr::CodeSnippet::nil();
        let out = bisimilar(&ItgLts::new(&bare51), &b).unwrap();
        assert!(!out.bisimilar);
        match out.witness {
            Some(Witness::Trace(trace)) => {
                assert!(!trace.is_empty());
                let first = &trace[0].interaction;
                assert!(
                    first == "a51" || first == "a61",
                    "unexpected witness start {first}"
                );
            }
            other => panic!("expected trace witness, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_verdicts() {
        let m = counter();
        for (l, r) in [("s41", "s51"), ("s51", "s61"), ("s41", "s41")] {
            let a = ItgLts::new(m.itg(l).unwrap());
            let b = ItgLts::new(m.itg(r).unwrap());
            let ab = bisimilar(&a, &b).unwrap().bisimilar;
            let ba = bisimilar(&b, &a).unwrap().bisimilar;
            assert_eq!(ab, ba, "asymmetry on ({l}, {r})");
        }
    }

    #[test]
    fn invariant_under_state_renaming() {
        let m = counter();
        let g = m.itg("s51").unwrap();
        let mut renamed = g.clone();
        let rename = |s: &str| format!("q_{s}");
        renamed.initial_state = rename(&renamed.initial_state);
        renamed.states = renamed.states.iter().map(|s| rename(s)).collect();
        for t in &mut renamed.transitions {
            t.source = rename(&t.source);
            if let StateRef::Named(n) = &t.target {
                t.target = StateRef::Named(rename(n));
            }
        }
        let out = bisimilar(&ItgLts::new(g), &ItgLts::new(&renamed)).unwrap();
        assert!(out.bisimilar);
    }

    #[test]
    fn guard_text_differences_are_observable() {
        let m = counter();
        let g = m.itg("s51").unwrap();
        let mut mutated = g.clone();
        mutated.transitions[0].prefix.guard = crate::expr::parse_guard("c_count > 1").unwrap();
        let out = bisimilar(&ItgLts::new(g), &ItgLts::new(&mutated)).unwrap();
        assert!(!out.bisimilar);
    }

    #[test]
    fn bound_exceeded_is_reported() {
        let m = counter();
        let a = ItgLts::new(m.itg("s51").unwrap());
        let err = bisimilar_capped(&a, &a, 2).unwrap_err();
        assert_eq!(err, BisimError::BoundExceeded(2));
    }

    #[test]
    fn nonbisimilar_pair_with_shared_first_step() {
        // same first label, continuations differ: witness must be length 2
        let src = "\
actor U;
component C;
channel ch();
channel ch2();
interaction a = U -> :C . ch;
interaction b = U -> :C . ch2;
itg g1 { init -> p1; p1 -[a]-> p2; p2 -[a]-> STOP; }
itg g2 { init -> q1; q1 -[a]-> q2; q2 -[b]-> STOP; }
";
        let m = parse_model(src).unwrap();
        let out = bisimilar(
            &ItgLts::new(m.itg("g1").unwrap()),
            &ItgLts::new(m.itg("g2").unwrap()),
        )
        .unwrap();
        assert!(!out.bisimilar);
        match out.witness.unwrap() {
            Witness::Trace(trace) => {
                assert_eq!(trace.len(), 2);
                assert_eq!(trace[0].interaction, "a");
            }
            other => panic!("expected trace, got {other:?}"),
        }
    }
}
