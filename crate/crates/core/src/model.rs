//! Core domain types: channels, agents, interactions, prefixes, interaction
//! transition graphs, state expressions and whole models, plus structural
//! validation over them.
//!
//! All types are immutable values after construction and safe to share
//! across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{CodeSnippet, Guard};
use crate::lex::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
    InOut,
}

impl Direction {
    pub fn keyword(&self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::InOut => "inout",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Direction> {
        match word {
            "in" => Some(Direction::In),
            "out" => Some(Direction::Out),
            "inout" => Some(Direction::InOut),
            _ => None,
        }
    }

    pub fn binds_in(&self) -> bool {
        matches!(self, Direction::In | Direction::InOut)
    }

    pub fn binds_out(&self) -> bool {
        matches!(self, Direction::Out | Direction::InOut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    Real,
    Integer,
    String,
    Boolean,
}

impl ValueType {
    pub fn keyword(&self) -> &'static str {
        match self {
            ValueType::Real => "Real",
            ValueType::Integer => "Integer",
            ValueType::String => "String",
            ValueType::Boolean => "Boolean",
        }
    }

    pub fn from_keyword(word: &str) -> Option<ValueType> {
        match word {
            "Real" => Some(ValueType::Real),
            "Integer" => Some(ValueType::Integer),
            "String" => Some(ValueType::String),
            "Boolean" => Some(ValueType::Boolean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Parameter {
    pub direction: Direction,
    pub name: String,
    pub value_type: ValueType,
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} : {}",
            self.direction.keyword(),
            self.name,
            self.value_type.keyword()
        )
    }
}

/// A channel signature: name plus directed, typed parameter list.
/// Zero-parameter channels are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelSignature {
    pub name: String,
    pub params: Vec<Parameter>,
}

impl fmt::Display for ChannelSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Actor,
    Component,
}

/// A communicating agent: an external actor or a system component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Agent {
    pub kind: AgentKind,
    pub name: String,
}

impl Agent {
    pub fn actor(name: impl Into<String>) -> Agent {
        Agent {
            kind: AgentKind::Actor,
            name: name.into(),
        }
    }

    pub fn component(name: impl Into<String>) -> Agent {
        Agent {
            kind: AgentKind::Component,
            name: name.into(),
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AgentKind::Actor => write!(f, "{}", self.name),
            AgentKind::Component => write!(f, ":{}", self.name),
        }
    }
}

/// An indivisible handshake between a caller agent and a callee component
/// over a channel. Type 1 when the caller is an actor, type 2 when it is a
/// component; the classification is total and exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub id: String,
    pub caller: Agent,
    /// Channel referenced by name; resolved against the model's signatures.
    pub channel: String,
    pub callee: Agent,
}

impl Interaction {
    pub fn is_type1(&self) -> bool {
        self.caller.kind == AgentKind::Actor
    }

    pub fn is_type2(&self) -> bool {
        self.caller.kind == AgentKind::Component
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} -> {} . {}", self.id, self.caller, self.callee, self.channel)
    }
}

/// Transition label triple: guard, interaction, code snippet. Guard and
/// snippet may be absent (`TRUE` / empty snippet).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    pub guard: Guard,
    pub interaction: Interaction,
    pub snippet: CodeSnippet,
}

impl Prefix {
    pub fn new(guard: Guard, interaction: Interaction, snippet: CodeSnippet) -> Prefix {
        Prefix {
            guard,
            interaction,
            snippet,
        }
    }

    /// Paper-style display: `(guard, id, snippet)` with `nil` for absent parts.
    pub fn render_triple(&self) -> String {
        let guard = if self.guard.is_true() {
            "nil".to_string()
        } else {
            self.guard.render()
        };
        let snippet = if self.snippet.is_nil() {
            "nil".to_string()
        } else {
            self.snippet.render()
        };
        format!("({guard}, {}, {snippet})", self.interaction.id)
    }
}

/// Build a prefix, normalizing absent guard and snippet, after resolving the
/// interaction id against the model.
pub fn make_prefix(
    model: &Model,
    guard: Option<Guard>,
    interaction_id: &str,
    snippet: Option<CodeSnippet>,
) -> Result<Prefix, ReferenceError> {
    let interaction = model
        .interaction(interaction_id)
        .ok_or_else(|| ReferenceError::UnknownInteraction(interaction_id.to_string()))?;
    Ok(Prefix {
        guard: guard.unwrap_or_default(),
        interaction: interaction.clone(),
        snippet: snippet.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReferenceError {
    #[error("unknown interaction '{0}'")]
    UnknownInteraction(String),
    #[error("unknown definition or transition graph '{0}'")]
    UnknownDefinition(String),
    #[error("unknown transition graph '{0}'")]
    UnknownItg(String),
}

/// Transition target: a named state or the distinguished inactive state,
/// which is never part of the named-state set and has no outgoing
/// transitions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateRef {
    Named(String),
    Stop,
}

impl StateRef {
    pub fn name(&self) -> Option<&str> {
        match self {
            StateRef::Named(n) => Some(n),
            StateRef::Stop => None,
        }
    }
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRef::Named(n) => write!(f, "{n}"),
            StateRef::Stop => write!(f, "STOP"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub source: String,
    pub prefix: Prefix,
    pub target: StateRef,
}

/// An interaction transition graph: a labelled transition system with one
/// source-less initial transition that may carry an initialization snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Itg {
    pub name: String,
    /// Named states, sorted. Does not include the inactive state.
    pub states: Vec<String>,
    pub initial_snippet: CodeSnippet,
    pub initial_state: String,
    /// Sourced transitions in canonical order.
    pub transitions: Vec<Transition>,
}

impl Itg {
    /// Build a graph from its parts. States are collected from the initial
    /// state and every transition endpoint; transitions are kept in sorted
    /// order. Duplicate triples are allowed: merging two copies of the same
    /// graph legitimately yields doubled first steps.
    pub fn new(
        name: impl Into<String>,
        initial_snippet: CodeSnippet,
        initial_state: impl Into<String>,
        transitions: Vec<Transition>,
    ) -> Itg {
        let initial_state = initial_state.into();
        let mut states: BTreeSet<String> = BTreeSet::new();
        states.insert(initial_state.clone());
        for t in &transitions {
            states.insert(t.source.clone());
            if let StateRef::Named(n) = &t.target {
                states.insert(n.clone());
            }
        }
        let mut transitions = transitions;
        transitions.sort();
        Itg {
            name: name.into(),
            states: states.into_iter().collect(),
            initial_snippet,
            initial_state,
            transitions,
        }
    }

    pub fn outgoing<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> {
        self.transitions.iter().filter(move |t| t.source == state)
    }

    pub fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|s| s == name)
    }
}

/// State expression over the six grammar forms: inactive, prefixed,
/// alternative, parallel, loop and reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateExpr {
    Inactive,
    Prefixed {
        prefix: Prefix,
        then: Box<StateExpr>,
    },
    Alt(Box<StateExpr>, Box<StateExpr>),
    Par(Box<StateExpr>, Box<StateExpr>),
    /// Loop over a named transition graph.
    Loop(String),
    /// Reference to a definition constant or a transition graph.
    Ref(String),
}

impl StateExpr {
    pub fn alt(left: StateExpr, right: StateExpr) -> StateExpr {
        StateExpr::Alt(Box::new(left), Box::new(right))
    }

    pub fn par(left: StateExpr, right: StateExpr) -> StateExpr {
        StateExpr::Par(Box::new(left), Box::new(right))
    }

    pub fn prefixed(prefix: Prefix, then: StateExpr) -> StateExpr {
        StateExpr::Prefixed {
            prefix,
            then: Box::new(then),
        }
    }
}

/// A named state-expression definition (state constant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub expr: StateExpr,
}

/// A complete model: agents, channel signatures, named interactions,
/// transition graphs and definitions. Stored in canonical (sorted) order so
/// structural equality is order-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model {
    pub actors: Vec<String>,
    pub components: Vec<String>,
    pub channels: Vec<ChannelSignature>,
    pub interactions: Vec<Interaction>,
    pub itgs: Vec<Itg>,
    pub defs: Vec<Definition>,
}

impl Model {
    /// Sort every declaration list into canonical order.
    pub fn normalize(&mut self) {
        self.actors.sort();
        self.components.sort();
        self.channels.sort_by(|a, b| a.name.cmp(&b.name));
        self.interactions.sort_by(|a, b| a.id.cmp(&b.id));
        self.itgs.sort_by(|a, b| a.name.cmp(&b.name));
        self.defs.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn is_empty(&self) -> bool {
        self.actors.is_empty()
            && self.components.is_empty()
            && self.channels.is_empty()
            && self.interactions.is_empty()
            && self.itgs.is_empty()
            && self.defs.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelSignature> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn interaction(&self, id: &str) -> Option<&Interaction> {
        self.interactions.iter().find(|i| i.id == id)
    }

    pub fn itg(&self, name: &str) -> Option<&Itg> {
        self.itgs.iter().find(|g| g.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&Definition> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn has_actor(&self, name: &str) -> bool {
        self.actors.iter().any(|a| a == name)
    }

    pub fn has_component(&self, name: &str) -> bool {
        self.components.iter().any(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

/// Machine-readable diagnostic codes; every diagnostic names the rule it is
/// about.
pub mod codes {
    pub const SYNTAX: &str = "syntax";
    pub const DUPLICATE_DECLARATION: &str = "duplicate-declaration";
    pub const DUPLICATE_PARAMETER: &str = "duplicate-parameter";
    pub const DUPLICATE_INITIAL: &str = "duplicate-initial-transition";
    pub const MISSING_INITIAL: &str = "missing-initial-transition";
    pub const UNRESOLVED_REFERENCE: &str = "unresolved-reference";
    pub const INTERACTION_MISMATCH: &str = "interaction-mismatch";
    pub const UNDECLARED_STATE: &str = "undeclared-state";
    pub const UNBOUND_GUARD_VARIABLE: &str = "unbound-guard-variable";
    pub const DEFINITION_CYCLE: &str = "definition-cycle";
    pub const NON_LOOP_ITG: &str = "non-loop-itg";
    pub const EMPTY_NAME: &str = "empty-name";
    pub const CALLEE_NOT_COMPONENT: &str = "callee-not-component";
}

/// A validation or parse diagnostic: severity, violated rule, message, and
/// location where one is known (parse-time diagnostics carry positions,
/// structural ones carry a context string).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub pos: Option<Pos>,
    pub context: Option<String>,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            pos: None,
            context: None,
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, message)
        }
    }

    pub fn at(mut self, pos: Pos) -> Diagnostic {
        self.pos = Some(pos);
        self
    }

    pub fn in_context(mut self, context: impl Into<String>) -> Diagnostic {
        self.context = Some(context.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(pos) = self.pos {
            write!(f, "{pos}: ")?;
        }
        write!(f, "{}[{}]: {}", self.severity, self.code, self.message)?;
        if let Some(ctx) = &self.context {
            write!(f, " (in {ctx})")?;
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_duplicates<'a>(
    names: impl Iterator<Item = &'a str>,
    what: &str,
    out: &mut Vec<Diagnostic>,
) {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name) {
            out.push(Diagnostic::error(
                codes::DUPLICATE_DECLARATION,
                format!("duplicate {what} '{name}'"),
            ));
        }
    }
}

fn validate_interaction(model: &Model, interaction: &Interaction, ctx: &str, out: &mut Vec<Diagnostic>) {
    if model.channel(&interaction.channel).is_none() {
        out.push(
            Diagnostic::error(
                codes::UNRESOLVED_REFERENCE,
                format!(
                    "interaction '{}' references undeclared channel '{}'",
                    interaction.id, interaction.channel
                ),
            )
            .in_context(ctx.to_string()),
        );
    }
    let caller_ok = match interaction.caller.kind {
        AgentKind::Actor => model.has_actor(&interaction.caller.name),
        AgentKind::Component => model.has_component(&interaction.caller.name),
    };
    if !caller_ok {
        out.push(
            Diagnostic::error(
                codes::UNRESOLVED_REFERENCE,
                format!(
                    "interaction '{}' references undeclared caller '{}'",
                    interaction.id, interaction.caller
                ),
            )
            .in_context(ctx.to_string()),
        );
    }
    if interaction.callee.kind != AgentKind::Component {
        out.push(
            Diagnostic::error(
                codes::CALLEE_NOT_COMPONENT,
                format!("interaction '{}' callee must be a component", interaction.id),
            )
            .in_context(ctx.to_string()),
        );
    } else if !model.has_component(&interaction.callee.name) {
        out.push(
            Diagnostic::error(
                codes::UNRESOLVED_REFERENCE,
                format!(
                    "interaction '{}' references undeclared component '{}'",
                    interaction.id, interaction.callee.name
                ),
            )
            .in_context(ctx.to_string()),
        );
    }
}

/// Check an embedded prefix against the model's declared interaction table.
fn validate_prefix(model: &Model, prefix: &Prefix, ctx: &str, out: &mut Vec<Diagnostic>) {
    match model.interaction(&prefix.interaction.id) {
        None => out.push(
            Diagnostic::error(
                codes::UNRESOLVED_REFERENCE,
                format!("undeclared interaction '{}'", prefix.interaction.id),
            )
            .in_context(ctx.to_string()),
        ),
        Some(declared) if *declared != prefix.interaction => out.push(
            Diagnostic::error(
                codes::INTERACTION_MISMATCH,
                format!(
                    "prefix disagrees with declaration of interaction '{}'",
                    prefix.interaction.id
                ),
            )
            .in_context(ctx.to_string()),
        ),
        Some(_) => {}
    }
}

fn walk_expr<'e>(expr: &'e StateExpr, f: &mut impl FnMut(&'e StateExpr)) {
    f(expr);
    match expr {
        StateExpr::Prefixed { then, .. } => walk_expr(then, f),
        StateExpr::Alt(l, r) | StateExpr::Par(l, r) => {
            walk_expr(l, f);
            walk_expr(r, f);
        }
        _ => {}
    }
}

/// Variables a guard may legitimately read inside one graph: everything
/// written by its snippets (including the initial one) plus every parameter
/// name of channels its interactions use.
fn guard_scope(model: &Model, itg: &Itg) -> BTreeSet<String> {
    let mut scope: BTreeSet<String> = itg
        .initial_snippet
        .assigned_vars()
        .map(str::to_string)
        .collect();
    for t in &itg.transitions {
        scope.extend(t.prefix.snippet.assigned_vars().map(str::to_string));
        if let Some(channel) = model.channel(&t.prefix.interaction.channel) {
            scope.extend(channel.params.iter().map(|p| p.name.clone()));
        }
    }
    scope
}

fn lint_guard(guard: &Guard, scope: &BTreeSet<String>, ctx: String, out: &mut Vec<Diagnostic>) {
    let Guard::Cmp { lhs, rhs, .. } = guard else {
        return;
    };
    for operand in [lhs, rhs] {
        if let crate::expr::Operand::Var(name) = operand {
            if !scope.contains(name) {
                out.push(
                    Diagnostic::error(
                        codes::UNBOUND_GUARD_VARIABLE,
                        format!("guard variable '{name}' is never bound"),
                    )
                    .in_context(ctx.clone()),
                );
            }
        }
    }
}

/// Validate every structural invariant of a model. Returns an empty list
/// iff the model is well-formed; diagnostics, not panics, report problems.
pub fn validate_model(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    // agent namespace: actors and components are disjoint
    check_duplicates(
        model
            .actors
            .iter()
            .chain(model.components.iter())
            .map(String::as_str),
        "agent",
        &mut out,
    );
    check_duplicates(
        model.channels.iter().map(|c| c.name.as_str()),
        "channel",
        &mut out,
    );
    check_duplicates(
        model.interactions.iter().map(|i| i.id.as_str()),
        "interaction",
        &mut out,
    );
    // itgs and defs share the reference namespace
    check_duplicates(
        model
            .itgs
            .iter()
            .map(|g| g.name.as_str())
            .chain(model.defs.iter().map(|d| d.name.as_str())),
        "definition",
        &mut out,
    );

    for channel in &model.channels {
        if !is_identifier(&channel.name) {
            out.push(Diagnostic::error(
                codes::EMPTY_NAME,
                format!("invalid channel name '{}'", channel.name),
            ));
        }
        let mut seen = BTreeSet::new();
        for param in &channel.params {
            if !seen.insert(param.name.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::DUPLICATE_PARAMETER,
                        format!("duplicate parameter '{}'", param.name),
                    )
                    .in_context(format!("channel {}", channel.name)),
                );
            }
        }
    }

    for interaction in &model.interactions {
        validate_interaction(
            model,
            interaction,
            &format!("interaction {}", interaction.id),
            &mut out,
        );
    }

    for itg in &model.itgs {
        let ctx = format!("itg {}", itg.name);
        let mut seen = BTreeSet::new();
        for state in &itg.states {
            if !seen.insert(state.as_str()) {
                out.push(
                    Diagnostic::error(
                        codes::DUPLICATE_DECLARATION,
                        format!("duplicate state '{state}'"),
                    )
                    .in_context(ctx.clone()),
                );
            }
        }
        if !itg.has_state(&itg.initial_state) {
            out.push(
                Diagnostic::error(
                    codes::UNDECLARED_STATE,
                    format!("initial state '{}' is not a declared state", itg.initial_state),
                )
                .in_context(ctx.clone()),
            );
        }
        let scope = guard_scope(model, itg);
        for t in &itg.transitions {
            let tctx = format!("{ctx}, transition {} -[{}]->", t.source, t.prefix.interaction.id);
            if !itg.has_state(&t.source) {
                out.push(
                    Diagnostic::error(
                        codes::UNDECLARED_STATE,
                        format!("transition source '{}' is not a declared state", t.source),
                    )
                    .in_context(tctx.clone()),
                );
            }
            if let StateRef::Named(n) = &t.target {
                if !itg.has_state(n) {
                    out.push(
                        Diagnostic::error(
                            codes::UNDECLARED_STATE,
                            format!("transition target '{n}' is not a declared state"),
                        )
                        .in_context(tctx.clone()),
                    );
                }
            }
            validate_prefix(model, &t.prefix, &tctx, &mut out);
            lint_guard(&t.prefix.guard, &scope, tctx, &mut out);
        }
    }

    let def_names: BTreeSet<&str> = model.defs.iter().map(|d| d.name.as_str()).collect();
    for def in &model.defs {
        let ctx = format!("def {}", def.name);
        walk_expr(&def.expr, &mut |node| match node {
            StateExpr::Ref(name) => {
                if model.itg(name).is_none() && !def_names.contains(name.as_str()) {
                    out.push(
                        Diagnostic::error(
                            codes::UNRESOLVED_REFERENCE,
                            format!("reference to undeclared definition or itg '{name}'"),
                        )
                        .in_context(ctx.clone()),
                    );
                }
            }
            StateExpr::Loop(name) => match model.itg(name) {
                None => out.push(
                    Diagnostic::error(
                        codes::UNRESOLVED_REFERENCE,
                        format!("loop over undeclared itg '{name}'"),
                    )
                    .in_context(ctx.clone()),
                ),
                Some(itg) => {
                    if !crate::semantics::is_loop(itg) {
                        out.push(
                            Diagnostic::warning(
                                codes::NON_LOOP_ITG,
                                format!("'loop {name}' over an itg whose initial state is on no cycle"),
                            )
                            .in_context(ctx.clone()),
                        );
                    }
                }
            },
            StateExpr::Prefixed { prefix, .. } => {
                validate_prefix(model, prefix, &ctx, &mut out);
            }
            _ => {}
        });
    }

    // textual definition cycles (a chain of refs that never reaches an itg)
    for def in &model.defs {
        if let Err(cycle) = check_def_cycle(model, &def.name) {
            out.push(
                Diagnostic::error(
                    codes::DEFINITION_CYCLE,
                    format!("definition cycle: {}", cycle.join(" -> ")),
                )
                .in_context(format!("def {}", def.name)),
            );
        }
    }

    out
}

fn check_def_cycle(model: &Model, name: &str) -> Result<(), Vec<String>> {
    fn visit(
        model: &Model,
        name: &str,
        stack: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), Vec<String>> {
        if done.contains(name) {
            return Ok(());
        }
        if let Some(at) = stack.iter().position(|n| n == name) {
            let mut cycle = stack[at..].to_vec();
            cycle.push(name.to_string());
            return Err(cycle);
        }
        let Some(def) = model.def(name) else {
            return Ok(()); // itg reference or unresolved; reported elsewhere
        };
        stack.push(name.to_string());
        let mut result = Ok(());
        walk_expr(&def.expr, &mut |node| {
            if result.is_ok() {
                if let StateExpr::Ref(target) = node {
                    if model.itg(target).is_none() {
                        result = visit(model, target, stack, done);
                    }
                }
            }
        });
        stack.pop();
        if result.is_ok() {
            done.insert(name.to_string());
        }
        result
    }
    visit(model, name, &mut Vec::new(), &mut BTreeSet::new())
}

/// Count interactions of each type; the classification is decided by the
/// caller's kind alone.
pub fn interaction_type_counts(model: &Model) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    counts.insert("type1", model.interactions.iter().filter(|i| i.is_type1()).count());
    counts.insert("type2", model.interactions.iter().filter(|i| i.is_type2()).count());
    counts
}
