//! Execution engine: runs a resolved state expression with guard
//! evaluation, snippet execution and value-passing parameter binding.
//!
//! Actor-driven (type 1) interactions are either free-running or scripted by
//! a [`Scenario`]; callee out-parameters come from scenario stubs. Choice
//! among enabled candidates is seeded uniform random, so a run is a pure
//! function of (model, scenario, seed, step limit).

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{eval_guard, exec_snippet, Env, EvalError, Value};
use crate::lex::{tokenize, Pos, Tok, Token};
use crate::model::{codes, Diagnostic, Direction, Model, Prefix, ValueType};
use crate::semantics::{
    initial_snippet, node_of_expr, resolve_refs, successors, Node, SemanticsError,
};

// ---------------------------------------------------------------------------
// scenarios

/// One scripted actor request: which actor calls which channel, with values
/// for the channel's in-parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioStep {
    pub actor: String,
    pub channel: String,
    pub bindings: Vec<(String, Value)>,
}

/// A scripted run: ordered actor steps plus stubbed out-parameter values
/// per (component, channel).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub steps: Vec<ScenarioStep>,
    pub stubs: BTreeMap<(String, String), Vec<(String, Value)>>,
}

impl Scenario {
    pub fn stub_value(&self, component: &str, channel: &str, param: &str) -> Option<&Value> {
        self.stubs
            .get(&(component.to_string(), channel.to_string()))
            .and_then(|bindings| bindings.iter().find(|(n, _)| n == param))
            .map(|(_, v)| v)
    }
}

/// Parse a `.scn` scenario file. Line-oriented:
///
/// ```text
/// step <Actor> <channelName> [<param>=<literal> ...]
/// stub <Component> <channelName> [<param>=<literal> ...]
/// ```
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
    let (tokens, lex_errors) = tokenize(text);
    let mut diags: Vec<Diagnostic> = lex_errors
        .into_iter()
        .map(|e| Diagnostic::error(codes::SYNTAX, e.message).at(e.pos))
        .collect();

    let mut scenario = Scenario::default();
    let mut at = 0;
    while at < tokens.len() {
        let line = tokens[at].pos.line;
        let mut end = at;
        while end < tokens.len() && tokens[end].pos.line == line {
            end += 1;
        }
        match parse_scenario_line(&tokens[at..end]) {
            Ok(ScnLine::Step(step)) => scenario.steps.push(step),
            Ok(ScnLine::Stub {
                component,
                channel,
                bindings,
            }) => {
                scenario.stubs.insert((component, channel), bindings);
            }
            Err(d) => diags.push(d),
        }
        at = end;
    }
    if diags.iter().any(|d| d.is_error()) {
        Err(diags)
    } else {
        Ok(scenario)
    }
}

enum ScnLine {
    Step(ScenarioStep),
    Stub {
        component: String,
        channel: String,
        bindings: Vec<(String, Value)>,
    },
}

fn parse_scenario_line(tokens: &[Token]) -> Result<ScnLine, Diagnostic> {
    let pos = tokens.first().map(|t| t.pos).unwrap_or(Pos::new(1, 1));
    let mut at = 0;
    let mut ident = |what: &str| -> Result<String, Diagnostic> {
        match tokens.get(at) {
            Some(Token {
                tok: Tok::Ident(w), ..
            }) => {
                at += 1;
                Ok(w.clone())
            }
            Some(t) => {
                Err(Diagnostic::error(codes::SYNTAX, format!("expected {what}, found {}", t.tok))
                    .at(t.pos))
            }
            None => Err(Diagnostic::error(codes::SYNTAX, format!("expected {what}")).at(pos)),
        }
    };
    let kind = ident("'step' or 'stub'")?;
    if kind != "step" && kind != "stub" {
        return Err(
            Diagnostic::error(codes::SYNTAX, format!("expected 'step' or 'stub', found '{kind}'"))
                .at(pos),
        );
    }
    let agent = ident("agent name")?;
    let channel = ident("channel name")?;

    let mut bindings = Vec::new();
    while at < tokens.len() {
        let name = match &tokens[at].tok {
            Tok::Ident(w) => w.clone(),
            other => {
                return Err(Diagnostic::error(
                    codes::SYNTAX,
                    format!("expected parameter binding, found {other}"),
                )
                .at(tokens[at].pos))
            }
        };
        at += 1;
        match tokens.get(at).map(|t| &t.tok) {
            Some(Tok::Assign) => at += 1,
            _ => {
                return Err(Diagnostic::error(
                    codes::SYNTAX,
                    format!("expected '=' after parameter '{name}'"),
                )
                .at(tokens.get(at).map(|t| t.pos).unwrap_or(pos)))
            }
        }
        let (value, used) = parse_literal(&tokens[at..]).ok_or_else(|| {
            Diagnostic::error(codes::SYNTAX, format!("expected literal value for '{name}'"))
                .at(tokens.get(at).map(|t| t.pos).unwrap_or(pos))
        })?;
        at += used;
        bindings.push((name, value));
    }

    if kind == "step" {
        Ok(ScnLine::Step(ScenarioStep {
            actor: agent,
            channel,
            bindings,
        }))
    } else {
        Ok(ScnLine::Stub {
            component: agent,
            channel,
            bindings,
        })
    }
}

fn parse_literal(tokens: &[Token]) -> Option<(Value, usize)> {
    match tokens.first().map(|t| &t.tok) {
        Some(Tok::Int(v)) => Some((Value::Integer(*v), 1)),
        Some(Tok::Real(v)) => Some((Value::real(*v), 1)),
        Some(Tok::Str(s)) => Some((Value::Str(s.clone()), 1)),
        Some(Tok::Ident(w)) if w == "true" => Some((Value::Boolean(true), 1)),
        Some(Tok::Ident(w)) if w == "false" => Some((Value::Boolean(false), 1)),
        Some(Tok::Minus) => match tokens.get(1).map(|t| &t.tok) {
            Some(Tok::Int(v)) => Some((Value::Integer(-v), 2)),
            Some(Tok::Real(v)) => Some((Value::real(-v), 2)),
            _ => None,
        },
        _ => None,
    }
}

fn value_fits(value: &Value, ty: ValueType) -> bool {
    matches!(
        (value, ty),
        (Value::Real(_), ValueType::Real)
            | (Value::Integer(_), ValueType::Integer)
            | (Value::Integer(_), ValueType::Real) // promoted on binding
            | (Value::Str(_), ValueType::String)
            | (Value::Boolean(_), ValueType::Boolean)
    )
}

fn promote(value: &Value, ty: ValueType) -> Value {
    match (value, ty) {
        (Value::Integer(v), ValueType::Real) => Value::real(*v as f64),
        _ => value.clone(),
    }
}

/// Check every scenario binding against the model: agents and channels must
/// be declared, binding names must match parameters of a compatible
/// direction (steps bind in/inout, stubs bind out/inout) and type.
pub fn validate_scenario(model: &Model, scenario: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, step) in scenario.steps.iter().enumerate() {
        let ctx = format!("scenario step {}", i + 1);
        if !model.has_actor(&step.actor) {
            out.push(
                Diagnostic::error(
                    codes::UNRESOLVED_REFERENCE,
                    format!("undeclared actor '{}'", step.actor),
                )
                .in_context(ctx.clone()),
            );
        }
        check_bindings(model, &step.channel, &step.bindings, false, ctx, &mut out);
    }
    for ((component, channel), bindings) in &scenario.stubs {
        let ctx = format!("stub {component} {channel}");
        if !model.has_component(component) {
            out.push(
                Diagnostic::error(
                    codes::UNRESOLVED_REFERENCE,
                    format!("undeclared component '{component}'"),
                )
                .in_context(ctx.clone()),
            );
        }
        check_bindings(model, channel, bindings, true, ctx, &mut out);
    }
    out
}

fn check_bindings(
    model: &Model,
    channel: &str,
    bindings: &[(String, Value)],
    outward: bool,
    ctx: String,
    out: &mut Vec<Diagnostic>,
) {
    let Some(sig) = model.channel(channel) else {
        out.push(
            Diagnostic::error(
                codes::UNRESOLVED_REFERENCE,
                format!("undeclared channel '{channel}'"),
            )
            .in_context(ctx),
        );
        return;
    };
    for (name, value) in bindings {
        let Some(param) = sig.params.iter().find(|p| &p.name == name) else {
            out.push(
                Diagnostic::error(
                    codes::UNRESOLVED_REFERENCE,
                    format!("channel '{channel}' has no parameter '{name}'"),
                )
                .in_context(ctx.clone()),
            );
            continue;
        };
        let direction_ok = if outward {
            param.direction.binds_out()
        } else {
            param.direction.binds_in()
        };
        if !direction_ok {
            out.push(
                Diagnostic::error(
                    codes::INTERACTION_MISMATCH,
                    format!(
                        "parameter '{name}' of '{channel}' has direction '{}', cannot be bound here",
                        param.direction.keyword()
                    ),
                )
                .in_context(ctx.clone()),
            );
        }
        if !value_fits(value, param.value_type) {
            out.push(
                Diagnostic::error(
                    codes::INTERACTION_MISMATCH,
                    format!(
                        "value {value} does not fit parameter '{name} : {}'",
                        param.value_type.keyword()
                    ),
                )
                .in_context(ctx.clone()),
            );
        }
    }
}

// ---------------------------------------------------------------------------
// execution

/// Runtime configuration: composed node plus the (global) variable
/// environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub node: Node,
    pub env: Env,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    /// Substitute type defaults (0, 0.0, "", false) for missing stub
    /// values instead of failing.
    pub lenient_stubs: bool,
}

/// A structurally reachable, guard-true transition, ready to fire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub prefix: Prefix,
    pub next: Node,
    /// Whether firing this candidate consumes the current scenario step.
    pub scripted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("initialization snippet failed: {source}")]
    InitSnippet { source: EvalError },
    #[error("guard of '{interaction}' at {at}: {source}")]
    GuardEval {
        interaction: String,
        at: String,
        source: EvalError,
    },
    #[error("snippet of '{interaction}': {source}")]
    Snippet {
        interaction: String,
        source: EvalError,
    },
    #[error("no stub value for out parameter '{param}' of {component}.{channel} (strict mode)")]
    MissingStub {
        component: String,
        channel: String,
        param: String,
    },
    #[error("interaction '{interaction}' uses undeclared channel '{channel}'")]
    UnknownChannel {
        interaction: String,
        channel: String,
    },
    #[error("no enabled transitions")]
    NoEnabledTransitions,
    #[error("choice {chosen} out of range, {available} candidate(s) available")]
    BadChoice { chosen: usize, available: usize },
}

/// All firing candidates of a configuration: structural successors filtered
/// by guard truth under the environment extended with the pending step's
/// in-parameter values. In scripted mode an actor-driven candidate is ready
/// only when it matches the next unconsumed step; component-driven
/// candidates are always ready.
pub fn enabled(
    model: &Model,
    config: &Config,
    script: Option<(&Scenario, usize)>,
) -> Result<Vec<Candidate>, SimError> {
    let mut out = Vec::new();
    for (prefix, next) in successors(model, &config.node)? {
        let mut scripted = false;
        if prefix.interaction.is_type1() {
            if let Some((scenario, pos)) = script {
                match scenario.steps.get(pos) {
                    Some(step)
                        if step.actor == prefix.interaction.caller.name
                            && step.channel == prefix.interaction.channel =>
                    {
                        scripted = true;
                    }
                    _ => continue, // not ready: the script does not ask for it
                }
            }
        }

        let guard_env = if scripted {
            let (scenario, pos) = script.expect("scripted implies a scenario");
            let mut extended = config.env.clone();
            bind_step_ins(model, &prefix, &scenario.steps[pos], &mut extended, None)?;
            extended
        } else {
            config.env.clone()
        };
        let ok = eval_guard(&prefix.guard, &guard_env).map_err(|source| SimError::GuardEval {
            interaction: prefix.interaction.id.clone(),
            at: config.node.render(),
            source,
        })?;
        if ok {
            out.push(Candidate {
                prefix,
                next,
                scripted,
            });
        }
    }
    out.sort_by(|a, b| {
        let ka = (crate::bisim::Label::of_prefix(&a.prefix), &a.next);
        let kb = (crate::bisim::Label::of_prefix(&b.prefix), &b.next);
        ka.cmp(&kb)
    });
    Ok(out)
}

/// Write the scenario step's values for the channel's in/inout parameters
/// into `env` (promoting integer literals for Real parameters), recording
/// each binding when a recorder is given.
fn bind_step_ins(
    model: &Model,
    prefix: &Prefix,
    step: &ScenarioStep,
    env: &mut Env,
    mut record: Option<&mut Vec<(String, Value)>>,
) -> Result<(), SimError> {
    let channel = model
        .channel(&prefix.interaction.channel)
        .ok_or_else(|| SimError::UnknownChannel {
            interaction: prefix.interaction.id.clone(),
            channel: prefix.interaction.channel.clone(),
        })?;
    for param in channel.params.iter().filter(|p| p.direction.binds_in()) {
        if let Some((_, value)) = step.bindings.iter().find(|(n, _)| n == &param.name) {
            let value = promote(value, param.value_type);
            env.set(param.name.clone(), value.clone());
            if let Some(rec) = record.as_deref_mut() {
                rec.push((param.name.clone(), value));
            }
        }
    }
    Ok(())
}

/// One recorded firing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    /// 1-based position in the run.
    pub index: usize,
    pub node_before: Node,
    pub prefix: Prefix,
    /// Parameter values bound at this firing, in channel parameter order.
    pub bindings: Vec<(String, Value)>,
    pub env_after: Env,
}

impl TraceStep {
    pub fn render(&self) -> String {
        let i = &self.prefix.interaction;
        let bindings = self
            .bindings
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(", ");
        let guard = if self.prefix.guard.is_true() {
            "nil".to_string()
        } else {
            self.prefix.guard.render()
        };
        let snippet = if self.prefix.snippet.is_nil() {
            "nil".to_string()
        } else {
            self.prefix.snippet.render()
        };
        format!(
            "{} {} -> {} . {}({}) [{}] {{{}}} | env: {}",
            self.index, i.caller, i.callee, i.channel, bindings, guard, snippet, self.env_after
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Every parallel branch reached the inactive state.
    Inactive,
    /// No enabled candidate although the node is still live.
    Deadlock,
    StepLimit,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Inactive => write!(f, "inactive"),
            Terminal::Deadlock => write!(f, "deadlock"),
            Terminal::StepLimit => write!(f, "step-limit"),
        }
    }
}

/// A completed run. Consecutive steps chain: each step's `env_after` is the
/// environment the next step fired under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub terminal: Terminal,
    pub final_node: Node,
    pub final_env: Env,
}

impl Trace {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&step.render());
            out.push('\n');
        }
        out.push_str(&format!(
            "-- {} | node: {} | env: {}\n",
            self.terminal,
            self.final_node.render(),
            self.final_env
        ));
        out
    }

    pub fn interaction_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for step in &self.steps {
            *counts
                .entry(step.prefix.interaction.id.clone())
                .or_insert(0) += 1;
        }
        counts
    }
}

/// Fire one enabled candidate: bind in-parameters, pull out-parameters from
/// stubs (or fail / default per [`SimOptions`]), execute the snippet, and
/// advance the node.
pub fn fire(
    model: &Model,
    config: &Config,
    candidate: &Candidate,
    script: Option<(&Scenario, usize)>,
    opts: SimOptions,
) -> Result<(Config, TraceStep), SimError> {
    let prefix = &candidate.prefix;
    let channel = model
        .channel(&prefix.interaction.channel)
        .ok_or_else(|| SimError::UnknownChannel {
            interaction: prefix.interaction.id.clone(),
            channel: prefix.interaction.channel.clone(),
        })?;
    let mut env = config.env.clone();
    let mut bindings = Vec::new();

    if candidate.scripted {
        let (scenario, pos) = script.expect("scripted candidate without scenario");
        bind_step_ins(model, prefix, &scenario.steps[pos], &mut env, Some(&mut bindings))?;
    } else {
        // component-driven (or free-running) call: in-arguments travel by
        // name through the shared environment
        for param in channel.params.iter().filter(|p| p.direction.binds_in()) {
            if let Some(value) = env.get(&param.name) {
                bindings.push((param.name.clone(), value.clone()));
            }
        }
    }

    let scenario = script.map(|(s, _)| s);
    for param in channel.params.iter().filter(|p| p.direction.binds_out()) {
        let stubbed = scenario.and_then(|s| {
            s.stub_value(&prefix.interaction.callee.name, &channel.name, &param.name)
        });
        let value = match stubbed {
            Some(v) => promote(v, param.value_type),
            None if param.direction == Direction::InOut => continue, // keeps the in-value
            None if opts.lenient_stubs => default_value(param.value_type),
            None => {
                return Err(SimError::MissingStub {
                    component: prefix.interaction.callee.name.clone(),
                    channel: channel.name.clone(),
                    param: param.name.clone(),
                })
            }
        };
        env.set(param.name.clone(), value.clone());
        bindings.push((param.name.clone(), value));
    }

    let env_after = exec_snippet(&prefix.snippet, &env).map_err(|source| SimError::Snippet {
        interaction: prefix.interaction.id.clone(),
        source,
    })?;

    let step = TraceStep {
        index: 0, // the caller numbers the step
        node_before: config.node.clone(),
        prefix: prefix.clone(),
        bindings,
        env_after: env_after.clone(),
    };
    Ok((
        Config {
            node: candidate.next.clone(),
            env: env_after,
        },
        step,
    ))
}

fn default_value(ty: ValueType) -> Value {
    match ty {
        ValueType::Real => Value::real(0.0),
        ValueType::Integer => Value::Integer(0),
        ValueType::String => Value::Str(String::new()),
        ValueType::Boolean => Value::Boolean(false),
    }
}

/// Build the starting configuration of a definition: resolve it, then run
/// the concatenated initialization snippets on the empty environment.
pub fn initial_config(model: &Model, name: &str) -> Result<Config, SimError> {
    let expr = resolve_refs(model, name)?;
    let node = node_of_expr(model, &expr)?;
    let init = initial_snippet(model, &node)?;
    let env = exec_snippet(&init, &Env::new()).map_err(|source| SimError::InitSnippet { source })?;
    Ok(Config { node, env })
}

/// Run a definition to completion: execute the initial transition, then
/// repeatedly fire a uniformly random enabled candidate (seeded, hence
/// deterministic) until nothing is enabled or the step limit is reached.
pub fn simulate(
    model: &Model,
    name: &str,
    scenario: Option<&Scenario>,
    seed: u64,
    max_steps: usize,
    opts: SimOptions,
) -> Result<Trace, SimError> {
    let mut config = initial_config(model, name)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = 0usize;
    let mut steps = Vec::new();
    let mut terminal = Terminal::StepLimit;
    for index in 1..=max_steps {
        let script = scenario.map(|s| (s, pos));
        let candidates = enabled(model, &config, script)?;
        if candidates.is_empty() {
            terminal = if config.node.is_inactive() {
                Terminal::Inactive
            } else {
                Terminal::Deadlock
            };
            break;
        }
        let chosen = rng.gen_range(0..candidates.len());
        let candidate = &candidates[chosen];
        let (next, mut step) = fire(model, &config, candidate, script, opts)?;
        step.index = index;
        if candidate.scripted {
            pos += 1;
        }
        steps.push(step);
        config = next;
    }
    Ok(Trace {
        steps,
        terminal,
        final_node: config.node,
        final_env: config.env,
    })
}

/// Fire the `chosen`-th enabled candidate (as listed by [`enabled`]).
/// Returns the new configuration, the recorded step, and whether a scenario
/// step was consumed.
pub fn step_interactive(
    model: &Model,
    config: &Config,
    chosen: usize,
    script: Option<(&Scenario, usize)>,
    opts: SimOptions,
) -> Result<(Config, TraceStep, bool), SimError> {
    let candidates = enabled(model, config, script)?;
    if candidates.is_empty() {
        return Err(SimError::NoEnabledTransitions);
    }
    if chosen >= candidates.len() {
        return Err(SimError::BadChoice {
            chosen,
            available: candidates.len(),
        });
    }
    let candidate = &candidates[chosen];
    let (next, step) = fire(model, config, candidate, script, opts)?;
    Ok((next, step, candidate.scripted))
}
