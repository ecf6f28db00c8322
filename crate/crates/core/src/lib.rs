//! Toolkit for channel-based value-passing process models (SBC-PA): a
//! textual modeling language, interaction transition graphs, the
//! sequence/alternative/parallel composition rules, strong bisimulation
//! checking, and a scripted/seeded simulator.
//!
//! Modules:
//! - [`model`]: domain types and structural validation
//! - [`expr`]: the guard/snippet expression language
//! - [`dsl`]: `.sbc` parser and canonical printer
//! - [`semantics`]: composition rules, expansion, derivatives, loops
//! - [`bisim`]: strong bisimulation with distinguishing traces
//! - [`sim`]: guarded execution with scenarios, stubs and seeded choice
//! - [`export`]: JSON and DOT output

pub mod bisim;
pub mod dsl;
pub mod export;
pub mod expr;
pub mod lex;
pub mod model;
pub mod semantics;
pub mod sim;

pub use dsl::{analyze_model, parse_channel_signature, parse_model, print_model};
pub use expr::{
    concat_snippets, eval_guard, exec_snippet, parse_guard, parse_snippet, CodeSnippet, Env,
    Guard, Value,
};
pub use model::{
    make_prefix, validate_model, Agent, AgentKind, ChannelSignature, Diagnostic, Interaction,
    Itg, Model, Parameter, Prefix, Severity, StateExpr, StateRef, Transition,
};
pub use semantics::{
    compose_alternative, compose_parallel_expand, compose_sequence, derivatives, expand, is_loop,
    parallel_expand, resolve_refs, successors, Derivative, Node,
};
