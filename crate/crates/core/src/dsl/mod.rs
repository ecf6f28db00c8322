//! The `.sbc` modeling language: parser from source text to [`Model`] and
//! canonical printer back to text.
//!
//! Declarations:
//!
//! ```text
//! actor <name>;
//! component <name>;
//! channel <name>(<dir> <param> : <Type>; ...);
//! interaction <id> = <caller> -> :<component> . <channel>;
//! itg <name> {
//!   init [<snippet>] -> <state>;
//!   <state> -[ <guard> ? <id> / <snippet> ]-> <state-or-STOP>;
//! }
//! def <Name> = <stateExpr>;
//! ```
//!
//! A caller is an actor name or `:componentName`. In transition labels the
//! `<guard> ?` and `/ <snippet>` parts are optional; absent means the
//! implicit `TRUE` guard and the empty snippet. State expressions are
//! `STOP`, `[<prefix>] . <expr>`, `(<e> alt <e>)`, `(<e> par <e>)`,
//! `loop <itg>` and `ref <name>`. Comments run from `//` to end of line.

mod parse;
mod print;

pub use parse::{analyze_model, parse_channel_signature, parse_model, ParseOutcome};
pub use print::print_model;
