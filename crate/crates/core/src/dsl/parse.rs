//! Recursive-descent parser for `.sbc` sources with error recovery.
//!
//! Parsing is total: any input yields either a fully resolved model or a
//! nonempty diagnostic list, never a panic. On a declaration-level error the
//! parser skips to the next plausible declaration start and continues.

use crate::expr::{
    parse_guard_tokens, parse_snippet_tokens, CodeSnippet, ExprParseError, Guard, P,
};
use crate::lex::{tokenize, Pos, Tok, Token};
use crate::model::{
    codes, validate_model, Agent, ChannelSignature, Definition, Diagnostic, Direction,
    Interaction, Itg, Model, Parameter, Prefix, StateExpr, StateRef, Transition, ValueType,
};

/// Result of analyzing one source text. `model` is present iff no
/// error-severity diagnostic was produced (warnings keep it usable).
#[derive(Debug)]
pub struct ParseOutcome {
    pub model: Option<Model>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parse and validate a model, keeping all diagnostics.
pub fn analyze_model(text: &str) -> ParseOutcome {
    let (tokens, lex_errors) = tokenize(text);
    let mut diagnostics: Vec<Diagnostic> = lex_errors
        .into_iter()
        .map(|e| Diagnostic::error(codes::SYNTAX, e.message).at(e.pos))
        .collect();

    let mut parser = Parser {
        toks: &tokens,
        at: 0,
        diags: Vec::new(),
    };
    let raw = parser.file();
    diagnostics.extend(parser.diags);

    if diagnostics.iter().any(|d| d.is_error()) {
        return ParseOutcome {
            model: None,
            diagnostics,
        };
    }

    let model = build(raw, &mut diagnostics);
    if diagnostics.iter().any(|d| d.is_error()) {
        return ParseOutcome {
            model: None,
            diagnostics,
        };
    }

    let model = model.expect("build succeeds when no error diagnostics");
    diagnostics.extend(validate_model(&model));
    if diagnostics.iter().any(|d| d.is_error()) {
        ParseOutcome {
            model: None,
            diagnostics,
        }
    } else {
        ParseOutcome {
            model: Some(model),
            diagnostics,
        }
    }
}

/// Parse a model; errors are the collected diagnostics.
pub fn parse_model(text: &str) -> Result<Model, Vec<Diagnostic>> {
    let out = analyze_model(text);
    match out.model {
        Some(m) => Ok(m),
        None => Err(out.diagnostics),
    }
}

/// Parse a single channel signature such as
/// `validatePIN(in cardId: String; out cardValid: String)`.
pub fn parse_channel_signature(text: &str) -> Result<ChannelSignature, Diagnostic> {
    let (tokens, lex_errors) = tokenize(text);
    if let Some(e) = lex_errors.into_iter().next() {
        return Err(Diagnostic::error(codes::SYNTAX, e.message).at(e.pos));
    }
    let mut parser = Parser {
        toks: &tokens,
        at: 0,
        diags: Vec::new(),
    };
    let sig = parser.signature()?;
    if let Some(t) = parser.peek_token() {
        return Err(
            Diagnostic::error(codes::SYNTAX, format!("unexpected trailing {}", t.tok)).at(t.pos),
        );
    }
    // duplicate parameter names are rejected here as well as in validation
    let mut seen = std::collections::BTreeSet::new();
    for p in &sig.params {
        if !seen.insert(p.name.clone()) {
            return Err(Diagnostic::error(
                codes::DUPLICATE_PARAMETER,
                format!("duplicate parameter '{}'", p.name),
            ));
        }
    }
    Ok(sig)
}

// ---------------------------------------------------------------------------
// raw declarations (pre-resolution)

#[derive(Debug)]
struct RawFile {
    actors: Vec<(String, Pos)>,
    components: Vec<(String, Pos)>,
    channels: Vec<ChannelSignature>,
    interactions: Vec<Interaction>,
    itgs: Vec<RawItg>,
    defs: Vec<RawDef>,
}

#[derive(Debug)]
struct RawItg {
    name: String,
    pos: Pos,
    inits: Vec<(CodeSnippet, String, Pos)>,
    transitions: Vec<RawTransition>,
}

#[derive(Debug)]
struct RawTransition {
    source: String,
    guard: Guard,
    interaction_id: String,
    snippet: CodeSnippet,
    target: StateRef,
    pos: Pos,
}

#[derive(Debug)]
struct RawDef {
    name: String,
    expr: RawExpr,
}

#[derive(Debug)]
enum RawExpr {
    Inactive,
    Prefixed {
        guard: Guard,
        interaction_id: String,
        snippet: CodeSnippet,
        pos: Pos,
        then: Box<RawExpr>,
    },
    Alt(Box<RawExpr>, Box<RawExpr>),
    Par(Box<RawExpr>, Box<RawExpr>),
    Loop(String),
    Ref(String),
}

// ---------------------------------------------------------------------------
// token cursor

struct Parser<'t> {
    toks: &'t [Token],
    at: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    fn peek_token(&self) -> Option<&'t Token> {
        self.toks.get(self.at)
    }

    fn peek(&self) -> Option<&'t Tok> {
        self.peek_token().map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.peek_token()
            .or_else(|| self.toks.last())
            .map(|t| t.pos)
            .unwrap_or(Pos::new(1, 1))
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<Pos> {
        match self.peek_token() {
            Some(t) if &t.tok == tok => {
                let pos = t.pos;
                self.at += 1;
                Ok(pos)
            }
            Some(t) => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("expected {what}, found {}", t.tok),
            )
            .at(t.pos)),
            None => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("expected {what}, found end of input"),
            )
            .at(self.pos())),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek_token() {
            Some(Token {
                tok: Tok::Ident(name),
                pos,
            }) => {
                let out = (name.clone(), *pos);
                self.at += 1;
                Ok(out)
            }
            Some(t) => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("expected {what}, found {}", t.tok),
            )
            .at(t.pos)),
            None => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("expected {what}, found end of input"),
            )
            .at(self.pos())),
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == word)
    }

    fn eat_keyword(&mut self, word: &str) -> bool {
        if self.at_keyword(word) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    /// Skip to a plausible top-level resynchronization point.
    fn recover_top(&mut self) {
        let mut brace_depth = 0usize;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::LBrace => {
                    brace_depth += 1;
                    self.bump();
                }
                Tok::RBrace => {
                    self.bump();
                    if brace_depth <= 1 {
                        return;
                    }
                    brace_depth -= 1;
                }
                Tok::Semi if brace_depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::Ident(w)
                    if brace_depth == 0
                        && matches!(
                            w.as_str(),
                            "actor" | "component" | "channel" | "interaction" | "itg" | "def"
                        ) =>
                {
                    return;
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Skip to the next `;` inside an itg body, or stop before `}`.
    fn recover_in_body(&mut self) {
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Semi => {
                    self.bump();
                    return;
                }
                Tok::RBrace => return,
                _ => {
                    self.bump();
                }
            }
        }
    }

    // -----------------------------------------------------------------------

    fn file(&mut self) -> RawFile {
        let mut raw = RawFile {
            actors: Vec::new(),
            components: Vec::new(),
            channels: Vec::new(),
            interactions: Vec::new(),
            itgs: Vec::new(),
            defs: Vec::new(),
        };
        while self.peek().is_some() {
            let before = self.at;
            if let Err(d) = self.declaration(&mut raw) {
                self.diags.push(d);
                if self.at == before {
                    self.bump(); // guarantee progress
                }
                self.recover_top();
            }
        }
        raw
    }

    fn declaration(&mut self, raw: &mut RawFile) -> PResult<()> {
        let (word, pos) = match self.peek_token() {
            Some(Token {
                tok: Tok::Ident(w),
                pos,
            }) => (w.clone(), *pos),
            Some(t) => {
                let d = Diagnostic::error(
                    codes::SYNTAX,
                    format!("expected a declaration, found {}", t.tok),
                )
                .at(t.pos);
                return Err(d);
            }
            None => return Ok(()),
        };
        match word.as_str() {
            "actor" => {
                self.bump();
                let (name, npos) = self.ident("actor name")?;
                self.expect(&Tok::Semi, "';'")?;
                raw.actors.push((name, npos));
            }
            "component" => {
                self.bump();
                let (name, npos) = self.ident("component name")?;
                self.expect(&Tok::Semi, "';'")?;
                raw.components.push((name, npos));
            }
            "channel" => {
                self.bump();
                let sig = self.signature()?;
                self.expect(&Tok::Semi, "';'")?;
                raw.channels.push(sig);
            }
            "interaction" => {
                self.bump();
                let interaction = self.interaction_decl()?;
                raw.interactions.push(interaction);
            }
            "itg" => {
                self.bump();
                let itg = self.itg_decl(pos)?;
                raw.itgs.push(itg);
            }
            "def" => {
                self.bump();
                let def = self.def_decl()?;
                raw.defs.push(def);
            }
            other => {
                return Err(Diagnostic::error(
                    codes::SYNTAX,
                    format!("unknown declaration '{other}'"),
                )
                .at(pos));
            }
        }
        Ok(())
    }

    fn signature(&mut self) -> PResult<ChannelSignature> {
        let (name, _) = self.ident("channel name")?;
        self.expect(&Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                params.push(self.parameter()?);
                if self.eat(&Tok::Semi) {
                    continue;
                }
                self.expect(&Tok::RParen, "')' or ';'")?;
                break;
            }
        }
        Ok(ChannelSignature { name, params })
    }

    fn parameter(&mut self) -> PResult<Parameter> {
        let (word, pos) = self.ident("parameter direction")?;
        let direction = Direction::from_keyword(&word).ok_or_else(|| {
            Diagnostic::error(
                codes::SYNTAX,
                format!("unknown direction '{word}' (expected in, out or inout)"),
            )
            .at(pos)
        })?;
        let (name, _) = self.ident("parameter name")?;
        self.expect(&Tok::Colon, "':'")?;
        let (ty_word, ty_pos) = self.ident("parameter type")?;
        let value_type = ValueType::from_keyword(&ty_word).ok_or_else(|| {
            Diagnostic::error(
                codes::SYNTAX,
                format!("unknown type '{ty_word}' (expected Real, Integer, String or Boolean)"),
            )
            .at(ty_pos)
        })?;
        Ok(Parameter {
            direction,
            name,
            value_type,
        })
    }

    fn agent_ref(&mut self) -> PResult<(bool, String)> {
        if self.eat(&Tok::Colon) {
            let (name, _) = self.ident("component name")?;
            Ok((true, name))
        } else {
            let (name, _) = self.ident("agent name")?;
            Ok((false, name))
        }
    }

    fn interaction_decl(&mut self) -> PResult<Interaction> {
        let (id, _) = self.ident("interaction id")?;
        self.expect(&Tok::Assign, "'='")?;
        let (caller_is_component, caller_name) = self.agent_ref()?;
        self.expect(&Tok::Arrow, "'->'")?;
        self.expect(&Tok::Colon, "':' before the callee component")?;
        let (callee, _) = self.ident("component name")?;
        self.expect(&Tok::Dot, "'.'")?;
        let (channel, _) = self.ident("channel name")?;
        self.expect(&Tok::Semi, "';'")?;
        let caller = if caller_is_component {
            Agent::component(caller_name)
        } else {
            Agent::actor(caller_name)
        };
        Ok(Interaction {
            id,
            caller,
            channel,
            callee: Agent::component(callee),
        })
    }

    fn itg_decl(&mut self, pos: Pos) -> PResult<RawItg> {
        let (name, _) = self.ident("itg name")?;
        self.expect(&Tok::LBrace, "'{'")?;
        let mut itg = RawItg {
            name,
            pos,
            inits: Vec::new(),
            transitions: Vec::new(),
        };
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.peek().is_none() {
                return Err(
                    Diagnostic::error(codes::SYNTAX, "unterminated itg body, expected '}'")
                        .at(self.pos()),
                );
            }
            let before = self.at;
            if let Err(d) = self.itg_line(&mut itg) {
                self.diags.push(d);
                if self.at == before {
                    self.bump();
                }
                self.recover_in_body();
            }
        }
        Ok(itg)
    }

    fn itg_line(&mut self, itg: &mut RawItg) -> PResult<()> {
        if self.at_keyword("init") {
            let pos = self.pos();
            self.bump();
            let snippet = if self.eat(&Tok::LBracket) {
                // the closing bracket may be glued to the arrow as `]->`
                let mut end = self.at;
                while let Some(t) = self.toks.get(end) {
                    if t.tok == Tok::RBracket || t.tok == Tok::RBracketArrow {
                        break;
                    }
                    end += 1;
                }
                let s = self.sub_parse(end, parse_snippet_tokens, "snippet")?;
                if !self.eat(&Tok::RBracketArrow) {
                    self.expect(&Tok::RBracket, "']'")?;
                    self.expect(&Tok::Arrow, "'->'")?;
                }
                s
            } else {
                self.expect(&Tok::Arrow, "'->'")?;
                CodeSnippet::nil()
            };
            let (target, _) = self.ident("initial state name")?;
            self.expect(&Tok::Semi, "';'")?;
            itg.inits.push((snippet, target, pos));
            return Ok(());
        }
        let (source, pos) = self.ident("state name")?;
        self.expect(&Tok::DashLBracket, "'-['")?;
        let (guard, interaction_id, snippet) = self.label_body(&Tok::RBracketArrow)?;
        self.expect(&Tok::RBracketArrow, "']->'")?;
        let (target_name, _) = self.ident("target state or STOP")?;
        let target = if target_name == "STOP" {
            StateRef::Stop
        } else {
            StateRef::Named(target_name)
        };
        self.expect(&Tok::Semi, "';'")?;
        itg.transitions.push(RawTransition {
            source,
            guard,
            interaction_id,
            snippet,
            target,
            pos,
        });
        Ok(())
    }

    /// Parse `[<guard> ?] <id> [/ <snippet>]` up to (not consuming) `closer`.
    fn label_body(&mut self, closer: &Tok) -> PResult<(Guard, String, CodeSnippet)> {
        // a '?' before the closer means an explicit guard is present
        let mut scan = self.at;
        let mut has_guard = false;
        while let Some(t) = self.toks.get(scan) {
            if &t.tok == closer {
                break;
            }
            if t.tok == Tok::Question {
                has_guard = true;
                break;
            }
            scan += 1;
        }
        let guard = if has_guard {
            let g = self.sub_parse(scan, parse_guard_tokens, "guard")?;
            self.expect(&Tok::Question, "'?'")?;
            g
        } else {
            Guard::True
        };
        let (interaction_id, _) = self.ident("interaction id")?;
        let snippet = if self.eat(&Tok::Slash) {
            let mut end = self.at;
            while let Some(t) = self.toks.get(end) {
                if &t.tok == closer {
                    break;
                }
                end += 1;
            }
            self.sub_parse(end, parse_snippet_tokens, "snippet")?
        } else {
            CodeSnippet::nil()
        };
        Ok((guard, interaction_id, snippet))
    }

    fn snippet_until(&mut self, closer: &Tok) -> PResult<CodeSnippet> {
        let mut end = self.at;
        while let Some(t) = self.toks.get(end) {
            if &t.tok == closer {
                break;
            }
            end += 1;
        }
        self.sub_parse(end, parse_snippet_tokens, "snippet")
    }

    /// Run an expression-level parser on tokens `self.at..end`, requiring it
    /// to consume the whole range.
    fn sub_parse<T>(
        &mut self,
        end: usize,
        f: impl FnOnce(&mut P) -> Result<T, ExprParseError>,
        what: &str,
    ) -> PResult<T> {
        let slice = &self.toks[self.at..end];
        let start_pos = self.pos();
        let mut p = P::new(slice);
        let out = f(&mut p).map_err(|e| {
            Diagnostic::error(codes::SYNTAX, format!("invalid {what}: {}", e.message))
                .at(if slice.is_empty() { start_pos } else { e.pos })
        })?;
        if let Some(e) = p.trailing_error() {
            return Err(
                Diagnostic::error(codes::SYNTAX, format!("invalid {what}: {}", e.message))
                    .at(e.pos),
            );
        }
        self.at = end;
        Ok(out)
    }

    fn def_decl(&mut self) -> PResult<RawDef> {
        let (name, _) = self.ident("definition name")?;
        self.expect(&Tok::Assign, "'='")?;
        let expr = self.state_expr()?;
        self.expect(&Tok::Semi, "';'")?;
        Ok(RawDef { name, expr })
    }

    /// `stateExpr := seqExpr { ('alt'|'par') seqExpr }`, left-associative.
    fn state_expr(&mut self) -> PResult<RawExpr> {
        let mut lhs = self.seq_expr()?;
        loop {
            let make_alt = if self.eat_keyword("alt") {
                true
            } else if self.eat_keyword("par") {
                false
            } else {
                break;
            };
            let rhs = self.seq_expr()?;
            lhs = if make_alt {
                RawExpr::Alt(Box::new(lhs), Box::new(rhs))
            } else {
                RawExpr::Par(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    /// `seqExpr := '[' prefix ']' '.' seqExpr | atom` — prefixing binds
    /// tighter than alt/par.
    fn seq_expr(&mut self) -> PResult<RawExpr> {
        if self.peek() == Some(&Tok::LBracket) {
            let pos = self.pos();
            self.bump();
            let (guard, interaction_id, snippet) = self.label_body(&Tok::RBracket)?;
            self.expect(&Tok::RBracket, "']'")?;
            self.expect(&Tok::Dot, "'.'")?;
            let then = self.seq_expr()?;
            return Ok(RawExpr::Prefixed {
                guard,
                interaction_id,
                snippet,
                pos,
                then: Box::new(then),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<RawExpr> {
        if self.eat(&Tok::LParen) {
            let e = self.state_expr()?;
            self.expect(&Tok::RParen, "')'")?;
            return Ok(e);
        }
        if self.eat_keyword("STOP") {
            return Ok(RawExpr::Inactive);
        }
        if self.eat_keyword("loop") {
            let (name, _) = self.ident("itg name")?;
            return Ok(RawExpr::Loop(name));
        }
        if self.eat_keyword("ref") {
            let (name, _) = self.ident("definition or itg name")?;
            return Ok(RawExpr::Ref(name));
        }
        match self.peek_token() {
            Some(t) => Err(Diagnostic::error(
                codes::SYNTAX,
                format!("expected state expression, found {}", t.tok),
            )
            .at(t.pos)),
            None => Err(Diagnostic::error(
                codes::SYNTAX,
                "expected state expression, found end of input",
            )
            .at(self.pos())),
        }
    }
}

// ---------------------------------------------------------------------------
// raw -> resolved model

fn build(raw: RawFile, diags: &mut Vec<Diagnostic>) -> Option<Model> {
    let mut model = Model {
        actors: raw.actors.into_iter().map(|(n, _)| n).collect(),
        components: raw.components.into_iter().map(|(n, _)| n).collect(),
        channels: raw.channels,
        interactions: raw.interactions,
        itgs: Vec::new(),
        defs: Vec::new(),
    };

    for raw_itg in raw.itgs {
        let ctx = format!("itg {}", raw_itg.name);
        let (initial_snippet, initial_state) = match raw_itg.inits.len() {
            0 => {
                diags.push(
                    Diagnostic::error(
                        codes::MISSING_INITIAL,
                        "itg has no initial transition (expected one 'init -> <state>;')",
                    )
                    .at(raw_itg.pos)
                    .in_context(ctx.clone()),
                );
                continue;
            }
            n => {
                if n > 1 {
                    diags.push(
                        Diagnostic::error(
                            codes::DUPLICATE_INITIAL,
                            format!("itg has {n} initial transitions, exactly one is allowed"),
                        )
                        .at(raw_itg.inits[1].2)
                        .in_context(ctx.clone()),
                    );
                }
                let (snippet, state, _) = raw_itg.inits.into_iter().next().unwrap();
                (snippet, state)
            }
        };
        let mut transitions = Vec::new();
        for t in raw_itg.transitions {
            let Some(interaction) = model.interaction(&t.interaction_id).cloned() else {
                diags.push(
                    Diagnostic::error(
                        codes::UNRESOLVED_REFERENCE,
                        format!("undeclared interaction '{}'", t.interaction_id),
                    )
                    .at(t.pos)
                    .in_context(ctx.clone()),
                );
                continue;
            };
            transitions.push(Transition {
                source: t.source,
                prefix: Prefix::new(t.guard, interaction, t.snippet),
                target: t.target,
            });
        }
        model.itgs.push(Itg::new(
            raw_itg.name,
            initial_snippet,
            initial_state,
            transitions,
        ));
    }

    for raw_def in raw.defs {
        let ctx = format!("def {}", raw_def.name);
        match resolve_expr(&model, raw_def.expr, &ctx, diags) {
            Some(expr) => model.defs.push(Definition {
                name: raw_def.name,
                expr,
            }),
            None => continue,
        }
    }

    model.normalize();
    Some(model)
}

fn resolve_expr(
    model: &Model,
    raw: RawExpr,
    ctx: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<StateExpr> {
    match raw {
        RawExpr::Inactive => Some(StateExpr::Inactive),
        RawExpr::Loop(name) => Some(StateExpr::Loop(name)),
        RawExpr::Ref(name) => Some(StateExpr::Ref(name)),
        RawExpr::Alt(l, r) => {
            let l = resolve_expr(model, *l, ctx, diags);
            let r = resolve_expr(model, *r, ctx, diags);
            Some(StateExpr::Alt(Box::new(l?), Box::new(r?)))
        }
        RawExpr::Par(l, r) => {
            let l = resolve_expr(model, *l, ctx, diags);
            let r = resolve_expr(model, *r, ctx, diags);
            Some(StateExpr::Par(Box::new(l?), Box::new(r?)))
        }
        RawExpr::Prefixed {
            guard,
            interaction_id,
            snippet,
            pos,
            then,
        } => {
            let interaction = match model.interaction(&interaction_id) {
                Some(i) => i.clone(),
                None => {
                    diags.push(
                        Diagnostic::error(
                            codes::UNRESOLVED_REFERENCE,
                            format!("undeclared interaction '{interaction_id}'"),
                        )
                        .at(pos)
                        .in_context(ctx.to_string()),
                    );
                    // keep resolving the continuation for more diagnostics
                    resolve_expr(model, *then, ctx, diags);
                    return None;
                }
            };
            let then = resolve_expr(model, *then, ctx, diags)?;
            Some(StateExpr::Prefixed {
                prefix: Prefix::new(guard, interaction, snippet),
                then: Box::new(then),
            })
        }
    }
}
