//! Mini expression language used by guards and code snippets.
//!
//! Guards are single comparisons over variables and literals; snippets are
//! straight-line sequences of assignments `var = expr;`. Both evaluate over
//! an [`Env`] mapping variable names to [`Value`]s.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::lex::{tokenize, Pos, Tok, Token};

/// Runtime value. Integer arithmetic stays integer unless mixed with a Real,
/// which promotes the result to Real.
#[derive(Debug, Clone)]
pub enum Value {
    Real(f64),
    Integer(i64),
    Str(String),
    Boolean(bool),
}

impl Value {
    /// Real constructor normalizing `-0.0` so equality and hashing agree.
    pub fn real(v: f64) -> Value {
        Value::Real(if v == 0.0 { 0.0 } else { v })
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Real(_) => 0,
            Value::Integer(_) => 1,
            Value::Str(_) => 2,
            Value::Boolean(_) => 3,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Real(_) => "Real",
            Value::Integer(_) => "Integer",
            Value::Str(_) => "String",
            Value::Boolean(_) => "Boolean",
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Boolean(a), Value::Boolean(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Real(v) => v.to_bits().hash(state),
            Value::Integer(v) => v.hash(state),
            Value::Str(v) => v.hash(state),
            Value::Boolean(v) => v.hash(state),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Boolean(a), Value::Boolean(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // a Real always shows a decimal point so it reparses as Real
            Value::Real(v) if v.fract() == 0.0 && v.is_finite() => write!(f, "{v:.1}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Integer(v) => write!(f, "{v}"),
            Value::Str(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        '\n' => write!(f, "\\n")?,
                        '\t' => write!(f, "\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

/// Variable environment with value semantics: evaluation never mutates the
/// input, it returns an updated copy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Env(BTreeMap<String, Value>);

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.0.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, Value)> for Env {
    fn from_iter<T: IntoIterator<Item = (S, Value)>>(iter: T) -> Self {
        Env(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, value) in &self.0 {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{name}={value}")?;
        }
        Ok(())
    }
}

/// Guard or expression atom: a variable name or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Var(String),
    Lit(Value),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(name) => write!(f, "{name}"),
            Operand::Lit(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Transition guard. Every prefix is guarded; an absent guard is the
/// implicit `TRUE`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Guard {
    #[default]
    True,
    Cmp {
        lhs: Operand,
        op: CmpOp,
        rhs: Operand,
    },
}

impl Guard {
    pub fn is_true(&self) -> bool {
        matches!(self, Guard::True)
    }

    /// Canonical text; the implicit guard renders as the empty string.
    pub fn render(&self) -> String {
        match self {
            Guard::True => String::new(),
            Guard::Cmp { lhs, op, rhs } => format!("{lhs} {} {rhs}", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Right-hand side of an assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    fn render_into(&self, out: &mut String, parent_needs_parens: bool) {
        match self {
            Expr::Lit(v) => out.push_str(&v.to_string()),
            Expr::Var(name) => out.push_str(name),
            Expr::Binary { op, lhs, rhs } => {
                if parent_needs_parens {
                    out.push('(');
                }
                let (l_parens, r_parens) = match op {
                    // 1 - (2 - 3) and 1 + (2 + 3) must keep their parentheses
                    BinOp::Add => (false, matches!(**rhs, Expr::Binary { op: BinOp::Add | BinOp::Sub, .. })),
                    BinOp::Sub => (false, matches!(**rhs, Expr::Binary { op: BinOp::Add | BinOp::Sub, .. })),
                    BinOp::Mul => (
                        matches!(**lhs, Expr::Binary { op: BinOp::Add | BinOp::Sub, .. }),
                        matches!(**rhs, Expr::Binary { .. }),
                    ),
                    BinOp::Div => (
                        matches!(**lhs, Expr::Binary { op: BinOp::Add | BinOp::Sub, .. }),
                        matches!(**rhs, Expr::Binary { .. }),
                    ),
                };
                lhs.render_into(out, l_parens);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                rhs.render_into(out, r_parens);
                if parent_needs_parens {
                    out.push(')');
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.render_into(&mut out, false);
        write!(f, "{out}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assign {
    pub var: String,
    pub expr: Expr,
}

impl fmt::Display for Assign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {};", self.var, self.expr)
    }
}

/// Ordered list of assignments. The empty snippet is the algebra's `nil`;
/// concatenation is associative with `nil` as identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CodeSnippet(pub Vec<Assign>);

impl CodeSnippet {
    pub fn nil() -> CodeSnippet {
        CodeSnippet::default()
    }

    pub fn is_nil(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical text; `nil` renders as the empty string.
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Variables written by this snippet.
    pub fn assigned_vars(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|a| a.var.as_str())
    }
}

/// Statements of `a` followed by statements of `b`.
pub fn concat_snippets(a: &CodeSnippet, b: &CodeSnippet) -> CodeSnippet {
    let mut statements = a.0.clone();
    statements.extend(b.0.iter().cloned());
    CodeSnippet(statements)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("type mismatch: cannot apply '{op}' to {lhs} and {rhs}")]
    TypeMismatch {
        op: String,
        lhs: &'static str,
        rhs: &'static str,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("invalid numeric result")]
    InvalidNumeric,
}

fn lookup<'e>(env: &'e Env, name: &str) -> Result<&'e Value, EvalError> {
    env.get(name)
        .ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
}

fn eval_operand<'e>(operand: &'e Operand, env: &'e Env) -> Result<&'e Value, EvalError> {
    match operand {
        Operand::Var(name) => lookup(env, name),
        Operand::Lit(v) => Ok(v),
    }
}

/// Evaluate a guard under `env`. `TRUE` needs no bindings; comparisons
/// require bound, type-compatible operands. Ordering comparisons are
/// numeric-only.
pub fn eval_guard(guard: &Guard, env: &Env) -> Result<bool, EvalError> {
    let (lhs, op, rhs) = match guard {
        Guard::True => return Ok(true),
        Guard::Cmp { lhs, op, rhs } => (eval_operand(lhs, env)?, op, eval_operand(rhs, env)?),
    };
    let mismatch = || EvalError::TypeMismatch {
        op: op.symbol().to_string(),
        lhs: lhs.type_name(),
        rhs: rhs.type_name(),
    };
    match op {
        CmpOp::Eq | CmpOp::Ne => {
            let eq = match (lhs, rhs) {
                (Value::Str(a), Value::Str(b)) => a == b,
                (Value::Boolean(a), Value::Boolean(b)) => a == b,
                _ => match (lhs.as_f64(), rhs.as_f64()) {
                    (Some(a), Some(b)) => a == b,
                    _ => return Err(mismatch()),
                },
            };
            Ok(if *op == CmpOp::Eq { eq } else { !eq })
        }
        CmpOp::Gt | CmpOp::Lt | CmpOp::Ge | CmpOp::Le => {
            let (a, b) = match (lhs.as_f64(), rhs.as_f64()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(mismatch()),
            };
            Ok(match op {
                CmpOp::Gt => a > b,
                CmpOp::Lt => a < b,
                CmpOp::Ge => a >= b,
                CmpOp::Le => a <= b,
                _ => unreachable!(),
            })
        }
    }
}

fn arith(op: BinOp, lhs: &Value, rhs: &Value) -> Result<Value, EvalError> {
    let mismatch = || EvalError::TypeMismatch {
        op: op.symbol().to_string(),
        lhs: lhs.type_name(),
        rhs: rhs.type_name(),
    };
    match (lhs, rhs) {
        (Value::Integer(a), Value::Integer(b)) => {
            let r = match op {
                BinOp::Add => a.checked_add(*b),
                BinOp::Sub => a.checked_sub(*b),
                BinOp::Mul => a.checked_mul(*b),
                BinOp::Div => {
                    if *b == 0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a.checked_div(*b)
                }
            };
            r.map(Value::Integer).ok_or(EvalError::IntegerOverflow)
        }
        _ => {
            let (a, b) = match (lhs.as_f64(), rhs.as_f64()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(mismatch()),
            };
            if op == BinOp::Div && b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            let r = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            };
            if r.is_nan() {
                return Err(EvalError::InvalidNumeric);
            }
            Ok(Value::real(r))
        }
    }
}

pub fn eval_expr(expr: &Expr, env: &Env) -> Result<Value, EvalError> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(name) => lookup(env, name).cloned(),
        Expr::Binary { op, lhs, rhs } => {
            let l = eval_expr(lhs, env)?;
            let r = eval_expr(rhs, env)?;
            arith(*op, &l, &r)
        }
    }
}

/// Apply the snippet's assignments left to right, returning the new
/// environment. Reads must be bound; writes may introduce new variables.
pub fn exec_snippet(snippet: &CodeSnippet, env: &Env) -> Result<Env, EvalError> {
    let mut out = env.clone();
    for assign in &snippet.0 {
        let value = eval_expr(&assign.expr, &out)?;
        out.set(assign.var.clone(), value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at {pos}")]
pub struct ExprParseError {
    pub message: String,
    pub pos: Pos,
}

pub(crate) struct P<'t> {
    toks: &'t [Token],
    at: usize,
}

impl<'t> P<'t> {
    pub(crate) fn new(toks: &'t [Token]) -> P<'t> {
        P { toks, at: 0 }
    }

    pub(crate) fn trailing_error(&self) -> Option<ExprParseError> {
        self.peek().map(|tok| ExprParseError {
            message: format!("unexpected trailing {tok}"),
            pos: self.pos(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.at)
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

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprParseError> {
        Err(ExprParseError {
            message: message.into(),
            pos: self.pos(),
        })
    }
}

fn parse_literal_tok(p: &mut P) -> Result<Option<Value>, ExprParseError> {
    match p.peek() {
        Some(Tok::Int(v)) => {
            let v = *v;
            p.bump();
            Ok(Some(Value::Integer(v)))
        }
        Some(Tok::Real(v)) => {
            let v = *v;
            p.bump();
            Ok(Some(Value::real(v)))
        }
        Some(Tok::Str(s)) => {
            let s = s.clone();
            p.bump();
            Ok(Some(Value::Str(s)))
        }
        Some(Tok::Ident(w)) if w == "true" => {
            p.bump();
            Ok(Some(Value::Boolean(true)))
        }
        Some(Tok::Ident(w)) if w == "false" => {
            p.bump();
            Ok(Some(Value::Boolean(false)))
        }
        Some(Tok::Minus) => {
            // negative literals only; general unary minus is not in the grammar
            let save = p.at;
            p.bump();
            match p.peek() {
                Some(Tok::Int(v)) => {
                    let v = -*v;
                    p.bump();
                    Ok(Some(Value::Integer(v)))
                }
                Some(Tok::Real(v)) => {
                    let v = -*v;
                    p.bump();
                    Ok(Some(Value::real(v)))
                }
                _ => {
                    p.at = save;
                    Ok(None)
                }
            }
        }
        _ => Ok(None),
    }
}

fn parse_operand(p: &mut P) -> Result<Operand, ExprParseError> {
    if let Some(v) = parse_literal_tok(p)? {
        return Ok(Operand::Lit(v));
    }
    match p.peek() {
        Some(Tok::Ident(name)) => {
            let name = name.clone();
            p.bump();
            Ok(Operand::Var(name))
        }
        Some(other) => {
            let other = other.clone();
            p.err(format!("expected variable or literal, found {other}"))
        }
        None => p.err("expected variable or literal"),
    }
}

fn parse_cmp_op(p: &mut P) -> Result<CmpOp, ExprParseError> {
    let op = match p.peek() {
        Some(Tok::Gt) => CmpOp::Gt,
        Some(Tok::Lt) => CmpOp::Lt,
        Some(Tok::Ge) => CmpOp::Ge,
        Some(Tok::Le) => CmpOp::Le,
        Some(Tok::EqEq) => CmpOp::Eq,
        // the surface syntax also writes equality with a single '='
        Some(Tok::Assign) => CmpOp::Eq,
        Some(Tok::NotEq) => CmpOp::Ne,
        Some(other) => {
            let other = other.clone();
            return p.err(format!("expected comparison operator, found {other}"));
        }
        None => return p.err("expected comparison operator"),
    };
    p.bump();
    Ok(op)
}

pub(crate) fn parse_guard_tokens(p: &mut P) -> Result<Guard, ExprParseError> {
    let lhs = parse_operand(p)?;
    let op = parse_cmp_op(p)?;
    let rhs = parse_operand(p)?;
    Ok(Guard::Cmp { lhs, op, rhs })
}

fn parse_factor(p: &mut P) -> Result<Expr, ExprParseError> {
    if p.eat(&Tok::LParen) {
        let e = parse_expr_tokens(p)?;
        if !p.eat(&Tok::RParen) {
            return p.err("expected ')'");
        }
        return Ok(e);
    }
    if let Some(v) = parse_literal_tok(p)? {
        return Ok(Expr::Lit(v));
    }
    match p.peek() {
        Some(Tok::Ident(name)) => {
            let name = name.clone();
            p.bump();
            Ok(Expr::Var(name))
        }
        Some(other) => {
            let other = other.clone();
            p.err(format!("expected expression, found {other}"))
        }
        None => p.err("expected expression"),
    }
}

fn parse_term(p: &mut P) -> Result<Expr, ExprParseError> {
    let mut lhs = parse_factor(p)?;
    loop {
        let op = match p.peek() {
            Some(Tok::Star) => BinOp::Mul,
            Some(Tok::Slash) => BinOp::Div,
            _ => break,
        };
        p.bump();
        let rhs = parse_factor(p)?;
        lhs = Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        };
    }
    Ok(lhs)
}

pub(crate) fn parse_expr_tokens(p: &mut P) -> Result<Expr, ExprParseError> {
    let mut lhs = parse_term(p)?;
    loop {
        let op = match p.peek() {
            Some(Tok::Plus) => BinOp::Add,
            Some(Tok::Minus) => BinOp::Sub,
            _ => break,
        };
        p.bump();
        let rhs = parse_term(p)?;
        lhs = Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        };
    }
    Ok(lhs)
}

pub(crate) fn parse_snippet_tokens(p: &mut P) -> Result<CodeSnippet, ExprParseError> {
    let mut statements = Vec::new();
    while let Some(tok) = p.peek() {
        let var = match tok {
            Tok::Ident(name) => name.clone(),
            other => {
                let other = other.clone();
                return p.err(format!("expected assignment target, found {other}"));
            }
        };
        p.bump();
        if !p.eat(&Tok::Assign) {
            return p.err("expected '=' in assignment");
        }
        let expr = parse_expr_tokens(p)?;
        if !p.eat(&Tok::Semi) {
            return p.err("expected ';' after assignment");
        }
        statements.push(Assign { var, expr });
    }
    Ok(CodeSnippet(statements))
}

fn with_tokens<T>(
    text: &str,
    f: impl FnOnce(&mut P) -> Result<T, ExprParseError>,
) -> Result<T, ExprParseError> {
    let (toks, lex_errs) = tokenize(text);
    if let Some(e) = lex_errs.first() {
        return Err(ExprParseError {
            message: e.message.clone(),
            pos: e.pos,
        });
    }
    let mut p = P::new(&toks);
    let out = f(&mut p)?;
    if let Some(err) = p.trailing_error() {
        return Err(err);
    }
    Ok(out)
}

/// Parse a guard. Empty or whitespace-only text is the implicit `TRUE`.
pub fn parse_guard(text: &str) -> Result<Guard, ExprParseError> {
    if text.trim().is_empty() || text.trim() == "nil" {
        return Ok(Guard::True);
    }
    with_tokens(text, parse_guard_tokens)
}

/// Parse a code snippet. Empty text (or `nil`) is the empty snippet.
pub fn parse_snippet(text: &str) -> Result<CodeSnippet, ExprParseError> {
    if text.trim().is_empty() || text.trim() == "nil" {
        return Ok(CodeSnippet::nil());
    }
    with_tokens(text, parse_snippet_tokens)
}
