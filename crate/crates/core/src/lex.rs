//! Shared lexer for `.sbc` model files, guard/snippet expressions and
//! `.scn` scenario files.
//!
//! The lexer is keyword-free: every word comes out as [`Tok::Ident`] and the
//! parsers match keyword text in context. This keeps words like `in`, `out`
//! or `step` usable as snippet variables.

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    /// `;`
    Semi,
    /// `:`
    Colon,
    /// `,`
    Comma,
    /// `(`
    LParen,
    /// `)`
    RParen,
    /// `{`
    LBrace,
    /// `}`
    RBrace,
    /// `[`
    LBracket,
    /// `]`
    RBracket,
    /// `-[` opening a transition label
    DashLBracket,
    /// `]->` closing a transition label
    RBracketArrow,
    /// `->`
    Arrow,
    /// `=`
    Assign,
    /// `==`
    EqEq,
    /// `!=`
    NotEq,
    /// `<`
    Lt,
    /// `>`
    Gt,
    /// `<=`
    Le,
    /// `>=`
    Ge,
    /// `+`
    Plus,
    /// `-`
    Minus,
    /// `*`
    Star,
    /// `/`
    Slash,
    /// `.`
    Dot,
    /// `?`
    Question,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(v) => write!(f, "'{v}'"),
            Tok::Real(v) => write!(f, "'{v}'"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Semi => write!(f, "';'"),
            Tok::Colon => write!(f, "':'"),
            Tok::Comma => write!(f, "','"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBrace => write!(f, "'{{'"),
            Tok::RBrace => write!(f, "'}}'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::DashLBracket => write!(f, "'-['"),
            Tok::RBracketArrow => write!(f, "']->'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Assign => write!(f, "'='"),
            Tok::EqEq => write!(f, "'=='"),
            Tok::NotEq => write!(f, "'!='"),
            Tok::Lt => write!(f, "'<'"),
            Tok::Gt => write!(f, "'>'"),
            Tok::Le => write!(f, "'<='"),
            Tok::Ge => write!(f, "'>='"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Question => write!(f, "'?'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub message: String,
    pub pos: Pos,
}

struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            at: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.at + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.at += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn word(&mut self) -> String {
        let start = self.at;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.src[start..self.at]).into_owned()
    }

    fn number(&mut self, pos: Pos) -> Result<Token, LexError> {
        let start = self.at;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let mut is_real = false;
        if self.peek() == Some(b'.') && matches!(self.peek2(), Some(c) if c.is_ascii_digit()) {
            is_real = true;
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.at]).unwrap();
        let tok = if is_real {
            Tok::Real(text.parse().map_err(|_| LexError {
                message: format!("invalid real literal '{text}'"),
                pos,
            })?)
        } else {
            Tok::Int(text.parse().map_err(|_| LexError {
                message: format!("integer literal '{text}' out of range"),
                pos,
            })?)
        };
        Ok(Token { tok, pos })
    }

    fn string(&mut self, pos: Pos) -> Result<Token, LexError> {
        self.bump(); // opening quote
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some(b'\n') => {
                    return Err(LexError {
                        message: "unterminated string literal".into(),
                        pos,
                    })
                }
                Some(b'"') => break,
                Some(b'\\') => match self.bump() {
                    Some(b'"') => out.push('"'),
                    Some(b'\\') => out.push('\\'),
                    Some(b'n') => out.push('\n'),
                    Some(b't') => out.push('\t'),
                    other => {
                        return Err(LexError {
                            message: format!(
                                "unknown escape '\\{}'",
                                other.map(|c| c as char).unwrap_or(' ')
                            ),
                            pos,
                        })
                    }
                },
                Some(c) => out.push(c as char),
            }
        }
        Ok(Token {
            tok: Tok::Str(out),
            pos,
        })
    }

    fn next_token(&mut self) -> Option<Result<Token, LexError>> {
        self.skip_trivia();
        let pos = self.pos();
        let c = self.peek()?;
        let simple = |lexer: &mut Self, tok| {
            lexer.bump();
            Some(Ok(Token { tok, pos }))
        };
        match c {
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let w = self.word();
                Some(Ok(Token {
                    tok: Tok::Ident(w),
                    pos,
                }))
            }
            b'0'..=b'9' => Some(self.number(pos)),
            b'"' => Some(self.string(pos)),
            b';' => simple(self, Tok::Semi),
            b':' => simple(self, Tok::Colon),
            b',' => simple(self, Tok::Comma),
            b'(' => simple(self, Tok::LParen),
            b')' => simple(self, Tok::RParen),
            b'{' => simple(self, Tok::LBrace),
            b'}' => simple(self, Tok::RBrace),
            b'[' => simple(self, Tok::LBracket),
            b'+' => simple(self, Tok::Plus),
            b'*' => simple(self, Tok::Star),
            b'/' => simple(self, Tok::Slash),
            b'.' => simple(self, Tok::Dot),
            b'?' => simple(self, Tok::Question),
            b']' => {
                // ']->' closes a transition label, bare ']' a prefix literal
                if self.src.get(self.at + 1) == Some(&b'-') && self.src.get(self.at + 2) == Some(&b'>')
                {
                    self.bump();
                    self.bump();
                    self.bump();
                    Some(Ok(Token {
                        tok: Tok::RBracketArrow,
                        pos,
                    }))
                } else {
                    simple(self, Tok::RBracket)
                }
            }
            b'-' => {
                self.bump();
                match self.peek() {
                    Some(b'[') => {
                        self.bump();
                        Some(Ok(Token {
                            tok: Tok::DashLBracket,
                            pos,
                        }))
                    }
                    Some(b'>') => {
                        self.bump();
                        Some(Ok(Token {
                            tok: Tok::Arrow,
                            pos,
                        }))
                    }
                    _ => Some(Ok(Token {
                        tok: Tok::Minus,
                        pos,
                    })),
                }
            }
            b'=' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Some(Ok(Token { tok: Tok::EqEq, pos }))
                } else {
                    Some(Ok(Token {
                        tok: Tok::Assign,
                        pos,
                    }))
                }
            }
            b'!' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Some(Ok(Token {
                        tok: Tok::NotEq,
                        pos,
                    }))
                } else {
                    Some(Err(LexError {
                        message: "unexpected character '!'".into(),
                        pos,
                    }))
                }
            }
            b'<' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Some(Ok(Token { tok: Tok::Le, pos }))
                } else {
                    Some(Ok(Token { tok: Tok::Lt, pos }))
                }
            }
            b'>' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Some(Ok(Token { tok: Tok::Ge, pos }))
                } else {
                    Some(Ok(Token { tok: Tok::Gt, pos }))
                }
            }
            other => {
                self.bump();
                Some(Err(LexError {
                    message: format!("unexpected character '{}'", other as char),
                    pos,
                }))
            }
        }
    }
}

/// Tokenize `src`. Lex errors do not abort the scan; the offending character
/// is skipped so parsers can keep recovering.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<LexError>) {
    let normalized = src.replace("\r\n", "\n");
    let mut lexer = Lexer::new(&normalized);
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    while let Some(item) = lexer.next_token() {
        match item {
            Ok(t) => toks.push(t),
            Err(e) => errs.push(e),
        }
    }
    (toks, errs)
}
