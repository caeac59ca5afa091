//! Shared lexer and statement reader for fact files and logic-program files.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Lower(String),
    Upper(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    Neck,
    Hash,
    Slash,
    Plus,
    Minus,
    Question,
    Not,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lower(s) | Tok::Upper(s) | Tok::Int(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Neck => f.write_str("`:-`"),
            Tok::Hash => f.write_str("`#`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Question => f.write_str("`?`"),
            Tok::Not => f.write_str("`\\+`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            pos,
            message: message.into(),
        }
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: line_idx + 1,
                column: i + 1,
            };
            if c == '%' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let ident = |i: &mut usize| {
                let start = *i;
                while *i < chars.len() && (chars[*i].is_ascii_alphanumeric() || chars[*i] == '_') {
                    *i += 1;
                }
                chars[start..*i].iter().collect::<String>()
            };
            let tok = match c {
                'a'..='z' => Tok::Lower(ident(&mut i)),
                'A'..='Z' | '_' => Tok::Upper(ident(&mut i)),
                '0'..='9' => Tok::Int(ident(&mut i)),
                _ => {
                    i += 1;
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        '.' => Tok::Dot,
                        '#' => Tok::Hash,
                        '/' => Tok::Slash,
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '?' => Tok::Question,
                        ':' if chars.get(i) == Some(&'-') => {
                            i += 1;
                            Tok::Neck
                        }
                        '\\' if chars.get(i) == Some(&'+') => {
                            i += 1;
                            Tok::Not
                        }
                        other => {
                            return Err(SyntaxError::new(
                                pos,
                                format!("unexpected character `{other}`"),
                            ))
                        }
                    }
                }
            };
            if let Tok::Int(s) = &tok {
                if !s.chars().all(|c| c.is_ascii_digit()) {
                    return Err(SyntaxError::new(pos, format!("malformed number `{s}`")));
                }
            }
            out.push(Token { tok, pos });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum RawTerm {
    Const(String),
    Var(String),
}

#[derive(Debug, Clone)]
pub(crate) struct RawAtom {
    pub name: String,
    pub args: Vec<(RawTerm, Pos)>,
    pub negated: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub(crate) enum Statement {
    /// `#name ...` up to the end of its line; a trailing `.` is dropped.
    Directive {
        name: String,
        args: Vec<Token>,
        pos: Pos,
    },
    Clause {
        head: RawAtom,
        body: Vec<RawAtom>,
        disjunctive: bool,
    },
}

pub(crate) struct Reader {
    tokens: Vec<Token>,
    at: usize,
}

impl Reader {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Self {
            tokens: tokenize(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn end_pos(&self) -> Pos {
        self.tokens
            .last()
            .map(|t| Pos {
                line: t.pos.line,
                column: t.pos.column + 1,
            })
            .unwrap_or(Pos { line: 1, column: 1 })
    }

    fn next(&mut self) -> Result<Token, SyntaxError> {
        let t = self
            .tokens
            .get(self.at)
            .cloned()
            .ok_or_else(|| SyntaxError::new(self.end_pos(), "unexpected end of input"))?;
        self.at += 1;
        Ok(t)
    }

    pub fn next_statement(&mut self) -> Result<Option<Statement>, SyntaxError> {
        let Some(first) = self.peek().cloned() else {
            return Ok(None);
        };
        if first.tok == Tok::Hash {
            self.at += 1;
            let name_tok = self.next()?;
            let name = match name_tok.tok {
                Tok::Lower(n) if name_tok.pos.line == first.pos.line => n,
                other => {
                    return Err(SyntaxError::new(
                        name_tok.pos,
                        format!("expected directive name after `#`, found {other}"),
                    ))
                }
            };
            let mut args = Vec::new();
            while let Some(t) = self.peek() {
                if t.pos.line != first.pos.line {
                    break;
                }
                args.push(t.clone());
                self.at += 1;
            }
            if matches!(args.last(), Some(Token { tok: Tok::Dot, .. })) {
                args.pop();
            }
            return Ok(Some(Statement::Directive {
                name,
                args,
                pos: first.pos,
            }));
        }
        let head = self.atom(false)?;
        let t = self.next()?;
        match t.tok {
            Tok::Dot => Ok(Some(Statement::Clause {
                head,
                body: Vec::new(),
                disjunctive: false,
            })),
            Tok::Neck => {
                let mut body = vec![self.literal()?];
                let mut connective: Option<Tok> = None;
                loop {
                    let t = self.next()?;
                    match &t.tok {
                        Tok::Dot => break,
                        Tok::Comma | Tok::Semi => {
                            match &connective {
                                None => connective = Some(t.tok.clone()),
                                Some(c) if c != &t.tok => {
                                    return Err(SyntaxError::new(
                                        t.pos,
                                        "bodies cannot mix `,` and `;`",
                                    ))
                                }
                                Some(_) => {}
                            }
                            body.push(self.literal()?);
                        }
                        other => {
                            return Err(SyntaxError::new(
                                t.pos,
                                format!("expected `,`, `;` or `.`, found {other}"),
                            ))
                        }
                    }
                }
                Ok(Some(Statement::Clause {
                    head,
                    body,
                    disjunctive: connective == Some(Tok::Semi),
                }))
            }
            other => Err(SyntaxError::new(
                t.pos,
                format!("expected `.` or `:-`, found {other}"),
            )),
        }
    }

    fn literal(&mut self) -> Result<RawAtom, SyntaxError> {
        if matches!(self.peek(), Some(Token { tok: Tok::Not, .. })) {
            self.at += 1;
            self.atom(true)
        } else {
            self.atom(false)
        }
    }

    fn atom(&mut self, negated: bool) -> Result<RawAtom, SyntaxError> {
        let t = self.next()?;
        let name = match t.tok {
            Tok::Lower(n) => n,
            other => {
                return Err(SyntaxError::new(
                    t.pos,
                    format!("expected a predicate name, found {other}"),
                ))
            }
        };
        let mut args = Vec::new();
        if matches!(self.peek(), Some(Token { tok: Tok::LParen, .. })) {
            self.at += 1;
            loop {
                let a = self.next()?;
                let term = match a.tok {
                    Tok::Lower(s) | Tok::Int(s) => RawTerm::Const(s),
                    Tok::Upper(s) => RawTerm::Var(s),
                    other => {
                        return Err(SyntaxError::new(
                            a.pos,
                            format!("expected an argument, found {other}"),
                        ))
                    }
                };
                args.push((term, a.pos));
                let sep = self.next()?;
                match sep.tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(SyntaxError::new(
                            sep.pos,
                            format!("expected `,` or `)`, found {other}"),
                        ))
                    }
                }
            }
        }
        Ok(RawAtom {
            name,
            args,
            negated,
            pos: t.pos,
        })
    }
}

/// Parses `name/arity` from directive arguments.
pub(crate) fn parse_signature(args: &[Token], pos: Pos) -> Result<(String, usize, Pos), SyntaxError> {
    match args {
        [Token {
            tok: Tok::Lower(name),
            pos: npos,
        }, Token { tok: Tok::Slash, .. }, Token {
            tok: Tok::Int(n),
            pos: apos,
        }] => {
            let arity = n
                .parse::<usize>()
                .map_err(|_| SyntaxError::new(*apos, format!("arity `{n}` out of range")))?;
            Ok((name.clone(), arity, *npos))
        }
        [] => Err(SyntaxError::new(pos, "expected `name/arity`")),
        [first, ..] => Err(SyntaxError::new(
            first.pos,
            format!("expected `name/arity`, found {}", first.tok),
        )),
    }
}

/// Reads the tail of a directive with [`Reader`] semantics, e.g. the atom in `#mode p(+,-)`.
pub(crate) fn expect_tok(args: &[Token], idx: usize, want: &Tok, pos: Pos) -> Result<(), SyntaxError> {
    match args.get(idx) {
        Some(t) if &t.tok == want => Ok(()),
        Some(t) => Err(SyntaxError::new(
            t.pos,
            format!("expected {want}, found {}", t.tok),
        )),
        None => Err(SyntaxError::new(pos, format!("expected {want}"))),
    }
}

pub(crate) fn is_lower_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn is_upper_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('A'..='Z'))
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
