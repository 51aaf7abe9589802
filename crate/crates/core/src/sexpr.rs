//! Minimal prefix-expression reader used by gate-set definitions.

use std::fmt;

use thiserror::Error;

/// 1-based position inside the parsed text.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: {msg}")]
pub struct SexprError {
    pub loc: Loc,
    pub msg: String,
}

impl SexprError {
    pub fn new(loc: Loc, msg: impl Into<String>) -> Self {
        SexprError {
            loc,
            msg: msg.into(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Sexpr {
    Atom(String, Loc),
    List(Vec<Sexpr>, Loc),
}

impl Sexpr {
    pub fn loc(&self) -> Loc {
        match self {
            Sexpr::Atom(_, l) | Sexpr::List(_, l) => *l,
        }
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexpr::Atom(a, _) => write!(f, "{a}"),
            Sexpr::List(items, _) => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Reader<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Reader<'a> {
    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.bump();
        }
    }

    fn read(&mut self) -> Result<Sexpr, SexprError> {
        self.skip_ws();
        let loc = self.loc();
        match self.chars.get(self.pos) {
            None => Err(SexprError::new(loc, "unexpected end of expression")),
            Some(')') => Err(SexprError::new(loc, "unexpected ')'")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.get(self.pos) {
                        None => return Err(SexprError::new(loc, "unclosed '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexpr::List(items, loc));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = self.chars.get(self.pos) {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Ok(Sexpr::Atom(s, loc))
            }
        }
    }
}

/// Parses exactly one expression from `text`.
pub fn parse_sexpr(text: &str) -> Result<Sexpr, SexprError> {
    let mut r = Reader {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        _src: text,
    };
    let e = r.read()?;
    r.skip_ws();
    if r.pos < r.chars.len() {
        return Err(SexprError::new(r.loc(), "trailing input after expression"));
    }
    Ok(e)
}
