//! Tokeniser shared by the program and assertion parsers.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Int(i64),
    Ident(String),
    LBrack,
    RBrack,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    Assign,
    Semi,
    Comma,
    Par,
    Caret,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Bang,
    Tilde,
    NotTilde,
    Underscore,
    Dot,
    DotDot,
    Implies,
    At,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Int(v) => return write!(f, "`{v}`"),
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::LBrack => "`[`",
            Tok::RBrack => "`]`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Colon => "`:`",
            Tok::Assign => "`:=`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Par => "`|||`",
            Tok::Caret => "`^`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::Eq => "`=`",
            Tok::Ne => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::And => "`&&`",
            Tok::Or => "`||`",
            Tok::Bang => "`!`",
            Tok::Tilde => "`~`",
            Tok::NotTilde => "`!~`",
            Tok::Underscore => "`_`",
            Tok::Dot => "`.`",
            Tok::DotDot => "`..`",
            Tok::Implies => "`=>`",
            Tok::At => "`@`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if next == Some('/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<i64>().map_err(|_| LexError {
                    line: l0,
                    col: c0,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Int(v),
                    line: l0,
                    col: c0,
                });
            }
            c if c.is_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                let text: String = chars[start..i].iter().collect();
                out.push(Spanned {
                    tok: Tok::Ident(text),
                    line: l0,
                    col: c0,
                });
            }
            '|' if next == Some('|') && chars.get(i + 2) == Some(&'|') => push(Tok::Par, 3, &mut i, &mut col),
            '|' if next == Some('|') => push(Tok::Or, 2, &mut i, &mut col),
            '|' => push(Tok::Or, 1, &mut i, &mut col),
            '&' if next == Some('&') => push(Tok::And, 2, &mut i, &mut col),
            '&' => push(Tok::And, 1, &mut i, &mut col),
            ':' if next == Some('=') => push(Tok::Assign, 2, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '=' if next == Some('=') => push(Tok::Eq, 2, &mut i, &mut col),
            '=' if next == Some('>') => push(Tok::Implies, 2, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '!' if next == Some('=') => push(Tok::Ne, 2, &mut i, &mut col),
            '!' if next == Some('~') => push(Tok::NotTilde, 2, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            '<' if next == Some('=') => push(Tok::Le, 2, &mut i, &mut col),
            '<' => push(Tok::Lt, 1, &mut i, &mut col),
            '>' if next == Some('=') => push(Tok::Ge, 2, &mut i, &mut col),
            '>' => push(Tok::Gt, 1, &mut i, &mut col),
            '.' if next == Some('.') => push(Tok::DotDot, 2, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '[' => push(Tok::LBrack, 1, &mut i, &mut col),
            ']' => push(Tok::RBrack, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '^' => push(Tok::Caret, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            '/' => push(Tok::Slash, 1, &mut i, &mut col),
            '%' => push(Tok::Percent, 1, &mut i, &mut col),
            '~' | '≈' => push(Tok::Tilde, 1, &mut i, &mut col),
            '≉' => push(Tok::NotTilde, 1, &mut i, &mut col),
            '_' => push(Tok::Underscore, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            '∧' => push(Tok::And, 1, &mut i, &mut col),
            '∨' => push(Tok::Or, 1, &mut i, &mut col),
            '¬' => push(Tok::Bang, 1, &mut i, &mut col),
            '⇒' => push(Tok::Implies, 1, &mut i, &mut col),
            '≠' => push(Tok::Ne, 1, &mut i, &mut col),
            '≤' => push(Tok::Le, 1, &mut i, &mut col),
            '≥' => push(Tok::Ge, 1, &mut i, &mut col),
            '∀' => push(Tok::Ident("forall".into()), 1, &mut i, &mut col),
            '∈' => push(Tok::Ident("in".into()), 1, &mut i, &mut col),
            other => {
                return Err(LexError {
                    line: l0,
                    col: c0,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Cursor over a token vector.
#[derive(Clone)]
pub struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Spanned>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }
}
