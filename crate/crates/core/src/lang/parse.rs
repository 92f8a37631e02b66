//! Recursive-descent parser for programs.
//!
//! ```text
//! program := [ "init:" var "=" int { "," var "=" int } ] thread { "|||" thread }
//! thread  := stmt { ";" stmt }
//! stmt    := label ":" atomic | "if" expr "then" "{" thread "}" [ "else" "{" thread "}" ]
//!          | "while" expr "do" "{" thread "}" | "skip"
//! atomic  := "[" var "]" ":=" ["^R"] expr | reg ":=" ["^A"] "[" var "]"
//!          | reg ":=" expr | "upd^RA" "(" "[" var "]" "," expr "," expr ")" | "skip"
//! ```

use super::{AtomicCmd, AtomicKind, BinOp, Command, Expr, Label, Program, Reg, UnOp, Var};
use crate::lex::{tokenize, Cursor, Tok};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: duplicate label `{label}`")]
    DuplicateLabel { label: String, line: usize, col: usize },
    #[error("{line}:{col}: guard mentions shared variable `{var}`")]
    SharedInGuard { var: String, line: usize, col: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::DuplicateLabel { line, col, .. }
            | ParseError::SharedInGuard { line, col, .. } => (*line, *col),
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = tokenize(text).map_err(|e| ParseError::Syntax {
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    let mut p = Parser {
        cur: Cursor::new(toks),
        seen: BTreeSet::new(),
    };
    p.program()
}

struct Parser {
    cur: Cursor,
    seen: BTreeSet<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum ExprCtx {
    Guard,
    Value,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.cur.here();
        Err(ParseError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if self.cur.eat(&t) {
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.cur.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.cur.peek().clone() {
            Tok::Ident(s) => {
                self.cur.bump();
                Ok(s)
            }
            t => self.err(format!("expected {what}, found {t}")),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = self.cur.eat(&Tok::Minus);
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                Ok(if neg { -v } else { v })
            }
            t => self.err(format!("expected integer, found {t}")),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut init = BTreeMap::new();
        if self.cur.is_keyword("init")
            && self.cur.peek_at(1) == &Tok::Colon
            && matches!(self.cur.peek_at(2), Tok::Ident(_))
            && self.cur.peek_at(3) == &Tok::Eq
        {
            self.cur.bump();
            self.cur.bump();
            loop {
                let name = self.ident("variable name")?;
                self.expect(Tok::Eq)?;
                let v = self.int()?;
                init.insert(name, v);
                if !self.cur.eat(&Tok::Comma) {
                    break;
                }
            }
            self.cur.eat(&Tok::Semi);
        }
        let mut threads = BTreeMap::new();
        let mut tid = 1;
        while self.cur.peek() != &Tok::Eof {
            let body = self.thread()?;
            threads.insert(tid, body);
            tid += 1;
            if !self.cur.eat(&Tok::Par) {
                break;
            }
        }
        if self.cur.peek() != &Tok::Eof {
            return self.err(format!("unexpected {}", self.cur.peek()));
        }
        Ok(Program { init, threads })
    }

    fn thread(&mut self) -> Result<Command, ParseError> {
        let mut stmts = vec![self.stmt()?];
        loop {
            // `;` is optional after a closing brace.
            let braced = matches!(stmts.last(), Some(Command::If { .. } | Command::While { .. }));
            if !self.cur.eat(&Tok::Semi) && !braced {
                break;
            }
            if matches!(self.cur.peek(), Tok::Par | Tok::RBrace | Tok::Eof) {
                break;
            }
            stmts.push(self.stmt()?);
        }
        Ok(Command::seq(stmts))
    }

    fn block(&mut self) -> Result<Command, ParseError> {
        self.expect(Tok::LBrace)?;
        if self.cur.eat(&Tok::RBrace) {
            return Ok(Command::Skip);
        }
        let c = self.thread()?;
        self.expect(Tok::RBrace)?;
        Ok(c)
    }

    fn stmt(&mut self) -> Result<Command, ParseError> {
        if self.cur.eat_keyword("if") {
            let guard = self.expr(ExprCtx::Guard)?;
            if !self.cur.eat_keyword("then") {
                return self.err("expected `then`");
            }
            let then = self.block()?;
            let els = if self.cur.eat_keyword("else") {
                self.block()?
            } else {
                Command::Skip
            };
            return Ok(Command::If {
                guard,
                then: Box::new(then),
                els: Box::new(els),
            });
        }
        if self.cur.eat_keyword("while") {
            let guard = self.expr(ExprCtx::Guard)?;
            if !self.cur.eat_keyword("do") {
                return self.err("expected `do`");
            }
            let body = self.block()?;
            return Ok(Command::While {
                guard,
                body: Box::new(body),
            });
        }
        if self.cur.is_keyword("skip") && self.cur.peek_at(1) != &Tok::Colon {
            self.cur.bump();
            return Ok(Command::Skip);
        }
        let (line, col) = self.cur.here();
        let mut label = match self.cur.peek().clone() {
            Tok::Int(v) => v.to_string(),
            Tok::Ident(s) => s,
            t => return self.err(format!("expected a labelled statement, found {t}")),
        };
        self.cur.bump();
        // Unrolled labels such as `5.1.2`.
        while self.cur.peek() == &Tok::Dot {
            if let Tok::Int(k) = self.cur.peek_at(1).clone() {
                self.cur.bump();
                self.cur.bump();
                label = format!("{label}.{k}");
            } else {
                break;
            }
        }
        if self.cur.peek() != &Tok::Colon {
            return self.err(format!("expected `:` after label `{label}`"));
        }
        self.cur.bump();
        if !self.seen.insert(label.clone()) {
            return Err(ParseError::DuplicateLabel { label, line, col });
        }
        let kind = self.atomic()?;
        Ok(Command::Atomic(AtomicCmd {
            label: Label(label),
            kind,
        }))
    }

    fn mode_suffix(&mut self, expected: &str) -> Result<bool, ParseError> {
        if self.cur.eat(&Tok::Caret) {
            let m = self.ident("access mode")?;
            if m != expected {
                return self.err(format!("expected mode `^{expected}`, found `^{m}`"));
            }
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn bracket_var(&mut self) -> Result<Var, ParseError> {
        self.expect(Tok::LBrack)?;
        let v = self.ident("shared variable")?;
        self.expect(Tok::RBrack)?;
        Ok(Var(v))
    }

    fn atomic(&mut self) -> Result<AtomicKind, ParseError> {
        if self.cur.peek() == &Tok::LBrack {
            let var = self.bracket_var()?;
            self.expect(Tok::Assign)?;
            let release = self.mode_suffix("R")?;
            let expr = self.expr(ExprCtx::Value)?;
            return Ok(AtomicKind::Store { var, expr, release });
        }
        if self.cur.is_keyword("skip") {
            self.cur.bump();
            return Ok(AtomicKind::Skip);
        }
        if self.cur.is_keyword("upd") && self.cur.peek_at(1) == &Tok::Caret {
            self.cur.bump();
            self.cur.bump();
            let m = self.ident("access mode")?;
            if m != "RA" {
                return self.err(format!("updates are `upd^RA`, found `upd^{m}`"));
            }
            self.expect(Tok::LParen)?;
            let var = self.bracket_var()?;
            self.expect(Tok::Comma)?;
            let expected = self.expr(ExprCtx::Value)?;
            self.expect(Tok::Comma)?;
            let new = self.expr(ExprCtx::Value)?;
            self.expect(Tok::RParen)?;
            return Ok(AtomicKind::Update { var, expected, new });
        }
        let reg = Reg(self.ident("register, `[`, `upd` or `skip`")?);
        self.expect(Tok::Assign)?;
        let acquire = self.mode_suffix("A")?;
        if acquire || self.cur.peek() == &Tok::LBrack {
            let var = self.bracket_var()?;
            return Ok(AtomicKind::Load { reg, var, acquire });
        }
        let expr = self.expr(ExprCtx::Value)?;
        Ok(AtomicKind::Assign { reg, expr })
    }

    fn expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        self.or_expr(ctx)
    }

    fn or_expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut e = self.and_expr(ctx)?;
        while self.cur.eat(&Tok::Or) {
            let r = self.and_expr(ctx)?;
            e = Expr::Binary(BinOp::Or, Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn and_expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut e = self.cmp_expr(ctx)?;
        while self.cur.eat(&Tok::And) {
            let r = self.cmp_expr(ctx)?;
            e = Expr::Binary(BinOp::And, Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn cmp_expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let e = self.add_expr(ctx)?;
        let op = match self.cur.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(e),
        };
        self.cur.bump();
        let r = self.add_expr(ctx)?;
        Ok(Expr::Binary(op, Box::new(e), Box::new(r)))
    }

    fn add_expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut e = self.mul_expr(ctx)?;
        loop {
            let op = match self.cur.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(e),
            };
            self.cur.bump();
            let r = self.mul_expr(ctx)?;
            e = Expr::Binary(op, Box::new(e), Box::new(r));
        }
    }

    fn mul_expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut e = self.unary(ctx)?;
        loop {
            let op = match self.cur.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(e),
            };
            self.cur.bump();
            let r = self.unary(ctx)?;
            e = Expr::Binary(op, Box::new(e), Box::new(r));
        }
    }

    fn unary(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary(ctx)?)));
        }
        if self.cur.eat(&Tok::Minus) {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary(ctx)?)));
        }
        self.primary(ctx)
    }

    fn primary(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let (line, col) = self.cur.here();
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(s) if s == "true" => {
                self.cur.bump();
                Ok(Expr::Int(1))
            }
            Tok::Ident(s) if s == "false" => {
                self.cur.bump();
                Ok(Expr::Int(0))
            }
            Tok::Ident(s) => {
                self.cur.bump();
                Ok(Expr::Reg(Reg(s)))
            }
            Tok::LParen => {
                self.cur.bump();
                let e = self.expr(ctx)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBrack => {
                self.cur.bump();
                let var = match self.cur.peek() {
                    Tok::Ident(s) => s.clone(),
                    _ => String::from("?"),
                };
                if ctx == ExprCtx::Guard {
                    Err(ParseError::SharedInGuard { var, line, col })
                } else {
                    Err(ParseError::Syntax {
                        line,
                        col,
                        message: format!("shared variable `{var}` may only be accessed by a load, store or update"),
                    })
                }
            }
            t => self.err(format!("expected expression, found {t}")),
        }
    }
}
