//! View-based assertions over configurations.
//!
//! Surface syntax:
//!
//! ```text
//! A ::= true | false | T cmp T | T in S | [x = T]_Ts | [x ~ T]_Ts | ![x ~ T]_Ts
//!     | [x !~ T]_Ts | !A | A && A | A || A | A => A | forall i in S. A | (A)
//! S ::= {T, ..} | T..T | domain(x)
//! T ::= integer | register | bound | maxv(x) | minv(x) | -T | T + T | T - T | T * T | (T)
//! Ts ::= t | {t, ..}
//! ```
//!
//! A subscript with several threads is the conjunction of the view over each
//! of them. `![x ~ e]_T` and `[x !~ e]_T` both mean that no thread in `T` can
//! observe the value.

use crate::events::ValueDomain;
use crate::executor::Configuration;
use crate::lang::{Program, Reg, RegisterFile, ThreadId, Value, Var};
use crate::lex::{tokenize, Cursor, Tok};
use crate::memory::{Graph, Tag};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssertionError {
    #[error("{line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("unknown thread {0}")]
    UnknownThread(ThreadId),
    #[error("unknown shared variable `{0}`")]
    UnknownVariable(String),
    #[error("register `{0}` is not used by any thread")]
    UnownedRegister(String),
    #[error("register `{0}` is used by threads {1:?}")]
    AmbiguousRegister(String, Vec<ThreadId>),
    #[error("{0}")]
    Eval(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Int(Value),
    Reg(Reg),
    Bound(String),
    MaxV(Var),
    MinV(Var),
    Neg(Box<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetExpr {
    List(Vec<Term>),
    Range(Term, Term),
    Domain(Var),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewKind {
    Sync,
    Possible,
    NotPossible,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assertion {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    In(Term, SetExpr),
    View {
        kind: ViewKind,
        var: Var,
        value: Term,
        threads: Vec<ThreadId>,
    },
    Not(Box<Assertion>),
    And(Box<Assertion>, Box<Assertion>),
    Or(Box<Assertion>, Box<Assertion>),
    Implies(Box<Assertion>, Box<Assertion>),
    Forall {
        var: String,
        set: SetExpr,
        body: Box<Assertion>,
    },
}

impl Assertion {
    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        Assertion::And(Box::new(a), Box::new(b))
    }

    pub fn negate(a: Assertion) -> Assertion {
        Assertion::Not(Box::new(a))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) if *v < 0 => write!(f, "({v})"),
            Term::Int(v) => write!(f, "{v}"),
            Term::Reg(r) => write!(f, "{r}"),
            Term::Bound(b) => write!(f, "{b}"),
            Term::MaxV(x) => write!(f, "maxv({x})"),
            Term::MinV(x) => write!(f, "minv({x})"),
            Term::Neg(t) => write!(f, "-{t}"),
            Term::Arith(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                };
                write!(f, "({a} {s} {b})")
            }
        }
    }
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::List(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            SetExpr::Range(a, b) => write!(f, "{a}..{b}"),
            SetExpr::Domain(x) => write!(f, "domain({x})"),
        }
    }
}

fn subscript(ts: &[ThreadId]) -> String {
    match ts {
        [t] => t.to_string(),
        _ => format!("{{{}}}", ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")),
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::True => write!(f, "true"),
            Assertion::False => write!(f, "false"),
            Assertion::Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "{a} {s} {b}")
            }
            Assertion::In(t, s) => write!(f, "{t} in {s}"),
            Assertion::View {
                kind,
                var,
                value,
                threads,
            } => {
                let op = match kind {
                    ViewKind::Sync => "=",
                    ViewKind::Possible => "~",
                    ViewKind::NotPossible => "!~",
                };
                write!(f, "[{var} {op} {value}]_{}", subscript(threads))
            }
            Assertion::Not(a) => write!(f, "!({a})"),
            Assertion::And(a, b) => write!(f, "({a} && {b})"),
            Assertion::Or(a, b) => write!(f, "({a} || {b})"),
            Assertion::Implies(a, b) => write!(f, "({a} => {b})"),
            Assertion::Forall { var, set, body } => write!(f, "(forall {var} in {set}. {body})"),
        }
    }
}

pub fn parse_assertion(text: &str) -> Result<Assertion, AssertionError> {
    let toks = tokenize(text).map_err(|e| AssertionError::Parse {
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    let mut p = Parser {
        cur: Cursor::new(toks),
        bound: Vec::new(),
    };
    let a = p.implies()?;
    if *p.cur.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.cur.peek())));
    }
    Ok(a)
}

struct Parser {
    cur: Cursor,
    bound: Vec<String>,
}

impl Parser {
    fn error(&self, message: String) -> AssertionError {
        let (line, col) = self.cur.here();
        AssertionError::Parse { line, col, message }
    }

    fn expect(&mut self, t: Tok) -> Result<(), AssertionError> {
        if self.cur.eat(&t) {
            Ok(())
        } else {
            Err(self.error(format!("expected {t}, found {}", self.cur.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, AssertionError> {
        match self.cur.peek().clone() {
            Tok::Ident(s) => {
                self.cur.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected a name, found {other}"))),
        }
    }

    fn implies(&mut self) -> Result<Assertion, AssertionError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Implies) {
            let rhs = self.implies()?;
            return Ok(Assertion::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Assertion, AssertionError> {
        let mut lhs = self.and()?;
        while self.cur.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = Assertion::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Assertion, AssertionError> {
        let mut lhs = self.unary()?;
        while self.cur.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = Assertion::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Assertion, AssertionError> {
        if *self.cur.peek() == Tok::Bang {
            if *self.cur.peek_at(1) == Tok::LBrack {
                self.cur.bump();
                return match self.view()? {
                    Assertion::View {
                        kind: ViewKind::Possible,
                        var,
                        value,
                        threads,
                    } => Ok(Assertion::View {
                        kind: ViewKind::NotPossible,
                        var,
                        value,
                        threads,
                    }),
                    other => Ok(Assertion::negate(other)),
                };
            }
            self.cur.bump();
            return Ok(Assertion::negate(self.unary()?));
        }
        if self.cur.is_keyword("forall") {
            self.cur.bump();
            let var = self.ident()?;
            if !self.cur.eat_keyword("in") {
                return Err(self.error("expected `in` after the bound variable".into()));
            }
            let set = self.set()?;
            self.expect(Tok::Dot)?;
            self.bound.push(var.clone());
            let body = self.implies();
            self.bound.pop();
            return Ok(Assertion::Forall {
                var,
                set,
                body: Box::new(body?),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Assertion, AssertionError> {
        if self.cur.eat_keyword("true") {
            return Ok(Assertion::True);
        }
        if self.cur.eat_keyword("false") {
            return Ok(Assertion::False);
        }
        match self.cur.peek() {
            Tok::LBrack => self.view(),
            Tok::LParen => {
                // Either a parenthesised assertion or a comparison whose left
                // term starts with a parenthesis.
                let saved = self.cur.clone();
                if let Ok(a) = self.comparison() {
                    return Ok(a);
                }
                self.cur = saved;
                self.cur.bump();
                let a = self.implies()?;
                self.expect(Tok::RParen)?;
                Ok(a)
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<Assertion, AssertionError> {
        let lhs = self.term()?;
        if self.cur.eat_keyword("in") {
            return Ok(Assertion::In(lhs, self.set()?));
        }
        let op = match self.cur.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            other => return Err(self.error(format!("expected a comparison, found {other}"))),
        };
        self.cur.bump();
        let rhs = self.term()?;
        Ok(Assertion::Cmp(op, lhs, rhs))
    }

    fn view(&mut self) -> Result<Assertion, AssertionError> {
        self.expect(Tok::LBrack)?;
        let var = Var(self.ident()?);
        let kind = match self.cur.bump() {
            Tok::Eq => ViewKind::Sync,
            Tok::Tilde => ViewKind::Possible,
            Tok::NotTilde => ViewKind::NotPossible,
            other => return Err(self.error(format!("expected `=`, `~` or `!~` in a view, found {other}"))),
        };
        let value = self.term()?;
        self.expect(Tok::RBrack)?;
        self.expect(Tok::Underscore)?;
        let mut threads = Vec::new();
        if self.cur.eat(&Tok::LBrace) {
            loop {
                threads.push(self.thread_id()?);
                if !self.cur.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrace)?;
        } else {
            threads.push(self.thread_id()?);
        }
        threads.sort_unstable();
        threads.dedup();
        Ok(Assertion::View {
            kind,
            var,
            value,
            threads,
        })
    }

    fn thread_id(&mut self) -> Result<ThreadId, AssertionError> {
        match self.cur.bump() {
            Tok::Int(v) if v >= 0 && v <= ThreadId::MAX as i64 => Ok(v as ThreadId),
            other => Err(self.error(format!("expected a thread id, found {other}"))),
        }
    }

    fn set(&mut self) -> Result<SetExpr, AssertionError> {
        if self.cur.eat(&Tok::LBrace) {
            let mut items = Vec::new();
            if !self.cur.eat(&Tok::RBrace) {
                loop {
                    items.push(self.term()?);
                    if !self.cur.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
            }
            return Ok(SetExpr::List(items));
        }
        if self.cur.is_keyword("domain") && *self.cur.peek_at(1) == Tok::LParen {
            self.cur.bump();
            self.cur.bump();
            let x = Var(self.ident()?);
            self.expect(Tok::RParen)?;
            return Ok(SetExpr::Domain(x));
        }
        let lo = self.term()?;
        self.expect(Tok::DotDot)?;
        let hi = self.term()?;
        Ok(SetExpr::Range(lo, hi))
    }

    fn term(&mut self) -> Result<Term, AssertionError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.bump();
            let rhs = self.product()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Term, AssertionError> {
        let mut lhs = self.factor()?;
        while self.cur.eat(&Tok::Star) {
            let rhs = self.factor()?;
            lhs = Term::Arith(ArithOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Term, AssertionError> {
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.bump();
                Ok(Term::Int(v))
            }
            Tok::Minus => {
                self.cur.bump();
                match self.factor()? {
                    Term::Int(v) => Ok(Term::Int(-v)),
                    t => Ok(Term::Neg(Box::new(t))),
                }
            }
            Tok::LParen => {
                self.cur.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                self.cur.bump();
                if (name == "maxv" || name == "minv") && *self.cur.peek() == Tok::LParen {
                    self.cur.bump();
                    let x = Var(self.ident()?);
                    self.expect(Tok::RParen)?;
                    return Ok(if name == "maxv" { Term::MaxV(x) } else { Term::MinV(x) });
                }
                if self.bound.contains(&name) {
                    Ok(Term::Bound(name))
                } else {
                    Ok(Term::Reg(Reg(name)))
                }
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }
}

/// Static information needed to check and evaluate assertions for a program.
#[derive(Clone, Debug)]
pub struct Scope {
    pub threads: BTreeSet<ThreadId>,
    pub vars: BTreeSet<Var>,
    pub owners: BTreeMap<Reg, Vec<ThreadId>>,
    pub domain: ValueDomain,
}

impl Scope {
    pub fn new(p: &Program, domain: &ValueDomain) -> Scope {
        let mut owners: BTreeMap<Reg, Vec<ThreadId>> = BTreeMap::new();
        for t in p.thread_ids() {
            for r in p.registers_of(t) {
                owners.entry(r).or_default().push(t);
            }
        }
        Scope {
            threads: p.thread_ids().collect(),
            vars: p.shared_vars(),
            owners,
            domain: domain.clone(),
        }
    }

    fn owner(&self, r: &Reg) -> Result<ThreadId, AssertionError> {
        match self.owners.get(r).map(Vec::as_slice) {
            None | Some([]) => Err(AssertionError::UnownedRegister(r.to_string())),
            Some([t]) => Ok(*t),
            Some(ts) => Err(AssertionError::AmbiguousRegister(r.to_string(), ts.to_vec())),
        }
    }

    fn var(&self, x: &Var) -> Result<(), AssertionError> {
        if self.vars.contains(x) {
            Ok(())
        } else {
            Err(AssertionError::UnknownVariable(x.to_string()))
        }
    }

    fn domain_of(&self, x: &Var) -> Result<&BTreeSet<Value>, AssertionError> {
        self.var(x)?;
        self.domain
            .get(x)
            .ok_or_else(|| AssertionError::UnknownVariable(x.to_string()))
    }

    /// Checks that every thread, variable and register an assertion mentions exists.
    pub fn check(&self, a: &Assertion) -> Result<(), AssertionError> {
        match a {
            Assertion::True | Assertion::False => Ok(()),
            Assertion::Cmp(_, l, r) => {
                self.check_term(l)?;
                self.check_term(r)
            }
            Assertion::In(t, s) => {
                self.check_term(t)?;
                self.check_set(s)
            }
            Assertion::View {
                var, value, threads, ..
            } => {
                self.var(var)?;
                self.check_term(value)?;
                match threads.iter().find(|t| !self.threads.contains(t)) {
                    Some(t) => Err(AssertionError::UnknownThread(*t)),
                    None => Ok(()),
                }
            }
            Assertion::Not(a) => self.check(a),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Implies(a, b) => {
                self.check(a)?;
                self.check(b)
            }
            Assertion::Forall { set, body, .. } => {
                self.check_set(set)?;
                self.check(body)
            }
        }
    }

    fn check_term(&self, t: &Term) -> Result<(), AssertionError> {
        match t {
            Term::Int(_) | Term::Bound(_) => Ok(()),
            Term::Reg(r) => self.owner(r).map(|_| ()),
            Term::MaxV(x) | Term::MinV(x) => self.domain_of(x).map(|_| ()),
            Term::Neg(t) => self.check_term(t),
            Term::Arith(_, a, b) => {
                self.check_term(a)?;
                self.check_term(b)
            }
        }
    }

    fn check_set(&self, s: &SetExpr) -> Result<(), AssertionError> {
        match s {
            SetExpr::List(ts) => ts.iter().try_for_each(|t| self.check_term(t)),
            SetExpr::Range(a, b) => {
                self.check_term(a)?;
                self.check_term(b)
            }
            SetExpr::Domain(x) => self.domain_of(x).map(|_| ()),
        }
    }
}

/// Evaluation state for one configuration, caching observable writes per thread.
pub struct State<'a> {
    scope: &'a Scope,
    graph: &'a Graph,
    regs: &'a BTreeMap<ThreadId, RegisterFile>,
    observable: RefCell<BTreeMap<ThreadId, BTreeSet<Tag>>>,
}

impl<'a> State<'a> {
    pub fn new(scope: &'a Scope, graph: &'a Graph, regs: &'a BTreeMap<ThreadId, RegisterFile>) -> Self {
        State {
            scope,
            graph,
            regs,
            observable: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn of<F>(scope: &'a Scope, c: &'a Configuration<F>) -> Self {
        State::new(scope, &c.graph, &c.regs)
    }

    /// Values of the writes to `x` in OW(t).
    pub fn visible_values(&self, t: ThreadId, x: &Var) -> Vec<Value> {
        let mut cache = self.observable.borrow_mut();
        let ow = cache.entry(t).or_insert_with(|| self.graph.observable_writes(t));
        ow.iter()
            .filter_map(|&w| {
                let a = &self.graph.event(w).action;
                (a.var() == Some(x)).then(|| a.write_value()).flatten()
            })
            .collect()
    }

    pub fn eval(&self, a: &Assertion) -> Result<bool, AssertionError> {
        self.eval_in(a, &mut Vec::new())
    }

    fn eval_in(&self, a: &Assertion, env: &mut Vec<(String, Value)>) -> Result<bool, AssertionError> {
        Ok(match a {
            Assertion::True => true,
            Assertion::False => false,
            Assertion::Cmp(op, l, r) => {
                let (l, r) = (self.term(l, env)?, self.term(r, env)?);
                match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                }
            }
            Assertion::In(t, s) => {
                let v = self.term(t, env)?;
                self.set(s, env)?.contains(&v)
            }
            Assertion::View {
                kind,
                var,
                value,
                threads,
            } => {
                let v = self.term(value, env)?;
                threads.iter().all(|&t| {
                    let seen = self.visible_values(t, var);
                    match kind {
                        ViewKind::Sync => seen == [v],
                        ViewKind::Possible => seen.contains(&v),
                        ViewKind::NotPossible => !seen.contains(&v),
                    }
                })
            }
            Assertion::Not(a) => !self.eval_in(a, env)?,
            Assertion::And(a, b) => self.eval_in(a, env)? && self.eval_in(b, env)?,
            Assertion::Or(a, b) => self.eval_in(a, env)? || self.eval_in(b, env)?,
            Assertion::Implies(a, b) => !self.eval_in(a, env)? || self.eval_in(b, env)?,
            Assertion::Forall { var, set, body } => {
                for v in self.set(set, env)? {
                    env.push((var.clone(), v));
                    let r = self.eval_in(body, env);
                    env.pop();
                    if !r? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    fn term(&self, t: &Term, env: &[(String, Value)]) -> Result<Value, AssertionError> {
        let overflow = || AssertionError::Eval(format!("arithmetic overflow in `{t}`"));
        match t {
            Term::Int(v) => Ok(*v),
            Term::Reg(r) => {
                let owner = self.scope.owner(r)?;
                Ok(self.regs.get(&owner).map(|rf| rf.get(r)).unwrap_or(0))
            }
            Term::Bound(b) => env
                .iter()
                .rev()
                .find(|(n, _)| n == b)
                .map(|(_, v)| *v)
                .ok_or_else(|| AssertionError::Eval(format!("`{b}` is not bound"))),
            Term::MaxV(x) => self
                .scope
                .domain_of(x)?
                .last()
                .copied()
                .ok_or_else(|| AssertionError::Eval(format!("empty domain for `{x}`"))),
            Term::MinV(x) => self
                .scope
                .domain_of(x)?
                .first()
                .copied()
                .ok_or_else(|| AssertionError::Eval(format!("empty domain for `{x}`"))),
            Term::Neg(a) => self.term(a, env)?.checked_neg().ok_or_else(overflow),
            Term::Arith(op, a, b) => {
                let (a, b) = (self.term(a, env)?, self.term(b, env)?);
                match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                }
                .ok_or_else(overflow)
            }
        }
    }

    fn set(&self, s: &SetExpr, env: &[(String, Value)]) -> Result<BTreeSet<Value>, AssertionError> {
        match s {
            SetExpr::List(ts) => ts.iter().map(|t| self.term(t, env)).collect(),
            SetExpr::Range(lo, hi) => {
                let (lo, hi) = (self.term(lo, env)?, self.term(hi, env)?);
                if hi.saturating_sub(lo) > 1 << 16 {
                    return Err(AssertionError::Eval(format!("range {lo}..{hi} is too large")));
                }
                Ok((lo..=hi).collect())
            }
            SetExpr::Domain(x) => Ok(self.scope.domain_of(x)?.clone()),
        }
    }
}

pub fn eval_assertion<F>(a: &Assertion, scope: &Scope, c: &Configuration<F>) -> Result<bool, AssertionError> {
    State::of(scope, c).eval(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, Action, Label, Mode};
    use crate::memory::TaggedAction;

    fn scope(src: &str) -> (Program, Scope) {
        let p = parse_program(src).unwrap();
        let mut dom = BTreeMap::new();
        for x in p.shared_vars() {
            dom.insert(x, [0, 1, 2].into_iter().collect());
        }
        let s = Scope::new(&p, &ValueDomain(dom));
        (p, s)
    }

    const LB: &str = "1: r1 := [x]; 2: [y] := r1 + 1 ||| 3: r2 := [y]; 4: [x] := 1";

    #[test]
    fn parses_conjunction() {
        let a = parse_assertion("[y = 0]_2 && r2 = 0").unwrap();
        assert!(matches!(a, Assertion::And(..)));
        assert_eq!(a.to_string(), "([y = 0]_2 && r2 = 0)");
    }

    #[test]
    fn parses_bounded_forall() {
        let a = parse_assertion("forall i in 2..maxv(y). ![y ~ i]_2").unwrap();
        match a {
            Assertion::Forall {
                var,
                set: SetExpr::Range(..),
                body,
            } => {
                assert_eq!(var, "i");
                assert!(matches!(
                    *body,
                    Assertion::View {
                        kind: ViewKind::NotPossible,
                        value: Term::Bound(_),
                        ..
                    }
                ));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_thread_sets() {
        let a = parse_assertion("[x ~ 99]_{1,2,3}").unwrap();
        assert!(matches!(a, Assertion::View { kind: ViewKind::Possible, ref threads, .. } if threads == &[1, 2, 3]));
        let b = parse_assertion("[x !~ 99]_{3,1}").unwrap();
        assert!(matches!(b, Assertion::View { kind: ViewKind::NotPossible, ref threads, .. } if threads == &[1, 3]));
        assert_eq!(parse_assertion("[x ≉ 99]_{1,3}").unwrap(), b);
    }

    #[test]
    fn unicode_and_precedence() {
        let a = parse_assertion("r1 ≠ 1 ∨ r2 ≠ 1 ∧ true ⇒ false").unwrap();
        assert_eq!(a.to_string(), "((r1 != 1 || (r2 != 1 && true)) => false)");
        assert_eq!(
            parse_assertion("(r1 + 1) * 2 = 4").unwrap().to_string(),
            "((r1 + 1) * 2) = 4"
        );
        assert_eq!(parse_assertion("(r1 = 1)").unwrap().to_string(), "r1 = 1");
    }

    #[test]
    fn printed_form_reparses() {
        for s in [
            "forall i in {0, 1}. (i = 0 => [x = i]_1)",
            "!(r1 = 2) || [x ~ -1]_2",
            "r2 in domain(y)",
        ] {
            let a = parse_assertion(s).unwrap();
            assert_eq!(parse_assertion(&a.to_string()).unwrap(), a, "{s}");
        }
    }

    #[test]
    fn parse_errors_have_positions() {
        let e = parse_assertion("[x = 1]_").unwrap_err();
        assert!(matches!(e, AssertionError::Parse { line: 1, col: 9, .. }), "{e:?}");
        assert!(parse_assertion("r1 = ").is_err());
        assert!(parse_assertion("[x ? 1]_1").is_err());
    }

    #[test]
    fn scope_errors() {
        let (_, s) = scope(LB);
        assert_eq!(
            s.check(&parse_assertion("[x = 0]_3").unwrap()),
            Err(AssertionError::UnknownThread(3))
        );
        assert_eq!(
            s.check(&parse_assertion("[z = 0]_1").unwrap()),
            Err(AssertionError::UnknownVariable("z".into()))
        );
        assert_eq!(
            s.check(&parse_assertion("q = 0").unwrap()),
            Err(AssertionError::UnownedRegister("q".into()))
        );
        assert!(s
            .check(&parse_assertion("forall i in 0..maxv(x). r1 != i || [y ~ i]_2").unwrap())
            .is_ok());
        let (_, s2) = scope("1: r := [x] ||| 2: r := [x]");
        assert!(matches!(
            s2.check(&parse_assertion("r = 0").unwrap()),
            Err(AssertionError::AmbiguousRegister(..))
        ));
    }

    fn w(tag: usize, thread: ThreadId, line: &str, var: &str, val: Value) -> TaggedAction {
        TaggedAction {
            tag,
            thread,
            action: Action::Write {
                line: Label::from(line),
                var: Var::from(var),
                val,
                mode: Mode::Relaxed,
            },
        }
    }

    #[test]
    fn initial_views_are_synchronised() {
        let (p, s) = scope(LB);
        let g = Graph::initial(&p.initial_memory());
        let regs = p.thread_ids().map(|t| (t, p.initial_registers(t))).collect();
        let st = State::new(&s, &g, &regs);
        for a in [
            "[x = 0]_2",
            "[x = 0]_{1,2} && [y ~ 0]_1",
            "![x ~ 1]_1",
            "r1 = 0 && r2 = 0",
        ] {
            assert!(st.eval(&parse_assertion(a).unwrap()).unwrap(), "{a}");
        }
    }

    #[test]
    fn views_after_unsynchronised_write() {
        let (p, s) = scope(LB);
        let g = Graph::initial(&p.initial_memory());
        let init_x = g.writes_to(&Var::from("x")).next().unwrap();
        let g = g.step_write(w(g.next_tag(), 2, "4", "x", 1), init_x).unwrap();
        let regs = p.thread_ids().map(|t| (t, p.initial_registers(t))).collect();
        let st = State::new(&s, &g, &regs);
        let holds = |a: &str| st.eval(&parse_assertion(a).unwrap()).unwrap();
        assert!(holds("[x = 1]_2"));
        assert!(holds("[x ~ 0]_1 && [x ~ 1]_1"));
        assert!(!holds("[x = 1]_1"));
        assert!(!holds("[x !~ 1]_{1,2}"));
        assert!(holds("forall i in domain(x). [x ~ i]_1 => i in {0, 1}"));
    }
}
