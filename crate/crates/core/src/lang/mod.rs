//! The while-language: syntax, expressions, unrolling and atomic-command sets.

mod expr;
mod parse;

pub use expr::{eval_expr, BinOp, EvalError, Expr, UnOp};
pub use parse::{parse_program, ParseError};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Value = i64;
pub type ThreadId = u32;

/// Thread id of the initialising thread that owns the initial writes.
pub const INIT_THREAD: ThreadId = 0;

macro_rules! name_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

name_type!(
    /// Program line label. Unrolled loop iterations carry a `.k` suffix.
    Label
);
name_type!(
    /// Shared variable.
    Var
);
name_type!(
    /// Thread-local register.
    Reg
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "rlx")]
    Relaxed,
    #[serde(rename = "rel")]
    Release,
    #[serde(rename = "acq")]
    Acquire,
    #[serde(rename = "ra")]
    ReleaseAcquire,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Relaxed => "rlx",
            Mode::Release => "rel",
            Mode::Acquire => "acq",
            Mode::ReleaseAcquire => "ra",
        }
    }
}

/// Labels of events. `Local` is the silent event of a register assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Read {
        line: Label,
        var: Var,
        val: Value,
        mode: Mode,
    },
    Write {
        line: Label,
        var: Var,
        val: Value,
        mode: Mode,
    },
    Update {
        line: Label,
        var: Var,
        read: Value,
        write: Value,
    },
    Local {
        line: Label,
        reg: Reg,
        val: Value,
    },
}

impl Action {
    pub fn line(&self) -> &Label {
        match self {
            Action::Read { line, .. }
            | Action::Write { line, .. }
            | Action::Update { line, .. }
            | Action::Local { line, .. } => line,
        }
    }

    pub fn var(&self) -> Option<&Var> {
        match self {
            Action::Read { var, .. } | Action::Write { var, .. } | Action::Update { var, .. } => Some(var),
            Action::Local { .. } => None,
        }
    }

    pub fn is_read(&self) -> bool {
        matches!(self, Action::Read { .. } | Action::Update { .. })
    }

    pub fn is_write(&self) -> bool {
        matches!(self, Action::Write { .. } | Action::Update { .. })
    }

    pub fn is_memory(&self) -> bool {
        !matches!(self, Action::Local { .. })
    }

    /// Value returned by a read or update.
    pub fn read_value(&self) -> Option<Value> {
        match self {
            Action::Read { val, .. } => Some(*val),
            Action::Update { read, .. } => Some(*read),
            _ => None,
        }
    }

    pub fn write_value(&self) -> Option<Value> {
        match self {
            Action::Write { val, .. } => Some(*val),
            Action::Update { write, .. } => Some(*write),
            _ => None,
        }
    }

    pub fn is_releasing(&self) -> bool {
        matches!(
            self,
            Action::Write {
                mode: Mode::Release,
                ..
            } | Action::Update { .. }
        )
    }

    pub fn is_acquiring(&self) -> bool {
        matches!(
            self,
            Action::Read {
                mode: Mode::Acquire,
                ..
            } | Action::Update { .. }
        )
    }

    pub fn kind_char(&self) -> char {
        match self {
            Action::Read { .. } => 'R',
            Action::Write { .. } => 'W',
            Action::Update { .. } => 'U',
            Action::Local { .. } => 'L',
        }
    }

    /// Same action with the line label replaced.
    pub fn with_line(&self, l: Label) -> Action {
        let mut a = self.clone();
        match &mut a {
            Action::Read { line, .. }
            | Action::Write { line, .. }
            | Action::Update { line, .. }
            | Action::Local { line, .. } => *line = l,
        }
        a
    }
}

/// Renders as `R 1 x 0`, `W 2 y 1 rel`, `U 3 x 0 1`, `L 2 r2 0`.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Read { line, var, val, mode } => {
                write!(f, "R {line} {var} {val}")?;
                if *mode != Mode::Relaxed {
                    write!(f, " {}", mode.as_str())?;
                }
                Ok(())
            }
            Action::Write { line, var, val, mode } => {
                write!(f, "W {line} {var} {val}")?;
                if *mode != Mode::Relaxed {
                    write!(f, " {}", mode.as_str())?;
                }
                Ok(())
            }
            Action::Update { line, var, read, write } => write!(f, "U {line} {var} {read} {write}"),
            Action::Local { line, reg, val } => write!(f, "L {line} {reg} {val}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomicKind {
    Skip,
    Store { var: Var, expr: Expr, release: bool },
    Load { reg: Reg, var: Var, acquire: bool },
    Assign { reg: Reg, expr: Expr },
    Update { var: Var, expected: Expr, new: Expr },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomicCmd {
    pub label: Label,
    pub kind: AtomicKind,
}

impl AtomicCmd {
    /// Registers read by the command's expressions.
    pub fn uses(&self) -> BTreeSet<Reg> {
        let mut out = BTreeSet::new();
        match &self.kind {
            AtomicKind::Store { expr, .. } | AtomicKind::Assign { expr, .. } => expr.registers(&mut out),
            AtomicKind::Update { expected, new, .. } => {
                expected.registers(&mut out);
                new.registers(&mut out);
            }
            AtomicKind::Skip | AtomicKind::Load { .. } => {}
        }
        out
    }

    pub fn defines(&self) -> Option<&Reg> {
        match &self.kind {
            AtomicKind::Load { reg, .. } | AtomicKind::Assign { reg, .. } => Some(reg),
            _ => None,
        }
    }

    pub fn shared_var(&self) -> Option<&Var> {
        match &self.kind {
            AtomicKind::Store { var, .. } | AtomicKind::Load { var, .. } | AtomicKind::Update { var, .. } => Some(var),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Skip,
    Atomic(AtomicCmd),
    Seq(Vec<Command>),
    If {
        guard: Expr,
        then: Box<Command>,
        els: Box<Command>,
    },
    While {
        guard: Expr,
        body: Box<Command>,
    },
}

impl Command {
    /// Builds a sequence, flattening nested sequences and dropping unlabeled skips.
    pub fn seq(parts: Vec<Command>) -> Command {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Command::Seq(inner) => flat.extend(inner),
                Command::Skip => {}
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Command::Skip,
            1 => flat.pop().unwrap(),
            _ => Command::Seq(flat),
        }
    }

    pub fn visit_atomics<'a>(&'a self, f: &mut impl FnMut(&'a AtomicCmd)) {
        match self {
            Command::Skip => {}
            Command::Atomic(a) => f(a),
            Command::Seq(cs) => cs.iter().for_each(|c| c.visit_atomics(f)),
            Command::If { then, els, .. } => {
                then.visit_atomics(f);
                els.visit_atomics(f);
            }
            Command::While { body, .. } => body.visit_atomics(f),
        }
    }

    pub fn has_loops(&self) -> bool {
        match self {
            Command::While { .. } => true,
            Command::Seq(cs) => cs.iter().any(Command::has_loops),
            Command::If { then, els, .. } => then.has_loops() || els.has_loops(),
            _ => false,
        }
    }

    /// Registers assigned anywhere inside the command.
    pub fn assigned_registers(&self) -> BTreeSet<Reg> {
        let mut out = BTreeSet::new();
        self.visit_atomics(&mut |a| {
            if let Some(r) = a.defines() {
                out.insert(r.clone());
            }
        });
        out
    }

    fn guard_registers(&self, out: &mut BTreeSet<Reg>) {
        match self {
            Command::Seq(cs) => cs.iter().for_each(|c| c.guard_registers(out)),
            Command::If { guard, then, els } => {
                guard.registers(out);
                then.guard_registers(out);
                els.guard_registers(out);
            }
            Command::While { guard, body } => {
                guard.registers(out);
                body.guard_registers(out);
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    /// Initial values from the `init:` line. Names used as registers initialise registers.
    pub init: BTreeMap<String, Value>,
    pub threads: BTreeMap<ThreadId, Command>,
}

impl Program {
    pub fn thread_ids(&self) -> impl Iterator<Item = ThreadId> + '_ {
        self.threads.keys().copied()
    }

    /// Registers mentioned by each thread.
    pub fn registers_of(&self, t: ThreadId) -> BTreeSet<Reg> {
        let mut out = BTreeSet::new();
        if let Some(c) = self.threads.get(&t) {
            c.visit_atomics(&mut |a| {
                out.extend(a.uses());
                if let Some(r) = a.defines() {
                    out.insert(r.clone());
                }
            });
            c.guard_registers(&mut out);
        }
        out
    }

    pub fn all_registers(&self) -> BTreeSet<Reg> {
        self.thread_ids().flat_map(|t| self.registers_of(t)).collect()
    }

    /// Shared variables: those accessed by a command plus `init:` names that are not registers.
    pub fn shared_vars(&self) -> BTreeSet<Var> {
        let regs = self.all_registers();
        let mut out: BTreeSet<Var> = BTreeSet::new();
        for c in self.threads.values() {
            c.visit_atomics(&mut |a| {
                if let Some(v) = a.shared_var() {
                    out.insert(v.clone());
                }
            });
        }
        for name in self.init.keys() {
            if !regs.contains(&Reg(name.clone())) {
                out.insert(Var(name.clone()));
            }
        }
        out
    }

    pub fn initial_memory(&self) -> BTreeMap<Var, Value> {
        self.shared_vars()
            .into_iter()
            .map(|v| {
                let val = self.init.get(v.as_str()).copied().unwrap_or(0);
                (v, val)
            })
            .collect()
    }

    pub fn initial_registers(&self, t: ThreadId) -> RegisterFile {
        let mut rf = RegisterFile::default();
        for r in self.registers_of(t) {
            let v = self.init.get(r.as_str()).copied().unwrap_or(0);
            rf.set(r, v);
        }
        rf
    }

    pub fn has_loops(&self) -> bool {
        self.threads.values().any(Command::has_loops)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterFile(pub BTreeMap<Reg, Value>);

impl RegisterFile {
    pub fn get(&self, r: &Reg) -> Value {
        self.0.get(r).copied().unwrap_or(0)
    }

    pub fn set(&mut self, r: Reg, v: Value) {
        self.0.insert(r, v);
    }
}

/// Remaining atomic commands of each thread, keyed by label.
pub type AtomicSet = BTreeMap<ThreadId, BTreeMap<Label, AtomicCmd>>;

pub fn atomic_set(p: &Program) -> AtomicSet {
    p.threads
        .iter()
        .map(|(t, c)| {
            let mut m = BTreeMap::new();
            c.visit_atomics(&mut |a| {
                m.insert(a.label.clone(), a.clone());
            });
            (*t, m)
        })
        .collect()
}

/// Replaces every loop by `depth` nested conditionals. Iteration `k` of a loop
/// body relabels each line `l` as `l.k`.
pub fn unroll(p: &Program, depth: usize) -> Program {
    Program {
        init: p.init.clone(),
        threads: p.threads.iter().map(|(t, c)| (*t, unroll_cmd(c, depth, ""))).collect(),
    }
}

fn unroll_cmd(c: &Command, depth: usize, suffix: &str) -> Command {
    match c {
        Command::Skip => Command::Skip,
        Command::Atomic(a) => Command::Atomic(AtomicCmd {
            label: Label(format!("{}{}", a.label, suffix)),
            kind: a.kind.clone(),
        }),
        Command::Seq(cs) => Command::seq(cs.iter().map(|c| unroll_cmd(c, depth, suffix)).collect()),
        Command::If { guard, then, els } => Command::If {
            guard: guard.clone(),
            then: Box::new(unroll_cmd(then, depth, suffix)),
            els: Box::new(unroll_cmd(els, depth, suffix)),
        },
        Command::While { guard, body } => unroll_iteration(guard, body, depth, suffix, 1),
    }
}

fn unroll_iteration(guard: &Expr, body: &Command, depth: usize, suffix: &str, k: usize) -> Command {
    if k > depth {
        return Command::Skip;
    }
    let inner = unroll_cmd(body, depth, &format!("{suffix}.{k}"));
    let rest = unroll_iteration(guard, body, depth, suffix, k + 1);
    Command::If {
        guard: guard.clone(),
        then: Box::new(Command::seq(vec![inner, rest])),
        els: Box::new(Command::Skip),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unroll_while_twice() {
        let p = parse_program("while r1 = 0 do { 5: [x] := 1 }").unwrap();
        let u = unroll(&p, 2);
        let expected = parse_program("if r1 = 0 then { 5.1: [x] := 1; if r1 = 0 then { 5.2: [x] := 1 } }").unwrap();
        assert_eq!(u.threads, expected.threads);
    }

    #[test]
    fn unroll_idempotent_without_loops() {
        let p = parse_program("1: r1 := [x]; if r1 = 1 then { 2: [y] := 1 } ||| 3: [x] := 1").unwrap();
        assert_eq!(unroll(&p, 3), p);
        assert_eq!(unroll(&unroll(&p, 3), 3), p);
    }

    #[test]
    fn atomic_set_labels() {
        let p =
            parse_program("init: x = 0, y = 0\n1: r1 := [x]; 2: [y] := r1 + 1 ||| 3: r2 := [y]; 4: [x] := 1").unwrap();
        let a = atomic_set(&p);
        let labels = |t| a[&t].keys().map(|l| l.to_string()).collect::<Vec<_>>();
        assert_eq!(labels(1), vec!["1", "2"]);
        assert_eq!(labels(2), vec!["3", "4"]);
    }

    #[test]
    fn shared_vars_and_registers() {
        let p = parse_program("init: x = 0, r1 = 5\n1: r1 := [x]; 2: [y] := r1").unwrap();
        assert_eq!(
            p.shared_vars().into_iter().map(|v| v.0).collect::<Vec<_>>(),
            vec!["x", "y"]
        );
        assert_eq!(p.initial_registers(1).get(&Reg::from("r1")), 5);
    }
}
