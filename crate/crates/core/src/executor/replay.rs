//! Trace files and replay.
//!
//! A trace is admitted when (1) read in order, each action is allowed by the
//! futures and agrees with the thread's register values, and (2) some run of
//! the semantics performs exactly the trace's memory actions. Silent
//! register assignments may be left out of a trace.

use super::{future_step, thread_local_step, ConfigKey, Configuration, ExecError, FutureState, Prepared, TraceStep};
use crate::lang::{Action, AtomicKind, Label, Mode, Reg, RegisterFile, ThreadId, Var};
use std::collections::{BTreeMap, HashSet};

#[derive(Clone, Debug)]
pub struct ReplayOptions {
    /// Require memory actions to occur in trace order.
    pub strict: bool,
    pub budget: usize,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            strict: false,
            budget: super::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Allowed,
    Disallowed(String),
}

impl Verdict {
    pub fn is_allowed(&self) -> bool {
        matches!(self, Verdict::Allowed)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Allowed => write!(f, "ALLOWED"),
            Verdict::Disallowed(why) => write!(f, "DISALLOWED: {why}"),
        }
    }
}

/// Parses lines `t <tid> <R|W|U|L> <line> <var|reg> <value> [<value>] [mode]`.
pub fn parse_trace(text: &str) -> Result<Vec<TraceStep>, ExecError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |m: &str| ExecError::Trace {
            line: line_no,
            message: m.to_string(),
        };
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.len() < 6 || f[0] != "t" {
            return Err(err("expected `t <thread> <kind> <line> <location> <value> ...`"));
        }
        let thread: ThreadId = f[1].parse().map_err(|_| err("bad thread id"))?;
        let num = |s: &str| s.parse::<i64>().map_err(|_| err(&format!("bad value `{s}`")));
        let line = Label::from(f[3]);
        let mode = |s: Option<&&str>, default: Mode| -> Result<Mode, ExecError> {
            match s.copied() {
                None | Some("rlx") => Ok(default),
                Some("rel") => Ok(Mode::Release),
                Some("acq") => Ok(Mode::Acquire),
                Some(m) => Err(err(&format!("unknown mode `{m}`"))),
            }
        };
        let action = match f[2] {
            "R" => Action::Read {
                line,
                var: Var::from(f[4]),
                val: num(f[5])?,
                mode: mode(f.get(6), Mode::Relaxed)?,
            },
            "W" => Action::Write {
                line,
                var: Var::from(f[4]),
                val: num(f[5])?,
                mode: mode(f.get(6), Mode::Relaxed)?,
            },
            "U" => {
                let w = f.get(6).ok_or_else(|| err("update needs read and written values"))?;
                Action::Update {
                    line,
                    var: Var::from(f[4]),
                    read: num(f[5])?,
                    write: num(w)?,
                }
            }
            "L" => Action::Local {
                line,
                reg: Reg::from(f[4]),
                val: num(f[5])?,
            },
            k => return Err(err(&format!("unknown action kind `{k}`"))),
        };
        out.push(TraceStep { thread, action });
    }
    Ok(out)
}

pub fn render_trace(trace: &[TraceStep]) -> String {
    trace.iter().map(|s| format!("{s}\n")).collect()
}

pub fn replay_trace<F: FutureState>(
    prepared: &Prepared,
    futures: F,
    trace: &[TraceStep],
    opts: &ReplayOptions,
) -> Result<Verdict, ExecError> {
    let regs: BTreeMap<ThreadId, RegisterFile> = prepared
        .threads()
        .map(|t| (t, prepared.program.initial_registers(t)))
        .collect();
    let mut order = OrderSearch {
        prepared,
        trace,
        memo: HashSet::new(),
        furthest: (0, String::new()),
    };
    if !order.search(futures.clone(), regs, 0)? {
        let (pos, why) = order.furthest;
        return Ok(Verdict::Disallowed(format!(
            "step {} (`{}`): {why}",
            pos + 1,
            trace[pos]
        )));
    }
    let memory: Vec<TraceStep> = trace.iter().filter(|s| s.action.is_memory()).cloned().collect();
    if memory.len() > 64 {
        return Err(ExecError::Trace {
            line: 0,
            message: "traces are limited to 64 memory actions".into(),
        });
    }
    let mut mem = MemorySearch {
        prepared,
        trace: &memory,
        strict: opts.strict,
        budget: opts.budget,
        seen: HashSet::new(),
    };
    let init = prepared.initial_configuration(futures);
    if mem.search(&init, 0)? {
        Ok(Verdict::Allowed)
    } else if opts.strict {
        Ok(Verdict::Disallowed(
            "no run performs these memory actions in this order".into(),
        ))
    } else {
        Ok(Verdict::Disallowed(
            "no run of the memory model performs exactly these actions".into(),
        ))
    }
}

struct OrderSearch<'a, F> {
    prepared: &'a Prepared,
    trace: &'a [TraceStep],
    memo: HashSet<(F, BTreeMap<ThreadId, RegisterFile>, usize)>,
    furthest: (usize, String),
}

impl<F: FutureState> OrderSearch<'_, F> {
    fn fail(&mut self, pos: usize, why: String) {
        if pos >= self.furthest.0 {
            self.furthest = (pos, why);
        }
    }

    fn search(&mut self, f: F, regs: BTreeMap<ThreadId, RegisterFile>, pos: usize) -> Result<bool, ExecError> {
        if pos == self.trace.len() {
            return Ok(true);
        }
        let key = (f.clone(), regs.clone(), pos);
        if self.memo.contains(&key) {
            return Ok(false);
        }
        let step = &self.trace[pos];
        let t = step.thread;
        match self.prepared.command(t, step.action.line()) {
            None => self.fail(pos, format!("thread {t} has no line {}", step.action.line())),
            Some(cmd) => {
                let chosen = step
                    .action
                    .read_value()
                    .filter(|_| matches!(cmd.kind, AtomicKind::Load { .. }));
                let (a, rf) = thread_local_step(cmd, &regs[&t], chosen)?;
                if a != step.action && f.advance(t, &a).is_none() {
                    self.fail(
                        pos,
                        format!(
                            "line {} cannot run yet; an earlier command it depends on has not run",
                            a.line()
                        ),
                    );
                } else if a != step.action {
                    self.fail(pos, format!("thread {t} would perform `{a}` here"));
                } else if !f.live_lines(t).contains(a.line()) {
                    self.fail(pos, format!("line {} has already executed", a.line()));
                } else if let Some(f2) = f.advance(t, &a) {
                    let mut regs2 = regs.clone();
                    regs2.insert(t, rf);
                    if self.search(f2, regs2, pos + 1)? {
                        return Ok(true);
                    }
                } else {
                    self.fail(
                        pos,
                        "no future allows this action yet; an earlier command it depends on has not run".into(),
                    );
                }
            }
        }
        // Silent register assignments left out of the trace.
        for u in self.prepared.threads() {
            for l in f.live_lines(u) {
                let Some(cmd) = self.prepared.command(u, &l) else {
                    continue;
                };
                if !matches!(cmd.kind, AtomicKind::Assign { .. }) {
                    continue;
                }
                let (a, rf) = thread_local_step(cmd, &regs[&u], None)?;
                if let Some(f2) = f.advance(u, &a) {
                    let mut regs2 = regs.clone();
                    regs2.insert(u, rf);
                    if self.search(f2, regs2, pos)? {
                        return Ok(true);
                    }
                }
            }
        }
        self.memo.insert(key);
        Ok(false)
    }
}

struct MemorySearch<'a, F> {
    prepared: &'a Prepared,
    trace: &'a [TraceStep],
    strict: bool,
    budget: usize,
    seen: HashSet<(ConfigKey<F>, u64)>,
}

impl<F: FutureState> MemorySearch<'_, F> {
    fn search(&mut self, c: &Configuration<F>, used: u64) -> Result<bool, ExecError> {
        let n = self.trace.len();
        if used.count_ones() as usize == n {
            return Ok(true);
        }
        if !self.seen.insert((c.key(), used)) {
            return Ok(false);
        }
        if self.seen.len() > self.budget {
            return Err(ExecError::Budget { limit: self.budget });
        }
        let first_unused = (0..n).find(|j| used & (1 << j) == 0).expect("some step unused");
        for tr in future_step(self.prepared, c)? {
            let next_used = if tr.step.action.is_memory() {
                let candidates = (0..n).filter(|j| used & (1 << j) == 0 && self.trace[*j] == tr.step);
                let pick = if self.strict {
                    candidates.take_while(|j| *j == first_unused).next()
                } else {
                    candidates.into_iter().next()
                };
                match pick {
                    Some(j) => used | (1 << j),
                    None => continue,
                }
            } else {
                used
            };
            if self.search(&tr.target, next_used)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_roundtrip() {
        let text = "t 1 R 1 x 0\nt 2 W 4 x 1 rel\n# comment\nt 1 U 3 z 0 1\nt 1 L 2 r2 0\n";
        let tr = parse_trace(text).unwrap();
        assert_eq!(tr.len(), 4);
        assert_eq!(
            render_trace(&tr),
            "t 1 R 1 x 0\nt 2 W 4 x 1 rel\nt 1 U 3 z 0 1\nt 1 L 2 r2 0\n"
        );
    }

    #[test]
    fn trace_errors_carry_line() {
        let e = parse_trace("t 1 R 1 x 0\nt 1 Q 1 x 0\n").unwrap_err();
        assert!(matches!(e, ExecError::Trace { line: 2, .. }));
    }
}
