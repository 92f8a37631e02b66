//! Event structures: value domains, per-thread executions, syntactic
//! dependencies, preserved program order and the initial futures.

use crate::futures::{EventId, EventLabel, Future, FutureSet, Labeling, ThreadFutures};
use crate::lang::{
    eval_expr, Action, AtomicCmd, AtomicKind, Command, Label, Mode, Program, Reg, RegisterFile, ThreadId, Value, Var,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_DOMAIN_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventsError {
    #[error("value domain of `{var}` exceeds {cap} values; give an explicit --domain")]
    Divergence { var: String, cap: usize },
    #[error("line {line}: {message}")]
    Eval { line: String, message: String },
    #[error("program still contains a loop; unroll it first")]
    Loop,
    #[error("malformed futures file: {0}")]
    BadFutures(String),
}

/// Candidate values read from each shared variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueDomain(pub BTreeMap<Var, BTreeSet<Value>>);

impl ValueDomain {
    pub fn values(&self, v: &Var) -> impl Iterator<Item = Value> + '_ {
        self.0.get(v).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn get(&self, v: &Var) -> Option<&BTreeSet<Value>> {
        self.0.get(v)
    }
}

/// Least fixpoint of the values that can be written to each variable, seeded
/// with 0 and the initial value. Variables with an explicit seed are fixed.
pub fn value_closure(
    p: &Program,
    seeds: &BTreeMap<Var, BTreeSet<Value>>,
    cap: usize,
) -> Result<ValueDomain, EventsError> {
    let init = p.initial_memory();
    let mut dom: BTreeMap<Var, BTreeSet<Value>> = BTreeMap::new();
    for (v, val) in &init {
        let s = match seeds.get(v) {
            Some(s) => s.clone(),
            None => [0, *val].into_iter().collect(),
        };
        dom.insert(v.clone(), s);
    }
    for (v, s) in seeds {
        dom.entry(v.clone()).or_insert_with(|| s.clone());
    }
    loop {
        let current = ValueDomain(dom.clone());
        let mut changed = false;
        for t in p.thread_ids() {
            for run in enumerate_paths(p, t, &current)? {
                for step in &run.steps {
                    let (Some(var), Some(w)) = (step.action.var(), step.action.write_value()) else {
                        continue;
                    };
                    if seeds.contains_key(var) {
                        continue;
                    }
                    let set = dom.entry(var.clone()).or_default();
                    if set.insert(w) {
                        changed = true;
                        if set.len() > cap {
                            return Err(EventsError::Divergence {
                                var: var.to_string(),
                                cap,
                            });
                        }
                    }
                }
            }
        }
        if !changed {
            return Ok(ValueDomain(dom));
        }
    }
}

/// One event along a thread path, with the raw dependency information
/// gathered while walking the path.
#[derive(Clone, Debug)]
pub struct RunStep {
    pub action: Action,
    /// Loads taken before this step, with their values (including this one for a load).
    pub prefix: Vec<(Label, Value)>,
    /// Steps this one depends on through data, control or implicit flow.
    pub flow: BTreeSet<usize>,
    /// Register anti- and output-dependencies.
    pub hazard: BTreeSet<usize>,
}

#[derive(Clone, Debug)]
pub struct ThreadRun {
    pub thread: ThreadId,
    pub steps: Vec<RunStep>,
    pub events: Vec<EventId>,
    pub regs: RegisterFile,
}

#[derive(Clone)]
struct PathState {
    regs: RegisterFile,
    reach: BTreeMap<Reg, usize>,
    taint: BTreeMap<Reg, BTreeSet<usize>>,
    uses_since_def: BTreeMap<Reg, Vec<usize>>,
    pc: Vec<BTreeSet<usize>>,
    steps: Vec<RunStep>,
    reads: Vec<(Label, Value)>,
}

impl PathState {
    fn deps_of(&self, regs: &BTreeSet<Reg>) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for r in regs {
            if let Some(d) = self.reach.get(r) {
                out.insert(*d);
            }
            if let Some(t) = self.taint.get(r) {
                out.extend(t.iter().copied());
            }
        }
        out
    }

    fn push(&mut self, cmd: &AtomicCmd, action: Action, mut flow: BTreeSet<usize>) {
        let idx = self.steps.len();
        let uses = cmd.uses();
        let mut hazard = BTreeSet::new();
        if let Some(r) = cmd.defines() {
            if let Some(d) = self.reach.get(r) {
                hazard.insert(*d);
            }
            if let Some(us) = self.uses_since_def.get(r) {
                hazard.extend(us.iter().copied());
            }
        }
        for r in &uses {
            self.uses_since_def.entry(r.clone()).or_default().push(idx);
        }
        if let Some(r) = cmd.defines() {
            self.reach.insert(r.clone(), idx);
            self.taint.remove(r);
            self.uses_since_def.remove(r);
        }
        flow.remove(&idx);
        self.steps.push(RunStep {
            action,
            prefix: self.reads.clone(),
            flow,
            hazard,
        });
    }
}

enum Work<'a> {
    Cmd(&'a Command),
    EndIf {
        extra: BTreeSet<usize>,
        assigned: BTreeSet<Reg>,
    },
}

fn eval_at(cmd: &AtomicCmd, e: &crate::lang::Expr, regs: &RegisterFile) -> Result<Value, EventsError> {
    eval_expr(e, regs).map_err(|err| EventsError::Eval {
        line: cmd.label.to_string(),
        message: err.to_string(),
    })
}

/// All paths of thread `t`, one per assignment of domain values to its loads.
pub fn enumerate_paths(p: &Program, t: ThreadId, dom: &ValueDomain) -> Result<Vec<ThreadRun>, EventsError> {
    let Some(body) = p.threads.get(&t) else {
        return Ok(Vec::new());
    };
    let start = PathState {
        regs: p.initial_registers(t),
        reach: BTreeMap::new(),
        taint: BTreeMap::new(),
        uses_since_def: BTreeMap::new(),
        pc: Vec::new(),
        steps: Vec::new(),
        reads: Vec::new(),
    };
    let mut out = Vec::new();
    walk(start, vec![Work::Cmd(body)], dom, &mut out)?;
    Ok(out
        .into_iter()
        .map(|s| ThreadRun {
            thread: t,
            steps: s.steps,
            events: Vec::new(),
            regs: s.regs,
        })
        .collect())
}

fn walk<'a>(
    mut st: PathState,
    mut work: Vec<Work<'a>>,
    dom: &ValueDomain,
    out: &mut Vec<PathState>,
) -> Result<(), EventsError> {
    while let Some(w) = work.pop() {
        match w {
            Work::EndIf { extra, assigned } => {
                st.pc.pop();
                for r in assigned {
                    st.taint.entry(r).or_default().extend(extra.iter().copied());
                }
            }
            Work::Cmd(Command::Skip) => {}
            Work::Cmd(Command::While { .. }) => return Err(EventsError::Loop),
            Work::Cmd(Command::Seq(cs)) => work.extend(cs.iter().rev().map(Work::Cmd)),
            Work::Cmd(Command::If { guard, then, els }) => {
                let extra = st.deps_of(&guard.register_set());
                let g = eval_expr(guard, &st.regs).map_err(|e| EventsError::Eval {
                    line: format!("guard `{guard}`"),
                    message: e.to_string(),
                })?;
                let mut assigned = then.assigned_registers();
                assigned.extend(els.assigned_registers());
                work.push(Work::EndIf {
                    extra: extra.clone(),
                    assigned,
                });
                work.push(Work::Cmd(if g != 0 { then } else { els }));
                st.pc.push(extra);
            }
            Work::Cmd(Command::Atomic(cmd)) => {
                let control: BTreeSet<usize> = st.pc.iter().flatten().copied().collect();
                let line = cmd.label.clone();
                match &cmd.kind {
                    AtomicKind::Skip => {}
                    AtomicKind::Load { reg, var, acquire } => {
                        let mode = if *acquire { Mode::Acquire } else { Mode::Relaxed };
                        let values: Vec<Value> = dom.values(var).collect();
                        for v in values {
                            let mut next = st.clone();
                            next.reads.push((line.clone(), v));
                            let a = Action::Read {
                                line: line.clone(),
                                var: var.clone(),
                                val: v,
                                mode,
                            };
                            next.push(cmd, a, BTreeSet::new());
                            next.regs.set(reg.clone(), v);
                            let rest: Vec<Work<'a>> = work.iter().map(clone_work).collect();
                            walk(next, rest, dom, out)?;
                        }
                        return Ok(());
                    }
                    AtomicKind::Store { var, expr, release } => {
                        let val = eval_at(cmd, expr, &st.regs)?;
                        let mode = if *release { Mode::Release } else { Mode::Relaxed };
                        let mut flow = st.deps_of(&cmd.uses());
                        flow.extend(control);
                        st.push(
                            cmd,
                            Action::Write {
                                line,
                                var: var.clone(),
                                val,
                                mode,
                            },
                            flow,
                        );
                    }
                    AtomicKind::Update { var, expected, new } => {
                        let read = eval_at(cmd, expected, &st.regs)?;
                        let write = eval_at(cmd, new, &st.regs)?;
                        let mut flow = st.deps_of(&cmd.uses());
                        flow.extend(control);
                        st.push(
                            cmd,
                            Action::Update {
                                line,
                                var: var.clone(),
                                read,
                                write,
                            },
                            flow,
                        );
                    }
                    AtomicKind::Assign { reg, expr } => {
                        let val = eval_at(cmd, expr, &st.regs)?;
                        let flow = st.deps_of(&cmd.uses());
                        st.push(
                            cmd,
                            Action::Local {
                                line,
                                reg: reg.clone(),
                                val,
                            },
                            flow,
                        );
                        st.regs.set(reg.clone(), val);
                    }
                }
            }
        }
    }
    out.push(st);
    Ok(())
}

fn clone_work<'a>(w: &Work<'a>) -> Work<'a> {
    match w {
        Work::Cmd(c) => Work::Cmd(c),
        Work::EndIf { extra, assigned } => Work::EndIf {
            extra: extra.clone(),
            assigned: assigned.clone(),
        },
    }
}

fn same_modulo_line(a: &Action, b: &Action) -> bool {
    a.kind_char() == b.kind_char() && a.with_line(Label::from("")) == b.with_line(Label::from(""))
}

/// Syntactic dependency of run `i`: data, control and implicit-flow edges plus
/// register hazards, minus load-to-write edges whose target is produced
/// unchanged by every run that differs only in the value of that load.
pub fn run_dependency(runs: &[ThreadRun], i: usize) -> BTreeSet<(usize, usize)> {
    let run = &runs[i];
    let mut out = BTreeSet::new();
    for (j, step) in run.steps.iter().enumerate() {
        for &h in &step.hazard {
            out.insert((h, j));
        }
        for &src in &step.flow {
            let source = &run.steps[src];
            let eligible = matches!(source.action, Action::Read { .. }) && step.action.is_write();
            if eligible && value_invariant(runs, i, src, j) {
                continue;
            }
            out.insert((src, j));
        }
    }
    out
}

fn value_invariant(runs: &[ThreadRun], i: usize, load: usize, target: usize) -> bool {
    let run = &runs[i];
    let Action::Read {
        line: load_line, val, ..
    } = &run.steps[load].action
    else {
        return false;
    };
    let before: BTreeMap<&Label, Value> = run.steps[target]
        .prefix
        .iter()
        .filter(|(l, _)| l != load_line)
        .map(|(l, v)| (l, *v))
        .collect();
    let goal = &run.steps[target].action;
    let mut alternatives: BTreeMap<Value, usize> = BTreeMap::new();
    for other in runs {
        let reads: BTreeMap<&Label, Value> = other
            .steps
            .iter()
            .filter_map(|s| match &s.action {
                Action::Read { line, val, .. } => Some((line, *val)),
                _ => None,
            })
            .collect();
        let Some(&alt) = reads.get(load_line) else { continue };
        if alt == *val {
            continue;
        }
        if before.iter().any(|(l, v)| reads.get(l).is_some_and(|w| w != v)) {
            continue;
        }
        if !other.steps.iter().any(|s| same_modulo_line(&s.action, goal)) {
            return false;
        }
        *alternatives.entry(alt).or_default() += 1;
    }
    !alternatives.is_empty()
}

/// Preserved program order of a run: release/acquire fencing and same-location order.
pub fn run_ppo(run: &ThreadRun) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    let n = run.steps.len();
    for j in 0..n {
        let b = &run.steps[j].action;
        for i in 0..j {
            let a = &run.steps[i].action;
            let same_loc = a.var().is_some() && a.var() == b.var();
            if b.is_releasing() || a.is_acquiring() || same_loc {
                out.insert((i, j));
            }
        }
    }
    out
}

/// All events of a program together with the runs that contain them.
#[derive(Clone, Debug)]
pub struct EventStructure {
    pub labels: Arc<Labeling>,
    pub runs: BTreeMap<ThreadId, Vec<ThreadRun>>,
    dp: BTreeMap<ThreadId, Vec<BTreeSet<(EventId, EventId)>>>,
    ppo: BTreeMap<ThreadId, Vec<BTreeSet<(EventId, EventId)>>>,
}

/// One execution: a choice of run for every thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    pub runs: BTreeMap<ThreadId, usize>,
    pub events: BTreeSet<EventId>,
}

pub fn expand_executions(p: &Program, dom: &ValueDomain) -> Result<EventStructure, EventsError> {
    let mut labels: Labeling = BTreeMap::new();
    let mut runs = BTreeMap::new();
    let mut dp = BTreeMap::new();
    let mut ppo = BTreeMap::new();
    let mut next_id = 1u32;
    for t in p.thread_ids() {
        let mut thread_runs = enumerate_paths(p, t, dom)?;
        let mut ids: BTreeMap<(Label, Vec<(Label, Value)>), EventId> = BTreeMap::new();
        for run in &mut thread_runs {
            run.events = run
                .steps
                .iter()
                .map(|s| {
                    *ids.entry((s.action.line().clone(), s.prefix.clone()))
                        .or_insert_with(|| {
                            let id = EventId(next_id);
                            next_id += 1;
                            labels.insert(
                                id,
                                EventLabel {
                                    thread: t,
                                    action: s.action.clone(),
                                },
                            );
                            id
                        })
                })
                .collect();
        }
        let to_ids = |run: &ThreadRun, rel: BTreeSet<(usize, usize)>| -> BTreeSet<(EventId, EventId)> {
            rel.into_iter().map(|(a, b)| (run.events[a], run.events[b])).collect()
        };
        let dps = (0..thread_runs.len())
            .map(|i| to_ids(&thread_runs[i], run_dependency(&thread_runs, i)))
            .collect();
        let ppos = thread_runs.iter().map(|r| to_ids(r, run_ppo(r))).collect();
        dp.insert(t, dps);
        ppo.insert(t, ppos);
        runs.insert(t, thread_runs);
    }
    Ok(EventStructure {
        labels: Arc::new(labels),
        runs,
        dp,
        ppo,
    })
}

impl EventStructure {
    pub fn label(&self, e: EventId) -> &EventLabel {
        &self.labels[&e]
    }

    /// `a ⊑ b`: same thread and `a` precedes `b` on some run.
    pub fn program_order(&self, a: EventId, b: EventId) -> bool {
        let t = self.labels[&a].thread;
        if self.labels[&b].thread != t {
            return false;
        }
        self.runs[&t].iter().any(|r| {
            let pa = r.events.iter().position(|e| *e == a);
            let pb = r.events.iter().position(|e| *e == b);
            matches!((pa, pb), (Some(x), Some(y)) if x < y)
        })
    }

    /// Events of the same thread that never occur on a common run.
    pub fn in_conflict(&self, a: EventId, b: EventId) -> bool {
        let t = self.labels[&a].thread;
        if self.labels[&b].thread != t || a == b {
            return false;
        }
        !self.runs[&t]
            .iter()
            .any(|r| r.events.contains(&a) && r.events.contains(&b))
    }

    pub fn execution_count(&self) -> usize {
        self.runs.values().map(Vec::len).product()
    }

    pub fn executions(&self) -> Vec<Execution> {
        let mut acc = vec![Execution {
            runs: BTreeMap::new(),
            events: BTreeSet::new(),
        }];
        for (t, rs) in &self.runs {
            let mut next = Vec::new();
            for ex in &acc {
                for (i, r) in rs.iter().enumerate() {
                    let mut e = ex.clone();
                    e.runs.insert(*t, i);
                    e.events.extend(r.events.iter().copied());
                    next.push(e);
                }
            }
            acc = next;
        }
        acc
    }

    fn thread_future(&self, t: ThreadId, i: usize) -> Future {
        let run = &self.runs[&t][i];
        let edges = self.dp[&t][i].iter().chain(self.ppo[&t][i].iter()).copied();
        Future::new(run.events.iter().copied().collect(), edges).expect("program order extensions are acyclic")
    }

    /// Initial futures: one per execution, ordered by `dp ∪ ppo`.
    pub fn initial_futures(&self) -> ThreadFutures {
        let threads = self
            .runs
            .iter()
            .map(|(t, rs)| (*t, (0..rs.len()).map(|i| self.thread_future(*t, i)).collect()))
            .collect();
        ThreadFutures {
            threads,
            labels: self.labels.clone(),
        }
    }
}

/// Dependency relation of an execution (transitively closed).
pub fn syntactic_dependency(es: &EventStructure, ex: &Execution) -> BTreeSet<(EventId, EventId)> {
    let mut edges = BTreeSet::new();
    for (t, i) in &ex.runs {
        edges.extend(es.dp[t][*i].iter().copied());
    }
    Future::new(ex.events.clone(), edges)
        .map(|f| f.order().clone())
        .unwrap_or_default()
}

pub fn preserved_ppo(es: &EventStructure, ex: &Execution) -> BTreeSet<(EventId, EventId)> {
    let mut edges = BTreeSet::new();
    for (t, i) in &ex.runs {
        edges.extend(es.ppo[t][*i].iter().copied());
    }
    edges
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
struct EventJson {
    id: u32,
    thread: ThreadId,
    kind: String,
    line: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rval: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wval: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
struct FutureJson {
    events: Vec<u32>,
    order: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
struct FuturesFile {
    events: Vec<EventJson>,
    futures: Vec<FutureJson>,
}

fn event_json(id: EventId, l: &EventLabel) -> EventJson {
    let mut j = EventJson {
        id: id.0,
        thread: l.thread,
        kind: l.action.kind_char().to_string(),
        line: l.action.line().to_string(),
        var: l.action.var().map(|v| v.to_string()),
        reg: None,
        val: None,
        rval: None,
        wval: None,
        mode: None,
    };
    match &l.action {
        Action::Read { val, mode, .. } | Action::Write { val, mode, .. } => {
            j.val = Some(*val);
            j.mode = Some(*mode);
        }
        Action::Update { read, write, .. } => {
            j.rval = Some(*read);
            j.wval = Some(*write);
        }
        Action::Local { reg, val, .. } => {
            j.reg = Some(reg.to_string());
            j.val = Some(*val);
        }
    }
    j
}

fn action_from_json(j: &EventJson) -> Result<Action, String> {
    let line = Label(j.line.clone());
    let need = |o: Option<Value>, what: &str| o.ok_or_else(|| format!("event {} lacks `{what}`", j.id));
    let var = || {
        j.var
            .clone()
            .map(Var)
            .ok_or_else(|| format!("event {} lacks `var`", j.id))
    };
    Ok(match j.kind.as_str() {
        "R" => Action::Read {
            line,
            var: var()?,
            val: need(j.val, "val")?,
            mode: j.mode.unwrap_or(Mode::Relaxed),
        },
        "W" => Action::Write {
            line,
            var: var()?,
            val: need(j.val, "val")?,
            mode: j.mode.unwrap_or(Mode::Relaxed),
        },
        "U" => Action::Update {
            line,
            var: var()?,
            read: need(j.rval, "rval")?,
            write: need(j.wval, "wval")?,
        },
        "L" => Action::Local {
            line,
            reg: Reg(j.reg.clone().ok_or_else(|| format!("event {} lacks `reg`", j.id))?),
            val: need(j.val, "val")?,
        },
        k => return Err(format!("event {} has unknown kind `{k}`", j.id)),
    })
}

/// Serialises a future set; the output is stable for equal sets.
pub fn dump_futures(fs: &FutureSet) -> String {
    let used: BTreeSet<EventId> = fs.futures.iter().flat_map(|f| f.events().iter().copied()).collect();
    let file = FuturesFile {
        events: used.iter().map(|e| event_json(*e, &fs.labels[e])).collect(),
        futures: fs
            .futures
            .iter()
            .map(|f| FutureJson {
                events: f.events().iter().map(|e| e.0).collect(),
                order: f.order().iter().map(|(a, b)| (a.0, b.0)).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("futures serialise") + "\n"
}

/// Reads futures written by hand or by [`dump_futures`], checking each event
/// against the program's commands.
pub fn load_futures(text: &str, p: &Program) -> Result<FutureSet, EventsError> {
    let bad = EventsError::BadFutures;
    let file: FuturesFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let atomics = crate::lang::atomic_set(p);
    let mut labels = Labeling::new();
    for j in &file.events {
        let action = action_from_json(j).map_err(bad)?;
        let cmd = atomics
            .get(&j.thread)
            .and_then(|m| m.get(action.line()))
            .ok_or_else(|| bad(format!("event {}: thread {} has no line {}", j.id, j.thread, j.line)))?;
        let fits = match (&cmd.kind, &action) {
            (AtomicKind::Load { var, acquire, .. }, Action::Read { var: v, mode, .. }) => {
                var == v && (*mode == Mode::Acquire) == *acquire
            }
            (AtomicKind::Store { var, release, .. }, Action::Write { var: v, mode, .. }) => {
                var == v && (*mode == Mode::Release) == *release
            }
            (AtomicKind::Update { var, .. }, Action::Update { var: v, .. }) => var == v,
            (AtomicKind::Assign { reg, .. }, Action::Local { reg: r, .. }) => reg == r,
            _ => false,
        };
        if !fits {
            return Err(bad(format!(
                "event {} does not match the command at line {}",
                j.id, j.line
            )));
        }
        if labels
            .insert(
                EventId(j.id),
                EventLabel {
                    thread: j.thread,
                    action,
                },
            )
            .is_some()
        {
            return Err(bad(format!("event id {} declared twice", j.id)));
        }
    }
    let mut futures = BTreeSet::new();
    for f in &file.futures {
        let events: BTreeSet<EventId> = f.events.iter().map(|e| EventId(*e)).collect();
        if let Some(e) = events.iter().find(|e| !labels.contains_key(e)) {
            return Err(bad(format!("future mentions undeclared event {e}")));
        }
        let fut = Future::new(events, f.order.iter().map(|(a, b)| (EventId(*a), EventId(*b))))
            .map_err(|e| bad(e.to_string()))?;
        futures.insert(fut);
    }
    if futures.is_empty() {
        return Err(bad("no futures".into()));
    }
    Ok(FutureSet::new(futures, Arc::new(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::futures::{collapse_labels, LabelFuture};
    use crate::lang::parse_program;

    const LB: &str = "init: x = 0, y = 0\n1: r1 := [x]; 2: [y] := r1 + 1 ||| 3: r2 := [y]; 4: [x] := 1";

    fn dom_of(d: &ValueDomain, v: &str) -> Vec<Value> {
        d.values(&Var::from(v)).collect()
    }

    #[test]
    fn closure_of_load_buffering() {
        let p = parse_program(LB).unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        assert_eq!(dom_of(&d, "x"), vec![0, 1]);
        assert_eq!(dom_of(&d, "y"), vec![0, 1, 2]);
    }

    #[test]
    fn closure_diverges_on_increment_cycle() {
        let p = parse_program("1: r1 := [x]; 2: [y] := r1 + 1 ||| 3: r2 := [y]; 4: [x] := r2").unwrap();
        let e = value_closure(&p, &BTreeMap::new(), 16).unwrap_err();
        assert!(matches!(e, EventsError::Divergence { cap: 16, .. }));
    }

    #[test]
    fn seeds_fix_domains() {
        let p = parse_program("1: r1 := [x]; 2: [y] := r1 + 1 ||| 3: r2 := [y]; 4: [x] := r2").unwrap();
        let seeds = [(Var::from("x"), [0, 1].into_iter().collect())].into_iter().collect();
        let d = value_closure(&p, &seeds, 16).unwrap();
        assert_eq!(dom_of(&d, "x"), vec![0, 1]);
        assert_eq!(dom_of(&d, "y"), vec![0, 1, 2]);
    }

    #[test]
    fn load_buffering_futures() {
        let p = parse_program(LB).unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        assert_eq!(es.execution_count(), 6);
        let tf = es.initial_futures();
        assert_eq!(tf.threads[&1].len(), 2);
        assert_eq!(tf.threads[&2].len(), 3);
        let t1: Vec<String> = collapse_labels(&tf.component(1))
            .unwrap()
            .futures
            .iter()
            .map(LabelFuture::to_string)
            .collect();
        assert_eq!(t1, vec!["{1@0,2}[1@0<2]", "{1@1,2}[1@1<2]"]);
        let t2: Vec<String> = collapse_labels(&tf.component(2))
            .unwrap()
            .futures
            .iter()
            .map(LabelFuture::to_string)
            .collect();
        assert_eq!(t2, vec!["{3@0,4}", "{3@1,4}", "{3@2,4}"]);
    }

    #[test]
    fn conflict_and_program_order() {
        let p = parse_program(LB).unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        let find = |a: &str| *es.labels.iter().find(|(_, l)| l.action.to_string() == a).unwrap().0;
        let (r0, r1, w1) = (find("R 1 x 0"), find("R 1 x 1"), find("W 2 y 1"));
        assert!(es.in_conflict(r0, r1));
        assert!(es.in_conflict(w1, r1));
        assert!(es.program_order(r0, w1));
        assert!(!es.program_order(r1, w1));
        let w4 = es
            .labels
            .iter()
            .filter(|(_, l)| l.action.to_string() == "W 4 x 1")
            .count();
        assert_eq!(w4, 3);
    }

    #[test]
    fn release_write_orders_everything_before() {
        let p = parse_program("1: r1 := [x]; 2: [z] := 5; 3: [y] :=^R 1").unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        let ex = &es.executions()[0];
        let ppo = preserved_ppo(&es, ex);
        assert_eq!(ppo.len(), 2);
        assert!(syntactic_dependency(&es, ex).is_empty());
    }

    #[test]
    fn acquire_read_orders_everything_after() {
        let p = parse_program("1: r1 := ^A [x]; 2: [z] := 5; 3: [y] := 1").unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        for ex in es.executions() {
            assert_eq!(preserved_ppo(&es, &ex).len(), 2);
        }
    }

    #[test]
    fn constant_store_has_no_dependency() {
        let p = parse_program("1: r1 := [x]; 2: [y] := 1").unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        for ex in es.executions() {
            assert!(syntactic_dependency(&es, &ex).is_empty());
        }
    }

    #[test]
    fn implicit_flow_through_branch() {
        let p = parse_program("init: x = 0\n1: r1 := [x]; if r1 = 1 then { 2: r2 := 1 }; 3: [y] := r2 ||| 4: [x] := 1")
            .unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let es = expand_executions(&p, &d).unwrap();
        let t1: Vec<String> = collapse_labels(&es.initial_futures().component(1))
            .unwrap()
            .futures
            .iter()
            .map(LabelFuture::to_string)
            .collect();
        assert_eq!(t1, vec!["{1@0,3}[1@0<3]", "{1@1,2,3}[1@1<3,2<3]"]);
    }

    #[test]
    fn futures_json_roundtrip() {
        let p = parse_program(LB).unwrap();
        let d = value_closure(&p, &BTreeMap::new(), DEFAULT_DOMAIN_CAP).unwrap();
        let fs = expand_executions(&p, &d).unwrap().initial_futures().flatten();
        let text = dump_futures(&fs);
        let back = load_futures(&text, &p).unwrap();
        assert_eq!(back, fs);
        assert_eq!(dump_futures(&back), text);
    }

    #[test]
    fn futures_json_rejects_cycles_and_mismatches() {
        let p = parse_program(LB).unwrap();
        let cyc = r#"{"events":[{"id":1,"thread":1,"kind":"R","line":"1","var":"x","val":0},
            {"id":2,"thread":1,"kind":"W","line":"2","var":"y","val":1}],
            "futures":[{"events":[1,2],"order":[[1,2],[2,1]]}]}"#;
        assert!(matches!(load_futures(cyc, &p), Err(EventsError::BadFutures(_))));
        let wrong = r#"{"events":[{"id":1,"thread":1,"kind":"W","line":"1","var":"x","val":0}],
            "futures":[{"events":[1],"order":[]}]}"#;
        assert!(matches!(load_futures(wrong, &p), Err(EventsError::BadFutures(_))));
    }
}
