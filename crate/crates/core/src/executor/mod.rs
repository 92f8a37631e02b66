//! Future-Step execution: thread-local steps, the combined transition,
//! state-space construction, exhaustive exploration and trace replay.

mod replay;
mod space;

pub use replay::{parse_trace, render_trace, replay_trace, ReplayOptions, Verdict};
pub use space::{build_space, Edge, Node, SpaceOptions, StateSpace};

use crate::events::{expand_executions, value_closure, EventStructure, EventsError, ValueDomain, DEFAULT_DOMAIN_CAP};
use crate::futures::{candidate_futures, FutureSet, LabelFuture, LabelFutureSet, ThreadFutures};
use crate::lang::{
    atomic_set, eval_expr, unroll, Action, AtomicCmd, AtomicKind, AtomicSet, Label, Mode, Program, RegisterFile,
    ThreadId, Value, Var,
};
use crate::memory::{CanonicalGraph, Graph, MemoryError, TaggedAction, ENV_THREAD};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;
use thiserror::Error;

pub const DEFAULT_BUDGET: usize = 1_000_000;
pub const DEFAULT_UNROLL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error("state budget of {limit} configurations exceeded")]
    Budget { limit: usize },
    #[error("line {line}: {message}")]
    Eval { line: String, message: String },
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("{0}")]
    Futures(String),
}

/// Something that behaves like a set of futures under `a ▷ F`.
pub trait FutureState: Clone + Eq + Hash + Send + Sync + fmt::Debug {
    /// `a ▷ F` for an action of thread `t`, or `None` if no future allows `a`.
    fn advance(&self, t: ThreadId, a: &Action) -> Option<Self>;
    /// Every future is empty.
    fn is_exhausted(&self) -> bool;
    /// Lines of thread `t` that still occur in some future.
    fn live_lines(&self, t: ThreadId) -> BTreeSet<Label>;
    /// Thread `t`'s futures with events replaced by labels.
    fn thread_view(&self, t: ThreadId) -> BTreeSet<LabelFuture>;
}

impl FutureState for ThreadFutures {
    fn advance(&self, t: ThreadId, a: &Action) -> Option<Self> {
        self.candidate(t, a)
    }

    fn is_exhausted(&self) -> bool {
        ThreadFutures::is_exhausted(self)
    }

    fn live_lines(&self, t: ThreadId) -> BTreeSet<Label> {
        self.threads
            .get(&t)
            .into_iter()
            .flatten()
            .flat_map(|f| f.events().iter().map(|e| self.labels[e].action.line().clone()))
            .collect()
    }

    fn thread_view(&self, t: ThreadId) -> BTreeSet<LabelFuture> {
        self.threads
            .get(&t)
            .into_iter()
            .flatten()
            .map(|f| LabelFuture::from_future(f, &self.labels))
            .collect()
    }
}

impl FutureState for FutureSet {
    fn advance(&self, _t: ThreadId, a: &Action) -> Option<Self> {
        let next = candidate_futures(a, self);
        (!next.is_empty()).then_some(next)
    }

    fn is_exhausted(&self) -> bool {
        FutureSet::is_exhausted(self)
    }

    fn live_lines(&self, t: ThreadId) -> BTreeSet<Label> {
        self.futures
            .iter()
            .flat_map(|f| f.events().iter())
            .filter(|e| self.labels[e].thread == t)
            .map(|e| self.labels[e].action.line().clone())
            .collect()
    }

    fn thread_view(&self, t: ThreadId) -> BTreeSet<LabelFuture> {
        self.futures
            .iter()
            .map(|f| LabelFuture::from_future(&f.restrict(|e| self.labels[&e].thread == t), &self.labels))
            .collect()
    }
}

impl FutureState for LabelFutureSet {
    fn advance(&self, _t: ThreadId, a: &Action) -> Option<Self> {
        let next = self.candidate(a);
        (!next.futures.is_empty()).then_some(next)
    }

    fn is_exhausted(&self) -> bool {
        self.futures.iter().all(LabelFuture::is_empty)
    }

    fn live_lines(&self, t: ThreadId) -> BTreeSet<Label> {
        self.futures
            .iter()
            .flat_map(|f| f.items.iter())
            .filter(|i| self.owner.get(&i.line) == Some(&t))
            .map(|i| i.line.clone())
            .collect()
    }

    fn thread_view(&self, t: ThreadId) -> BTreeSet<LabelFuture> {
        self.restrict_to_thread(t)
    }
}

#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub unroll: usize,
    /// Fixed domains for some variables; the rest come from the value closure.
    pub domains: BTreeMap<Var, BTreeSet<Value>>,
    pub domain_cap: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            unroll: DEFAULT_UNROLL,
            domains: BTreeMap::new(),
            domain_cap: DEFAULT_DOMAIN_CAP,
        }
    }
}

/// A program made ready for execution: unrolled, with its value domain and events.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub program: Program,
    pub atomics: AtomicSet,
    pub domain: ValueDomain,
    pub events: EventStructure,
    pub warnings: Vec<String>,
}

pub fn prepare(p: &Program, opts: &PrepareOptions) -> Result<Prepared, ExecError> {
    let mut warnings = Vec::new();
    if p.has_loops() {
        warnings.push(format!(
            "loops unrolled to depth {}; iterations beyond that are not explored",
            opts.unroll
        ));
    }
    let program = unroll(p, opts.unroll);
    let domain = value_closure(&program, &opts.domains, opts.domain_cap)?;
    let events = expand_executions(&program, &domain)?;
    Ok(Prepared {
        atomics: atomic_set(&program),
        program,
        domain,
        events,
        warnings,
    })
}

impl Prepared {
    pub fn threads(&self) -> impl Iterator<Item = ThreadId> + '_ {
        self.program.thread_ids()
    }

    pub fn command(&self, t: ThreadId, l: &Label) -> Option<&AtomicCmd> {
        self.atomics.get(&t).and_then(|m| m.get(l))
    }

    pub fn initial_futures(&self) -> ThreadFutures {
        self.events.initial_futures()
    }

    pub fn initial_configuration<F: FutureState>(&self, futures: F) -> Configuration<F> {
        Configuration {
            graph: Graph::initial(&self.program.initial_memory()),
            regs: self.threads().map(|t| (t, self.program.initial_registers(t))).collect(),
            futures,
            env_writes: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Configuration<F> {
    pub graph: Graph,
    pub regs: BTreeMap<ThreadId, RegisterFile>,
    pub futures: F,
    /// Environment writes performed so far (proof checking only).
    pub env_writes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfigKey<F> {
    graph: CanonicalGraph,
    regs: BTreeMap<ThreadId, RegisterFile>,
    futures: F,
    env_writes: usize,
}

impl<F: FutureState> Configuration<F> {
    pub fn key(&self) -> ConfigKey<F> {
        ConfigKey {
            graph: self.graph.canonical(),
            regs: self.regs.clone(),
            futures: self.futures.clone(),
            env_writes: self.env_writes,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.futures.is_exhausted()
    }

    /// Final value of each variable: that of its mo-maximal write.
    pub fn final_memory(&self) -> BTreeMap<Var, Value> {
        let vars: BTreeSet<Var> = self
            .graph
            .events()
            .iter()
            .filter_map(|e| e.action.var().cloned())
            .collect();
        vars.into_iter()
            .filter_map(|x| {
                let w = self.graph.final_write(&x)?;
                Some((x, self.graph.event(w).action.write_value()?))
            })
            .collect()
    }

    /// Remaining commands: every command whose line still occurs in a future.
    pub fn remaining(&self, prepared: &Prepared) -> BTreeMap<ThreadId, BTreeSet<Label>> {
        prepared.threads().map(|t| (t, self.futures.live_lines(t))).collect()
    }
}

/// One step of a trace: the thread and the action it performed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceStep {
    pub thread: ThreadId,
    pub action: Action,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.thread == ENV_THREAD {
            match (self.action.var(), self.action.write_value()) {
                (Some(x), Some(v)) => write!(f, "env W {x} {v}"),
                _ => write!(f, "env {}", self.action),
            }
        } else {
            write!(f, "t {} {}", self.thread, self.action)
        }
    }
}

/// Executes an atomic command on a register file. `chosen` is the value
/// returned by a load and is ignored otherwise.
pub fn thread_local_step(
    cmd: &AtomicCmd,
    regs: &RegisterFile,
    chosen: Option<Value>,
) -> Result<(Action, RegisterFile), ExecError> {
    let line = cmd.label.clone();
    let eval = |e| {
        eval_expr(e, regs).map_err(|err| ExecError::Eval {
            line: line.to_string(),
            message: err.to_string(),
        })
    };
    let mut out = regs.clone();
    let action = match &cmd.kind {
        AtomicKind::Skip => {
            return Err(ExecError::Eval {
                line: line.to_string(),
                message: "skip has no action".into(),
            })
        }
        AtomicKind::Load { reg, var, acquire } => {
            let val = chosen.ok_or_else(|| ExecError::Eval {
                line: line.to_string(),
                message: "a load needs a value".into(),
            })?;
            out.set(reg.clone(), val);
            let mode = if *acquire { Mode::Acquire } else { Mode::Relaxed };
            Action::Read {
                line,
                var: var.clone(),
                val,
                mode,
            }
        }
        AtomicKind::Store { var, expr, release } => {
            let mode = if *release { Mode::Release } else { Mode::Relaxed };
            Action::Write {
                line: line.clone(),
                var: var.clone(),
                val: eval(expr)?,
                mode,
            }
        }
        AtomicKind::Update { var, expected, new } => Action::Update {
            line: line.clone(),
            var: var.clone(),
            read: eval(expected)?,
            write: eval(new)?,
        },
        AtomicKind::Assign { reg, expr } => {
            let val = eval(expr)?;
            out.set(reg.clone(), val);
            Action::Local {
                line,
                reg: reg.clone(),
                val,
            }
        }
    };
    Ok((action, out))
}

/// A transition out of a configuration.
#[derive(Clone, Debug)]
pub struct Transition<F> {
    pub step: TraceStep,
    /// The write read from or placed after, for memory steps.
    pub source: Option<usize>,
    pub target: Configuration<F>,
}

/// Future-Step: every thread step whose action some future allows and
/// which memory accepts.
pub fn future_step<F: FutureState>(prepared: &Prepared, c: &Configuration<F>) -> Result<Vec<Transition<F>>, ExecError> {
    let mut out = Vec::new();
    for t in prepared.threads() {
        let lines = c.futures.live_lines(t);
        if lines.is_empty() {
            continue;
        }
        let regs = &c.regs[&t];
        let mut observable: Option<BTreeSet<usize>> = None;
        let mut covered: Option<BTreeSet<usize>> = None;
        for l in lines {
            let Some(cmd) = prepared.command(t, &l) else { continue };
            let sources = |var: &Var, obs: &mut Option<BTreeSet<usize>>| -> Vec<usize> {
                let ow = obs.get_or_insert_with(|| c.graph.observable_writes(t));
                ow.iter()
                    .copied()
                    .filter(|w| c.graph.event(*w).action.var() == Some(var))
                    .collect()
            };
            match &cmd.kind {
                AtomicKind::Skip => {}
                AtomicKind::Load { var, .. } => {
                    for w in sources(var, &mut observable) {
                        let v = c.graph.event(w).action.write_value().expect("write");
                        let (a, regs2) = thread_local_step(cmd, regs, Some(v))?;
                        let Some(f2) = c.futures.advance(t, &a) else { continue };
                        let e = TaggedAction {
                            tag: c.graph.next_tag(),
                            thread: t,
                            action: a.clone(),
                        };
                        let g2 = c.graph.step_read(e, w).expect("observable write of the right value");
                        out.push(transition(c, t, a, Some(w), g2, regs2, f2));
                    }
                }
                AtomicKind::Store { var, .. } | AtomicKind::Update { var, .. } => {
                    let (a, regs2) = thread_local_step(cmd, regs, None)?;
                    let Some(f2) = c.futures.advance(t, &a) else { continue };
                    let cw = covered.get_or_insert_with(|| c.graph.covered_writes()).clone();
                    for w in sources(var, &mut observable) {
                        if cw.contains(&w) {
                            continue;
                        }
                        let e = TaggedAction {
                            tag: c.graph.next_tag(),
                            thread: t,
                            action: a.clone(),
                        };
                        let g2 = match &a {
                            Action::Update { .. } => match c.graph.step_rmw(e, w) {
                                Ok(g) => g,
                                Err(MemoryError::ValueMismatch { .. }) => continue,
                                Err(err) => panic!("update step rejected: {err}"),
                            },
                            _ => c.graph.step_write(e, w).expect("observable uncovered write"),
                        };
                        out.push(transition(c, t, a.clone(), Some(w), g2, regs2.clone(), f2.clone()));
                    }
                }
                AtomicKind::Assign { .. } => {
                    let (a, regs2) = thread_local_step(cmd, regs, None)?;
                    let Some(f2) = c.futures.advance(t, &a) else { continue };
                    out.push(transition(c, t, a, None, c.graph.clone(), regs2, f2));
                }
            }
        }
    }
    Ok(out)
}

fn transition<F: FutureState>(
    c: &Configuration<F>,
    t: ThreadId,
    a: Action,
    source: Option<usize>,
    graph: Graph,
    regs_t: RegisterFile,
    futures: F,
) -> Transition<F> {
    let mut regs = c.regs.clone();
    regs.insert(t, regs_t);
    Transition {
        step: TraceStep { thread: t, action: a },
        source,
        target: Configuration {
            graph,
            regs,
            futures,
            env_writes: c.env_writes,
        },
    }
}

/// Writes by an interfering environment: any domain value to any variable.
pub fn env_steps<F: FutureState>(prepared: &Prepared, c: &Configuration<F>) -> Vec<Transition<F>> {
    let mut out = Vec::new();
    let ow = c.graph.observable_writes(ENV_THREAD);
    let cw = c.graph.covered_writes();
    for (x, values) in &prepared.domain.0 {
        for &v in values {
            let a = Action::Write {
                line: Label::from("env"),
                var: x.clone(),
                val: v,
                mode: Mode::Relaxed,
            };
            for &w in &ow {
                if cw.contains(&w) || c.graph.event(w).action.var() != Some(x) {
                    continue;
                }
                let e = TaggedAction {
                    tag: c.graph.next_tag(),
                    thread: ENV_THREAD,
                    action: a.clone(),
                };
                let g2 = c.graph.step_write(e, w).expect("observable uncovered write");
                out.push(Transition {
                    step: TraceStep {
                        thread: ENV_THREAD,
                        action: a.clone(),
                    },
                    source: Some(w),
                    target: Configuration {
                        graph: g2,
                        regs: c.regs.clone(),
                        futures: c.futures.clone(),
                        env_writes: c.env_writes + 1,
                    },
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    pub budget: usize,
    pub jobs: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            budget: DEFAULT_BUDGET,
            jobs: 1,
        }
    }
}

/// A distinct final state: register files and final memory values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub registers: BTreeMap<ThreadId, RegisterFile>,
    pub memory: BTreeMap<Var, Value>,
    /// Number of terminal configurations with this outcome.
    pub count: usize,
    pub witness: Vec<String>,
}

/// A configuration with unexecuted commands but no enabled step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocked {
    pub registers: BTreeMap<ThreadId, RegisterFile>,
    pub remaining: BTreeMap<ThreadId, Vec<String>>,
    pub witness: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub states: usize,
    pub outcomes: Vec<Outcome>,
    pub blocked: Vec<Blocked>,
    pub warnings: Vec<String>,
}

pub struct Exploration<F> {
    pub space: StateSpace<F>,
    pub report: ExplorationReport,
}

impl<F: FutureState> Exploration<F> {
    /// Terminal configurations with a witness trace each.
    pub fn terminals(&self) -> impl Iterator<Item = (&Configuration<F>, Vec<TraceStep>)> + '_ {
        self.space
            .terminal
            .iter()
            .map(|i| (&self.space.nodes[*i].config, self.space.trace_to(*i)))
    }

    /// Distinct register outcomes as `(thread, register) -> value` maps.
    pub fn register_outcomes(&self) -> BTreeSet<BTreeMap<ThreadId, RegisterFile>> {
        self.report.outcomes.iter().map(|o| o.registers.clone()).collect()
    }
}

pub fn explore<F: FutureState>(
    prepared: &Prepared,
    futures: F,
    opts: &ExploreOptions,
) -> Result<Exploration<F>, ExecError> {
    let init = prepared.initial_configuration(futures);
    let space = build_space(
        prepared,
        init,
        &SpaceOptions {
            budget: opts.budget,
            jobs: opts.jobs,
            env_writes: 0,
            keep_edges: false,
        },
    )?;
    type OutcomeKey = (BTreeMap<ThreadId, RegisterFile>, BTreeMap<Var, Value>);
    let mut outcomes: BTreeMap<OutcomeKey, Outcome> = BTreeMap::new();
    for &i in &space.terminal {
        let c = &space.nodes[i].config;
        let key = (c.regs.clone(), c.final_memory());
        outcomes
            .entry(key)
            .and_modify(|o| o.count += 1)
            .or_insert_with(|| Outcome {
                registers: c.regs.clone(),
                memory: c.final_memory(),
                count: 1,
                witness: space.trace_to(i).iter().map(|s| s.to_string()).collect(),
            });
    }
    let blocked = space
        .stuck
        .iter()
        .map(|&i| {
            let c = &space.nodes[i].config;
            Blocked {
                registers: c.regs.clone(),
                remaining: c
                    .remaining(prepared)
                    .into_iter()
                    .filter(|(_, ls)| !ls.is_empty())
                    .map(|(t, ls)| (t, ls.into_iter().map(|l| l.to_string()).collect()))
                    .collect(),
                witness: space.trace_to(i).iter().map(|s| s.to_string()).collect(),
            }
        })
        .collect();
    let report = ExplorationReport {
        states: space.nodes.len(),
        outcomes: outcomes.into_values().collect(),
        blocked,
        warnings: prepared.warnings.clone(),
    };
    Ok(Exploration { space, report })
}

impl ExplorationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("configurations explored: {}\n", self.states));
        s.push_str(&format!("distinct outcomes: {}\n", self.outcomes.len()));
        for (i, o) in self.outcomes.iter().enumerate() {
            let regs: Vec<String> = o
                .registers
                .iter()
                .map(|(t, rf)| {
                    let items: Vec<String> = rf.0.iter().map(|(r, v)| format!("{r}={v}")).collect();
                    format!("T{t}[{}]", items.join(" "))
                })
                .collect();
            let mem: Vec<String> = o.memory.iter().map(|(x, v)| format!("{x}={v}")).collect();
            s.push_str(&format!(
                "#{:<3} {}  memory[{}]  ({} terminal configuration{})\n",
                i + 1,
                regs.join(" "),
                mem.join(" "),
                o.count,
                if o.count == 1 { "" } else { "s" }
            ));
            s.push_str(&format!("     witness: {}\n", o.witness.join("; ")));
        }
        if !self.blocked.is_empty() {
            s.push_str(&format!("blocked configurations: {}\n", self.blocked.len()));
            for b in &self.blocked {
                let rem: Vec<String> = b
                    .remaining
                    .iter()
                    .map(|(t, ls)| format!("T{t}:{}", ls.join(",")))
                    .collect();
                s.push_str(&format!(
                    "  remaining {}  after: {}\n",
                    rem.join(" "),
                    b.witness.join("; ")
                ));
            }
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}
