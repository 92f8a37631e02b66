//! Hoare triples, future stability and Owicki-Gries style obligation checking.
//!
//! Obligations are checked over the configurations reachable from the initial
//! one, optionally interleaved with a bounded number of environment writes
//! (any variable, any domain value). The environment stands in for arbitrary
//! configurations: with zero environment writes an assertion that merely
//! holds on every reachable configuration can never be refuted.

use crate::assertions::{parse_assertion, Assertion, AssertionError, Scope, State};
use crate::executor::{
    build_space, explore, Configuration, ExecError, ExploreOptions, FutureState, Prepared, SpaceOptions, StateSpace,
    TraceStep, DEFAULT_BUDGET,
};
use crate::futures::{LabelFuture, LabelItem, ThreadFutures};
use crate::lang::{Label, ThreadId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const DEFAULT_INTERFERENCE: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutlineError {
    #[error("outline is not valid JSON: {0}")]
    Json(String),
    #[error("outline names thread `{0}`, which the program does not have")]
    UnknownThread(String),
    #[error("outline has no entry for thread {0}")]
    MissingThread(ThreadId),
    #[error("thread {thread}, sub-future `{name}`: bad item `{item}`")]
    BadItem {
        thread: ThreadId,
        name: String,
        item: String,
    },
    #[error("thread {thread}, sub-future `{name}` is not a sub-future of the thread's initial futures")]
    NotSubfuture { thread: ThreadId, name: String },
    #[error("thread {thread}: sub-futures `{a}` and `{b}` are the same set")]
    DuplicateSubfuture { thread: ThreadId, a: String, b: String },
    #[error("thread {thread}: sub-future `{name}` has no assertion")]
    MissingAssertion { thread: ThreadId, name: String },
    #[error("thread {thread}: assertion `{name}` names no sub-future")]
    UnknownName { thread: ThreadId, name: String },
    #[error("{context}: {error}")]
    Assertion { context: String, error: AssertionError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("evaluating {context}: {error}")]
    Eval { context: String, error: AssertionError },
}

/// Assertions attached to named sets of label futures of one thread.
#[derive(Clone, Debug)]
pub struct FuturePredicate {
    pub thread: ThreadId,
    pub entries: Vec<PredicateEntry>,
    /// Used for sub-futures that match no entry.
    pub default: Option<Assertion>,
}

#[derive(Clone, Debug)]
pub struct PredicateEntry {
    pub name: String,
    pub futures: BTreeSet<LabelFuture>,
    pub assertion: Assertion,
}

pub const DEFAULT_NAME: &str = "(default)";

impl FuturePredicate {
    pub fn constant(thread: ThreadId, a: Assertion) -> FuturePredicate {
        FuturePredicate {
            thread,
            entries: Vec::new(),
            default: Some(a),
        }
    }

    /// The entry name and assertion for a sub-future, if any.
    pub fn lookup(&self, view: &BTreeSet<LabelFuture>) -> Option<(&str, &Assertion)> {
        match self.entries.iter().find(|e| &e.futures == view) {
            Some(e) => Some((e.name.as_str(), &e.assertion)),
            None => self.default.as_ref().map(|a| (DEFAULT_NAME, a)),
        }
    }

    pub fn entry(&self, name: &str) -> Option<&PredicateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct ProofOutline {
    pub pre: Assertion,
    pub post: Assertion,
    pub predicates: BTreeMap<ThreadId, FuturePredicate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutlineFile {
    pre: String,
    post: String,
    threads: BTreeMap<String, ThreadFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreadFile {
    #[serde(default)]
    subfutures: BTreeMap<String, SubFutureSpec>,
    #[serde(default)]
    assertions: BTreeMap<String, String>,
    #[serde(default)]
    default: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SubFutureSpec {
    One(PatternSpec),
    Many { alternatives: Vec<PatternSpec> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternSpec {
    labels: Vec<String>,
    /// Chains `[a, b, c]` meaning a < b < c.
    #[serde(default)]
    order: Vec<Vec<String>>,
}

/// Parses `3` or `3@1`.
pub fn parse_item(s: &str) -> Option<LabelItem> {
    let s = s.trim();
    match s.rsplit_once('@') {
        Some((l, v)) => {
            let v = v.trim().parse().ok()?;
            (!l.trim().is_empty()).then(|| LabelItem {
                line: Label::from(l.trim()),
                rval: Some(v),
            })
        }
        None => (!s.is_empty()).then(|| LabelItem {
            line: Label::from(s),
            rval: None,
        }),
    }
}

fn closed_order(items: &BTreeSet<LabelItem>, pairs: &[(LabelItem, LabelItem)]) -> BTreeSet<(LabelItem, LabelItem)> {
    let mut order: BTreeSet<(LabelItem, LabelItem)> = pairs.iter().cloned().collect();
    loop {
        let mut added = Vec::new();
        for (a, b) in &order {
            for (c, d) in &order {
                if b == c && !order.contains(&(a.clone(), d.clone())) {
                    added.push((a.clone(), d.clone()));
                }
            }
        }
        if added.is_empty() {
            break;
        }
        order.extend(added);
    }
    order.retain(|(a, b)| items.contains(a) && items.contains(b));
    order
}

/// `sub` is an up-closed subset of `sup` carrying the restricted order.
pub fn is_label_subfuture(sub: &LabelFuture, sup: &LabelFuture) -> bool {
    if !sub.items.is_subset(&sup.items) {
        return false;
    }
    let upclosed = sup
        .order
        .iter()
        .all(|(a, b)| !sub.items.contains(a) || sub.items.contains(b));
    upclosed && sup.restrict(|i| sub.items.contains(i)).order == sub.order
}

fn pattern(thread: ThreadId, name: &str, p: &PatternSpec) -> Result<LabelFuture, OutlineError> {
    let item = |s: &String| {
        parse_item(s).ok_or_else(|| OutlineError::BadItem {
            thread,
            name: name.to_string(),
            item: s.clone(),
        })
    };
    let items: BTreeSet<LabelItem> = p.labels.iter().map(item).collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    for chain in &p.order {
        let chain: Vec<LabelItem> = chain.iter().map(item).collect::<Result<_, _>>()?;
        for w in chain.windows(2) {
            for x in w {
                if !items.contains(x) {
                    return Err(OutlineError::BadItem {
                        thread,
                        name: name.to_string(),
                        item: x.to_string(),
                    });
                }
            }
            pairs.push((w[0].clone(), w[1].clone()));
        }
    }
    let order = closed_order(&items, &pairs);
    if order.iter().any(|(a, b)| a == b) {
        return Err(OutlineError::BadItem {
            thread,
            name: name.to_string(),
            item: "cyclic order".into(),
        });
    }
    Ok(LabelFuture { items, order })
}

pub fn load_outline(text: &str, prepared: &Prepared, scope: &Scope) -> Result<ProofOutline, OutlineError> {
    let file: OutlineFile = serde_json::from_str(text).map_err(|e| OutlineError::Json(e.to_string()))?;
    let assertion = |context: String, text: &str| {
        let a = parse_assertion(text).map_err(|error| OutlineError::Assertion {
            context: context.clone(),
            error,
        })?;
        scope
            .check(&a)
            .map_err(|error| OutlineError::Assertion { context, error })?;
        Ok::<_, OutlineError>(a)
    };
    let pre = assertion("precondition".into(), &file.pre)?;
    let post = assertion("postcondition".into(), &file.post)?;
    let initial = prepared.initial_futures();
    let mut predicates = BTreeMap::new();
    for (key, tf) in &file.threads {
        let t: ThreadId = key
            .trim()
            .parse()
            .map_err(|_| OutlineError::UnknownThread(key.clone()))?;
        if !scope.threads.contains(&t) {
            return Err(OutlineError::UnknownThread(key.clone()));
        }
        let roots = initial.thread_view(t);
        let mut entries: Vec<PredicateEntry> = Vec::new();
        for (name, spec) in &tf.subfutures {
            let specs: Vec<&PatternSpec> = match spec {
                SubFutureSpec::One(p) => vec![p],
                SubFutureSpec::Many { alternatives } => alternatives.iter().collect(),
            };
            let futures: BTreeSet<LabelFuture> = specs.iter().map(|p| pattern(t, name, p)).collect::<Result<_, _>>()?;
            if futures.is_empty() || !futures.iter().all(|f| roots.iter().any(|r| is_label_subfuture(f, r))) {
                return Err(OutlineError::NotSubfuture {
                    thread: t,
                    name: name.clone(),
                });
            }
            if let Some(other) = entries.iter().find(|e| e.futures == futures) {
                return Err(OutlineError::DuplicateSubfuture {
                    thread: t,
                    a: other.name.clone(),
                    b: name.clone(),
                });
            }
            let text = tf.assertions.get(name).ok_or_else(|| OutlineError::MissingAssertion {
                thread: t,
                name: name.clone(),
            })?;
            let a = assertion(format!("thread {t}, `{name}`"), text)?;
            entries.push(PredicateEntry {
                name: name.clone(),
                futures,
                assertion: a,
            });
        }
        if let Some(name) = tf.assertions.keys().find(|n| !tf.subfutures.contains_key(*n)) {
            return Err(OutlineError::UnknownName {
                thread: t,
                name: name.clone(),
            });
        }
        let default = match &tf.default {
            Some(text) => Some(assertion(format!("thread {t}, default"), text)?),
            None => None,
        };
        predicates.insert(
            t,
            FuturePredicate {
                thread: t,
                entries,
                default,
            },
        );
    }
    if let Some(t) = scope.threads.iter().find(|t| !predicates.contains_key(t)) {
        return Err(OutlineError::MissingThread(*t));
    }
    Ok(ProofOutline { pre, post, predicates })
}

#[derive(Clone, Debug)]
pub struct ProofOptions {
    /// Environment writes allowed along any path.
    pub interference: usize,
    pub budget: usize,
    pub jobs: usize,
}

impl Default for ProofOptions {
    fn default() -> Self {
        ProofOptions {
            interference: DEFAULT_INTERFERENCE,
            budget: DEFAULT_BUDGET,
            jobs: 1,
        }
    }
}

/// The configurations obligations are checked over.
pub struct ProofSpace<'a> {
    pub prepared: &'a Prepared,
    pub scope: Scope,
    pub space: StateSpace<ThreadFutures>,
    pub interference: usize,
}

impl<'a> ProofSpace<'a> {
    pub fn build(prepared: &'a Prepared, opts: &ProofOptions) -> Result<ProofSpace<'a>, ExecError> {
        let init = prepared.initial_configuration(prepared.initial_futures());
        let space = build_space(
            prepared,
            init,
            &SpaceOptions {
                budget: opts.budget,
                jobs: opts.jobs,
                env_writes: opts.interference,
                keep_edges: true,
            },
        )?;
        Ok(ProofSpace {
            prepared,
            scope: Scope::new(&prepared.program, &prepared.domain),
            space,
            interference: opts.interference,
        })
    }

    pub fn scope_label(&self) -> String {
        match self.interference {
            0 => "reachable configurations only".to_string(),
            1 => "reachable configurations with up to 1 environment write".to_string(),
            k => format!("reachable configurations with up to {k} environment writes"),
        }
    }

    fn config(&self, i: usize) -> &Configuration<ThreadFutures> {
        &self.space.nodes[i].config
    }

    fn eval(&self, i: usize, a: &Assertion, context: impl Fn() -> String) -> Result<bool, ProofError> {
        State::of(&self.scope, self.config(i))
            .eval(a)
            .map_err(|error| ProofError::Eval {
                context: context(),
                error,
            })
    }

    fn counterexample(&self, i: usize, step: Option<&TraceStep>) -> Vec<String> {
        let mut out: Vec<String> = self.space.trace_to(i).iter().map(|s| s.to_string()).collect();
        if let Some(s) = step {
            out.push(format!("{s}    <- violating step"));
        }
        out
    }

    /// Program steps: (source, step, target).
    fn program_edges(&self) -> impl Iterator<Item = (usize, &TraceStep, usize)> + '_ {
        self.space
            .edges
            .iter()
            .enumerate()
            .flat_map(|(i, es)| es.iter().filter(|e| !e.env).map(move |e| (i, &e.step, e.target)))
    }
}

/// The entry of each thread's predicate for each configuration, evaluated.
struct Table {
    cells: Vec<BTreeMap<ThreadId, Option<(String, bool)>>>,
}

impl Table {
    fn build(ps: &ProofSpace, preds: &BTreeMap<ThreadId, FuturePredicate>) -> Result<Table, ProofError> {
        let mut cells = Vec::with_capacity(ps.space.nodes.len());
        for i in 0..ps.space.nodes.len() {
            let mut row = BTreeMap::new();
            for (t, pred) in preds {
                let view = ps.config(i).futures.thread_view(*t);
                let cell = match pred.lookup(&view) {
                    Some((name, a)) => Some((name.to_string(), ps.eval(i, a, || format!("thread {t}, `{name}`"))?)),
                    None => None,
                };
                row.insert(*t, cell);
            }
            cells.push(row);
        }
        Ok(Table { cells })
    }

    fn get(&self, i: usize, t: ThreadId) -> Option<&(String, bool)> {
        self.cells[i].get(&t).and_then(Option::as_ref)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObligationKind {
    Init,
    Pre,
    Local,
    Global,
    Post,
    Coverage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub kind: ObligationKind,
    pub description: String,
    /// Configurations (or steps) the obligation applies to.
    pub instances: usize,
    /// Instances whose precondition held.
    pub checked: usize,
    pub passed: bool,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationReport {
    pub scope: String,
    pub configurations: usize,
    pub passed: bool,
    pub failed: usize,
    pub obligations: Vec<Obligation>,
    /// Named sub-futures no explored configuration reached.
    pub unreached: Vec<String>,
}

#[derive(Default)]
struct Acc {
    instances: usize,
    checked: usize,
    failure: Option<Vec<String>>,
}

impl Acc {
    fn record(&mut self, pre: bool, post: impl FnOnce() -> bool, cex: impl FnOnce() -> Vec<String>) {
        self.instances += 1;
        if pre {
            self.checked += 1;
            if self.failure.is_none() && !post() {
                self.failure = Some(cex());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    kind: ObligationKind,
    description: String,
}

fn key(kind: ObligationKind, description: String) -> Key {
    Key { kind, description }
}

/// Checks every obligation of an outline over the proof space.
pub fn check_og(ps: &ProofSpace, outline: &ProofOutline) -> Result<ObligationReport, ProofError> {
    let table = Table::build(ps, &outline.predicates)?;
    let n = ps.space.nodes.len();
    let mut accs: BTreeMap<Key, Acc> = BTreeMap::new();
    let pre_at = |i: usize| ps.eval(i, &outline.pre, || "precondition".into());

    let x0 = pre_at(0)?;
    accs.entry(key(ObligationKind::Init, "Init => pre".into()))
        .or_default()
        .record(true, || x0, Vec::new);

    let initial = ps.config(0).futures.clone();
    for i in 0..n {
        if ps.config(i).futures != initial {
            continue;
        }
        let x = pre_at(i)?;
        for t in outline.predicates.keys() {
            let cell = table.get(i, *t);
            let name = cell.map(|c| c.0.as_str()).unwrap_or("?");
            accs.entry(key(ObligationKind::Pre, format!("pre => I{t}({name})")))
                .or_default()
                .record(x, || cell.is_some_and(|c| c.1), || ps.counterexample(i, None));
        }
    }

    for &i in &ps.space.terminal {
        let all = outline.predicates.keys().all(|t| table.get(i, *t).is_some_and(|c| c.1));
        let y = ps.eval(i, &outline.post, || "postcondition".into())?;
        accs.entry(key(ObligationKind::Post, "I(done) => post".into()))
            .or_default()
            .record(all, || y, || ps.counterexample(i, None));
    }

    for i in 0..n {
        for t in outline.predicates.keys() {
            if table.get(i, *t).is_none() {
                let view: Vec<String> = ps
                    .config(i)
                    .futures
                    .thread_view(*t)
                    .iter()
                    .map(|f| f.to_string())
                    .collect();
                accs.entry(key(
                    ObligationKind::Coverage,
                    format!("thread {t} has an assertion for {{{}}}", view.join(", ")),
                ))
                .or_default()
                .record(true, || false, || ps.counterexample(i, None));
            }
        }
    }

    for (i, step, j) in ps.program_edges() {
        let t2 = step.thread;
        let line = step.action.line();
        let (Some((g, pre2)), Some((g_post, post2))) = (table.get(i, t2), table.get(j, t2)) else {
            continue;
        };
        accs.entry(key(
            ObligationKind::Local,
            format!("thread {t2}: {{I}}_{g} {line} {{I}}_{g_post}"),
        ))
        .or_default()
        .record(*pre2, || *post2, || ps.counterexample(i, Some(step)));
        for t1 in outline.predicates.keys().filter(|t| **t != t2) {
            let (Some((f1, pre1)), Some((_, post1))) = (table.get(i, *t1), table.get(j, *t1)) else {
                continue;
            };
            accs.entry(key(
                ObligationKind::Global,
                format!("thread {t1} at {f1} stable under thread {t2} at {g} running {line}"),
            ))
            .or_default()
            .record(*pre1 && *pre2, || *post1, || ps.counterexample(i, Some(step)));
        }
    }

    let mut reached: BTreeSet<(ThreadId, String)> = BTreeSet::new();
    for row in &table.cells {
        for (t, c) in row {
            if let Some((name, _)) = c {
                reached.insert((*t, name.clone()));
            }
        }
    }
    let unreached = outline
        .predicates
        .iter()
        .flat_map(|(t, p)| p.entries.iter().map(move |e| (*t, e.name.clone())))
        .filter(|k| !reached.contains(k))
        .map(|(t, name)| format!("thread {t}: {name}"))
        .collect();

    let obligations: Vec<Obligation> = accs
        .into_iter()
        .map(|(k, a)| Obligation {
            kind: k.kind,
            description: k.description,
            instances: a.instances,
            checked: a.checked,
            passed: a.failure.is_none(),
            vacuous: a.checked == 0,
            counterexample: a.failure,
        })
        .collect();
    let failed = obligations.iter().filter(|o| !o.passed).count();
    Ok(ObligationReport {
        scope: ps.scope_label(),
        configurations: n,
        passed: failed == 0,
        failed,
        obligations,
        unreached,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleVerdict {
    pub instances: usize,
    pub checked: usize,
    pub passed: bool,
    pub vacuous: bool,
    pub counterexample: Option<Vec<String>>,
}

impl From<Acc> for TripleVerdict {
    fn from(a: Acc) -> Self {
        TripleVerdict {
            instances: a.instances,
            checked: a.checked,
            passed: a.failure.is_none(),
            vacuous: a.checked == 0,
            counterexample: a.failure,
        }
    }
}

/// `{I}_G Q {I'}` for thread `I.thread`, where `g` names an entry of `pre`
/// (or the default) and `Q` is the thread's commands in `G`.
pub fn check_step_triple(
    ps: &ProofSpace,
    pre: &FuturePredicate,
    g: &str,
    post: &FuturePredicate,
) -> Result<TripleVerdict, ProofError> {
    let t = pre.thread;
    let mut acc = Acc::default();
    for (i, step, j) in ps.program_edges() {
        if step.thread != t {
            continue;
        }
        let Some((name, a)) = pre.lookup(&ps.config(i).futures.thread_view(t)) else {
            continue;
        };
        if name != g {
            continue;
        }
        let holds = ps.eval(i, a, || format!("thread {t}, `{g}`"))?;
        let after = post
            .lookup(&ps.config(j).futures.thread_view(t))
            .map(|(n, a2)| (n.to_string(), a2.clone()));
        let mut err = None;
        acc.record(
            holds,
            || match &after {
                Some((n, a2)) => ps.eval(j, a2, || format!("thread {t}, `{n}`")).unwrap_or_else(|e| {
                    err = Some(e);
                    false
                }),
                None => false,
            },
            || ps.counterexample(i, Some(step)),
        );
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(acc.into())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub passed: bool,
    pub triples: BTreeMap<String, TripleVerdict>,
}

/// `{I}_G Q_G {I}` for every sub-future `G` reached by thread `I.thread`.
pub fn check_future_stability(ps: &ProofSpace, pred: &FuturePredicate) -> Result<StabilityReport, ProofError> {
    let t = pred.thread;
    let mut names = BTreeSet::new();
    for node in &ps.space.nodes {
        if let Some((name, _)) = pred.lookup(&node.config.futures.thread_view(t)) {
            names.insert(name.to_string());
        }
    }
    let mut triples = BTreeMap::new();
    for g in names {
        let v = check_step_triple(ps, pred, &g, pred)?;
        triples.insert(g, v);
    }
    Ok(StabilityReport {
        passed: triples.values().all(|v| v.passed),
        triples,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoareVerdict {
    pub passed: bool,
    pub init_holds: bool,
    pub terminals: usize,
    pub counterexample: Option<Vec<String>>,
}

/// `{X} Init; P {Y}` by exhaustive exploration from the initial configuration.
pub fn check_hoare(
    prepared: &Prepared,
    x: &Assertion,
    y: &Assertion,
    opts: &ExploreOptions,
) -> Result<HoareVerdict, ProofError> {
    let scope = Scope::new(&prepared.program, &prepared.domain);
    let ex = explore(prepared, prepared.initial_futures(), opts)?;
    let init = &ex.space.nodes[0].config;
    let init_holds = State::of(&scope, init).eval(x).map_err(|error| ProofError::Eval {
        context: "precondition".into(),
        error,
    })?;
    let mut counterexample = None;
    for (c, trace) in ex.terminals() {
        let ok = State::of(&scope, c).eval(y).map_err(|error| ProofError::Eval {
            context: "postcondition".into(),
            error,
        })?;
        if !ok {
            counterexample = Some(trace.iter().map(|s| s.to_string()).collect());
            break;
        }
    }
    Ok(HoareVerdict {
        passed: init_holds && counterexample.is_none(),
        init_holds,
        terminals: ex.space.terminal.len(),
        counterexample,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Reachable,
    Forbidden,
}

impl fmt::Display for CheckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckMode::Reachable => "reachable",
            CheckMode::Forbidden => "forbidden",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub holds: bool,
    /// Terminal configurations satisfying the condition.
    pub matching: usize,
    pub terminals: usize,
    /// A trace to a satisfying terminal configuration, if any.
    pub witness: Option<Vec<String>>,
}

/// Whether some (`Reachable`) or no (`Forbidden`) terminal configuration
/// satisfies `cond`.
pub fn check_condition<F: FutureState>(
    prepared: &Prepared,
    futures: F,
    cond: &Assertion,
    mode: CheckMode,
    opts: &ExploreOptions,
) -> Result<ConditionVerdict, ProofError> {
    let scope = Scope::new(&prepared.program, &prepared.domain);
    scope.check(cond).map_err(|error| ProofError::Eval {
        context: "condition".into(),
        error,
    })?;
    let ex = explore(prepared, futures, opts)?;
    let mut matching = 0;
    let mut witness = None;
    for (c, trace) in ex.terminals() {
        let ok = State::of(&scope, c).eval(cond).map_err(|error| ProofError::Eval {
            context: "condition".into(),
            error,
        })?;
        if ok {
            matching += 1;
            witness.get_or_insert_with(|| trace.iter().map(|s| s.to_string()).collect());
        }
    }
    let holds = match mode {
        CheckMode::Reachable => matching > 0,
        CheckMode::Forbidden => matching == 0,
    };
    Ok(ConditionVerdict {
        holds,
        matching,
        terminals: ex.space.terminal.len(),
        witness,
    })
}

impl ObligationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("scope: {}\nconfigurations: {}\n", self.scope, self.configurations);
        for o in &self.obligations {
            let verdict = if !o.passed {
                "FAIL"
            } else if o.vacuous {
                "pass (vacuous)"
            } else {
                "pass"
            };
            s.push_str(&format!(
                "{verdict:<15} {:<8} {}  [{}/{}]\n",
                format!("{:?}", o.kind).to_lowercase(),
                o.description,
                o.checked,
                o.instances
            ));
            if let Some(cex) = &o.counterexample {
                for line in cex {
                    s.push_str(&format!("                  {line}\n"));
                }
            }
        }
        for u in &self.unreached {
            s.push_str(&format!("note: sub-future never reached: {u}\n"));
        }
        s.push_str(&format!(
            "{}: {} obligations, {} failed\n",
            if self.passed { "VALID" } else { "INVALID" },
            self.obligations.len(),
            self.failed
        ));
        s
    }
}
