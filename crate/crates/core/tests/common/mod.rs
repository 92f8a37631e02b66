#![allow(dead_code)]

use futurestep::executor::{future_step, prepare, FutureState, PrepareOptions, Prepared, StateSpace};
use futurestep::lang::{parse_program, Action, ThreadId, Value, Var};
use futurestep::memory::{derived_naive, Graph, Tag};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn prepared(name: &str, domains: &[(&str, &[Value])]) -> Prepared {
    let p = parse_program(&fixture(name)).expect("fixture parses");
    let domains = domains
        .iter()
        .map(|(x, vs)| (Var::from(*x), vs.iter().copied().collect()))
        .collect();
    prepare(
        &p,
        &PrepareOptions {
            domains,
            ..Default::default()
        },
    )
    .expect("fixture prepares")
}

/// Short event name such as `W0x0` or `R3y1`.
pub fn short(a: &Action) -> String {
    match a {
        Action::Read { line, var, val, .. } | Action::Write { line, var, val, .. } => {
            format!("{}{line}{var}{val}", a.kind_char())
        }
        Action::Update { line, var, read, write } => format!("U{line}{var}{read}{write}"),
        Action::Local { line, reg, val } => format!("L{line}{reg}{val}"),
    }
}

// ---------------------------------------------------------------------------
// Axiomatic oracle for straight-line programs.
//
// Every load picks a store to read from (or the initial value). A choice is
// kept when values can be computed along dependencies plus reads-from with no
// cycle, and when a load that follows a store to the same variable in its own
// thread reads that store. Each variable may have at most one non-initial
// store, so no modification order needs to be chosen.

#[derive(Clone, Debug)]
pub enum OExpr {
    Const(Value),
    Reg(&'static str),
    Add(&'static str, Value),
}

#[derive(Clone, Debug)]
pub enum OStmt {
    Load(&'static str, &'static str),
    Store(&'static str, OExpr),
}

pub fn oracle_outcomes(
    init: &[(&'static str, Value)],
    threads: &[Vec<OStmt>],
) -> BTreeSet<BTreeMap<&'static str, Value>> {
    let init: BTreeMap<&str, Value> = init.iter().copied().collect();
    let mut stores: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut loads: Vec<(usize, usize)> = Vec::new();
    for (t, th) in threads.iter().enumerate() {
        for (i, s) in th.iter().enumerate() {
            match s {
                OStmt::Store(x, _) => assert!(stores.insert(x, (t, i)).is_none(), "one store per variable"),
                OStmt::Load(..) => loads.push((t, i)),
            }
        }
    }
    let mut out = BTreeSet::new();
    // choice[k] = Some(store position) or None for the initial value
    let n = loads.len();
    let mut choice: Vec<Option<(usize, usize)>> = vec![None; n];
    loop {
        if let Some(regs) = oracle_evaluate(&init, threads, &loads, &choice) {
            out.insert(regs);
        }
        // next choice vector
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            let (t, i) = loads[k];
            let OStmt::Load(_, x) = &threads[t][i] else {
                unreachable!()
            };
            match (choice[k], stores.get(x)) {
                (None, Some(s)) => {
                    choice[k] = Some(*s);
                    break;
                }
                _ => {
                    choice[k] = None;
                    k += 1;
                }
            }
        }
    }
}

fn oracle_evaluate(
    init: &BTreeMap<&str, Value>,
    threads: &[Vec<OStmt>],
    loads: &[(usize, usize)],
    choice: &[Option<(usize, usize)>],
) -> Option<BTreeMap<&'static str, Value>> {
    for (k, &(t, i)) in loads.iter().enumerate() {
        let OStmt::Load(_, x) = &threads[t][i] else {
            unreachable!()
        };
        let own_earlier = threads[t][..i]
            .iter()
            .rposition(|s| matches!(s, OStmt::Store(y, _) if y == x));
        match (choice[k], own_earlier) {
            (Some((ts, is)), _) if ts == t && is > i => return None,
            (c, Some(j)) if c != Some((t, j)) => return None,
            _ => {}
        }
    }
    // Values resolved so far, keyed by statement position.
    let mut val: BTreeMap<(usize, usize), Value> = BTreeMap::new();
    let total: usize = threads.iter().map(Vec::len).sum();
    loop {
        let before = val.len();
        for (t, th) in threads.iter().enumerate() {
            for (i, s) in th.iter().enumerate() {
                if val.contains_key(&(t, i)) {
                    continue;
                }
                let v = match s {
                    OStmt::Load(_, x) => {
                        let k = loads.iter().position(|p| *p == (t, i)).unwrap();
                        match choice[k] {
                            None => Some(init[x]),
                            Some(w) => val.get(&w).copied(),
                        }
                    }
                    OStmt::Store(_, e) => {
                        let reg = |r: &str| -> Option<Value> {
                            let j = th[..i].iter().rposition(|s| matches!(s, OStmt::Load(q, _) if *q == r));
                            match j {
                                Some(j) => val.get(&(t, j)).copied(),
                                None => Some(0),
                            }
                        };
                        match e {
                            OExpr::Const(c) => Some(*c),
                            OExpr::Reg(r) => reg(r),
                            OExpr::Add(r, c) => reg(r).map(|v| v + c),
                        }
                    }
                };
                if let Some(v) = v {
                    val.insert((t, i), v);
                }
            }
        }
        if val.len() == total {
            break;
        }
        if val.len() == before {
            // dependency plus reads-from cycle
            return None;
        }
    }
    let mut regs = BTreeMap::new();
    for (t, th) in threads.iter().enumerate() {
        for (i, s) in th.iter().enumerate() {
            if let OStmt::Load(r, _) = s {
                regs.insert(*r, val[&(t, i)]);
            }
        }
    }
    Some(regs)
}

// ---------------------------------------------------------------------------
// Random small programs.

#[derive(Clone, Debug)]
pub enum GenStmt {
    Load { var: usize, acquire: bool },
    StoreConst { var: usize, val: Value, release: bool },
    StoreReg { var: usize, release: bool },
    Update { var: usize, expect: Value, new: Value },
    Guarded { var: usize, val: Value },
}

fn gen_stmt() -> impl Strategy<Value = GenStmt> {
    prop_oneof![
        3 => (0..2usize, any::<bool>()).prop_map(|(var, acquire)| GenStmt::Load { var, acquire }),
        3 => (0..2usize, 1..3i64, any::<bool>()).prop_map(|(var, val, release)| GenStmt::StoreConst { var, val, release }),
        1 => (0..2usize, any::<bool>()).prop_map(|(var, release)| GenStmt::StoreReg { var, release }),
        2 => (0..2usize, 0..3i64, 1..3i64).prop_map(|(var, expect, new)| GenStmt::Update { var, expect, new }),
        1 => (0..2usize, 1..3i64).prop_map(|(var, val)| GenStmt::Guarded { var, val }),
    ]
}

/// Programs of one to three threads with at most six statements in total.
pub fn gen_program() -> impl Strategy<Value = Vec<Vec<GenStmt>>> {
    prop::collection::vec(prop::collection::vec(gen_stmt(), 1..=2), 1..=3)
}

const VARS: [&str; 2] = ["x", "y"];

pub fn render_program(threads: &[Vec<GenStmt>]) -> String {
    let mut label = 0;
    let mut parts = Vec::new();
    for (ti, th) in threads.iter().enumerate() {
        let t = ti + 1;
        let mut stmts = Vec::new();
        let mut last_reg: Option<String> = None;
        for (k, s) in th.iter().enumerate() {
            label += 1;
            let reg = format!("a{t}{k}");
            let text = match s {
                GenStmt::Load { var, acquire } => {
                    last_reg = Some(reg.clone());
                    format!(
                        "{label}: {reg} := {}[{}]",
                        if *acquire { "^A " } else { "" },
                        VARS[*var]
                    )
                }
                GenStmt::StoreConst { var, val, release } => {
                    format!("{label}: [{}] :={} {val}", VARS[*var], if *release { "^R" } else { "" })
                }
                GenStmt::StoreReg { var, release } => {
                    let e = last_reg.clone().unwrap_or_else(|| "1".into());
                    format!("{label}: [{}] :={} {e}", VARS[*var], if *release { "^R" } else { "" })
                }
                GenStmt::Update { var, expect, new } => {
                    format!("{label}: upd^RA([{}], {expect}, {new})", VARS[*var])
                }
                GenStmt::Guarded { var, val } => {
                    let cond = last_reg
                        .clone()
                        .map(|r| format!("{r} = 1"))
                        .unwrap_or_else(|| "1 = 1".into());
                    format!("if {cond} then {{ {label}: [{}] := {val} }}", VARS[*var])
                }
            };
            stmts.push(text);
        }
        parts.push(stmts.join(";\n"));
    }
    format!("init: x = 0, y = 0\n{}\n", parts.join("\n|||\n"))
}

pub fn prepare_generated(threads: &[Vec<GenStmt>]) -> Prepared {
    let text = render_program(threads);
    let p = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let dom: BTreeSet<Value> = [0, 1, 2].into_iter().collect();
    let domains = VARS.iter().map(|x| (Var::from(*x), dom.clone())).collect();
    prepare(
        &p,
        &PrepareOptions {
            domains,
            ..Default::default()
        },
    )
    .unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Deterministic sample of generated programs.
pub fn sample_programs(n: usize, seed: u8) -> Vec<Vec<Vec<GenStmt>>> {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    let strat = gen_program();
    (0..n)
        .map(|_| strat.new_tree(&mut runner).expect("generates").current())
        .collect()
}

// ---------------------------------------------------------------------------
// Invariants of tagged action graphs, checked from first principles.

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Invariant {
    MoTotal,
    RfValue,
    HbAcyclic,
    EwMonotone,
    UpdateAtomic,
    MaxObservable,
    DerivedNaive,
}

impl Invariant {
    pub const ALL: [Invariant; 7] = [
        Invariant::MoTotal,
        Invariant::RfValue,
        Invariant::HbAcyclic,
        Invariant::EwMonotone,
        Invariant::UpdateAtomic,
        Invariant::MaxObservable,
        Invariant::DerivedNaive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Invariant::MoTotal => "mo is a strict total order per variable",
            Invariant::RfValue => "rf agrees on variable and value",
            Invariant::HbAcyclic => "hb is acyclic",
            Invariant::EwMonotone => "encountered writes only grow",
            Invariant::UpdateAtomic => "no write is mo-between an update and its source",
            Invariant::MaxObservable => "the mo-maximal write is observable to every thread",
            Invariant::DerivedNaive => "incremental derived relations equal the naive ones",
        }
    }
}

pub fn graph_violations(g: &Graph, threads: &[ThreadId]) -> Vec<(Invariant, String)> {
    let mut out = Vec::new();
    let n = g.len();
    let ev = |i: Tag| &g.event(i).action;
    let vars: BTreeSet<Var> = g.events().iter().filter_map(|e| e.action.var().cloned()).collect();
    let mo = g.mo();

    for x in &vars {
        let ws: Vec<Tag> = (0..n).filter(|&i| ev(i).is_write() && ev(i).var() == Some(x)).collect();
        for &a in &ws {
            if mo.contains(a, a) {
                out.push((Invariant::MoTotal, format!("mo reflexive at {a}")));
            }
            for &b in &ws {
                if a != b && mo.contains(a, b) == mo.contains(b, a) {
                    out.push((
                        Invariant::MoTotal,
                        format!("{a} and {b} on `{x}` not ordered exactly once"),
                    ));
                }
                for &c in &ws {
                    if mo.contains(a, b) && mo.contains(b, c) && !mo.contains(a, c) {
                        out.push((Invariant::MoTotal, format!("mo not transitive at {a},{b},{c}")));
                    }
                }
            }
        }
    }
    for (a, b) in mo.pairs() {
        if !ev(a).is_write() || !ev(b).is_write() || ev(a).var() != ev(b).var() {
            out.push((Invariant::MoTotal, format!("mo edge ({a}, {b}) crosses variables")));
        }
    }

    for r in 0..n {
        let srcs: Vec<Tag> = g.rf().predecessors(r).collect();
        if ev(r).is_read() {
            if srcs.len() != 1 {
                out.push((Invariant::RfValue, format!("read {r} has {} sources", srcs.len())));
                continue;
            }
            let w = srcs[0];
            if !ev(w).is_write() || ev(w).var() != ev(r).var() || ev(w).write_value() != ev(r).read_value() {
                out.push((Invariant::RfValue, format!("rf ({w}, {r}) disagrees")));
            }
            if matches!(ev(r), Action::Update { .. }) {
                let between = (0..n).any(|m| mo.contains(w, m) && mo.contains(m, r));
                if !mo.contains(w, r) || between {
                    out.push((Invariant::UpdateAtomic, format!("update {r} not immediately after {w}")));
                }
            }
        } else if !srcs.is_empty() {
            out.push((Invariant::RfValue, format!("non-read {r} has an rf source")));
        }
    }

    let hb = &g.derived().hb;
    if !hb.is_acyclic() || (0..n).any(|e| hb.contains(e, e)) {
        out.push((Invariant::HbAcyclic, "hb has a cycle".into()));
    }
    for (a, b) in g.sb().pairs() {
        if !hb.contains(a, b) {
            out.push((Invariant::HbAcyclic, format!("sb edge ({a}, {b}) missing from hb")));
        }
    }

    for x in &vars {
        let ws: Vec<Tag> = (0..n).filter(|&i| ev(i).is_write() && ev(i).var() == Some(x)).collect();
        let maxes: Vec<Tag> = ws
            .iter()
            .copied()
            .filter(|&a| !ws.iter().any(|&b| mo.contains(a, b)))
            .collect();
        if maxes.len() != 1 {
            out.push((
                Invariant::MoTotal,
                format!("`{x}` has {} mo-maximal writes", maxes.len()),
            ));
            continue;
        }
        for &t in threads {
            if !g.observable_writes(t).contains(&maxes[0]) {
                out.push((
                    Invariant::MaxObservable,
                    format!("thread {t} cannot observe {} on `{x}`", maxes[0]),
                ));
            }
        }
    }

    if g.derived() != &derived_naive(g) {
        out.push((
            Invariant::DerivedNaive,
            "incremental and naive derived relations differ".into(),
        ));
    }
    out
}

/// Checks every explored configuration and every transition out of it.
pub fn space_violations<F: FutureState>(prepared: &Prepared, space: &StateSpace<F>) -> Vec<(Invariant, String)> {
    let threads: Vec<ThreadId> = prepared.threads().collect();
    let mut out = Vec::new();
    for node in &space.nodes {
        let c = &node.config;
        out.extend(graph_violations(&c.graph, &threads));
        let before: BTreeMap<ThreadId, BTreeSet<Tag>> =
            threads.iter().map(|&t| (t, c.graph.encountered_writes(t))).collect();
        for tr in future_step(prepared, c).expect("steps") {
            for &t in &threads {
                let after = tr.target.graph.encountered_writes(t);
                if !before[&t].is_subset(&after) {
                    out.push((Invariant::EwMonotone, format!("EW({t}) shrank on `{}`", tr.step)));
                }
            }
        }
    }
    out
}
