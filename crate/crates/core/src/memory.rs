//! Tagged action graphs and the memory transition rules.
//!
//! Events are indexed by their tag, which is their position in the graph.
//! Derived relations (`hb`, `fr`, `eco`) are maintained incrementally;
//! [`derived_naive`] recomputes them from scratch.

use crate::lang::{Action, Label, Mode, ThreadId, Value, Var, INIT_THREAD};
use crate::relation::Relation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Thread id used for writes made by the environment during proof checking.
pub const ENV_THREAD: ThreadId = u32::MAX;

pub type Tag = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedAction {
    pub tag: Tag,
    pub thread: ThreadId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("tag {given} is not fresh (next tag is {expected})")]
    StaleTag { given: Tag, expected: Tag },
    #[error("event {0} does not exist")]
    UnknownEvent(Tag),
    #[error("event {0} is not a write")]
    NotAWrite(Tag),
    #[error("action `{0}` has the wrong kind for this rule")]
    WrongKind(String),
    #[error("write {w} is to `{found}`, not `{expected}`")]
    VarMismatch { w: Tag, expected: String, found: String },
    #[error("write {w} wrote {found}, not {expected}")]
    ValueMismatch { w: Tag, expected: Value, found: Value },
    #[error("write {w} is not observable by thread {thread}")]
    NotObservable { w: Tag, thread: ThreadId },
    #[error("write {w} is covered by an update")]
    Covered { w: Tag },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Derived {
    pub hb: Relation,
    pub fr: Relation,
    pub eco: Relation,
}

#[derive(Clone, Debug)]
pub struct Graph {
    events: Vec<TaggedAction>,
    sb: Relation,
    rf: Relation,
    mo: Relation,
    derived: Derived,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events && self.sb == other.sb && self.rf == other.rf && self.mo == other.mo
    }
}

impl Eq for Graph {}

/// Recomputes `hb`, `fr` and `eco` from `sb`, `rf` and `mo`.
pub fn derived_naive(g: &Graph) -> Derived {
    let n = g.events.len();
    let mut sync = Relation::new(n);
    for (w, r) in g.rf.pairs() {
        if g.events[w].action.is_releasing() && g.events[r].action.is_acquiring() {
            sync.insert(w, r);
        }
    }
    let hb = g.sb.union(&sync).transitive_closure();
    let fr = g.rf.inverse().compose(&g.mo).minus_identity();
    let eco = g.rf.union(&g.mo).union(&fr).transitive_closure();
    Derived { hb, fr, eco }
}

/// `mo[w, b]`: places `b` immediately after `w` in modification order.
pub fn insert_mo(mo: &Relation, w: Tag, b: Tag) -> Relation {
    let mut out = mo.clone();
    let n = out.size().max(b + 1);
    out.grow(n);
    let before: Vec<Tag> = std::iter::once(w).chain(mo.predecessors(w)).collect();
    let after: Vec<Tag> = mo.successors(w).collect();
    for x in before {
        out.insert(x, b);
    }
    for y in after {
        out.insert(b, y);
    }
    out
}

impl Graph {
    /// The graph holding one initial write per variable, made by thread 0.
    pub fn initial(init: &BTreeMap<Var, Value>) -> Graph {
        let events: Vec<TaggedAction> = init
            .iter()
            .enumerate()
            .map(|(i, (v, val))| TaggedAction {
                tag: i,
                thread: INIT_THREAD,
                action: Action::Write {
                    line: Label::from("0"),
                    var: v.clone(),
                    val: *val,
                    mode: Mode::Relaxed,
                },
            })
            .collect();
        let n = events.len();
        let mut g = Graph {
            events,
            sb: Relation::new(n),
            rf: Relation::new(n),
            mo: Relation::new(n),
            derived: Derived {
                hb: Relation::new(n),
                fr: Relation::new(n),
                eco: Relation::new(n),
            },
        };
        g.derived = derived_naive(&g);
        g
    }

    pub fn next_tag(&self) -> Tag {
        self.events.len()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[TaggedAction] {
        &self.events
    }

    pub fn event(&self, g: Tag) -> &TaggedAction {
        &self.events[g]
    }

    pub fn sb(&self) -> &Relation {
        &self.sb
    }

    pub fn rf(&self) -> &Relation {
        &self.rf
    }

    pub fn mo(&self) -> &Relation {
        &self.mo
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn writes(&self) -> impl Iterator<Item = Tag> + '_ {
        (0..self.events.len()).filter(|g| self.events[*g].action.is_write())
    }

    pub fn writes_to<'a>(&'a self, x: &'a Var) -> impl Iterator<Item = Tag> + 'a {
        self.writes().filter(move |g| self.events[*g].action.var() == Some(x))
    }

    /// Write read by `r`, if any.
    pub fn read_from(&self, r: Tag) -> Option<Tag> {
        self.rf.predecessors(r).next()
    }

    /// The mo-maximal write to `x`.
    pub fn final_write(&self, x: &Var) -> Option<Tag> {
        self.writes_to(x).find(|w| self.mo.successors(*w).next().is_none())
    }

    /// `EW(t)`: writes `w` with `w (eco? ; hb?) e` for some event `e` of `t`.
    pub fn encountered_writes(&self, t: ThreadId) -> BTreeSet<Tag> {
        let n = self.events.len();
        let mut reach = vec![false; n];
        for e in 0..n {
            if self.events[e].thread == t {
                reach[e] = true;
                for x in self.derived.hb.predecessors(e) {
                    reach[x] = true;
                }
            }
        }
        self.writes()
            .filter(|w| reach[*w] || self.derived.eco.successors(*w).any(|x| reach[x]))
            .collect()
    }

    /// `OW(t)`: writes not mo-before any write `t` has encountered.
    pub fn observable_writes(&self, t: ThreadId) -> BTreeSet<Tag> {
        let ew = self.encountered_writes(t);
        self.writes()
            .filter(|w| !self.mo.successors(*w).any(|x| ew.contains(&x)))
            .collect()
    }

    /// `CW`: writes already read by an update.
    pub fn covered_writes(&self) -> BTreeSet<Tag> {
        self.rf
            .pairs()
            .filter(|(_, u)| matches!(self.events[*u].action, Action::Update { .. }))
            .map(|(w, _)| w)
            .collect()
    }

    fn check_fresh(&self, e: &TaggedAction) -> Result<(), MemoryError> {
        if e.tag != self.next_tag() {
            return Err(MemoryError::StaleTag {
                given: e.tag,
                expected: self.next_tag(),
            });
        }
        Ok(())
    }

    fn check_source(&self, e: &TaggedAction, w: Tag, uncovered: bool) -> Result<(), MemoryError> {
        let src = self.events.get(w).ok_or(MemoryError::UnknownEvent(w))?;
        if !src.action.is_write() {
            return Err(MemoryError::NotAWrite(w));
        }
        let (want, have) = (e.action.var(), src.action.var());
        if want != have {
            return Err(MemoryError::VarMismatch {
                w,
                expected: want.map(|v| v.to_string()).unwrap_or_default(),
                found: have.map(|v| v.to_string()).unwrap_or_default(),
            });
        }
        if !self.observable_writes(e.thread).contains(&w) {
            return Err(MemoryError::NotObservable { w, thread: e.thread });
        }
        if uncovered && self.covered_writes().contains(&w) {
            return Err(MemoryError::Covered { w });
        }
        Ok(())
    }

    /// `(D, sb) + e`: appends `e` after the events of its thread and thread 0.
    fn add_event(&mut self, e: TaggedAction) -> Tag {
        let g = self.events.len();
        let n = g + 1;
        self.sb.grow(n);
        self.rf.grow(n);
        self.mo.grow(n);
        self.derived.hb.grow(n);
        self.derived.fr.grow(n);
        self.derived.eco.grow(n);
        for x in 0..g {
            let t = self.events[x].thread;
            if t == e.thread || t == INIT_THREAD {
                self.sb.insert(x, g);
            }
        }
        self.events.push(e);
        g
    }

    /// Read rule: `e` reads from an observable write `w` with the same value.
    pub fn step_read(&self, e: TaggedAction, w: Tag) -> Result<Graph, MemoryError> {
        self.check_fresh(&e)?;
        let Action::Read { val, .. } = &e.action else {
            return Err(MemoryError::WrongKind(e.action.to_string()));
        };
        self.check_source(&e, w, false)?;
        let found = self.events[w].action.write_value().expect("write");
        if found != *val {
            return Err(MemoryError::ValueMismatch {
                w,
                expected: *val,
                found,
            });
        }
        let mut g = self.clone();
        let r = g.add_event(e);
        g.rf.insert(w, r);
        g.update_derived(r, Some(w), None);
        Ok(g)
    }

    /// Write rule: `e` is placed immediately after an observable, uncovered `w`.
    pub fn step_write(&self, e: TaggedAction, w: Tag) -> Result<Graph, MemoryError> {
        self.check_fresh(&e)?;
        if !matches!(e.action, Action::Write { .. }) {
            return Err(MemoryError::WrongKind(e.action.to_string()));
        }
        self.check_source(&e, w, true)?;
        let mut g = self.clone();
        let b = g.add_event(e);
        g.mo = insert_mo(&g.mo, w, b);
        g.update_derived(b, None, Some(w));
        Ok(g)
    }

    /// Update rule: `e` reads from and is placed immediately after `w`.
    pub fn step_rmw(&self, e: TaggedAction, w: Tag) -> Result<Graph, MemoryError> {
        self.check_fresh(&e)?;
        let Action::Update { read, .. } = &e.action else {
            return Err(MemoryError::WrongKind(e.action.to_string()));
        };
        self.check_source(&e, w, true)?;
        let found = self.events[w].action.write_value().expect("write");
        if found != *read {
            return Err(MemoryError::ValueMismatch {
                w,
                expected: *read,
                found,
            });
        }
        let mut g = self.clone();
        let u = g.add_event(e);
        g.rf.insert(w, u);
        g.mo = insert_mo(&g.mo, w, u);
        g.update_derived(u, Some(w), Some(w));
        Ok(g)
    }

    fn update_derived(&mut self, e: Tag, read_from: Option<Tag>, after: Option<Tag>) {
        let act = self.events[e].action.clone();
        // hb: everything hb-before a direct predecessor of e.
        let mut direct: Vec<Tag> = self.sb.predecessors(e).collect();
        if let Some(w) = read_from {
            if self.events[w].action.is_releasing() && act.is_acquiring() {
                direct.push(w);
            }
        }
        let mut hb_in: BTreeSet<Tag> = direct.iter().copied().collect();
        for d in &direct {
            hb_in.extend(self.derived.hb.predecessors(*d));
        }
        for x in hb_in {
            self.derived.hb.insert(x, e);
        }
        // fr: e is a new read, or a new mo-successor of earlier writes.
        if let Some(w) = read_from {
            for y in self.mo.successors(w).filter(|y| *y != e).collect::<Vec<_>>() {
                self.derived.fr.insert(e, y);
            }
        }
        if after.is_some() {
            let earlier: Vec<Tag> = self.mo.predecessors(e).collect();
            for w in earlier {
                for r in self.rf.successors(w).filter(|r| *r != e).collect::<Vec<_>>() {
                    self.derived.fr.insert(r, e);
                }
            }
        }
        // eco: close the new edges, all of which touch e.
        let base_in: Vec<Tag> = (0..self.events.len())
            .filter(|x| {
                *x != e && (self.rf.contains(*x, e) || self.mo.contains(*x, e) || self.derived.fr.contains(*x, e))
            })
            .collect();
        let base_out: Vec<Tag> = (0..self.events.len())
            .filter(|y| {
                *y != e && (self.rf.contains(e, *y) || self.mo.contains(e, *y) || self.derived.fr.contains(e, *y))
            })
            .collect();
        let mut ins: BTreeSet<Tag> = base_in.iter().copied().collect();
        ins.extend(self.derived.eco.preimage(&base_in));
        let mut outs: BTreeSet<Tag> = base_out.iter().copied().collect();
        outs.extend(self.derived.eco.image(&base_out));
        for &x in &ins {
            self.derived.eco.insert(x, e);
            for &y in &outs {
                self.derived.eco.insert(x, y);
            }
        }
        for &y in &outs {
            self.derived.eco.insert(e, y);
        }
    }

    /// Checks the coherence invariants every reachable graph satisfies.
    pub fn check_wellformed(&self) -> Result<(), String> {
        let vars: BTreeSet<&Var> = self.events.iter().filter_map(|e| e.action.var()).collect();
        for x in vars {
            let ws: Vec<Tag> = self.writes_to(x).collect();
            for &a in &ws {
                for &b in &ws {
                    if a != b && !(self.mo.contains(a, b) ^ self.mo.contains(b, a)) {
                        return Err(format!("mo is not a strict total order on `{x}` ({a}, {b})"));
                    }
                }
            }
        }
        for (a, b) in self.mo.pairs() {
            let (ea, eb) = (&self.events[a].action, &self.events[b].action);
            if !ea.is_write() || !eb.is_write() || ea.var() != eb.var() {
                return Err(format!("mo edge ({a}, {b}) is not between writes to one variable"));
            }
        }
        if !self.mo.transitive_closure().minus(&self.mo).is_empty() {
            return Err("mo is not transitive".into());
        }
        for r in 0..self.events.len() {
            let srcs: Vec<Tag> = self.rf.predecessors(r).collect();
            let act = &self.events[r].action;
            if act.is_read() != (srcs.len() == 1) || srcs.len() > 1 {
                return Err(format!("event {r} has {} rf sources", srcs.len()));
            }
            if let Some(&w) = srcs.first() {
                if self.events[w].action.write_value() != act.read_value() || self.events[w].action.var() != act.var() {
                    return Err(format!("rf ({w}, {r}) disagrees on value or variable"));
                }
                if matches!(act, Action::Update { .. }) {
                    let between = self.mo.successors(w).any(|x| self.mo.contains(x, r));
                    if between || !self.mo.contains(w, r) {
                        return Err(format!("update {r} is not immediately mo-after {w}"));
                    }
                }
            }
        }
        let d = &self.derived;
        if (0..self.events.len()).any(|e| d.hb.contains(e, e)) {
            return Err("hb is cyclic".into());
        }
        if (0..self.events.len()).any(|e| d.eco.contains(e, e)) {
            return Err("eco is cyclic".into());
        }
        let hb_eco = d.hb.compose(&d.eco);
        if (0..self.events.len()).any(|e| hb_eco.contains(e, e)) {
            return Err("hb;eco is reflexive".into());
        }
        Ok(())
    }

    /// Canonical form used to recognise graphs that differ only in tag numbering.
    pub fn canonical(&self) -> CanonicalGraph {
        let mut order: Vec<Tag> = (0..self.events.len()).collect();
        order.sort_by(|a, b| {
            let (ea, eb) = (&self.events[*a], &self.events[*b]);
            (ea.thread, &ea.action, a).cmp(&(eb.thread, &eb.action, b))
        });
        let mut pos = vec![0u16; order.len()];
        for (i, g) in order.iter().enumerate() {
            pos[*g] = i as u16;
        }
        let map = |r: &Relation| {
            let mut v: Vec<(u16, u16)> = r.pairs().map(|(a, b)| (pos[a], pos[b])).collect();
            v.sort_unstable();
            v
        };
        CanonicalGraph {
            events: order
                .iter()
                .map(|g| (self.events[*g].thread, self.events[*g].action.clone()))
                .collect(),
            sb: map(&self.sb),
            rf: map(&self.rf),
            mo: map(&self.mo),
        }
    }

    pub fn dump(&self) -> GraphDump {
        let d = &self.derived;
        let pairs = |r: &Relation| r.pairs().collect::<Vec<_>>();
        GraphDump {
            events: self
                .events
                .iter()
                .map(|e| EventDump {
                    tag: e.tag,
                    thread: e.thread,
                    kind: e.action.kind_char().to_string(),
                    line: e.action.line().to_string(),
                    var: e.action.var().map(|v| v.to_string()),
                    rval: e.action.read_value(),
                    wval: e.action.write_value(),
                    mode: match &e.action {
                        Action::Read { mode, .. } | Action::Write { mode, .. } => *mode,
                        _ => Mode::ReleaseAcquire,
                    },
                })
                .collect(),
            sb: pairs(&self.sb),
            rf: pairs(&self.rf),
            mo: pairs(&self.mo),
            hb: pairs(&d.hb),
            fr: pairs(&d.fr),
            eco: pairs(&d.eco),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalGraph {
    pub events: Vec<(ThreadId, Action)>,
    pub sb: Vec<(u16, u16)>,
    pub rf: Vec<(u16, u16)>,
    pub mo: Vec<(u16, u16)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDump {
    pub tag: Tag,
    pub thread: ThreadId,
    pub kind: String,
    pub line: String,
    pub var: Option<String>,
    pub rval: Option<Value>,
    pub wval: Option<Value>,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub events: Vec<EventDump>,
    pub sb: Vec<(Tag, Tag)>,
    pub rf: Vec<(Tag, Tag)>,
    pub mo: Vec<(Tag, Tag)>,
    pub hb: Vec<(Tag, Tag)>,
    pub fr: Vec<(Tag, Tag)>,
    pub eco: Vec<(Tag, Tag)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init_xy() -> Graph {
        Graph::initial(&[(Var::from("x"), 0), (Var::from("y"), 0)].into_iter().collect())
    }

    fn ev(g: &Graph, thread: ThreadId, action: Action) -> TaggedAction {
        TaggedAction {
            tag: g.next_tag(),
            thread,
            action,
        }
    }

    fn rd(line: &str, var: &str, val: Value) -> Action {
        Action::Read {
            line: line.into(),
            var: Var::from(var),
            val,
            mode: Mode::Relaxed,
        }
    }

    fn wr(line: &str, var: &str, val: Value) -> Action {
        Action::Write {
            line: line.into(),
            var: Var::from(var),
            val,
            mode: Mode::Relaxed,
        }
    }

    fn upd(line: &str, var: &str, read: Value, write: Value) -> Action {
        Action::Update {
            line: line.into(),
            var: Var::from(var),
            read,
            write,
        }
    }

    #[test]
    fn insert_mo_places_immediately_after() {
        // mo = {(0,1),(1,2),(0,2)}; insert 3 after 1.
        let mo = Relation::from_pairs(4, [(0, 1), (1, 2), (0, 2)]);
        let out = insert_mo(&mo, 1, 3);
        let expected = Relation::from_pairs(4, [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (3, 2)]);
        assert_eq!(out, expected);
        // Inserting after the last write appends.
        let out = insert_mo(&mo, 2, 3);
        let expected = Relation::from_pairs(4, [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)]);
        assert_eq!(out, expected);
    }

    #[test]
    fn initial_views() {
        let g = init_xy();
        assert_eq!(g.observable_writes(1), [0, 1].into_iter().collect());
        assert!(g.encountered_writes(1).is_empty());
        assert!(g.covered_writes().is_empty());
    }

    #[test]
    fn read_rule_checks() {
        let g = init_xy();
        assert!(matches!(
            g.step_read(ev(&g, 1, rd("1", "x", 1)), 0),
            Err(MemoryError::ValueMismatch { .. })
        ));
        assert!(matches!(
            g.step_read(ev(&g, 1, rd("1", "x", 0)), 1),
            Err(MemoryError::VarMismatch { .. })
        ));
        assert!(matches!(
            g.step_read(
                TaggedAction {
                    tag: 0,
                    thread: 1,
                    action: rd("1", "x", 0)
                },
                0
            ),
            Err(MemoryError::StaleTag { .. })
        ));
        let g2 = g.step_read(ev(&g, 1, rd("1", "x", 0)), 0).unwrap();
        assert!(g2.rf().contains(0, 2));
        assert!(g2.derived().hb.contains(0, 2));
    }

    #[test]
    fn writes_shrink_own_view() {
        let g = init_xy();
        let g = g.step_write(ev(&g, 1, wr("1", "x", 1)), 0).unwrap();
        assert_eq!(g.observable_writes(1), [1, 2].into_iter().collect());
        assert_eq!(g.observable_writes(2), [0, 1, 2].into_iter().collect());
        // Thread 2 reads the new write, so it can no longer see the initial one.
        let g = g.step_read(ev(&g, 2, rd("2", "x", 1)), 2).unwrap();
        assert_eq!(g.observable_writes(2), [1, 2].into_iter().collect());
    }

    #[test]
    fn covered_writes_block_second_update() {
        let g = init_xy();
        let g = g.step_rmw(ev(&g, 1, upd("1", "x", 0, 1)), 0).unwrap();
        assert_eq!(g.covered_writes(), [0].into_iter().collect());
        assert!(matches!(
            g.step_rmw(ev(&g, 2, upd("2", "x", 0, 1)), 0),
            Err(MemoryError::Covered { w: 0 })
        ));
        assert!(matches!(
            g.step_write(ev(&g, 2, wr("2", "x", 5)), 0),
            Err(MemoryError::Covered { w: 0 })
        ));
        let g = g.step_rmw(ev(&g, 2, upd("2", "x", 1, 2)), 2).unwrap();
        g.check_wellformed().unwrap();
        assert_eq!(derived_naive(&g), *g.derived());
    }

    #[test]
    fn release_acquire_synchronises() {
        let g = init_xy();
        let g = g.step_write(ev(&g, 1, wr("1", "x", 1)), 0).unwrap();
        let rel = Action::Write {
            line: "2".into(),
            var: Var::from("y"),
            val: 1,
            mode: Mode::Release,
        };
        let g = g.step_write(ev(&g, 1, rel), 1).unwrap();
        let acq = Action::Read {
            line: "3".into(),
            var: Var::from("y"),
            val: 1,
            mode: Mode::Acquire,
        };
        let g = g.step_read(ev(&g, 2, acq), 3).unwrap();
        assert!(g.derived().hb.contains(2, 4));
        // Thread 2 has now encountered x := 1 and cannot read the initial x.
        assert!(!g.observable_writes(2).contains(&0));
        assert_eq!(derived_naive(&g), *g.derived());
    }

    #[test]
    fn incremental_matches_naive() {
        let g = init_xy();
        let g = g.step_read(ev(&g, 1, rd("1", "x", 0)), 0).unwrap();
        let g = g.step_write(ev(&g, 2, wr("4", "x", 1)), 0).unwrap();
        let g = g.step_write(ev(&g, 1, wr("2", "y", 1)), 1).unwrap();
        let g = g.step_read(ev(&g, 2, rd("3", "y", 1)), 4).unwrap();
        assert_eq!(derived_naive(&g), *g.derived());
        g.check_wellformed().unwrap();
    }

    #[test]
    fn canonical_ignores_tag_order() {
        let a = init_xy();
        let a = a.step_write(ev(&a, 1, wr("1", "x", 1)), 0).unwrap();
        let a = a.step_write(ev(&a, 2, wr("2", "y", 1)), 1).unwrap();
        let b = init_xy();
        let b = b.step_write(ev(&b, 2, wr("2", "y", 1)), 1).unwrap();
        let b = b.step_write(ev(&b, 1, wr("1", "x", 1)), 0).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.canonical(), b.canonical());
    }
}
