//! Futures: labelled partial orders of events still to be executed.
//!
//! A [`Future`] keeps its order transitively closed, so availability is a
//! check for the absence of predecessors.

use crate::lang::{Action, Label, ThreadId, Value};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl fmt::Debug for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventLabel {
    pub thread: ThreadId,
    pub action: Action,
}

pub type Labeling = BTreeMap<EventId, EventLabel>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FutureError {
    #[error("order is cyclic at event {0}")]
    Cyclic(EventId),
    #[error("order mentions event {0} outside the future")]
    UnknownEvent(EventId),
    #[error("action `{0}` is not available")]
    NotAvailable(String),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Future {
    events: BTreeSet<EventId>,
    order: BTreeSet<(EventId, EventId)>,
}

impl fmt::Debug for Future {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{:?} | {:?}}}", self.events, self.order)
    }
}

impl Future {
    /// Builds a future from an order that need not be transitive.
    pub fn new(
        events: BTreeSet<EventId>,
        edges: impl IntoIterator<Item = (EventId, EventId)>,
    ) -> Result<Future, FutureError> {
        let order = close(&events, edges)?;
        Ok(Future { events, order })
    }

    pub fn empty() -> Future {
        Future::default()
    }

    pub fn events(&self) -> &BTreeSet<EventId> {
        &self.events
    }

    pub fn order(&self) -> &BTreeSet<(EventId, EventId)> {
        &self.order
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn precedes(&self, a: EventId, b: EventId) -> bool {
        self.order.contains(&(a, b))
    }

    pub fn is_minimal(&self, e: EventId) -> bool {
        self.events.contains(&e) && !self.order.iter().any(|(_, b)| *b == e)
    }

    pub fn minimal(&self) -> impl Iterator<Item = EventId> + '_ {
        self.events.iter().copied().filter(|e| self.is_minimal(*e))
    }

    /// Sub-future on the events satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(EventId) -> bool) -> Future {
        Future {
            events: self.events.iter().copied().filter(|e| keep(*e)).collect(),
            order: self
                .order
                .iter()
                .copied()
                .filter(|(a, b)| keep(*a) && keep(*b))
                .collect(),
        }
    }

    /// Whether `self` is an up-closed sub-poset of `other`.
    pub fn is_upclosed_in(&self, other: &Future) -> bool {
        self.events.is_subset(&other.events)
            && other
                .order
                .iter()
                .all(|(a, b)| !self.events.contains(a) || self.events.contains(b))
            && other
                .order
                .iter()
                .filter(|(a, b)| self.events.contains(a) && self.events.contains(b))
                .all(|p| self.order.contains(p))
            && self.order.iter().all(|p| other.order.contains(p))
    }
}

fn close(
    events: &BTreeSet<EventId>,
    edges: impl IntoIterator<Item = (EventId, EventId)>,
) -> Result<BTreeSet<(EventId, EventId)>, FutureError> {
    let idx: BTreeMap<EventId, usize> = events.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let ids: Vec<EventId> = events.iter().copied().collect();
    let mut rel = crate::relation::Relation::new(ids.len());
    for (a, b) in edges {
        let ia = *idx.get(&a).ok_or(FutureError::UnknownEvent(a))?;
        let ib = *idx.get(&b).ok_or(FutureError::UnknownEvent(b))?;
        rel.insert(ia, ib);
    }
    let c = rel.transitive_closure();
    if let Some(i) = (0..ids.len()).find(|&i| c.contains(i, i)) {
        return Err(FutureError::Cyclic(ids[i]));
    }
    Ok(c.pairs().map(|(a, b)| (ids[a], ids[b])).collect())
}

fn action_of(lab: &Labeling, e: EventId) -> &Action {
    &lab[&e].action
}

pub fn available(a: &Action, f: &Future, lab: &Labeling) -> bool {
    f.minimal().any(|e| action_of(lab, e) == a)
}

/// `a ▷ f`: the future left after performing `a`.
pub fn consume(a: &Action, f: &Future, lab: &Labeling) -> Result<Future, FutureError> {
    if !available(a, f, lab) {
        return Err(FutureError::NotAvailable(a.to_string()));
    }
    Ok(f.restrict(|e| action_of(lab, e) != a))
}

/// A set of futures together with the labelling of their events.
#[derive(Clone)]
pub struct FutureSet {
    pub futures: BTreeSet<Future>,
    pub labels: Arc<Labeling>,
}

impl PartialEq for FutureSet {
    fn eq(&self, other: &Self) -> bool {
        self.futures == other.futures
    }
}

impl Eq for FutureSet {}

impl Hash for FutureSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.futures.hash(state)
    }
}

impl fmt::Debug for FutureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.futures).finish()
    }
}

impl FutureSet {
    pub fn new(futures: BTreeSet<Future>, labels: Arc<Labeling>) -> Self {
        FutureSet { futures, labels }
    }

    pub fn is_empty(&self) -> bool {
        self.futures.is_empty()
    }

    pub fn len(&self) -> usize {
        self.futures.len()
    }

    /// True when every future has been fully consumed.
    pub fn is_exhausted(&self) -> bool {
        self.futures.iter().all(Future::is_empty)
    }

    pub fn thread_of(&self, e: EventId) -> ThreadId {
        self.labels[&e].thread
    }

    pub fn action(&self, e: EventId) -> &Action {
        &self.labels[&e].action
    }

    /// Renders a future with labels, e.g. `{R 1 x 0 < W 2 y 1, R 3 y 0}`.
    pub fn describe(&self, f: &Future) -> String {
        let items: Vec<String> = f.events.iter().map(|e| self.action(*e).to_string()).collect();
        let order: Vec<String> = f
            .order
            .iter()
            .map(|(a, b)| format!("{} < {}", self.action(*a), self.action(*b)))
            .collect();
        format!("{{{}}} with {{{}}}", items.join(", "), order.join(", "))
    }
}

/// `a ▷ F`: futures in which `a` is available, each with `a` consumed.
pub fn candidate_futures(a: &Action, fs: &FutureSet) -> FutureSet {
    let futures = fs
        .futures
        .iter()
        .filter(|f| available(a, f, &fs.labels))
        .map(|f| f.restrict(|e| action_of(&fs.labels, e) != a))
        .collect();
    FutureSet {
        futures,
        labels: fs.labels.clone(),
    }
}

pub fn restrict_to_thread(fs: &FutureSet, t: ThreadId) -> FutureSet {
    let futures = fs
        .futures
        .iter()
        .map(|f| f.restrict(|e| fs.labels[&e].thread == t))
        .collect();
    FutureSet {
        futures,
        labels: fs.labels.clone(),
    }
}

/// Every element of `sub` is an up-closed sub-poset of some element of `sup`.
pub fn is_subfuture(sub: &FutureSet, sup: &FutureSet) -> bool {
    sub.futures
        .iter()
        .all(|f| sup.futures.iter().any(|g| f.is_upclosed_in(g)))
}

/// Futures kept as a product of per-thread future sets. Consuming an action of
/// thread `t` only touches the `t` component, so the product form is preserved.
#[derive(Clone)]
pub struct ThreadFutures {
    pub threads: BTreeMap<ThreadId, BTreeSet<Future>>,
    pub labels: Arc<Labeling>,
}

impl PartialEq for ThreadFutures {
    fn eq(&self, other: &Self) -> bool {
        self.threads == other.threads
    }
}

impl Eq for ThreadFutures {}

impl Hash for ThreadFutures {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.threads.hash(state)
    }
}

impl fmt::Debug for ThreadFutures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(&self.threads).finish()
    }
}

impl ThreadFutures {
    pub fn candidate(&self, t: ThreadId, a: &Action) -> Option<ThreadFutures> {
        let comp = self.threads.get(&t)?;
        let next: BTreeSet<Future> = comp
            .iter()
            .filter(|f| available(a, f, &self.labels))
            .map(|f| f.restrict(|e| action_of(&self.labels, e) != a))
            .collect();
        if next.is_empty() {
            return None;
        }
        let mut out = self.clone();
        out.threads.insert(t, next);
        Some(out)
    }

    pub fn is_exhausted(&self) -> bool {
        self.threads.values().all(|c| c.iter().all(Future::is_empty))
    }

    pub fn component(&self, t: ThreadId) -> FutureSet {
        FutureSet {
            futures: self.threads.get(&t).cloned().unwrap_or_default(),
            labels: self.labels.clone(),
        }
    }

    /// Number of futures in the flattened product.
    pub fn product_size(&self) -> usize {
        self.threads.values().map(BTreeSet::len).product()
    }

    /// The flat future set: one future per choice of a future from each thread.
    pub fn flatten(&self) -> FutureSet {
        let mut acc: Vec<Future> = vec![Future::empty()];
        for comp in self.threads.values() {
            let mut next = Vec::with_capacity(acc.len() * comp.len());
            for f in &acc {
                for g in comp {
                    let mut h = f.clone();
                    h.events.extend(g.events.iter().copied());
                    h.order.extend(g.order.iter().copied());
                    next.push(h);
                }
            }
            acc = next;
        }
        FutureSet {
            futures: acc.into_iter().collect(),
            labels: self.labels.clone(),
        }
    }

    /// Recovers the product form of a flat set when it is a product.
    pub fn try_from_flat(fs: &FutureSet, threads: &BTreeSet<ThreadId>) -> Option<ThreadFutures> {
        let comps: BTreeMap<ThreadId, BTreeSet<Future>> = threads
            .iter()
            .map(|t| (*t, restrict_to_thread(fs, *t).futures))
            .collect();
        if fs
            .futures
            .iter()
            .any(|f| f.order.iter().any(|(a, b)| fs.thread_of(*a) != fs.thread_of(*b)))
        {
            return None;
        }
        let tf = ThreadFutures {
            threads: comps,
            labels: fs.labels.clone(),
        };
        if tf.product_size() == fs.futures.len() && tf.flatten() == *fs {
            Some(tf)
        } else {
            None
        }
    }
}

/// A line label, subscripted with the read value for reads.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelItem {
    pub line: Label,
    pub rval: Option<Value>,
}

impl LabelItem {
    pub fn of(a: &Action) -> LabelItem {
        let rval = match a {
            Action::Read { val, .. } => Some(*val),
            _ => None,
        };
        LabelItem {
            line: a.line().clone(),
            rval,
        }
    }
}

impl fmt::Display for LabelItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rval {
            Some(v) => write!(f, "{}@{}", self.line, v),
            None => write!(f, "{}", self.line),
        }
    }
}

impl fmt::Debug for LabelItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LabelFuture {
    pub items: BTreeSet<LabelItem>,
    pub order: BTreeSet<(LabelItem, LabelItem)>,
}

impl fmt::Debug for LabelFuture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for LabelFuture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.items.iter().map(|i| i.to_string()).collect();
        let order: Vec<String> = self.order.iter().map(|(a, b)| format!("{a}<{b}")).collect();
        write!(f, "{{{}}}", items.join(","))?;
        if !order.is_empty() {
            write!(f, "[{}]", order.join(","))?;
        }
        Ok(())
    }
}

impl LabelFuture {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn is_minimal(&self, i: &LabelItem) -> bool {
        self.items.contains(i) && !self.order.iter().any(|(_, b)| b == i)
    }

    pub fn available(&self, a: &Action) -> bool {
        self.is_minimal(&LabelItem::of(a))
    }

    pub fn consume(&self, a: &Action) -> LabelFuture {
        let it = LabelItem::of(a);
        LabelFuture {
            items: self.items.iter().filter(|i| **i != it).cloned().collect(),
            order: self
                .order
                .iter()
                .filter(|(x, y)| *x != it && *y != it)
                .cloned()
                .collect(),
        }
    }

    pub fn restrict(&self, keep: impl Fn(&LabelItem) -> bool) -> LabelFuture {
        LabelFuture {
            items: self.items.iter().filter(|i| keep(i)).cloned().collect(),
            order: self.order.iter().filter(|(a, b)| keep(a) && keep(b)).cloned().collect(),
        }
    }

    /// Collapses an event future to labels without checking faithfulness.
    pub fn from_future(f: &Future, lab: &Labeling) -> LabelFuture {
        LabelFuture {
            items: f.events.iter().map(|e| LabelItem::of(action_of(lab, *e))).collect(),
            order: f
                .order
                .iter()
                .map(|(a, b)| (LabelItem::of(action_of(lab, *a)), LabelItem::of(action_of(lab, *b))))
                .collect(),
        }
    }
}

/// Futures over line labels. `owner` maps each line to its thread.
#[derive(Clone)]
pub struct LabelFutureSet {
    pub futures: BTreeSet<LabelFuture>,
    pub owner: Arc<BTreeMap<Label, ThreadId>>,
}

impl PartialEq for LabelFutureSet {
    fn eq(&self, other: &Self) -> bool {
        self.futures == other.futures
    }
}

impl Eq for LabelFutureSet {}

impl Hash for LabelFutureSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.futures.hash(state)
    }
}

impl fmt::Debug for LabelFutureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.futures).finish()
    }
}

impl LabelFutureSet {
    pub fn candidate(&self, a: &Action) -> LabelFutureSet {
        LabelFutureSet {
            futures: self
                .futures
                .iter()
                .filter(|f| f.available(a))
                .map(|f| f.consume(a))
                .collect(),
            owner: self.owner.clone(),
        }
    }

    pub fn restrict_to_thread(&self, t: ThreadId) -> BTreeSet<LabelFuture> {
        self.futures
            .iter()
            .map(|f| f.restrict(|i| self.owner.get(&i.line) == Some(&t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollapseError {
    #[error("label {item} occurs twice in future {future}")]
    DuplicateLabel { item: String, future: String },
    #[error("labels {a} and {b} are ordered in {ordered} but not in {unordered}")]
    InconsistentOrder {
        a: String,
        b: String,
        ordered: String,
        unordered: String,
    },
}

/// Replaces events by line labels (reads keep their value). Rejected when a
/// label repeats inside a future or two labels are ordered differently in two
/// futures, since then the collapsed set would not behave like the original.
pub fn collapse_labels(fs: &FutureSet) -> Result<LabelFutureSet, CollapseError> {
    let mut out = BTreeSet::new();
    let mut owner = BTreeMap::new();
    // For every pair of items seen together: whether ordered, and a witness.
    let mut pairs: BTreeMap<(LabelItem, LabelItem), (bool, String)> = BTreeMap::new();
    for f in &fs.futures {
        let mut items = BTreeSet::new();
        for e in &f.events {
            let l = &fs.labels[e];
            owner.insert(l.action.line().clone(), l.thread);
            let it = LabelItem::of(&l.action);
            if !items.insert(it.clone()) {
                return Err(CollapseError::DuplicateLabel {
                    item: it.to_string(),
                    future: fs.describe(f),
                });
            }
        }
        let lf = LabelFuture::from_future(f, &fs.labels);
        for a in &lf.items {
            for b in &lf.items {
                if a >= b {
                    continue;
                }
                let ordered = lf.order.contains(&(a.clone(), b.clone()));
                let rev = lf.order.contains(&(b.clone(), a.clone()));
                for (key, ord) in [((a.clone(), b.clone()), ordered), ((b.clone(), a.clone()), rev)] {
                    match pairs.get(&key) {
                        Some((prev, witness)) if *prev != ord => {
                            let (ordered_in, unordered_in) = if *prev {
                                (witness.clone(), lf.to_string())
                            } else {
                                (lf.to_string(), witness.clone())
                            };
                            return Err(CollapseError::InconsistentOrder {
                                a: key.0.to_string(),
                                b: key.1.to_string(),
                                ordered: ordered_in,
                                unordered: unordered_in,
                            });
                        }
                        Some(_) => {}
                        None => {
                            pairs.insert(key, (ord, lf.to_string()));
                        }
                    }
                }
            }
        }
        out.insert(lf);
    }
    Ok(LabelFutureSet {
        futures: out,
        owner: Arc::new(owner),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{Mode, Var};

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

    fn labeling(items: &[(u32, ThreadId, Action)]) -> Arc<Labeling> {
        Arc::new(
            items
                .iter()
                .map(|(e, t, a)| {
                    (
                        EventId(*e),
                        EventLabel {
                            thread: *t,
                            action: a.clone(),
                        },
                    )
                })
                .collect(),
        )
    }

    fn fut(events: &[u32], order: &[(u32, u32)]) -> Future {
        Future::new(
            events.iter().map(|e| EventId(*e)).collect(),
            order.iter().map(|(a, b)| (EventId(*a), EventId(*b))),
        )
        .unwrap()
    }

    #[test]
    fn availability_respects_order() {
        let lab = labeling(&[(1, 1, rd("1", "x", 0)), (2, 1, wr("2", "y", 1))]);
        let f = fut(&[1, 2], &[(1, 2)]);
        assert!(available(&rd("1", "x", 0), &f, &lab));
        assert!(!available(&wr("2", "y", 1), &f, &lab));
        let g = consume(&rd("1", "x", 0), &f, &lab).unwrap();
        assert!(available(&wr("2", "y", 1), &g, &lab));
        assert!(consume(&wr("2", "y", 1), &f, &lab).is_err());
    }

    #[test]
    fn closure_and_cycles() {
        let f = fut(&[1, 2, 3], &[(1, 2), (2, 3)]);
        assert!(f.precedes(EventId(1), EventId(3)));
        let bad = Future::new(
            [EventId(1), EventId(2)].into_iter().collect(),
            [(EventId(1), EventId(2)), (EventId(2), EventId(1))],
        );
        assert!(matches!(bad, Err(FutureError::Cyclic(_))));
    }

    #[test]
    fn candidate_filters_and_consumes() {
        let lab = labeling(&[
            (1, 1, rd("1", "x", 0)),
            (2, 1, rd("1", "x", 1)),
            (3, 2, wr("4", "x", 1)),
        ]);
        let fs = FutureSet::new([fut(&[1, 3], &[]), fut(&[2, 3], &[])].into_iter().collect(), lab);
        let c = candidate_futures(&rd("1", "x", 1), &fs);
        assert_eq!(c.futures, [fut(&[3], &[])].into_iter().collect());
        let none = candidate_futures(&rd("1", "x", 5), &fs);
        assert!(none.is_empty());
    }

    #[test]
    fn subfuture_requires_upclosure() {
        let lab = labeling(&[(1, 1, rd("1", "x", 0)), (2, 1, wr("2", "y", 1))]);
        let big = FutureSet::new([fut(&[1, 2], &[(1, 2)])].into_iter().collect(), lab.clone());
        let tail = FutureSet::new([fut(&[2], &[])].into_iter().collect(), lab.clone());
        let head = FutureSet::new([fut(&[1], &[])].into_iter().collect(), lab);
        assert!(is_subfuture(&tail, &big));
        assert!(!is_subfuture(&head, &big));
    }

    #[test]
    fn product_roundtrip() {
        let lab = labeling(&[
            (1, 1, rd("1", "x", 0)),
            (2, 1, rd("1", "x", 1)),
            (3, 2, wr("4", "x", 1)),
        ]);
        let tf = ThreadFutures {
            threads: [
                (1, [fut(&[1], &[]), fut(&[2], &[])].into_iter().collect()),
                (2, [fut(&[3], &[])].into_iter().collect()),
            ]
            .into_iter()
            .collect(),
            labels: lab,
        };
        let flat = tf.flatten();
        assert_eq!(flat.len(), 2);
        let back = ThreadFutures::try_from_flat(&flat, &[1, 2].into_iter().collect()).unwrap();
        assert_eq!(back, tf);
    }

    #[test]
    fn collapse_rejects_inconsistent_shapes() {
        let lab = labeling(&[
            (1, 1, wr("1", "x", 1)),
            (2, 1, wr("2", "y", 1)),
            (3, 1, wr("1", "x", 2)),
            (4, 1, wr("2", "y", 2)),
        ]);
        let fs = FutureSet::new([fut(&[1, 2], &[(1, 2)]), fut(&[3, 4], &[])].into_iter().collect(), lab);
        assert!(matches!(
            collapse_labels(&fs),
            Err(CollapseError::InconsistentOrder { .. })
        ));
    }

    #[test]
    fn collapse_rejects_duplicates() {
        let lab = labeling(&[(1, 1, wr("1", "x", 1)), (2, 1, wr("1", "x", 2))]);
        let fs = FutureSet::new([fut(&[1, 2], &[])].into_iter().collect(), lab);
        assert!(matches!(
            collapse_labels(&fs),
            Err(CollapseError::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn collapse_keeps_read_values() {
        let lab = labeling(&[
            (1, 1, rd("1", "x", 0)),
            (2, 1, wr("2", "y", 1)),
            (3, 1, rd("1", "x", 1)),
            (4, 1, wr("2", "y", 2)),
        ]);
        let fs = FutureSet::new(
            [fut(&[1, 2], &[(1, 2)]), fut(&[3, 4], &[(3, 4)])].into_iter().collect(),
            lab,
        );
        let c = collapse_labels(&fs).unwrap();
        let shown: Vec<String> = c.futures.iter().map(|f| f.to_string()).collect();
        assert_eq!(shown, vec!["{1@0,2}[1@0<2]", "{1@1,2}[1@1<2]"]);
    }
}
