//! The happened-before relation and its backends.
//!
//! Both backends work on the same reduced edge set: the non-deliver events
//! of a pid form one chain, its deliveries another, and the remaining clauses
//! add spawn, send/deliver, deliver/rec and exit edges.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Action, EventRef, Trace};
use crate::ids::{Pid, Tag};

/// A strict causal order over the events of one trace.
pub trait CausalOrder: Send + Sync {
    fn name(&self) -> &'static str;

    /// `e1 ⇝ e2`. False for positions outside the trace.
    fn happened_before(&self, e1: EventRef, e2: EventRef) -> bool;

    fn independent(&self, e1: EventRef, e2: EventRef) -> bool {
        !self.happened_before(e1, e2) && !self.happened_before(e2, e1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("unknown causal order backend `{0}`")]
    Unknown(String),
    #[error("the base relation of this trace has a cycle")]
    Cyclic,
}

type Builder = fn(&Trace) -> Result<Box<dyn CausalOrder>, OrderError>;

/// Backends by name.
pub struct OrderRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl Default for OrderRegistry {
    fn default() -> Self {
        let mut r = OrderRegistry {
            builders: BTreeMap::new(),
        };
        r.register("closure", |t| Ok(Box::new(ClosureOrder::new(t))));
        r.register("vclock", |t| Ok(Box::new(VectorClockOrder::new(t)?)));
        r
    }
}

impl OrderRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, name: &str, trace: &Trace) -> Result<Box<dyn CausalOrder>, OrderError> {
        let b = self
            .builders
            .get(name)
            .ok_or_else(|| OrderError::Unknown(name.to_string()))?;
        b(trace)
    }
}

/// Dense numbering of the events of a trace plus the base edges.
struct Graph {
    offsets: BTreeMap<Pid, (usize, usize)>,
    succ: Vec<Vec<usize>>,
}

impl Graph {
    fn new(trace: &Trace) -> Self {
        let mut offsets = BTreeMap::new();
        let mut n = 0;
        for (&pid, seq) in &trace.0 {
            offsets.insert(pid, (n, seq.len()));
            n += seq.len();
        }
        let mut succ = vec![Vec::new(); n];
        let mut sends: HashMap<Tag, Vec<usize>> = HashMap::new();
        let mut delivers: HashMap<Tag, Vec<usize>> = HashMap::new();
        let mut recs: HashMap<Tag, Vec<usize>> = HashMap::new();
        let mut spawns: Vec<(usize, Pid)> = Vec::new();

        for (&pid, seq) in &trace.0 {
            let base = offsets[&pid].0;
            let (mut last_plain, mut last_deliver): (Option<usize>, Option<(usize, Tag)>) = (None, None);
            for (i, a) in seq.iter().enumerate() {
                let id = base + i;
                match *a {
                    Action::Deliver { tag } => {
                        // (2) deliveries of distinct tags, in order.
                        if let Some((prev, t)) = last_deliver {
                            if t != tag {
                                succ[prev].push(id);
                            }
                        }
                        last_deliver = Some((id, tag));
                        delivers.entry(tag).or_default().push(id);
                    }
                    _ => {
                        // (1) program order of everything else.
                        if let Some(prev) = last_plain {
                            succ[prev].push(id);
                        }
                        last_plain = Some(id);
                    }
                }
                match *a {
                    Action::Send { tag, .. } => sends.entry(tag).or_default().push(id),
                    Action::Rec { tag } => recs.entry(tag).or_default().push(id),
                    Action::Spawn { child } => spawns.push((id, child)),
                    Action::Exit => {
                        // (6) every other event of the pid before its exit.
                        for j in 0..seq.len() {
                            if j != i {
                                succ[base + j].push(id);
                            }
                        }
                    }
                    Action::Deliver { .. } => {}
                }
            }
        }
        // (3) spawn before the heads of both chains of the child.
        for (id, child) in spawns {
            if let Some(seq) = trace.0.get(&child) {
                let base = offsets[&child].0;
                if let Some(i) = seq.iter().position(|a| !a.is_deliver()) {
                    succ[id].push(base + i);
                }
                if let Some(i) = seq.iter().position(Action::is_deliver) {
                    succ[id].push(base + i);
                }
            }
        }
        // (4) send before deliver, (5) deliver before rec.
        for (tag, ds) in &delivers {
            for &d in ds {
                for &s in sends.get(tag).into_iter().flatten() {
                    succ[s].push(d);
                }
                for &r in recs.get(tag).into_iter().flatten() {
                    succ[d].push(r);
                }
            }
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        Graph { offsets, succ }
    }

    fn node(&self, r: EventRef) -> Option<usize> {
        let &(base, len) = self.offsets.get(&r.pid)?;
        (r.index < len).then_some(base + r.index)
    }

    fn len(&self) -> usize {
        self.succ.len()
    }
}

/// Reachability over the base edges, one bit row per event.
pub struct ClosureOrder {
    graph: Graph,
    words: usize,
    reach: Vec<u64>,
}

impl ClosureOrder {
    pub fn new(trace: &Trace) -> Self {
        let graph = Graph::new(trace);
        let n = graph.len();
        let words = n.div_ceil(64).max(1);
        let mut reach = vec![0u64; n * words];
        let mut stack = Vec::new();
        for src in 0..n {
            let row = &mut reach[src * words..(src + 1) * words];
            stack.clear();
            stack.extend(graph.succ[src].iter().copied());
            while let Some(v) = stack.pop() {
                let (w, b) = (v / 64, v % 64);
                if row[w] & (1 << b) != 0 {
                    continue;
                }
                row[w] |= 1 << b;
                stack.extend(graph.succ[v].iter().copied());
            }
        }
        ClosureOrder { graph, words, reach }
    }
}

impl CausalOrder for ClosureOrder {
    fn name(&self) -> &'static str {
        "closure"
    }

    fn happened_before(&self, e1: EventRef, e2: EventRef) -> bool {
        match (self.graph.node(e1), self.graph.node(e2)) {
            (Some(a), Some(b)) => self.reach[a * self.words + b / 64] & (1 << (b % 64)) != 0,
            _ => false,
        }
    }
}

/// Vector clocks over the two chains of every pid. Needs an acyclic base
/// relation, which every realizable trace has.
pub struct VectorClockOrder {
    graph: Graph,
    chain: Vec<(usize, u32)>,
    clocks: Vec<Vec<u32>>,
}

impl VectorClockOrder {
    pub fn new(trace: &Trace) -> Result<Self, OrderError> {
        let graph = Graph::new(trace);
        let n = graph.len();
        let mut chain = vec![(0, 0); n];
        for (k, (&pid, seq)) in trace.0.iter().enumerate() {
            let base = graph.offsets[&pid].0;
            let (mut plain, mut deliv) = (0u32, 0u32);
            for (i, a) in seq.iter().enumerate() {
                chain[base + i] = if a.is_deliver() {
                    deliv += 1;
                    (2 * k + 1, deliv)
                } else {
                    plain += 1;
                    (2 * k, plain)
                };
            }
        }
        let chains = 2 * trace.0.len();

        let mut indeg = vec![0usize; n];
        for s in &graph.succ {
            for &v in s {
                indeg[v] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut clocks = vec![vec![0u32; chains]; n];
        let mut done = 0;
        while let Some(v) = ready.pop() {
            done += 1;
            let (c, pos) = chain[v];
            clocks[v][c] = clocks[v][c].max(pos);
            for &w in &graph.succ[v] {
                let (head, tail) = if v < w {
                    let (a, b) = clocks.split_at_mut(w);
                    (&a[v], &mut b[0])
                } else {
                    let (a, b) = clocks.split_at_mut(v);
                    (&b[0], &mut a[w])
                };
                for (t, h) in tail.iter_mut().zip(head) {
                    *t = (*t).max(*h);
                }
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        if done < n {
            return Err(OrderError::Cyclic);
        }
        Ok(VectorClockOrder {
            graph,
            chain,
            clocks,
        })
    }
}

impl CausalOrder for VectorClockOrder {
    fn name(&self) -> &'static str {
        "vclock"
    }

    fn happened_before(&self, e1: EventRef, e2: EventRef) -> bool {
        match (self.graph.node(e1), self.graph.node(e2)) {
            (Some(a), Some(b)) if a != b => {
                let (c, pos) = self.chain[a];
                self.clocks[b][c] >= pos
            }
            _ => false,
        }
    }
}

/// `e1 ⇝τ e2`, computed with the closure backend.
pub fn happened_before(trace: &Trace, e1: EventRef, e2: EventRef) -> bool {
    ClosureOrder::new(trace).happened_before(e1, e2)
}

pub fn independent(trace: &Trace, e1: EventRef, e2: EventRef) -> bool {
    ClosureOrder::new(trace).independent(e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::fixtures::*;

    fn r(pid: u32, i: usize) -> EventRef {
        EventRef::new(p(pid), i)
    }

    fn backends(t: &Trace) -> Vec<Box<dyn CausalOrder>> {
        let reg = OrderRegistry::default();
        reg.names().map(|n| reg.build(n, t).unwrap()).collect()
    }

    #[test]
    fn star_examples() {
        let t = star();
        for o in backends(&t) {
            // send(l1) ⇝ rec(l1) through deliver(l1).
            assert!(o.happened_before(r(1, 2), r(2, 1)), "{}", o.name());
            // deliver(l2) and rec(l1) are unordered.
            assert!(!o.happened_before(r(2, 2), r(2, 1)));
            assert!(!o.happened_before(r(2, 1), r(2, 2)));
            assert!(o.independent(r(2, 2), r(2, 1)));
            // spawn(p3) ⇝ send(l2).
            assert!(o.happened_before(r(1, 1), r(3, 0)));
            // deliver(l2) ⇝ deliver(l3).
            assert!(!o.independent(r(2, 2), r(2, 3)));
            assert!(o.independent(r(1, 2), r(3, 0)));
            // exit excluded from its own clause 6.
            assert!(!o.happened_before(r(1, 3), r(1, 3)));
            assert!(o.happened_before(r(1, 0), r(1, 3)));
        }
    }

    #[test]
    fn out_of_range_is_false() {
        let o = ClosureOrder::new(&star());
        assert!(!o.happened_before(r(1, 0), r(1, 9)));
        assert!(!o.happened_before(r(7, 0), r(1, 1)));
    }

    #[test]
    fn unknown_backend() {
        assert!(matches!(
            OrderRegistry::default().build("lamport", &star()),
            Err(OrderError::Unknown(_))
        ));
    }

    #[test]
    fn vclock_rejects_cycles() {
        let t = trace(vec![
            (1, vec![spawn(2), rec(2), send(1, 2)]),
            (2, vec![rec(1), send(2, 1)]),
        ]);
        let mut t = t;
        t.0.get_mut(&p(1)).unwrap().insert(1, deliver(2));
        t.0.get_mut(&p(2)).unwrap().insert(0, deliver(1));
        assert!(matches!(VectorClockOrder::new(&t), Err(OrderError::Cyclic)));
        let c = ClosureOrder::new(&t);
        assert!(c.happened_before(r(2, 1), r(2, 1)));
    }
}
