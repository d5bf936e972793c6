#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use kern_core::lang::{parse, Program};
use kern_core::runtime::TransitionChoice;
use kern_core::trace::{Action, Event, EventRef, Trace};
use kern_core::{Pid, Tag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every `.kern` program of the corpus, by file stem.
pub fn corpus() -> Vec<(String, Program)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "kern") {
            let src = std::fs::read_to_string(&path).unwrap();
            let prog = parse(&src).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            out.push((path.file_stem().unwrap().to_string_lossy().into_owned(), prog));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn program(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{name}.kern"))).unwrap();
    parse(&src).unwrap()
}

pub fn schedule(name: &str) -> Vec<TransitionChoice> {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.sched"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn p(n: u32) -> Pid {
    Pid(n)
}

pub fn l(n: u32) -> Tag {
    Tag(n)
}

/// Trace (*): the fig1b schedule with exits.
pub fn star_trace() -> Trace {
    let send = |t, to| Action::Send { tag: l(t), to: p(to) };
    let deliver = |t| Action::Deliver { tag: l(t) };
    Trace(BTreeMap::from([
        (
            p(1),
            vec![
                Action::Spawn { child: p(2) },
                Action::Spawn { child: p(3) },
                send(1, 2),
                Action::Exit,
            ],
        ),
        (p(2), vec![deliver(1), Action::Rec { tag: l(1) }, deliver(2), deliver(3)]),
        (p(3), vec![send(2, 2), send(3, 2), Action::Exit]),
    ]))
}

/// The fig1c schedule with exits added as in (*).
pub fn fig1c_trace() -> Trace {
    let mut t = star_trace();
    t.0.insert(
        p(2),
        vec![
            Action::Deliver { tag: l(2) },
            Action::Deliver { tag: l(1) },
            Action::Rec { tag: l(1) },
            Action::Deliver { tag: l(3) },
        ],
    );
    t
}

/// Events of a random execution of an abstract message-passing system:
/// processes spawn, send to known pids, receive deliveries from FIFO
/// queues, consume any delivered message, and exit. At most `max` events.
pub fn random_events(seed: u64, max: usize) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: Vec<Pid> = vec![p(1)];
    let mut known: Vec<Pid> = vec![p(1)];
    let mut queues: BTreeMap<(Pid, Pid), VecDeque<Tag>> = BTreeMap::new();
    let mut mailbox: BTreeMap<Pid, Vec<Tag>> = BTreeMap::new();
    let (mut next_pid, mut next_tag) = (2, 1);
    let mut events = Vec::new();
    let target = rng.gen_range(1..=max);
    while events.len() < target && !live.is_empty() {
        let pid = live[rng.gen_range(0..live.len())];
        let action = match rng.gen_range(0..10) {
            0..=1 => {
                let child = p(next_pid);
                next_pid += 1;
                live.push(child);
                known.push(child);
                Action::Spawn { child }
            }
            2..=4 => {
                let to = known[rng.gen_range(0..known.len())];
                let tag = l(next_tag);
                next_tag += 1;
                queues.entry((pid, to)).or_default().push_back(tag);
                Action::Send { tag, to }
            }
            5..=6 => {
                let from: Vec<Pid> = queues
                    .iter()
                    .filter(|((_, to), q)| *to == pid && !q.is_empty())
                    .map(|((f, _), _)| *f)
                    .collect();
                if from.is_empty() {
                    continue;
                }
                let f = from[rng.gen_range(0..from.len())];
                let tag = queues.get_mut(&(f, pid)).unwrap().pop_front().unwrap();
                mailbox.entry(pid).or_default().push(tag);
                Action::Deliver { tag }
            }
            7..=8 => {
                let mb = mailbox.entry(pid).or_default();
                if mb.is_empty() {
                    continue;
                }
                let tag = mb.remove(rng.gen_range(0..mb.len()));
                Action::Rec { tag }
            }
            _ => {
                if rng.gen_bool(0.5) {
                    continue;
                }
                live.retain(|&q| q != pid);
                Action::Exit
            }
        };
        events.push(Event { pid, action });
    }
    events
}

pub fn random_trace(seed: u64, max: usize) -> Trace {
    let events = random_events(seed, max);
    let mut t = Trace::from_events(&events);
    t.0.entry(p(1)).or_default();
    t
}

/// Happened-before by the six defining clauses followed by Floyd–Warshall.
/// The exit clause is applied to distinct events only.
pub struct Oracle {
    pub refs: Vec<EventRef>,
    index: BTreeMap<EventRef, usize>,
    reach: Vec<Vec<bool>>,
}

impl Oracle {
    pub fn new(t: &Trace) -> Self {
        let refs: Vec<EventRef> = t
            .0
            .iter()
            .flat_map(|(&pid, seq)| (0..seq.len()).map(move |i| EventRef { pid, index: i }))
            .collect();
        let index: BTreeMap<EventRef, usize> = refs.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let n = refs.len();
        let act = |r: EventRef| t.0[&r.pid][r.index];
        let mut reach = vec![vec![false; n]; n];
        for (i, &e1) in refs.iter().enumerate() {
            for (j, &e2) in refs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (a1, a2) = (act(e1), act(e2));
                let same = e1.pid == e2.pid;
                let before = same && e1.index < e2.index;
                let direct = (before && !a1.is_deliver() && !a2.is_deliver())
                    || match (a1, a2) {
                        (Action::Deliver { tag: k1 }, Action::Deliver { tag: k2 }) => before && k1 != k2,
                        _ => false,
                    }
                    || a1 == Action::Spawn { child: e2.pid }
                    || matches!((a1, a2), (Action::Send { tag: k1, .. }, Action::Deliver { tag: k2 }) if k1 == k2)
                    || matches!((a1, a2), (Action::Deliver { tag: k1 }, Action::Rec { tag: k2 }) if k1 == k2)
                    || (same && a2 == Action::Exit);
                reach[i][j] = direct;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    let row = reach[k].clone();
                    for (cell, via) in reach[i].iter_mut().zip(row) {
                        *cell |= via;
                    }
                }
            }
        }
        Oracle { refs, index, reach }
    }

    pub fn hb(&self, a: EventRef, b: EventRef) -> bool {
        self.reach[self.index[&a]][self.index[&b]]
    }
}

/// Race set of a receive straight from its definition, using the oracle.
pub fn oracle_race_set(t: &Trace, o: &Oracle, e_r: EventRef) -> BTreeSet<Tag> {
    let Action::Rec { tag: consumed } = t.0[&e_r.pid][e_r.index] else {
        return BTreeSet::new();
    };
    let find = |a: Action| o.refs.iter().copied().find(|r| t.0[&r.pid][r.index] == a);
    let Some(e_d) = find(Action::Deliver { tag: consumed }) else {
        return BTreeSet::new();
    };
    let mut out = BTreeSet::new();
    for &r in &o.refs {
        if let Action::Send { tag, to } = t.0[&r.pid][r.index] {
            if to != e_r.pid || tag == consumed {
                continue;
            }
            let Some(d2) = find(Action::Deliver { tag }) else { continue };
            if d2.pid != e_r.pid {
                continue;
            }
            let d2_first = d2.index < e_d.index;
            if !d2_first && !o.hb(e_d, r) {
                out.insert(tag);
            }
        }
    }
    out
}
