//! Traces, logs and the relations defined over them.
//!
//! A [`Trace`] maps every pid to the sequence of global actions it performed.
//! A [`Log`] is the projection that drops deliveries and exits and forgets
//! the target of each send.

mod canon;
mod json;
mod order;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Pid, Tag};

pub use canon::{canonicalize, canonicalize_log, log_equal, trace_equal};
pub use json::{
    read_log, read_trace, read_trace_lenient, write_log, write_trace, JsonError, LoadedTrace,
};
pub use order::{
    happened_before, independent, ClosureOrder, CausalOrder, OrderRegistry, VectorClockOrder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    Spawn { child: Pid },
    Exit,
    Send { tag: Tag, to: Pid },
    Deliver { tag: Tag },
    Rec { tag: Tag },
}

impl Action {
    /// The tag an action refers to, if any.
    pub fn tag(&self) -> Option<Tag> {
        match *self {
            Action::Send { tag, .. } | Action::Deliver { tag } | Action::Rec { tag } => Some(tag),
            _ => None,
        }
    }

    pub fn is_deliver(&self) -> bool {
        matches!(self, Action::Deliver { .. })
    }

    pub fn log_action(&self) -> Option<LogAction> {
        match *self {
            Action::Spawn { child } => Some(LogAction::Spawn { child }),
            Action::Send { tag, .. } => Some(LogAction::Send { tag }),
            Action::Rec { tag } => Some(LogAction::Rec { tag }),
            Action::Deliver { .. } | Action::Exit => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Spawn { child } => write!(f, "spawn({child})"),
            Action::Exit => write!(f, "exit"),
            Action::Send { tag, to } => write!(f, "send({tag},{to})"),
            Action::Deliver { tag } => write!(f, "deliver({tag})"),
            Action::Rec { tag } => write!(f, "rec({tag})"),
        }
    }
}

/// `p : a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub pid: Pid,
    pub action: Action,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.pid, self.action)
    }
}

/// Position of an event: index into the pid's sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventRef {
    pub pid: Pid,
    pub index: usize,
}

impl EventRef {
    pub fn new(pid: Pid, index: usize) -> Self {
        EventRef { pid, index }
    }
}

impl fmt::Display for EventRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.pid, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogAction {
    Spawn { child: Pid },
    Send { tag: Tag },
    Rec { tag: Tag },
}

impl fmt::Display for LogAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogAction::Spawn { child } => write!(f, "spawn({child})"),
            LogAction::Send { tag } => write!(f, "send({tag})"),
            LogAction::Rec { tag } => write!(f, "rec({tag})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace has no root process")]
    NoRoot,
    #[error("trace has several root processes: {0:?}")]
    SeveralRoots(Vec<Pid>),
    #[error("event {0} does not exist")]
    NoSuchEvent(EventRef),
}

/// A trace: pid ↦ sequence of actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace(pub BTreeMap<Pid, Vec<Action>>);

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    /// Per-pid projection of a witnessed event sequence. Spawned children
    /// are present even when they performed no action.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut map: BTreeMap<Pid, Vec<Action>> = BTreeMap::new();
        for e in events {
            map.entry(e.pid).or_default().push(e.action);
            if let Action::Spawn { child } = e.action {
                map.entry(child).or_default();
            }
        }
        Trace(map)
    }

    pub fn pids(&self) -> impl Iterator<Item = Pid> + '_ {
        self.0.keys().copied()
    }

    pub fn seq(&self, pid: Pid) -> &[Action] {
        self.0.get(&pid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, r: EventRef) -> Option<Action> {
        self.0.get(&r.pid)?.get(r.index).copied()
    }

    pub fn event(&self, r: EventRef) -> Option<Event> {
        self.get(r).map(|action| Event { pid: r.pid, action })
    }

    /// All event positions, pid by pid.
    pub fn refs(&self) -> Vec<EventRef> {
        self.0
            .iter()
            .flat_map(|(&pid, seq)| (0..seq.len()).map(move |i| EventRef::new(pid, i)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn find(&self, pred: impl Fn(&Action) -> bool) -> Option<EventRef> {
        self.0.iter().find_map(|(&pid, seq)| {
            seq.iter().position(&pred).map(|i| EventRef::new(pid, i))
        })
    }

    pub fn send_of(&self, tag: Tag) -> Option<EventRef> {
        self.find(|a| matches!(a, Action::Send { tag: t, .. } if *t == tag))
    }

    pub fn deliver_of(&self, tag: Tag) -> Option<EventRef> {
        self.find(|a| *a == Action::Deliver { tag })
    }

    pub fn rec_of(&self, tag: Tag) -> Option<EventRef> {
        self.find(|a| *a == Action::Rec { tag })
    }

    pub fn spawn_of(&self, child: Pid) -> Option<EventRef> {
        self.find(|a| *a == Action::Spawn { child })
    }

    pub fn spawned(&self) -> BTreeSet<Pid> {
        self.0
            .values()
            .flatten()
            .filter_map(|a| match a {
                Action::Spawn { child } => Some(*child),
                _ => None,
            })
            .collect()
    }

    /// The unique pid that no event spawns.
    pub fn root(&self) -> Result<Pid, TraceError> {
        let spawned = self.spawned();
        let roots: Vec<Pid> = self.pids().filter(|p| !spawned.contains(p)).collect();
        match roots.as_slice() {
            [] => Err(TraceError::NoRoot),
            [r] => Ok(*r),
            _ => Err(TraceError::SeveralRoots(roots)),
        }
    }

    pub fn tags(&self) -> BTreeSet<Tag> {
        self.0.values().flatten().filter_map(Action::tag).collect()
    }

    /// Applies pid and tag renamings to every action and key.
    pub fn rename(&self, pid: impl Fn(Pid) -> Pid, tag: impl Fn(Tag) -> Tag) -> Trace {
        Trace(
            self.0
                .iter()
                .map(|(&p, seq)| {
                    let seq = seq
                        .iter()
                        .map(|a| match *a {
                            Action::Spawn { child } => Action::Spawn { child: pid(child) },
                            Action::Exit => Action::Exit,
                            Action::Send { tag: t, to } => Action::Send {
                                tag: tag(t),
                                to: pid(to),
                            },
                            Action::Deliver { tag: t } => Action::Deliver { tag: tag(t) },
                            Action::Rec { tag: t } => Action::Rec { tag: tag(t) },
                        })
                        .collect();
                    (pid(p), seq)
                })
                .collect(),
        )
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (pid, seq)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{pid}↦")?;
            for (j, a) in seq.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
        }
        write!(f, "]")
    }
}

/// A log: pid ↦ sequence of spawn/send/rec actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Log(pub BTreeMap<Pid, Vec<LogAction>>);

impl Log {
    pub fn seq(&self, pid: Pid) -> &[LogAction] {
        self.0.get(&pid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_exhausted(&self) -> bool {
        self.0.values().all(Vec::is_empty)
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spawned(&self) -> BTreeSet<Pid> {
        self.0
            .values()
            .flatten()
            .filter_map(|a| match a {
                LogAction::Spawn { child } => Some(*child),
                _ => None,
            })
            .collect()
    }

    pub fn root(&self) -> Result<Pid, TraceError> {
        let spawned = self.spawned();
        let roots: Vec<Pid> = self.0.keys().copied().filter(|p| !spawned.contains(p)).collect();
        match roots.as_slice() {
            [] => Err(TraceError::NoRoot),
            [r] => Ok(*r),
            _ => Err(TraceError::SeveralRoots(roots)),
        }
    }

    /// Largest pid and tag mentioned anywhere in the log.
    pub fn max_ids(&self) -> (u32, u32) {
        let mut pid = self.0.keys().map(|p| p.0).max().unwrap_or(0);
        let mut tag = 0;
        for a in self.0.values().flatten() {
            match a {
                LogAction::Spawn { child } => pid = pid.max(child.0),
                LogAction::Send { tag: t } | LogAction::Rec { tag: t } => tag = tag.max(t.0),
            }
        }
        (pid, tag)
    }
}

impl fmt::Display for Log {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (pid, seq)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{pid}↦")?;
            for (j, a) in seq.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
        }
        write!(f, "]")
    }
}

/// `log(τ)`.
pub fn log_of(trace: &Trace) -> Log {
    Log(trace
        .0
        .iter()
        .map(|(&pid, seq)| (pid, seq.iter().filter_map(Action::log_action).collect()))
        .collect())
}

/// Whether `e1` precedes `e2` in their common sequence; `None` across pids.
pub fn precedes(e1: EventRef, e2: EventRef) -> Option<bool> {
    (e1.pid == e2.pid).then_some(e1.index < e2.index)
}

/// A broken well-formedness rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    /// (a) a tag used by more than one send, deliver or rec.
    DuplicateTag { tag: Tag, action: &'static str },
    /// (b) a delivery without a matching send to the delivering pid.
    DeliverWithoutSend { tag: Tag, pid: Pid },
    /// (c) a receive not preceded by the delivery in the same pid.
    RecWithoutDeliver { tag: Tag, pid: Pid },
    /// (d) a pid spawned twice, or the root spawned.
    BadSpawn { pid: Pid },
    /// (e) a non-root pid that acts without having been spawned.
    Unspawned { pid: Pid },
    /// (f) an exit that is not the last action.
    ExitNotLast { pid: Pid },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTag { tag, action } => {
                write!(f, "(a) tag {tag} appears in more than one {action}")
            }
            Violation::DeliverWithoutSend { tag, pid } => {
                write!(f, "(b) {pid}:deliver({tag}) has no send({tag},{pid})")
            }
            Violation::RecWithoutDeliver { tag, pid } => {
                write!(f, "(c) {pid}:rec({tag}) is not preceded by deliver({tag})")
            }
            Violation::BadSpawn { pid } => write!(f, "(d) {pid} is spawned more than once or is the root"),
            Violation::Unspawned { pid } => write!(f, "(e) {pid} acts but is never spawned"),
            Violation::ExitNotLast { pid } => write!(f, "(f) exit of {pid} is not its last action"),
        }
    }
}

/// Checks rules (a)–(f). Rule (g), disjoint pid/tag namespaces, holds by
/// construction of [`Pid`] and [`Tag`] and is enforced by the readers.
pub fn well_formed(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut sends: BTreeMap<Tag, Pid> = BTreeMap::new();
    let mut counts: BTreeMap<(Tag, &'static str), usize> = BTreeMap::new();
    for a in trace.0.values().flatten() {
        let (tag, kind) = match *a {
            Action::Send { tag, to } => {
                sends.entry(tag).or_insert(to);
                (tag, "send")
            }
            Action::Deliver { tag } => (tag, "deliver"),
            Action::Rec { tag } => (tag, "rec"),
            _ => continue,
        };
        *counts.entry((tag, kind)).or_default() += 1;
    }
    for (&(tag, action), &n) in &counts {
        if n > 1 {
            out.push(Violation::DuplicateTag { tag, action });
        }
    }

    for (&pid, seq) in &trace.0 {
        for (i, a) in seq.iter().enumerate() {
            match *a {
                Action::Deliver { tag } => {
                    if sends.get(&tag) != Some(&pid) {
                        out.push(Violation::DeliverWithoutSend { tag, pid });
                    }
                }
                Action::Rec { tag } => {
                    if !seq[..i].contains(&Action::Deliver { tag }) {
                        out.push(Violation::RecWithoutDeliver { tag, pid });
                    }
                }
                Action::Exit if i + 1 != seq.len() => out.push(Violation::ExitNotLast { pid }),
                _ => {}
            }
        }
    }

    let mut spawn_count: BTreeMap<Pid, usize> = BTreeMap::new();
    for a in trace.0.values().flatten() {
        if let Action::Spawn { child } = a {
            *spawn_count.entry(*child).or_default() += 1;
        }
    }
    let unspawned: Vec<Pid> = trace
        .0
        .keys()
        .copied()
        .filter(|p| !spawn_count.contains_key(p))
        .collect();
    for (&pid, &n) in &spawn_count {
        if n > 1 {
            out.push(Violation::BadSpawn { pid });
        }
    }
    // The root is the never-spawned pid. With several candidates the smallest
    // is taken as root and the others are reported.
    if unspawned.is_empty() && !trace.0.is_empty() {
        // Every pid is spawned: someone spawned the root.
        let first = *trace.0.keys().next().unwrap();
        out.push(Violation::BadSpawn { pid: first });
    }
    for &pid in unspawned.iter().skip(1) {
        if !trace.seq(pid).is_empty() {
            out.push(Violation::Unspawned { pid });
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn p(n: u32) -> Pid {
        Pid(n)
    }
    pub fn l(n: u32) -> Tag {
        Tag(n)
    }
    pub fn spawn(n: u32) -> Action {
        Action::Spawn { child: p(n) }
    }
    pub fn send(t: u32, to: u32) -> Action {
        Action::Send { tag: l(t), to: p(to) }
    }
    pub fn deliver(t: u32) -> Action {
        Action::Deliver { tag: l(t) }
    }
    pub fn rec(t: u32) -> Action {
        Action::Rec { tag: l(t) }
    }
    pub const EXIT: Action = Action::Exit;

    pub fn trace(entries: Vec<(u32, Vec<Action>)>) -> Trace {
        Trace(entries.into_iter().map(|(n, seq)| (p(n), seq)).collect())
    }

    /// The fig1b trace with exits.
    pub fn star() -> Trace {
        trace(vec![
            (1, vec![spawn(2), spawn(3), send(1, 2), EXIT]),
            (2, vec![deliver(1), rec(1), deliver(2), deliver(3)]),
            (3, vec![send(2, 2), send(3, 2), EXIT]),
        ])
    }

    /// The fig1c trace.
    pub fn fig1c() -> Trace {
        trace(vec![
            (1, vec![spawn(2), spawn(3), send(1, 2), EXIT]),
            (2, vec![deliver(2), deliver(1), rec(1), deliver(3)]),
            (3, vec![send(2, 2), send(3, 2), EXIT]),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn star_is_well_formed() {
        assert_eq!(well_formed(&star()), vec![]);
        assert_eq!(well_formed(&fig1c()), vec![]);
    }

    #[test]
    fn rec_without_deliver() {
        let t = trace(vec![(1, vec![spawn(2), send(1, 2)]), (2, vec![rec(1)])]);
        assert_eq!(
            well_formed(&t),
            vec![Violation::RecWithoutDeliver { tag: l(1), pid: p(2) }]
        );
    }

    #[test]
    fn duplicate_send() {
        let t = trace(vec![(1, vec![spawn(2), send(1, 2), send(1, 2)]), (2, vec![])]);
        assert!(well_formed(&t).contains(&Violation::DuplicateTag {
            tag: l(1),
            action: "send"
        }));
    }

    #[test]
    fn other_rules() {
        let t = trace(vec![(1, vec![EXIT, spawn(2), spawn(2)]), (2, vec![deliver(4)]), (5, vec![EXIT])]);
        let v = well_formed(&t);
        assert!(v.contains(&Violation::ExitNotLast { pid: p(1) }));
        assert!(v.contains(&Violation::BadSpawn { pid: p(2) }));
        assert!(v.contains(&Violation::DeliverWithoutSend { tag: l(4), pid: p(2) }));
        assert!(v.contains(&Violation::Unspawned { pid: p(5) }));
        let cyclic = trace(vec![(1, vec![spawn(2)]), (2, vec![spawn(1)])]);
        assert!(!well_formed(&cyclic).is_empty());
    }

    #[test]
    fn log_of_star() {
        let log = log_of(&star());
        let expected = Log(BTreeMap::from([
            (p(1), vec![LogAction::Spawn { child: p(2) }, LogAction::Spawn { child: p(3) }, LogAction::Send { tag: l(1) }]),
            (p(2), vec![LogAction::Rec { tag: l(1) }]),
            (p(3), vec![LogAction::Send { tag: l(2) }, LogAction::Send { tag: l(3) }]),
        ]));
        assert_eq!(log, expected);
        assert_eq!(log_of(&fig1c()), expected);
        assert_eq!(log_of(&trace(vec![(1, vec![EXIT])])), Log(BTreeMap::from([(p(1), vec![])])));
    }

    #[test]
    fn precedes_is_partial() {
        let r = |pid, i| EventRef::new(p(pid), i);
        assert_eq!(precedes(r(2, 0), r(2, 1)), Some(true));
        assert_eq!(precedes(r(2, 1), r(2, 0)), Some(false));
        assert_eq!(precedes(r(1, 2), r(3, 0)), None);
    }

    #[test]
    fn from_events_keeps_idle_children() {
        let events = [Event { pid: p(1), action: spawn(2) }, Event { pid: p(1), action: EXIT }];
        let t = Trace::from_events(&events);
        assert_eq!(t.seq(p(2)), &[] as &[Action]);
        assert_eq!(t.root(), Ok(p(1)));
    }
}
