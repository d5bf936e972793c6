//! Canonical renaming of pids and tags, so that equality up to renaming
//! becomes structural equality.

use std::collections::BTreeMap;

use super::{Action, Log, LogAction, Trace, TraceError};
use crate::ids::{Pid, Tag};

enum Mention {
    Spawn(Pid),
    Send(Tag),
    Pid(Pid),
    Tag(Tag),
}

fn trace_mentions(a: &Action) -> Vec<Mention> {
    match *a {
        Action::Spawn { child } => vec![Mention::Spawn(child)],
        Action::Send { tag, to } => vec![Mention::Send(tag), Mention::Pid(to)],
        Action::Deliver { tag } | Action::Rec { tag } => vec![Mention::Tag(tag)],
        Action::Exit => vec![],
    }
}

fn log_mentions(a: &LogAction) -> Vec<Mention> {
    match *a {
        LogAction::Spawn { child } => vec![Mention::Spawn(child)],
        LogAction::Send { tag } => vec![Mention::Send(tag)],
        LogAction::Rec { tag } => vec![Mention::Tag(tag)],
    }
}

struct Renaming {
    pids: BTreeMap<Pid, Pid>,
    tags: BTreeMap<Tag, Tag>,
}

impl Renaming {
    fn pid(&mut self, p: Pid) -> bool {
        let next = Pid(self.pids.len() as u32 + 1);
        let fresh = !self.pids.contains_key(&p);
        self.pids.entry(p).or_insert(next);
        fresh
    }

    fn tag(&mut self, t: Tag) {
        let next = Tag(self.tags.len() as u32 + 1);
        self.tags.entry(t).or_insert(next);
    }

    /// Root first, then spawn targets and send tags in the order they are
    /// met while scanning the already renamed pids. A last pass numbers
    /// whatever was not reached so that the renaming is total.
    fn build<A>(
        root: Pid,
        seqs: &BTreeMap<Pid, Vec<A>>,
        mentions: impl Fn(&A) -> Vec<Mention>,
    ) -> Renaming {
        let mut r = Renaming {
            pids: BTreeMap::new(),
            tags: BTreeMap::new(),
        };
        r.pid(root);
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let pid = order[i];
            for a in seqs.get(&pid).into_iter().flatten() {
                for m in mentions(a) {
                    match m {
                        Mention::Spawn(child) => {
                            if r.pid(child) {
                                order.push(child);
                            }
                        }
                        Mention::Send(tag) => r.tag(tag),
                        _ => {}
                    }
                }
            }
            i += 1;
        }
        for (&pid, seq) in seqs {
            r.pid(pid);
            for a in seq {
                for m in mentions(a) {
                    match m {
                        Mention::Spawn(p) | Mention::Pid(p) => {
                            r.pid(p);
                        }
                        Mention::Send(t) | Mention::Tag(t) => r.tag(t),
                    }
                }
            }
        }
        r
    }
}

pub fn canonicalize(trace: &Trace) -> Result<Trace, TraceError> {
    if trace.0.is_empty() {
        return Ok(Trace::default());
    }
    let root = trace.root()?;
    let r = Renaming::build(root, &trace.0, trace_mentions);
    Ok(trace.rename(|p| r.pids[&p], |t| r.tags[&t]))
}

pub fn canonicalize_log(log: &Log) -> Result<Log, TraceError> {
    if log.0.is_empty() {
        return Ok(Log::default());
    }
    let root = log.root()?;
    let r = Renaming::build(root, &log.0, log_mentions);
    Ok(Log(log
        .0
        .iter()
        .map(|(p, seq)| {
            let seq = seq
                .iter()
                .map(|a| match *a {
                    LogAction::Spawn { child } => LogAction::Spawn {
                        child: r.pids[&child],
                    },
                    LogAction::Send { tag } => LogAction::Send { tag: r.tags[&tag] },
                    LogAction::Rec { tag } => LogAction::Rec { tag: r.tags[&tag] },
                })
                .collect();
            (r.pids[p], seq)
        })
        .collect()))
}

/// Equality up to renaming of pids and tags.
pub fn trace_equal(a: &Trace, b: &Trace) -> bool {
    match (canonicalize(a), canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

pub fn log_equal(a: &Log, b: &Log) -> bool {
    match (canonicalize_log(a), canonicalize_log(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
