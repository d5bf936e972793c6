//! Causal-consistent reversible debugging driven by a log.
//!
//! Forward steps consume the log `ω` for spawn, send and receive, and fall
//! back to fresh identifiers once a process's log is exhausted. Every
//! process step pushes a history entry that suffices to undo it.

mod plan;
mod replay;
mod request;
mod snapshot;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::{Pid, Tag};
use crate::lang::{
    advance, eval_step, matchrec, EvalLabel, LocalState, MatchMode, Message, Program, StepKind,
    Value,
};
use crate::runtime::{Network, Process, System, TransitionChoice};
use crate::trace::{Action, Event, Log, LogAction};

pub use plan::{Prerequisite, UndoStatus};
pub use replay::{replay, Driver, ReplayOutcome, ReplayStatus};
pub use request::{Debugger, Request, RequestError, StepReport, Target};
pub use snapshot::{NetworkQueue, ProcessSnapshot, Snapshot};

/// Enough information to undo one process step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HistoryEntry {
    Exit {
        ls: LocalState,
        mailbox: Vec<Message>,
    },
    Local {
        ls: LocalState,
    },
    SelfPid {
        ls: LocalState,
    },
    /// `replayed` records whether the identifier came from the log.
    Spawn {
        ls: LocalState,
        child: Pid,
        replayed: bool,
    },
    Send {
        ls: LocalState,
        to: Pid,
        msg: Message,
        replayed: bool,
    },
    Rec {
        ls: LocalState,
        msg: Message,
        index: usize,
        replayed: bool,
    },
}

impl HistoryEntry {
    /// The event this entry stands for (`None` for silent steps).
    pub fn action(&self) -> Option<Action> {
        match self {
            HistoryEntry::Exit { .. } => Some(Action::Exit),
            HistoryEntry::Local { .. } | HistoryEntry::SelfPid { .. } => None,
            HistoryEntry::Spawn { child, .. } => Some(Action::Spawn { child: *child }),
            HistoryEntry::Send { to, msg, .. } => Some(Action::Send {
                tag: msg.tag,
                to: *to,
            }),
            HistoryEntry::Rec { msg, .. } => Some(Action::Rec { tag: msg.tag }),
        }
    }

    pub fn is_silent(&self) -> bool {
        self.action().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PState {
    Running(LocalState),
    Exited,
}

/// `⟨p, h, ls, q⟩`; the last history element is the most recent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RProcess {
    pub pid: Pid,
    pub history: Vec<HistoryEntry>,
    pub state: PState,
    pub mailbox: Vec<Message>,
}

impl RProcess {
    fn fresh(pid: Pid, ls: LocalState) -> Self {
        RProcess {
            pid,
            history: Vec::new(),
            state: PState::Running(ls),
            mailbox: Vec::new(),
        }
    }

    pub fn ls(&self) -> Option<&LocalState> {
        match &self.state {
            PState::Running(ls) => Some(ls),
            PState::Exited => None,
        }
    }

    pub fn is_exited(&self) -> bool {
        self.state == PState::Exited
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RdebugError {
    #[error("{pid} is not a process of this system")]
    NoProcess { pid: Pid },
    #[error("{pid} has exited")]
    Exited { pid: Pid },
    #[error("replay divergence at {pid}: log expects {expected}, program performs {found}")]
    Divergence {
        pid: Pid,
        expected: String,
        found: String,
    },
    #[error("{pid} is blocked at a receive")]
    Blocked { pid: Pid },
    #[error("transition {0} is not enabled")]
    NotEnabled(TransitionChoice),
    #[error("cannot undo: {0}")]
    Undo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Spawn,
    Send,
    Rec,
}

impl LogKind {
    fn name(self) -> &'static str {
        match self {
            LogKind::Spawn => "spawn",
            LogKind::Send => "send",
            LogKind::Rec => "rec",
        }
    }
}

/// `ω; Γ; Π` plus fresh-id counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RSystem {
    pub log: Log,
    pub network: Network,
    pub pool: BTreeMap<Pid, RProcess>,
    pub next_pid: u32,
    pub next_tag: u32,
}

/// The result of `next_p`: an identifier from the log, or none when the
/// process's log is exhausted and a fresh one must be used.
pub fn next_p(log: &mut Log, pid: Pid, kind: LogKind) -> Result<Option<LogAction>, RdebugError> {
    let Some(seq) = log.0.get_mut(&pid) else {
        return Ok(None);
    };
    let Some(&head) = seq.first() else {
        return Ok(None);
    };
    let ok = matches!(
        (kind, head),
        (LogKind::Spawn, LogAction::Spawn { .. })
            | (LogKind::Send, LogAction::Send { .. })
            | (LogKind::Rec, LogAction::Rec { .. })
    );
    if !ok {
        return Err(RdebugError::Divergence {
            pid,
            expected: head.to_string(),
            found: kind.name().to_string(),
        });
    }
    seq.remove(0);
    Ok(Some(head))
}

fn logged_recs(log: &Log, pid: Pid) -> Vec<Tag> {
    log.seq(pid)
        .iter()
        .filter_map(|a| match a {
            LogAction::Rec { tag } => Some(*tag),
            _ => None,
        })
        .collect()
}

fn queues_to(network: &Network, pid: Pid) -> impl Iterator<Item = (Pid, &std::collections::VecDeque<Message>)> {
    network
        .iter()
        .filter(move |((_, to), q)| *to == pid && !q.is_empty())
        .map(|(&(from, _), q)| (from, q))
}

/// The delivery the next logged receive of `pid` is waiting for: its
/// message if that heads a queue, otherwise the head of the queue holding
/// it further back.
pub fn needed_delivery(log: &Log, pid: Pid, network: &Network) -> Option<(Pid, Tag)> {
    let needed = *logged_recs(log, pid).first()?;
    queues_to(network, pid)
        .find(|(_, q)| q[0].tag == needed)
        .or_else(|| queues_to(network, pid).find(|(_, q)| q.iter().any(|m| m.tag == needed)))
        .map(|(from, q)| (from, q[0].tag))
}

/// The next message to deliver to `pid`, as `(sender, tag)`.
///
/// The [`needed_delivery`] if there is one, else the head of the
/// smallest-sender queue whose tag is not wanted by a later logged receive.
pub fn admissible(log: &Log, pid: Pid, network: &Network) -> Option<(Pid, Tag)> {
    if let Some(d) = needed_delivery(log, pid, network) {
        return Some(d);
    }
    let recs = logged_recs(log, pid);
    let later = recs.get(1..).unwrap_or(&[]);
    queues_to(network, pid)
        .find(|(_, q)| !later.contains(&q[0].tag))
        .map(|(from, q)| (from, q[0].tag))
}

/// Inserts `msg` at position `index` of `mailbox`.
pub fn put(mailbox: &[Message], index: usize, msg: Message) -> Vec<Message> {
    let mut q = mailbox.to_vec();
    q.insert(index.min(q.len()), msg);
    q
}

fn prepend(log: &mut Log, pid: Pid, action: LogAction) {
    log.0.entry(pid).or_default().insert(0, action);
}

impl RSystem {
    /// Initial system for replaying `log` from `entry()`. The root pid is
    /// the log's unspawned pid (`p1` for an empty log); fresh identifiers
    /// start above everything the log mentions.
    pub fn new(program: &Program, entry: &str, log: Log) -> Result<RSystem, RdebugError> {
        let root = if log.0.is_empty() {
            Pid(1)
        } else {
            log.root().map_err(|e| RdebugError::Divergence {
                pid: Pid(1),
                expected: "a log with one root".into(),
                found: e.to_string(),
            })?
        };
        let ls = LocalState::initial(program, entry, vec![]).map_err(|e| RdebugError::Divergence {
            pid: root,
            expected: format!("entry {entry}/0"),
            found: e.to_string(),
        })?;
        let (max_pid, max_tag) = log.max_ids();
        Ok(RSystem {
            next_pid: max_pid.max(root.0) + 1,
            next_tag: max_tag + 1,
            log,
            network: Network::new(),
            pool: BTreeMap::from([(root, RProcess::fresh(root, ls))]),
        })
    }

    pub fn process(&self, pid: Pid) -> Result<&RProcess, RdebugError> {
        self.pool.get(&pid).ok_or(RdebugError::NoProcess { pid })
    }

    fn running(&self, pid: Pid) -> Result<&LocalState, RdebugError> {
        self.process(pid)?.ls().ok_or(RdebugError::Exited { pid })
    }

    pub fn log_exhausted(&self) -> bool {
        self.log.is_exhausted()
    }

    /// What `pid` would do next with a process step, if it can step.
    pub fn proc_kind(&self, program: &Program, pid: Pid) -> Option<StepKind> {
        let ls = self.running(pid).ok()?;
        let kind = ls.next_kind();
        match kind {
            StepKind::Awaiting => None,
            StepKind::Receive => self.receive_ready(program, pid).then_some(kind),
            _ => Some(kind),
        }
    }

    fn receive_mode(&self, pid: Pid) -> MatchMode {
        match self.log.seq(pid).first() {
            Some(LogAction::Rec { tag }) => MatchMode::ByTag(*tag),
            _ => MatchMode::OldestMatching,
        }
    }

    fn receive_ready(&self, program: &Program, pid: Pid) -> bool {
        let Ok(ls) = self.running(pid) else { return false };
        let proc = &self.pool[&pid];
        match eval_step(program, ls) {
            Ok((EvalLabel::Rec { future, clauses }, ls2)) => {
                matchrec(&ls2, future, &clauses, &proc.mailbox, self.receive_mode(pid)).is_some()
            }
            _ => false,
        }
    }

    /// Forward transitions allowed by the log: process steps whose logged
    /// identifiers line up, and the admissible delivery of each process.
    pub fn enabled(&self, program: &Program) -> Vec<TransitionChoice> {
        let mut out = Vec::new();
        for (&pid, proc) in &self.pool {
            if proc.is_exited() {
                continue;
            }
            if let Some(kind) = self.proc_kind(program, pid) {
                let head = self.log.seq(pid).first();
                let fits = match (kind, head) {
                    (StepKind::Spawn, Some(h)) => matches!(h, LogAction::Spawn { .. }),
                    (StepKind::Send, Some(h)) => matches!(h, LogAction::Send { .. }),
                    (StepKind::Receive, Some(h)) => matches!(h, LogAction::Rec { .. }),
                    _ => true,
                };
                if fits {
                    out.push(TransitionChoice::Proc { pid });
                }
            }
        }
        for (&pid, proc) in &self.pool {
            if proc.is_exited() {
                continue;
            }
            if let Some((from, _)) = admissible(&self.log, pid, &self.network) {
                out.push(TransitionChoice::Deliver { from, to: pid });
            }
        }
        out
    }

    /// One forward rule. On error the system is unchanged.
    pub fn fwd_step(
        &mut self,
        program: &Program,
        choice: TransitionChoice,
    ) -> Result<Option<Event>, RdebugError> {
        match choice {
            TransitionChoice::Deliver { from, to } => {
                self.running(to)?;
                match admissible(&self.log, to, &self.network) {
                    Some((sender, _)) if sender == from => {}
                    _ => return Err(RdebugError::NotEnabled(choice)),
                }
                let q = self.network.get_mut(&(from, to)).expect("admissible queue");
                let msg = q.pop_front().expect("nonempty queue");
                if q.is_empty() {
                    self.network.remove(&(from, to));
                }
                let tag = msg.tag;
                self.pool.get_mut(&to).unwrap().mailbox.push(msg);
                Ok(Some(Event {
                    pid: to,
                    action: Action::Deliver { tag },
                }))
            }
            TransitionChoice::Proc { pid } => self.fwd_proc(program, pid),
        }
    }

    fn fwd_proc(&mut self, program: &Program, pid: Pid) -> Result<Option<Event>, RdebugError> {
        let ls = self.running(pid)?.clone();
        if ls.is_final() {
            let proc = self.pool.get_mut(&pid).unwrap();
            proc.history.push(HistoryEntry::Exit {
                ls,
                mailbox: proc.mailbox.clone(),
            });
            proc.state = PState::Exited;
            return Ok(Some(Event {
                pid,
                action: Action::Exit,
            }));
        }
        let (label, mut next) = advance(program, &ls);
        let mut log = self.log.clone();
        let (entry, action) = match label {
            EvalLabel::Local => (HistoryEntry::Local { ls }, None),
            EvalLabel::SelfPid { future } => {
                next.fill_future(future, Value::Pid(pid)).expect("fresh future");
                (HistoryEntry::SelfPid { ls }, None)
            }
            EvalLabel::Spawn {
                future,
                function,
                args,
            } => {
                let (child, replayed) = match next_p(&mut log, pid, LogKind::Spawn)? {
                    Some(LogAction::Spawn { child }) => (child, true),
                    _ => (Pid(self.next_pid), false),
                };
                if self.pool.contains_key(&child) {
                    return Err(RdebugError::Divergence {
                        pid,
                        expected: format!("a fresh pid for spawn({child})"),
                        found: format!("{child} already exists"),
                    });
                }
                if !replayed {
                    self.next_pid += 1;
                }
                let child_ls = LocalState::initial(program, &function, args)
                    .unwrap_or_else(|e| LocalState::crashed(&e));
                self.pool.insert(child, RProcess::fresh(child, child_ls));
                next.fill_future(future, Value::Pid(child)).expect("fresh future");
                (
                    HistoryEntry::Spawn {
                        ls,
                        child,
                        replayed,
                    },
                    Some(Action::Spawn { child }),
                )
            }
            EvalLabel::Send { value, to } => {
                let (tag, replayed) = match next_p(&mut log, pid, LogKind::Send)? {
                    Some(LogAction::Send { tag }) => (tag, true),
                    _ => (Tag(self.next_tag), false),
                };
                if !replayed {
                    self.next_tag += 1;
                }
                let msg = Message {
                    tag,
                    from: pid,
                    value,
                };
                self.network.entry((pid, to)).or_default().push_back(msg.clone());
                (
                    HistoryEntry::Send {
                        ls,
                        to,
                        msg,
                        replayed,
                    },
                    Some(Action::Send { tag, to }),
                )
            }
            EvalLabel::Rec { future, clauses } => {
                let mode = self.receive_mode(pid);
                let proc = &self.pool[&pid];
                let m = matchrec(&next, future, &clauses, &proc.mailbox, mode)
                    .ok_or(RdebugError::Blocked { pid })?;
                let replayed = next_p(&mut log, pid, LogKind::Rec)?.is_some();
                let msg = proc.mailbox[m.index].clone();
                let proc = self.pool.get_mut(&pid).unwrap();
                proc.mailbox = m.mailbox;
                next = m.state;
                (
                    HistoryEntry::Rec {
                        ls,
                        msg,
                        index: m.index,
                        replayed,
                    },
                    Some(Action::Rec { tag: m.tag }),
                )
            }
        };
        self.log = log;
        let proc = self.pool.get_mut(&pid).unwrap();
        proc.history.push(entry);
        proc.state = PState::Running(next);
        Ok(action.map(|action| Event { pid, action }))
    }

    /// Undoes the most recent history entry of `pid` if the causal
    /// consistency guard allows it; otherwise reports what must go first.
    pub fn bwd_step(&mut self, pid: Pid) -> Result<Option<Event>, RdebugError> {
        match self.can_undo(pid) {
            UndoStatus::Ok => Ok(self.undo_top(pid)),
            UndoStatus::NothingToUndo => Err(RdebugError::Undo(format!("{pid} has nothing to undo"))),
            UndoStatus::Blocked(plan) => Err(RdebugError::Undo(plan::describe(pid, &plan))),
        }
    }

    /// Undoes the delivery of `tag` to `pid`; the message must be the last
    /// one in the mailbox. It goes back to the front of its queue.
    pub fn bwd_deliver(&mut self, pid: Pid, tag: Tag) -> Result<Event, RdebugError> {
        let proc = self.process(pid)?;
        if proc.is_exited() {
            return Err(RdebugError::Undo(format!(
                "undo the exit of {pid} before the delivery of {tag}"
            )));
        }
        if proc.mailbox.last().map(|m| m.tag) != Some(tag) {
            return Err(RdebugError::Undo(format!(
                "{tag} is not the last message in the mailbox of {pid}"
            )));
        }
        let msg = self.pool.get_mut(&pid).unwrap().mailbox.pop().unwrap();
        self.network.entry((msg.from, pid)).or_default().push_front(msg);
        Ok(Event {
            pid,
            action: Action::Deliver { tag },
        })
    }

    /// Applies the inverse rule for the top of `pid`'s history without
    /// checking the guard. Callers check [`RSystem::can_undo`] first.
    fn undo_top(&mut self, pid: Pid) -> Option<Event> {
        let proc = self.pool.get_mut(&pid)?;
        let entry = proc.history.pop()?;
        let action = entry.action();
        match entry {
            HistoryEntry::Exit { ls, mailbox } => {
                proc.state = PState::Running(ls);
                proc.mailbox = mailbox;
            }
            HistoryEntry::Local { ls } | HistoryEntry::SelfPid { ls } => {
                proc.state = PState::Running(ls);
            }
            HistoryEntry::Spawn {
                ls,
                child,
                replayed,
            } => {
                proc.state = PState::Running(ls);
                self.pool.remove(&child);
                if replayed {
                    prepend(&mut self.log, pid, LogAction::Spawn { child });
                } else if self.next_pid == child.0 + 1 {
                    self.next_pid -= 1;
                }
            }
            HistoryEntry::Send {
                ls,
                to,
                msg,
                replayed,
            } => {
                proc.state = PState::Running(ls);
                let q = self.network.get_mut(&(pid, to)).expect("queue of an undoable send");
                q.pop_back();
                if q.is_empty() {
                    self.network.remove(&(pid, to));
                }
                if replayed {
                    prepend(&mut self.log, pid, LogAction::Send { tag: msg.tag });
                } else if self.next_tag == msg.tag.0 + 1 {
                    self.next_tag -= 1;
                }
            }
            HistoryEntry::Rec {
                ls,
                msg,
                index,
                replayed,
            } => {
                proc.state = PState::Running(ls);
                let tag = msg.tag;
                proc.mailbox = put(&proc.mailbox, index, msg);
                if replayed {
                    prepend(&mut self.log, pid, LogAction::Rec { tag });
                }
            }
        }
        action.map(|action| Event { pid, action })
    }

    /// The tracing-semantics system with the same network and live
    /// processes, so a run can continue past the log.
    pub fn to_system(&self) -> System {
        System {
            network: self.network.clone(),
            pool: self
                .pool
                .values()
                .filter_map(|p| {
                    p.ls().map(|ls| {
                        (
                            p.pid,
                            Process {
                                pid: p.pid,
                                ls: ls.clone(),
                                mailbox: p.mailbox.clone(),
                            },
                        )
                    })
                })
                .collect(),
            next_pid: self.next_pid,
            next_tag: self.next_tag,
        }
    }
}
