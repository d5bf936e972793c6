//! The causal-consistency guard: what must be undone before a step can be.

use serde::Serialize;

use super::{HistoryEntry, RSystem, RdebugError};
use crate::ids::{Pid, Tag};
use crate::trace::{Action, Event};

/// One item of an undo plan, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prerequisite {
    /// Undo this event of `pid` (it is the top of its history).
    Undo { pid: Pid, action: Action },
    /// Put the delivered message `tag` back into its network queue.
    UndoDeliver { pid: Pid, tag: Tag },
    /// Undo this many silent steps of `pid`.
    Silent { pid: Pid, steps: usize },
}

impl std::fmt::Display for Prerequisite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prerequisite::Undo { pid, action } => write!(f, "undo {action} on {pid}"),
            Prerequisite::UndoDeliver { pid, tag } => write!(f, "undo deliver({tag}) on {pid}"),
            Prerequisite::Silent { pid, steps } => write!(f, "undo {steps} silent step(s) on {pid}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "plan", rename_all = "snake_case")]
pub enum UndoStatus {
    Ok,
    /// The top of the history can be undone once these are undone.
    Blocked(Vec<Prerequisite>),
    NothingToUndo,
}

pub(crate) fn describe(pid: Pid, plan: &[Prerequisite]) -> String {
    let steps: Vec<String> = plan.iter().map(|p| p.to_string()).collect();
    format!("{pid} depends on later steps; first {}", steps.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Need {
    Top(Pid),
    Deliver(Pid, Tag),
}

/// Guards against runaway recursion; a well-formed system never gets near.
const MAX_DEPTH: usize = 10_000;

impl RSystem {
    /// The most immediate obstacle to undoing the top of `pid`'s history.
    fn top_blocker(&self, pid: Pid) -> Result<Option<Need>, RdebugError> {
        let proc = self.process(pid)?;
        let Some(top) = proc.history.last() else {
            return Err(RdebugError::Undo(format!("{pid} has nothing to undo")));
        };
        Ok(match top {
            HistoryEntry::Spawn { child, .. } => {
                let c = self.process(*child)?;
                if !c.history.is_empty() {
                    Some(Need::Top(*child))
                } else {
                    c.mailbox.last().map(|m| Need::Deliver(*child, m.tag))
                }
            }
            HistoryEntry::Send { to, msg, .. } => {
                let at_tail = self
                    .network
                    .get(&(pid, *to))
                    .and_then(|q| q.back())
                    .is_some_and(|m| m.tag == msg.tag);
                if at_tail {
                    None
                } else {
                    let q = self.process(*to)?;
                    if q.mailbox.iter().any(|m| m.tag == msg.tag) {
                        Some(Need::Deliver(*to, msg.tag))
                    } else {
                        Some(Need::Top(*to))
                    }
                }
            }
            _ => None,
        })
    }

    fn deliver_blocker(&self, pid: Pid, tag: Tag) -> Result<Option<Need>, RdebugError> {
        let proc = self.process(pid)?;
        if proc.is_exited() {
            return Ok(Some(Need::Top(pid)));
        }
        match proc.mailbox.last() {
            Some(m) if m.tag == tag => Ok(None),
            Some(m) if proc.mailbox.iter().any(|m| m.tag == tag) => Ok(Some(Need::Deliver(pid, m.tag))),
            _ => Err(RdebugError::Undo(format!("{tag} is not in the mailbox of {pid}"))),
        }
    }

    /// Undoes `need`, first undoing whatever it depends on. Every undo
    /// performed is appended to `out`.
    pub(crate) fn perform(
        &mut self,
        need: Need,
        out: &mut Vec<Prerequisite>,
        undone: &mut Vec<Event>,
        depth: usize,
    ) -> Result<(), RdebugError> {
        if depth > MAX_DEPTH {
            return Err(RdebugError::Undo("dependency chain too deep".into()));
        }
        loop {
            let blocker = match need {
                Need::Top(p) => self.top_blocker(p)?,
                Need::Deliver(p, tag) => self.deliver_blocker(p, tag)?,
            };
            match blocker {
                Some(b) => self.perform(b, out, undone, depth + 1)?,
                None => break,
            }
        }
        match need {
            Need::Top(pid) => match self.undo_top(pid) {
                Some(e) => {
                    out.push(Prerequisite::Undo {
                        pid,
                        action: e.action,
                    });
                    undone.push(e);
                }
                None => match out.last_mut() {
                    Some(Prerequisite::Silent { pid: q, steps }) if *q == pid => *steps += 1,
                    _ => out.push(Prerequisite::Silent { pid, steps: 1 }),
                },
            },
            Need::Deliver(pid, tag) => {
                undone.push(self.bwd_deliver(pid, tag)?);
                out.push(Prerequisite::UndoDeliver { pid, tag });
            }
        }
        Ok(())
    }

    /// Whether the top of `pid`'s history can be undone right now, and if
    /// not, the undos that must come first.
    pub fn can_undo(&self, pid: Pid) -> UndoStatus {
        match self.pool.get(&pid) {
            None => return UndoStatus::NothingToUndo,
            Some(p) if p.history.is_empty() => return UndoStatus::NothingToUndo,
            _ => {}
        }
        match self.top_blocker(pid) {
            Ok(None) => return UndoStatus::Ok,
            Ok(Some(_)) => {}
            Err(_) => return UndoStatus::NothingToUndo,
        }
        let mut sim = self.clone();
        let mut plan = Vec::new();
        if sim.perform(Need::Top(pid), &mut plan, &mut Vec::new(), 0).is_err() {
            return UndoStatus::NothingToUndo;
        }
        // The last item is the requested undo itself.
        plan.pop();
        UndoStatus::Blocked(plan)
    }

    /// Undoes the top of `pid`'s history together with everything that
    /// depends on it. Returns the undone events, latest first.
    pub fn undo_cascade(&mut self, pid: Pid) -> Result<Vec<Event>, RdebugError> {
        let mut undone = Vec::new();
        self.perform(Need::Top(pid), &mut Vec::new(), &mut undone, 0)?;
        Ok(undone)
    }

    /// Undoes the delivery of `tag` to `pid`, undoing later deliveries and
    /// an exit first if needed.
    pub fn undo_deliver_cascade(&mut self, pid: Pid, tag: Tag) -> Result<Vec<Event>, RdebugError> {
        let mut undone = Vec::new();
        self.perform(Need::Deliver(pid, tag), &mut Vec::new(), &mut undone, 0)?;
        Ok(undone)
    }
}
