//! A serializable view of a reversible system.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{HistoryEntry, PState, RSystem, UndoStatus};
use crate::ids::Pid;
use crate::lang::{Message, Program, StepKind};
use crate::trace::LogAction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageView {
    pub tag: crate::ids::Tag,
    pub from: Pid,
    pub value: String,
}

impl From<&Message> for MessageView {
    fn from(m: &Message) -> Self {
        MessageView {
            tag: m.tag,
            from: m.from,
            value: m.value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessSnapshot {
    pub pid: Pid,
    /// `running`, `blocked` (waiting at a receive) or `exited`.
    pub status: &'static str,
    pub mailbox: Vec<MessageView>,
    pub history: usize,
    pub can_undo: bool,
    pub next_log_action: Option<LogAction>,
    /// The final value, once the process has reached it.
    pub result: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkQueue {
    pub from: Pid,
    pub to: Pid,
    pub messages: Vec<MessageView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub processes: Vec<ProcessSnapshot>,
    pub network: Vec<NetworkQueue>,
    pub log: BTreeMap<Pid, Vec<LogAction>>,
    pub next_pid: u32,
    pub next_tag: u32,
}

impl RSystem {
    pub fn snapshot(&self, program: &Program) -> Snapshot {
        let processes = self
            .pool
            .values()
            .map(|p| {
                let (status, result) = match &p.state {
                    PState::Exited => (
                        "exited",
                        match p.history.last() {
                            Some(HistoryEntry::Exit { ls, .. }) => ls.result().map(|v| v.to_string()),
                            _ => None,
                        },
                    ),
                    PState::Running(ls) => {
                        let waiting = ls.next_kind() == StepKind::Receive && !self.receive_ready(program, p.pid);
                        (
                            if waiting { "blocked" } else { "running" },
                            ls.result().map(|v| v.to_string()),
                        )
                    }
                };
                ProcessSnapshot {
                    pid: p.pid,
                    status,
                    mailbox: p.mailbox.iter().map(MessageView::from).collect(),
                    history: p.history.len(),
                    can_undo: self.can_undo(p.pid) == UndoStatus::Ok,
                    next_log_action: self.log.seq(p.pid).first().copied(),
                    result,
                }
            })
            .collect();
        let network = self
            .network
            .iter()
            .map(|(&(from, to), q)| NetworkQueue {
                from,
                to,
                messages: q.iter().map(MessageView::from).collect(),
            })
            .collect();
        Snapshot {
            processes,
            network,
            log: self.log.0.clone(),
            next_pid: self.next_pid,
            next_tag: self.next_tag,
        }
    }
}
