//! Driving the reversible semantics forward: log replay and free running.

use serde::Serialize;

use super::{admissible, needed_delivery, RSystem, RdebugError};
use crate::ids::{Pid, Tag};
use crate::lang::{Program, StepKind};
use crate::runtime::TransitionChoice;
use crate::trace::{Event, Log, LogAction, Trace};

/// Round-robin over processes. Each turn a process takes a process step if
/// it may, otherwise receives a delivery: while it has logged receives left
/// only the one its next logged receive needs, afterwards (in free mode)
/// its admissible one.
///
/// With `allow_free` unset only logged actions are performed: a process
/// whose log is exhausted takes silent steps and exits but never spawns,
/// sends or receives.
#[derive(Debug, Clone, Default)]
pub struct Driver {
    pub allow_free: bool,
    cursor: Option<Pid>,
}

impl Driver {
    pub fn replay() -> Self {
        Driver {
            allow_free: false,
            cursor: None,
        }
    }

    pub fn free() -> Self {
        Driver {
            allow_free: true,
            cursor: None,
        }
    }

    /// The step this driver would take for `pid`, if any.
    pub fn candidate(
        &self,
        program: &Program,
        sys: &RSystem,
        pid: Pid,
    ) -> Result<Option<TransitionChoice>, RdebugError> {
        let Some(proc) = sys.pool.get(&pid) else {
            return Ok(None);
        };
        let Some(ls) = proc.ls() else {
            return Ok(None);
        };
        let head = sys.log.seq(pid).first().copied();
        let diverge = |found: &str| RdebugError::Divergence {
            pid,
            expected: head.map(|h| h.to_string()).unwrap_or_default(),
            found: found.to_string(),
        };
        let proc_ok = match (ls.next_kind(), head) {
            (StepKind::Awaiting, _) => false,
            (StepKind::Local | StepKind::SelfPid, _) => true,
            (StepKind::Final, None) => true,
            (StepKind::Final, Some(_)) => return Err(diverge("exit")),
            (StepKind::Spawn, Some(LogAction::Spawn { .. }))
            | (StepKind::Send, Some(LogAction::Send { .. })) => true,
            (StepKind::Receive, Some(LogAction::Rec { .. })) => sys.receive_ready(program, pid),
            (StepKind::Spawn, Some(_)) => return Err(diverge("spawn")),
            (StepKind::Send, Some(_)) => return Err(diverge("send")),
            (StepKind::Receive, Some(_)) => return Err(diverge("receive")),
            (StepKind::Spawn | StepKind::Send, None) => self.allow_free,
            (StepKind::Receive, None) => self.allow_free && sys.receive_ready(program, pid),
        };
        if proc_ok {
            return Ok(Some(TransitionChoice::Proc { pid }));
        }
        let has_rec = sys.log.seq(pid).iter().any(|a| matches!(a, LogAction::Rec { .. }));
        let delivery = if has_rec {
            needed_delivery(&sys.log, pid, &sys.network)
        } else if self.allow_free && head.is_none() {
            admissible(&sys.log, pid, &sys.network)
        } else {
            None
        };
        if let Some((from, _)) = delivery {
            return Ok(Some(TransitionChoice::Deliver { from, to: pid }));
        }
        Ok(None)
    }

    /// Picks the next transition, or `None` at quiescence.
    pub fn next_choice(
        &mut self,
        program: &Program,
        sys: &RSystem,
    ) -> Result<Option<TransitionChoice>, RdebugError> {
        let pids: Vec<Pid> = sys.pool.keys().copied().collect();
        let start = match self.cursor {
            Some(c) => pids.iter().position(|&p| p > c).unwrap_or(0),
            None => 0,
        };
        for i in 0..pids.len() {
            let pid = pids[(start + i) % pids.len()];
            if let Some(choice) = self.candidate(program, sys, pid)? {
                self.cursor = Some(pid);
                return Ok(Some(choice));
            }
        }
        Ok(None)
    }

    /// Takes one transition. `None` at quiescence.
    pub fn step(
        &mut self,
        program: &Program,
        sys: &mut RSystem,
    ) -> Result<Option<(TransitionChoice, Option<Event>)>, RdebugError> {
        let Some(choice) = self.next_choice(program, sys)? else {
            return Ok(None);
        };
        let event = sys.fwd_step(program, choice)?;
        Ok(Some((choice, event)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplayStatus {
    /// Every logged action was replayed.
    Complete,
    Divergence {
        pid: Pid,
        expected: String,
        found: String,
    },
    /// `pid` is at a receive whose logged message never becomes available
    /// or is not accepted by any clause.
    StuckAtReceive { pid: Pid, tag: Tag },
    /// `pid` cannot reach its next logged action.
    Stalled { pid: Pid, next: LogAction },
    Budget,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub system: RSystem,
    pub events: Vec<Event>,
    pub trace: Trace,
    pub status: ReplayStatus,
}

impl ReplayOutcome {
    pub fn is_complete(&self) -> bool {
        self.status == ReplayStatus::Complete
    }
}

/// Replays `log` from `entry()`, performing only logged actions, until the
/// log is consumed or no logged action can make progress.
pub fn replay(
    program: &Program,
    entry: &str,
    log: Log,
    budget: usize,
) -> Result<ReplayOutcome, RdebugError> {
    let mut sys = RSystem::new(program, entry, log)?;
    let mut driver = Driver::replay();
    let mut events = Vec::new();
    let mut spent = 0;
    let status = loop {
        if spent >= budget {
            break ReplayStatus::Budget;
        }
        match driver.step(program, &mut sys) {
            Ok(Some((_, event))) => events.extend(event),
            Ok(None) => break quiescent_status(&sys),
            Err(RdebugError::Divergence {
                pid,
                expected,
                found,
            }) => {
                break ReplayStatus::Divergence {
                    pid,
                    expected,
                    found,
                }
            }
            Err(e) => return Err(e),
        }
        spent += 1;
    };
    let mut trace = Trace::from_events(&events);
    for &pid in sys.pool.keys() {
        trace.0.entry(pid).or_default();
    }
    Ok(ReplayOutcome {
        system: sys,
        events,
        trace,
        status,
    })
}

fn quiescent_status(sys: &RSystem) -> ReplayStatus {
    for (&pid, seq) in &sys.log.0 {
        let Some(&next) = seq.first() else { continue };
        return match next {
            LogAction::Rec { tag } => ReplayStatus::StuckAtReceive { pid, tag },
            _ => ReplayStatus::Stalled { pid, next },
        };
    }
    ReplayStatus::Complete
}
