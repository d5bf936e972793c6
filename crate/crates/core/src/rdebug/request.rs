//! Controlled forward and backward requests over a reversible system.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::Need;
use super::{Driver, HistoryEntry, Prerequisite, RSystem, RdebugError, Snapshot, UndoStatus};
use crate::analysis::symptoms;
use crate::ids::{Pid, Tag};
use crate::lang::Program;
use crate::trace::{Action, Event, Log, Trace};

/// An event or symptom to run forward to, or an event to undo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Send { tag: Tag },
    Rec { tag: Tag },
    Deliver { tag: Tag },
    Spawn { pid: Pid },
    Exit { pid: Pid },
    /// Some process can no longer step but has not exited.
    Deadlock,
    Orphan,
    Lost,
}

impl Target {
    fn matches(&self, e: &Event) -> bool {
        match (*self, e.action) {
            (Target::Send { tag }, Action::Send { tag: t, .. })
            | (Target::Rec { tag }, Action::Rec { tag: t })
            | (Target::Deliver { tag }, Action::Deliver { tag: t }) => tag == t,
            (Target::Spawn { pid }, Action::Spawn { child }) => pid == child,
            (Target::Exit { pid }, Action::Exit) => pid == e.pid,
            _ => false,
        }
    }

    fn is_symptom(&self) -> bool {
        matches!(self, Target::Deadlock | Target::Orphan | Target::Lost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "request", rename_all = "snake_case")]
pub enum Request {
    /// Silent steps of `pid` up to and including its next event, or the
    /// next admissible delivery to it.
    StepFwd { pid: Pid },
    /// Undoes the last event of `pid` and the silent steps leading to it.
    StepBwd { pid: Pid },
    FwdUntil { target: Target },
    /// Undoes the target event and everything causally after it.
    BwdUntil { target: Target },
    /// Undoes the last `steps` events of `pid` with their consequences.
    RollbackSteps { pid: Pid, steps: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StepReport {
    /// Events performed, in order.
    pub forward: Vec<Event>,
    /// Events undone, in order.
    pub undone: Vec<Event>,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error(transparent)]
    Rdebug(#[from] RdebugError),
    #[error("{pid} cannot undo its last step yet: {}", list(.plan))]
    Blocked { pid: Pid, plan: Vec<Prerequisite> },
    #[error("{0} cannot step")]
    CannotStep(Pid),
    #[error("{0} has nothing to undo")]
    NothingToUndo(Pid),
    #[error("no such event: {0}")]
    NotFound(String),
    #[error("target is not an event")]
    NotAnEvent,
}

fn list(plan: &[Prerequisite]) -> String {
    plan.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
}

/// A reversible system together with the program, the recorded events and
/// the forward driver.
#[derive(Debug, Clone)]
pub struct Debugger {
    pub program: Arc<Program>,
    pub sys: RSystem,
    pub events: Vec<Event>,
    pub driver: Driver,
    /// Upper bound on transitions taken by one `FwdUntil`.
    pub budget: usize,
}

impl Debugger {
    /// Replays `log` if given (processes continue freely once their part
    /// of the log is consumed); otherwise runs freely from the start.
    pub fn new(program: Arc<Program>, entry: &str, log: Option<Log>) -> Result<Self, RdebugError> {
        let sys = RSystem::new(&program, entry, log.unwrap_or_default())?;
        Ok(Debugger {
            program,
            sys,
            events: Vec::new(),
            driver: Driver::free(),
            budget: crate::runtime::DEFAULT_BUDGET,
        })
    }

    pub fn trace(&self) -> Trace {
        let mut t = Trace::from_events(&self.events);
        for &pid in self.sys.pool.keys() {
            t.0.entry(pid).or_default();
        }
        t
    }

    pub fn snapshot(&self) -> Snapshot {
        self.sys.snapshot(&self.program)
    }

    fn forget(&mut self, undone: &[Event]) {
        for e in undone {
            if let Some(i) = self.events.iter().rposition(|x| x == e) {
                self.events.remove(i);
            }
        }
    }

    pub fn request(&mut self, req: Request) -> Result<StepReport, RequestError> {
        match req {
            Request::StepFwd { pid } => self.step_fwd(pid),
            Request::StepBwd { pid } => self.step_bwd(pid),
            Request::FwdUntil { target } => self.fwd_until(target),
            Request::BwdUntil { target } => self.bwd_until(target),
            Request::RollbackSteps { pid, steps } => self.rollback(pid, steps),
        }
    }

    fn step_fwd(&mut self, pid: Pid) -> Result<StepReport, RequestError> {
        let mut report = StepReport::default();
        let mut moved = false;
        for _ in 0..self.budget {
            let Some(choice) = self.driver.candidate(&self.program, &self.sys, pid)? else {
                break;
            };
            moved = true;
            if let Some(e) = self.sys.fwd_step(&self.program, choice)? {
                self.events.push(e);
                report.forward.push(e);
                report.reached = true;
                break;
            }
        }
        if !moved {
            return Err(RequestError::CannotStep(pid));
        }
        Ok(report)
    }

    fn top_silent(&self, pid: Pid) -> bool {
        self.sys.pool[&pid].history.last().is_some_and(HistoryEntry::is_silent)
    }

    /// Undoes silent entries on top of `pid`'s history.
    fn undo_silent(&mut self, pid: Pid) {
        while self.top_silent(pid) {
            self.sys.undo_top(pid);
        }
    }

    fn step_bwd(&mut self, pid: Pid) -> Result<StepReport, RequestError> {
        let proc = self.sys.process(pid)?;
        if proc.history.is_empty() {
            return Err(RequestError::NothingToUndo(pid));
        }
        let mut sim = self.sys.clone();
        while sim.pool[&pid].history.last().is_some_and(HistoryEntry::is_silent) {
            sim.undo_top(pid);
        }
        let mut report = StepReport::default();
        if !sim.pool[&pid].history.is_empty() {
            if let UndoStatus::Blocked(plan) = sim.can_undo(pid) {
                return Err(RequestError::Blocked { pid, plan });
            }
            report.undone.extend(sim.undo_top(pid));
        }
        while sim.pool[&pid].history.last().is_some_and(HistoryEntry::is_silent) {
            sim.undo_top(pid);
        }
        self.sys = sim;
        self.forget(&report.undone);
        report.reached = true;
        Ok(report)
    }

    fn rollback(&mut self, pid: Pid, steps: usize) -> Result<StepReport, RequestError> {
        let mut report = StepReport::default();
        for _ in 0..steps {
            self.sys.process(pid)?;
            if self.sys.pool[&pid].history.is_empty() {
                break;
            }
            self.undo_silent(pid);
            if !self.sys.pool[&pid].history.is_empty() {
                let undone = self.sys.undo_cascade(pid)?;
                self.forget(&undone);
                report.undone.extend(undone);
            }
            self.undo_silent(pid);
        }
        report.reached = true;
        Ok(report)
    }

    fn fwd_until(&mut self, target: Target) -> Result<StepReport, RequestError> {
        let mut report = StepReport::default();
        if !target.is_symptom() && self.events.iter().any(|e| target.matches(e)) {
            report.reached = true;
            return Ok(report);
        }
        for _ in 0..self.budget {
            match self.driver.step(&self.program, &mut self.sys)? {
                Some((_, Some(e))) => {
                    self.events.push(e);
                    report.forward.push(e);
                    if target.matches(&e) {
                        report.reached = true;
                        return Ok(report);
                    }
                }
                Some((_, None)) => {}
                None => {
                    let s = symptoms(&self.trace());
                    report.reached = match target {
                        Target::Deadlock => !s.blocked.is_empty(),
                        Target::Orphan => !s.orphan.is_empty(),
                        Target::Lost => !s.lost.is_empty(),
                        _ => false,
                    };
                    return Ok(report);
                }
            }
        }
        Ok(report)
    }

    /// Which process's history holds the event, and at which position.
    fn locate(&self, target: Target) -> Option<(Pid, usize)> {
        self.sys.pool.values().find_map(|p| {
            p.history
                .iter()
                .position(|h| {
                    h.action()
                        .is_some_and(|action| target.matches(&Event { pid: p.pid, action }))
                })
                .map(|i| (p.pid, i))
        })
    }

    fn bwd_until(&mut self, target: Target) -> Result<StepReport, RequestError> {
        let mut report = StepReport::default();
        let mut sim = self.sys.clone();
        let mut out = Vec::new();
        let owner = match target {
            Target::Deadlock | Target::Orphan | Target::Lost => return Err(RequestError::NotAnEvent),
            Target::Deliver { tag } => {
                if let Some((pid, at)) = self.locate(Target::Rec { tag }) {
                    while sim.pool[&pid].history.len() > at {
                        sim.perform(Need::Top(pid), &mut out, &mut report.undone, 0)?;
                    }
                }
                let pid = sim
                    .pool
                    .values()
                    .find(|p| p.mailbox.iter().any(|m| m.tag == tag))
                    .map(|p| p.pid)
                    .ok_or_else(|| RequestError::NotFound(format!("deliver({tag})")))?;
                sim.perform(Need::Deliver(pid, tag), &mut out, &mut report.undone, 0)?;
                None
            }
            _ => {
                let (pid, at) = self
                    .locate(target)
                    .ok_or_else(|| RequestError::NotFound(format!("{target:?}")))?;
                while sim.pool[&pid].history.len() > at {
                    sim.perform(Need::Top(pid), &mut out, &mut report.undone, 0)?;
                }
                Some(pid)
            }
        };
        if let Some(pid) = owner {
            while sim.pool[&pid].history.last().is_some_and(HistoryEntry::is_silent) {
                sim.undo_top(pid);
            }
        }
        self.sys = sim;
        self.forget(&report.undone);
        report.reached = true;
        Ok(report)
    }
}
