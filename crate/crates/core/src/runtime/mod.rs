//! The tracing system semantics: a network of FIFO queues plus a process
//! pool, one transition per rule, with trace events as labels.

mod scheduler;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Pid, Tag};
use crate::lang::{
    advance, eval_step, matchrec, EvalLabel, LocalState, MatchMode, Message, Program, StepKind,
    Value,
};
use crate::trace::{Action, Event, Trace};

pub use scheduler::{
    Delivery, RandomScheduler, RoundRobin, Scheduler, SchedulerConfig, SchedulerOptions,
    SchedulerRegistry, Scripted,
};

/// One of the two sources of nondeterminism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransitionChoice {
    /// The unique applicable non-delivery rule of `pid`.
    Proc { pid: Pid },
    /// Delivery of the head of queue `(from, to)`.
    Deliver { from: Pid, to: Pid },
}

impl TransitionChoice {
    pub fn proc(pid: Pid) -> Self {
        TransitionChoice::Proc { pid }
    }

    pub fn deliver(from: Pid, to: Pid) -> Self {
        TransitionChoice::Deliver { from, to }
    }

    /// The process whose configuration the transition changes.
    pub fn pid(&self) -> Pid {
        match *self {
            TransitionChoice::Proc { pid } => pid,
            TransitionChoice::Deliver { to, .. } => to,
        }
    }
}

impl std::fmt::Display for TransitionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransitionChoice::Proc { pid } => write!(f, "proc({pid})"),
            TransitionChoice::Deliver { from, to } => write!(f, "deliver({from}→{to})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("entry function {0}/0 is not defined")]
    UnknownEntry(String),
    #[error("transition {0} is not enabled")]
    NotEnabled(TransitionChoice),
    #[error("schedule entry {index} ({choice}): {reason}")]
    Script {
        index: usize,
        choice: TransitionChoice,
        reason: String,
    },
    #[error("unknown scheduler `{0}`")]
    UnknownScheduler(String),
}

/// `⟨p, ls, q⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub pid: Pid,
    pub ls: LocalState,
    pub mailbox: Vec<Message>,
}

pub type Network = BTreeMap<(Pid, Pid), VecDeque<Message>>;

/// `Γ; Π` plus the fresh-id counters. Empty queues are never stored, so
/// structural equality is equality of systems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    pub network: Network,
    pub pool: BTreeMap<Pid, Process>,
    pub next_pid: u32,
    pub next_tag: u32,
}

/// What a single process is able to do next in a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcStatus {
    Enabled(StepKind),
    /// At a receive that no mailbox message matches.
    Blocked,
}

impl System {
    /// `[ ]; ⟨p1, ls, [ ]⟩` with `ls` the call of `entry()`.
    pub fn initial(program: &Program, entry: &str) -> Result<System, RuntimeError> {
        let ls = LocalState::initial(program, entry, vec![])
            .map_err(|_| RuntimeError::UnknownEntry(entry.to_string()))?;
        let root = Pid(1);
        Ok(System {
            network: Network::new(),
            pool: BTreeMap::from([(
                root,
                Process {
                    pid: root,
                    ls,
                    mailbox: Vec::new(),
                },
            )]),
            next_pid: 2,
            next_tag: 1,
        })
    }

    pub fn status(&self, program: &Program, pid: Pid) -> Option<ProcStatus> {
        let proc = self.pool.get(&pid)?;
        let kind = proc.ls.next_kind();
        Some(match kind {
            StepKind::Receive => {
                let matched = match eval_step(program, &proc.ls) {
                    Ok((EvalLabel::Rec { future, clauses }, ls)) => {
                        matchrec(&ls, future, &clauses, &proc.mailbox, MatchMode::OldestMatching)
                            .is_some()
                    }
                    _ => false,
                };
                if matched {
                    ProcStatus::Enabled(kind)
                } else {
                    ProcStatus::Blocked
                }
            }
            StepKind::Awaiting => ProcStatus::Blocked,
            _ => ProcStatus::Enabled(kind),
        })
    }

    /// Every applicable transition, processes first, then deliveries.
    pub fn enabled(&self, program: &Program) -> Vec<TransitionChoice> {
        let mut out: Vec<TransitionChoice> = self
            .pool
            .keys()
            .filter(|&&p| matches!(self.status(program, p), Some(ProcStatus::Enabled(_))))
            .map(|&pid| TransitionChoice::Proc { pid })
            .collect();
        out.extend(
            self.network
                .keys()
                .filter(|(_, to)| self.pool.contains_key(to))
                .map(|&(from, to)| TransitionChoice::Deliver { from, to }),
        );
        out
    }

    /// Applies one transition in place and returns its event (`None` for
    /// Local and Self). On error the system is left unchanged.
    pub fn apply(
        &mut self,
        program: &Program,
        choice: TransitionChoice,
    ) -> Result<Option<Event>, RuntimeError> {
        let not_enabled = || RuntimeError::NotEnabled(choice);
        match choice {
            TransitionChoice::Deliver { from, to } => {
                if !self.pool.contains_key(&to) {
                    return Err(not_enabled());
                }
                let queue = self.network.get_mut(&(from, to)).ok_or_else(not_enabled)?;
                let msg = queue.pop_front().ok_or_else(not_enabled)?;
                if queue.is_empty() {
                    self.network.remove(&(from, to));
                }
                let tag = msg.tag;
                self.pool.get_mut(&to).unwrap().mailbox.push(msg);
                Ok(Some(Event {
                    pid: to,
                    action: Action::Deliver { tag },
                }))
            }
            TransitionChoice::Proc { pid } => {
                let proc = self.pool.get(&pid).ok_or_else(not_enabled)?;
                if proc.ls.is_final() {
                    self.pool.remove(&pid);
                    return Ok(Some(Event {
                        pid,
                        action: Action::Exit,
                    }));
                }
                let (label, mut ls) = advance(program, &proc.ls);
                let action = match label {
                    EvalLabel::Local => None,
                    EvalLabel::SelfPid { future } => {
                        ls.fill_future(future, Value::Pid(pid)).expect("fresh future");
                        None
                    }
                    EvalLabel::Spawn {
                        future,
                        function,
                        args,
                    } => {
                        let child = Pid(self.next_pid);
                        self.next_pid += 1;
                        let child_ls = LocalState::initial(program, &function, args)
                            .unwrap_or_else(|e| LocalState::crashed(&e));
                        ls.fill_future(future, Value::Pid(child)).expect("fresh future");
                        self.pool.insert(
                            child,
                            Process {
                                pid: child,
                                ls: child_ls,
                                mailbox: Vec::new(),
                            },
                        );
                        Some(Action::Spawn { child })
                    }
                    EvalLabel::Send { value, to } => {
                        let tag = Tag(self.next_tag);
                        self.next_tag += 1;
                        self.network.entry((pid, to)).or_default().push_back(Message {
                            tag,
                            from: pid,
                            value,
                        });
                        Some(Action::Send { tag, to })
                    }
                    EvalLabel::Rec { future, clauses } => {
                        let m = matchrec(&ls, future, &clauses, &proc.mailbox, MatchMode::OldestMatching)
                            .ok_or_else(not_enabled)?;
                        let proc = self.pool.get_mut(&pid).unwrap();
                        proc.mailbox = m.mailbox;
                        ls = m.state;
                        Some(Action::Rec { tag: m.tag })
                    }
                };
                self.pool.get_mut(&pid).unwrap().ls = ls;
                Ok(action.map(|action| Event { pid, action }))
            }
        }
    }

    /// Pure form of [`System::apply`].
    pub fn step(
        &self,
        program: &Program,
        choice: TransitionChoice,
    ) -> Result<(Option<Event>, System), RuntimeError> {
        let mut next = self.clone();
        let event = next.apply(program, choice)?;
        Ok((event, next))
    }

    /// Renames pids and tags everywhere, including values in local states.
    /// Counters are left untouched.
    pub fn rename(&self, pid: &dyn Fn(Pid) -> Pid, tag: &dyn Fn(Tag) -> Tag) -> System {
        let msg = |m: &Message| Message {
            tag: tag(m.tag),
            from: pid(m.from),
            value: rename_value(&m.value, pid),
        };
        System {
            network: self
                .network
                .iter()
                .map(|(&(a, b), q)| ((pid(a), pid(b)), q.iter().map(msg).collect()))
                .collect(),
            pool: self
                .pool
                .values()
                .map(|p| {
                    (
                        pid(p.pid),
                        Process {
                            pid: pid(p.pid),
                            ls: p.ls.map_values(&|v| rename_value(v, pid)),
                            mailbox: p.mailbox.iter().map(msg).collect(),
                        },
                    )
                })
                .collect(),
            next_pid: self.next_pid,
            next_tag: self.next_tag,
        }
    }
}

fn rename_value(v: &Value, pid: &dyn Fn(Pid) -> Pid) -> Value {
    match v {
        Value::Pid(p) => Value::Pid(pid(*p)),
        Value::Tuple(items) => Value::Tuple(items.iter().map(|x| rename_value(x, pid)).collect()),
        Value::List(items) => Value::List(items.iter().map(|x| rename_value(x, pid)).collect()),
        other => other.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The pool is empty.
    Completed,
    /// Processes remain but nothing is enabled.
    Stuck,
    Budget,
    /// A scripted schedule ran out while transitions were still enabled.
    ScriptEnded,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Events in the witnessed order.
    pub events: Vec<Event>,
    /// The choices taken, one per transition.
    pub choices: Vec<TransitionChoice>,
    pub trace: Trace,
    pub system: System,
    pub stop: StopReason,
    /// Final value of every process that exited.
    pub results: BTreeMap<Pid, Value>,
}

impl RunResult {
    /// Pids still in the pool.
    pub fn blocked(&self) -> Vec<Pid> {
        self.system.pool.keys().copied().collect()
    }
}

pub const DEFAULT_BUDGET: usize = 10_000;

/// Runs `entry()` from the initial system.
pub fn run(
    program: &Program,
    entry: &str,
    config: &SchedulerConfig,
    budget: usize,
) -> Result<RunResult, RuntimeError> {
    let sys = System::initial(program, entry)?;
    let mut sched = SchedulerRegistry::default().build(config)?;
    run_from(program, sys, Vec::new(), sched.as_mut(), config.delivery, budget)
}

/// Continues a run from `sys`; `history` holds the events that led there.
pub fn run_from(
    program: &Program,
    mut sys: System,
    history: Vec<Event>,
    sched: &mut dyn Scheduler,
    delivery: Delivery,
    budget: usize,
) -> Result<RunResult, RuntimeError> {
    let mut events = history;
    let mut choices = Vec::new();
    let mut results = BTreeMap::new();
    let mut spent = 0;
    let initial_pids: Vec<Pid> = sys.pool.keys().copied().collect();
    let stop = loop {
        let mut enabled = sys.enabled(program);
        if delivery == Delivery::Eager {
            enabled.retain(|c| matches!(c, TransitionChoice::Proc { .. }));
        }
        if enabled.is_empty() {
            break if sys.pool.is_empty() {
                StopReason::Completed
            } else {
                StopReason::Stuck
            };
        }
        if spent >= budget {
            break StopReason::Budget;
        }
        let Some(choice) = sched.choose(&sys, &enabled)? else {
            break StopReason::ScriptEnded;
        };
        if !enabled.contains(&choice) {
            return Err(RuntimeError::NotEnabled(choice));
        }
        if let TransitionChoice::Proc { pid } = choice {
            if let Some(v) = sys.pool[&pid].ls.result() {
                results.insert(pid, v.clone());
            }
        }
        let event = sys.apply(program, choice)?;
        sched.observe(choice, event.as_ref());
        choices.push(choice);
        spent += 1;
        if let Some(e) = event {
            events.push(e);
            if let (Delivery::Eager, Action::Send { to, .. }) = (delivery, e.action) {
                if sys.pool.contains_key(&to) {
                    let d = TransitionChoice::Deliver { from: e.pid, to };
                    let de = sys.apply(program, d)?.expect("delivery emits an event");
                    choices.push(d);
                    events.push(de);
                }
            }
        }
    };
    let mut trace = Trace::from_events(&events);
    for pid in initial_pids.into_iter().chain(sys.pool.keys().copied()) {
        trace.0.entry(pid).or_default();
    }
    Ok(RunResult {
        events,
        choices,
        trace,
        system: sys,
        stop,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::trace::well_formed;

    const FIG1: &str = "
        main() -> P2 = spawn(consumer, []), P3 = spawn(producer, [P2]), P2 ! {a, 1}.
        consumer() -> receive {a, X} -> X end.
        producer(P) -> P ! {b, 2}, P ! {a, 3}.
    ";

    fn p(n: u32) -> Pid {
        Pid(n)
    }

    #[test]
    fn initial_enables_root_only() {
        let prog = parse(FIG1).unwrap();
        let sys = System::initial(&prog, "main").unwrap();
        assert_eq!(sys.enabled(&prog), vec![TransitionChoice::proc(p(1))]);
        assert!(System::initial(&prog, "nope").is_err());
    }

    /// Steps `pid` until it emits an event.
    fn until_event(prog: &Program, sys: &mut System, pid: Pid) -> Event {
        loop {
            if let Some(e) = sys.apply(prog, TransitionChoice::proc(pid)).unwrap() {
                return e;
            }
        }
    }

    #[test]
    fn send_and_deliver() {
        let prog = parse(FIG1).unwrap();
        let mut sys = System::initial(&prog, "main").unwrap();
        until_event(&prog, &mut sys, p(1));
        until_event(&prog, &mut sys, p(1));
        let e = until_event(&prog, &mut sys, p(1));
        assert_eq!(e.action, Action::Send { tag: Tag(1), to: p(2) });
        assert_eq!(sys.network[&(p(1), p(2))].len(), 1);
        assert!(sys.enabled(&prog).contains(&TransitionChoice::deliver(p(1), p(2))));

        let (e, next) = sys.step(&prog, TransitionChoice::deliver(p(1), p(2))).unwrap();
        assert_eq!(e, Some(Event { pid: p(2), action: Action::Deliver { tag: Tag(1) } }));
        assert_eq!(next.pool[&p(2)].mailbox[0].tag, Tag(1));
        assert!(next.network.is_empty());

        let e = until_event(&prog, &mut sys, p(1));
        assert_eq!(e.action, Action::Exit);
        assert!(!sys.pool.contains_key(&p(1)));
    }

    #[test]
    fn blocked_receive_is_not_enabled() {
        let prog = parse(FIG1).unwrap();
        let mut sys = System::initial(&prog, "main").unwrap();
        until_event(&prog, &mut sys, p(1));
        until_event(&prog, &mut sys, p(1));
        until_event(&prog, &mut sys, p(3));
        sys.apply(&prog, TransitionChoice::deliver(p(3), p(2))).unwrap();
        // p2 reaches its receive and only holds {b,2}.
        while sys.status(&prog, p(2)) == Some(ProcStatus::Enabled(StepKind::Local)) {
            sys.apply(&prog, TransitionChoice::proc(p(2))).unwrap();
        }
        assert_eq!(sys.status(&prog, p(2)), Some(ProcStatus::Blocked));
        assert!(!sys.enabled(&prog).contains(&TransitionChoice::proc(p(2))));
        assert_eq!(
            sys.apply(&prog, TransitionChoice::proc(p(2))),
            Err(RuntimeError::NotEnabled(TransitionChoice::proc(p(2))))
        );
    }

    #[test]
    fn trivial_program() {
        let prog = parse("main() -> 42.").unwrap();
        for config in [
            SchedulerConfig::round_robin(1),
            SchedulerConfig::random(3),
            SchedulerConfig::random(3).with_delivery(Delivery::Eager),
        ] {
            let r = run(&prog, "main", &config, DEFAULT_BUDGET).unwrap();
            assert_eq!(r.stop, StopReason::Completed);
            assert_eq!(r.trace.0, BTreeMap::from([(p(1), vec![Action::Exit])]));
            assert_eq!(r.results[&p(1)], Value::Int(42));
        }
    }

    #[test]
    fn random_is_reproducible() {
        let prog = parse(FIG1).unwrap();
        let a = run(&prog, "main", &SchedulerConfig::random(7), DEFAULT_BUDGET).unwrap();
        let b = run(&prog, "main", &SchedulerConfig::random(7), DEFAULT_BUDGET).unwrap();
        assert_eq!(a.events, b.events);
        assert!(well_formed(&a.trace).is_empty());
    }

    #[test]
    fn eager_delivery_follows_send() {
        let prog = parse(FIG1).unwrap();
        for seed in 0..10 {
            let cfg = SchedulerConfig::random(seed).with_delivery(Delivery::Eager);
            let r = run(&prog, "main", &cfg, DEFAULT_BUDGET).unwrap();
            for (i, e) in r.events.iter().enumerate() {
                if let Action::Send { tag, to } = e.action {
                    if let Some(next) = r.events.get(i + 1) {
                        if r.trace.deliver_of(tag).is_some() {
                            assert_eq!(*next, Event { pid: to, action: Action::Deliver { tag } });
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn budget_stops_loops() {
        let prog = parse("main() -> loop(0). loop(N) -> loop(N + 1).").unwrap();
        let r = run(&prog, "main", &SchedulerConfig::round_robin(1), 50).unwrap();
        assert_eq!(r.stop, StopReason::Budget);
        assert_eq!(r.choices.len(), 50);
    }

    #[test]
    fn crash_is_an_exit() {
        let prog = parse("main() -> 1 + a.").unwrap();
        let r = run(&prog, "main", &SchedulerConfig::round_robin(1), 50).unwrap();
        assert_eq!(r.stop, StopReason::Completed);
        assert_eq!(r.results[&p(1)].to_string(), "{crash,badarith}");
    }

    #[test]
    fn choices_serialize() {
        let c = vec![TransitionChoice::proc(p(1)), TransitionChoice::deliver(p(3), p(2))];
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"[{"kind":"proc","pid":"p1"},{"kind":"deliver","from":"p3","to":"p2"}]"#
        );
    }
}
