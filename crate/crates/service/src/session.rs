//! Debug sessions and the JSON request protocol.
//!
//! A request is `{"id": n, "method": m, "params": {...}}`; the answer is
//! `{"id": n, "result": ...}` or `{"id": n, "error": {"code", "message",
//! "data"?}}`. A method that changes a session's state is followed by a
//! `state_changed` notification carrying the session's new snapshot and
//! sequence number.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use kern_core::analysis::{all_race_sets, race_variant, symptoms};
use kern_core::lang::parse;
use kern_core::rdebug::{replay, Debugger, Request, RequestError, ReplayStatus, Snapshot, Target};
use kern_core::runtime::{run, Delivery, SchedulerConfig, SchedulerOptions, TransitionChoice};
use kern_core::trace::{log_of, Event, EventRef, Log, LogAction, Trace};
use kern_core::{Pid, Tag};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const UNKNOWN_METHOD: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const UNKNOWN_SESSION: i64 = 1;
pub const BLOCKED: i64 = 2;
pub const REQUEST_FAILED: i64 = 3;
pub const LOAD_FAILED: i64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// A run is recorded first and then stepped through by replaying its log.
    Record,
    /// A given log is replayed.
    Replay,
    /// No log: every step is chosen freely.
    Free,
}

pub struct Session {
    pub id: String,
    pub mode: Mode,
    pub entry: String,
    pub parent: Option<String>,
    /// The recorded run, in record mode.
    pub recorded: Option<Vec<Event>>,
    pub debugger: Debugger,
    pub seq: u64,
}

impl Session {
    /// The trace race sets and variants are computed on: the recorded run
    /// in record mode, otherwise the events performed so far.
    pub fn analysis_trace(&self) -> Trace {
        match &self.recorded {
            Some(events) => Trace::from_events(events),
            None => self.debugger.trace(),
        }
    }

    fn summary(&self) -> Value {
        json!({ "session": self.id, "mode": self.mode, "entry": self.entry, "parent": self.parent })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolError {
    pub code: i64,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl ProtocolError {
    fn new(code: i64, message: impl Into<String>) -> Self {
        ProtocolError {
            code,
            message: message.into(),
            data: None,
        }
    }

    fn params(message: impl std::fmt::Display) -> Self {
        Self::new(INVALID_PARAMS, message.to_string())
    }
}

impl From<RequestError> for ProtocolError {
    fn from(e: RequestError) -> Self {
        match &e {
            RequestError::Blocked { pid, plan } => ProtocolError {
                code: BLOCKED,
                message: e.to_string(),
                data: Some(json!({ "pid": pid, "plan": plan })),
            },
            _ => ProtocolError::new(REQUEST_FAILED, e.to_string()),
        }
    }
}

#[derive(Deserialize)]
struct Envelope {
    id: Value,
    method: String,
    #[serde(default)]
    params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadParams {
    source: Option<String>,
    path: Option<String>,
    #[serde(default = "main_entry")]
    entry: String,
    mode: Option<Mode>,
    #[serde(default = "random_policy")]
    sched: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "one")]
    fuel: u32,
    schedule: Option<Vec<TransitionChoice>>,
    #[serde(default)]
    delivery: DeliveryParam,
    #[serde(default = "default_budget")]
    budget: usize,
    log: Option<BTreeMap<Pid, Vec<LogAction>>>,
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum DeliveryParam {
    Eager,
    #[default]
    Lazy,
}

fn main_entry() -> String {
    "main".into()
}
fn random_policy() -> String {
    "random".into()
}
fn one() -> u32 {
    1
}
fn default_budget() -> usize {
    kern_core::runtime::DEFAULT_BUDGET
}

#[derive(Deserialize)]
struct SessionParam {
    session: String,
}

#[derive(Deserialize)]
struct PidParams {
    session: String,
    pid: Pid,
}

#[derive(Deserialize)]
struct TargetParams {
    session: String,
    target: Target,
}

#[derive(Deserialize)]
struct RollbackParams {
    session: String,
    pid: Pid,
    steps: usize,
}

#[derive(Deserialize)]
struct ForkParams {
    session: String,
    receive: EventRef,
    tag: Tag,
}

/// What answering one request produced: the response followed by any
/// notifications.
pub type Outgoing = Vec<Value>;

/// Every open session. Requests to one session are handled one at a time
/// in arrival order; different sessions do not wait for each other.
#[derive(Default)]
pub struct Sessions {
    map: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next: AtomicU64,
}

fn parse_params<T: for<'de> Deserialize<'de>>(params: Value) -> Result<T, ProtocolError> {
    let params = if params.is_null() { json!({}) } else { params };
    serde_json::from_value(params).map_err(ProtocolError::params)
}

fn notification(s: &Session) -> Value {
    json!({
        "method": "state_changed",
        "params": { "session": s.id, "seq": s.seq, "snapshot": s.debugger.snapshot() },
    })
}

impl Sessions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers one line of the line-delimited protocol.
    pub fn handle_line(&self, line: &str) -> Vec<String> {
        let out = match serde_json::from_str::<Value>(line) {
            Ok(v) => self.handle(v),
            Err(e) => vec![error_response(Value::Null, ProtocolError::new(PARSE_ERROR, e.to_string()))],
        };
        out.iter().map(|v| v.to_string()).collect()
    }

    pub fn handle(&self, message: Value) -> Outgoing {
        let id = message.get("id").cloned().unwrap_or(Value::Null);
        let env: Envelope = match serde_json::from_value(message) {
            Ok(env) => env,
            Err(e) => return vec![error_response(id, ProtocolError::new(INVALID_REQUEST, e.to_string()))],
        };
        let mut notes = Vec::new();
        let answer = self.dispatch(&env.method, env.params, &mut notes);
        let mut out = vec![match answer {
            Ok(result) => json!({ "id": env.id, "result": result }),
            Err(e) => error_response(env.id, e),
        }];
        out.extend(notes);
        out
    }

    fn dispatch(&self, method: &str, params: Value, notes: &mut Vec<Value>) -> Result<Value, ProtocolError> {
        match method {
            "load" => self.load(parse_params(params)?, notes),
            "snapshot" => {
                let p: SessionParam = parse_params(params)?;
                let s = self.get(&p.session)?;
                let s = s.lock().unwrap();
                Ok(json!({ "session": s.id, "seq": s.seq, "snapshot": s.debugger.snapshot() }))
            }
            "step_fwd" => {
                let p: PidParams = parse_params(params)?;
                self.mutate(&p.session, Request::StepFwd { pid: p.pid }, notes)
            }
            "step_bwd" => {
                let p: PidParams = parse_params(params)?;
                self.mutate(&p.session, Request::StepBwd { pid: p.pid }, notes)
            }
            "run_until" => {
                let p: TargetParams = parse_params(params)?;
                self.mutate(&p.session, Request::FwdUntil { target: p.target }, notes)
            }
            "rollback_until" => {
                let p: TargetParams = parse_params(params)?;
                self.mutate(&p.session, Request::BwdUntil { target: p.target }, notes)
            }
            "rollback" => {
                let p: RollbackParams = parse_params(params)?;
                self.mutate(&p.session, Request::RollbackSteps { pid: p.pid, steps: p.steps }, notes)
            }
            "race_sets" => {
                let p: SessionParam = parse_params(params)?;
                let s = self.get(&p.session)?;
                let s = s.lock().unwrap();
                let t = s.analysis_trace();
                let sets: Vec<_> = all_race_sets(&t).into_values().collect();
                Ok(json!({ "symptoms": symptoms(&t), "race_sets": sets }))
            }
            "fork_variant" => self.fork(parse_params(params)?, notes),
            "list_sessions" => {
                let map = self.map.lock().unwrap();
                let list: Vec<Value> = map.values().map(|s| s.lock().unwrap().summary()).collect();
                Ok(Value::Array(list))
            }
            "close" => {
                let p: SessionParam = parse_params(params)?;
                self.map
                    .lock()
                    .unwrap()
                    .remove(&p.session)
                    .ok_or_else(|| unknown(&p.session))?;
                Ok(json!({ "closed": p.session }))
            }
            other => Err(ProtocolError::new(UNKNOWN_METHOD, format!("unknown method `{other}`"))),
        }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ProtocolError> {
        self.map.lock().unwrap().get(id).cloned().ok_or_else(|| unknown(id))
    }

    fn insert(&self, mut session: Session, notes: &mut Vec<Value>) -> Value {
        let id = format!("s{}", self.next.fetch_add(1, Ordering::SeqCst) + 1);
        session.id = id.clone();
        session.seq = 1;
        notes.push(notification(&session));
        let summary = session.summary();
        let snapshot = session.debugger.snapshot();
        self.map.lock().unwrap().insert(id, Arc::new(Mutex::new(session)));
        json!({ "session": summary, "seq": 1, "snapshot": snapshot })
    }

    fn mutate(&self, id: &str, req: Request, notes: &mut Vec<Value>) -> Result<Value, ProtocolError> {
        let s = self.get(id)?;
        let mut s = s.lock().unwrap();
        let before: Snapshot = s.debugger.snapshot();
        let result = s.debugger.request(req);
        if result.is_ok() || s.debugger.snapshot() != before {
            s.seq += 1;
            notes.push(notification(&s));
        }
        let report = result?;
        Ok(json!({ "seq": s.seq, "report": report }))
    }

    fn load(&self, p: LoadParams, notes: &mut Vec<Value>) -> Result<Value, ProtocolError> {
        let source = match (p.source, p.path) {
            (Some(src), None) => src,
            (None, Some(path)) => std::fs::read_to_string(&path)
                .map_err(|e| ProtocolError::new(LOAD_FAILED, format!("{path}: {e}")))?,
            _ => return Err(ProtocolError::params("exactly one of `source` and `path` is required")),
        };
        let program = Arc::new(parse(&source).map_err(|e| ProtocolError::new(LOAD_FAILED, e.to_string()))?);
        let mode = p.mode.unwrap_or(if p.log.is_some() { Mode::Replay } else { Mode::Record });
        let (log, recorded, stop) = match mode {
            Mode::Record => {
                if p.log.is_some() {
                    return Err(ProtocolError::params("a log is only accepted in replay mode"));
                }
                let config = SchedulerConfig {
                    policy: if p.schedule.is_some() { "scripted".into() } else { p.sched.clone() },
                    options: SchedulerOptions {
                        fuel: p.fuel,
                        seed: p.seed,
                        script: p.schedule.unwrap_or_default(),
                    },
                    delivery: match p.delivery {
                        DeliveryParam::Eager => Delivery::Eager,
                        DeliveryParam::Lazy => Delivery::Lazy,
                    },
                };
                let r = run(&program, &p.entry, &config, p.budget)
                    .map_err(|e| ProtocolError::new(LOAD_FAILED, e.to_string()))?;
                (Some(log_of(&r.trace)), Some(r.events), Some(r.stop))
            }
            Mode::Replay => {
                let log = p.log.ok_or_else(|| ProtocolError::params("replay mode needs a `log`"))?;
                (Some(Log(log)), None, None)
            }
            Mode::Free => (None, None, None),
        };
        let debugger = Debugger::new(program, &p.entry, log)
            .map_err(|e| ProtocolError::new(LOAD_FAILED, e.to_string()))?;
        let session = Session {
            id: String::new(),
            mode,
            entry: p.entry,
            parent: None,
            recorded,
            debugger,
            seq: 0,
        };
        let mut result = self.insert(session, notes);
        if let Some(stop) = stop {
            result["recorded_stop"] = json!(stop);
        }
        Ok(result)
    }

    fn fork(&self, p: ForkParams, notes: &mut Vec<Value>) -> Result<Value, ProtocolError> {
        let parent = self.get(&p.session)?;
        let (program, entry, log) = {
            let s = parent.lock().unwrap();
            let log = race_variant(&s.analysis_trace(), p.receive, p.tag)
                .map_err(|e| ProtocolError::new(REQUEST_FAILED, e.to_string()))?;
            (s.debugger.program.clone(), s.entry.clone(), log)
        };
        // Whether the whole variant log can be replayed.
        let status = replay(&program, &entry, log.clone(), kern_core::runtime::DEFAULT_BUDGET)
            .map(|o| o.status)
            .map_err(|e| ProtocolError::new(REQUEST_FAILED, e.to_string()))?;
        let debugger = Debugger::new(program, &entry, Some(log.clone()))
            .map_err(|e| ProtocolError::new(REQUEST_FAILED, e.to_string()))?;
        let session = Session {
            id: String::new(),
            mode: Mode::Replay,
            entry,
            parent: Some(p.session),
            recorded: None,
            debugger,
            seq: 0,
        };
        let mut result = self.insert(session, notes);
        result["log"] = json!(log.0);
        result["feasible"] = json!(status == ReplayStatus::Complete);
        result["replay"] = json!(status);
        Ok(result)
    }
}

fn unknown(id: &str) -> ProtocolError {
    ProtocolError::new(UNKNOWN_SESSION, format!("unknown session `{id}`"))
}

fn error_response(id: Value, e: ProtocolError) -> Value {
    json!({ "id": id, "error": e })
}
