//! JSON trace and log files.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::{well_formed, Event, Log, LogAction, Trace, Violation};
use crate::ids::Pid;

const VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("unsupported version {0}, expected 1")]
    Version(String),
    #[error("missing or malformed field `{0}`")]
    Field(&'static str),
    #[error("event {index}: {message}")]
    Event { index: usize, message: String },
    #[error("log entry for {pid} at {index}: {message}")]
    LogEntry {
        pid: String,
        index: usize,
        message: String,
    },
    #[error("trace is not well formed: {}", list(.0))]
    Malformed(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A trace file: the witnessed event order, its trace, and any
/// well-formedness violations (always empty unless loaded leniently).
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub events: Vec<Event>,
    pub trace: Trace,
    pub violations: Vec<Violation>,
}

#[derive(Serialize)]
struct TraceFileOut<'a> {
    version: u64,
    events: &'a [Event],
}

#[derive(Serialize)]
struct LogFileOut<'a> {
    version: u64,
    log: &'a BTreeMap<Pid, Vec<LogAction>>,
}

fn envelope(text: &str, field: &'static str) -> Result<serde_json::Value, JsonError> {
    let mut v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    match v.get("version") {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(VERSION) => {}
        Some(other) => return Err(JsonError::Version(other.to_string())),
        None => return Err(JsonError::Field("version")),
    }
    v.get_mut(field)
        .map(serde_json::Value::take)
        .ok_or(JsonError::Field(field))
}

fn parse_events(text: &str) -> Result<Vec<Event>, JsonError> {
    let events = envelope(text, "events")?;
    let serde_json::Value::Array(items) = events else {
        return Err(JsonError::Field("events"));
    };
    items
        .into_iter()
        .enumerate()
        .map(|(index, item)| {
            serde_json::from_value(item).map_err(|e| JsonError::Event {
                index,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads a trace file and rejects traces that are not well formed.
pub fn read_trace(text: &str) -> Result<LoadedTrace, JsonError> {
    let loaded = read_trace_lenient(text)?;
    if !loaded.violations.is_empty() {
        return Err(JsonError::Malformed(loaded.violations));
    }
    Ok(loaded)
}

/// Reads a trace file, reporting well-formedness violations as data.
pub fn read_trace_lenient(text: &str) -> Result<LoadedTrace, JsonError> {
    let events = parse_events(text)?;
    let trace = Trace::from_events(&events);
    let violations = well_formed(&trace);
    Ok(LoadedTrace {
        events,
        trace,
        violations,
    })
}

pub fn write_trace(events: &[Event]) -> String {
    let mut s = serde_json::to_string_pretty(&TraceFileOut {
        version: VERSION,
        events,
    })
    .expect("trace serializes");
    s.push('\n');
    s
}

pub fn read_log(text: &str) -> Result<Log, JsonError> {
    let log = envelope(text, "log")?;
    let serde_json::Value::Object(entries) = log else {
        return Err(JsonError::Field("log"));
    };
    let mut out = BTreeMap::new();
    for (key, seq) in entries {
        let pid: Pid = key.parse().map_err(|e: crate::ids::IdError| JsonError::LogEntry {
            pid: key.clone(),
            index: 0,
            message: e.to_string(),
        })?;
        let serde_json::Value::Array(items) = seq else {
            return Err(JsonError::Field("log"));
        };
        let actions = items
            .into_iter()
            .enumerate()
            .map(|(index, item)| {
                serde_json::from_value(item).map_err(|e| JsonError::LogEntry {
                    pid: key.clone(),
                    index,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<LogAction>, _>>()?;
        out.insert(pid, actions);
    }
    Ok(Log(out))
}

pub fn write_log(log: &Log) -> String {
    let mut s = serde_json::to_string_pretty(&LogFileOut {
        version: VERSION,
        log: &log.0,
    })
    .expect("log serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::fixtures::*;
    use crate::trace::{log_of, Action};

    fn star_events() -> Vec<Event> {
        let e = |pid, action| Event { pid: p(pid), action };
        vec![
            e(1, spawn(2)),
            e(1, spawn(3)),
            e(1, send(1, 2)),
            e(1, EXIT),
            e(2, deliver(1)),
            e(2, rec(1)),
            e(3, send(2, 2)),
            e(3, send(3, 2)),
            e(3, EXIT),
            e(2, deliver(2)),
            e(2, deliver(3)),
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        let text = write_trace(&star_events());
        let loaded = read_trace(&text).unwrap();
        assert_eq!(loaded.trace, star());
        assert_eq!(write_trace(&loaded.events), text);
    }

    #[test]
    fn exact_field_names() {
        let text = write_trace(&star_events()[..3]);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(
            v["events"][2],
            serde_json::json!({"pid": "p1", "action": {"kind": "send", "tag": "l1", "to": "p2"}})
        );
        assert_eq!(
            v["events"][0]["action"],
            serde_json::json!({"kind": "spawn", "child": "p2"})
        );
    }

    #[test]
    fn unknown_kind_names_index() {
        let text = r#"{"version":1,"events":[{"pid":"p1","action":{"kind":"exit"}},
            {"pid":"p1","action":{"kind":"jump"}}]}"#;
        match read_trace(text) {
            Err(JsonError::Event { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pid_in_tag_field_is_rejected() {
        let text = r#"{"version":1,"events":[{"pid":"p1","action":{"kind":"rec","tag":"p2"}}]}"#;
        assert!(matches!(read_trace_lenient(text), Err(JsonError::Event { index: 0, .. })));
    }

    #[test]
    fn duplicate_tag_loads_leniently() {
        let mut events = star_events();
        events.insert(3, Event { pid: p(1), action: Action::Send { tag: l(1), to: p(2) } });
        let text = write_trace(&events);
        assert!(matches!(read_trace(&text), Err(JsonError::Malformed(_))));
        let loaded = read_trace_lenient(&text).unwrap();
        assert!(!loaded.violations.is_empty());
    }

    #[test]
    fn log_round_trip() {
        let log = log_of(&star());
        let text = write_log(&log);
        assert!(text.find("\"p1\"").unwrap() < text.find("\"p2\"").unwrap());
        assert_eq!(read_log(&text).unwrap(), log);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["log"]["p2"], serde_json::json!([{"kind": "rec", "tag": "l1"}]));
    }

    #[test]
    fn bad_version() {
        assert!(matches!(
            read_trace(r#"{"version":2,"events":[]}"#),
            Err(JsonError::Version(_))
        ));
        assert!(matches!(read_trace("{"), Err(JsonError::Syntax(_))));
    }
}
