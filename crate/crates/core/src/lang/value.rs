use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::ids::{Pid, Tag};

/// Runtime values. Pids cannot be written as literals; they only enter a
/// program through `spawn` and `self()`.
///
/// The derived ordering is the term order used by `<`, `=<`, `>` and `>=`:
/// integers < atoms < pids < tuples < lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Atom(String),
    Pid(Pid),
    Tuple(Vec<Value>),
    List(Vec<Value>),
}

impl Value {
    pub fn atom(name: &str) -> Value {
        Value::Atom(name.to_string())
    }

    pub fn bool(b: bool) -> Value {
        Value::atom(if b { "true" } else { "false" })
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Atom(a) if a == "true" => Some(true),
            Value::Atom(a) if a == "false" => Some(false),
            _ => None,
        }
    }

    pub fn as_pid(&self) -> Option<Pid> {
        match self {
            Value::Pid(p) => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Atom(a) => write!(f, "{a}"),
            Value::Pid(p) => write!(f, "<{p}>"),
            Value::Tuple(vs) => {
                write!(f, "{{")?;
                write_values(f, vs)?;
                write!(f, "}}")
            }
            Value::List(vs) => {
                write!(f, "[")?;
                write_values(f, vs)?;
                write!(f, "]")
            }
        }
    }
}

fn write_values(f: &mut fmt::Formatter<'_>, vs: &[Value]) -> fmt::Result {
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A tagged message, `{ℓ, v}`. The sender is kept alongside so that a
/// delivery can be undone into the right network queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub tag: Tag,
    pub from: Pid,
    pub value: Value,
}

/// Variable environment with copy-on-write sharing; frames capture it often.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env(Arc<BTreeMap<String, Value>>);

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) {
        Arc::make_mut(&mut self.0).insert(name.into(), value);
    }

    pub fn extend(&mut self, bindings: impl IntoIterator<Item = (String, Value)>) {
        let map = Arc::make_mut(&mut self.0);
        for (k, v) in bindings {
            map.insert(k, v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, Value)> for Env {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        Env(Arc::new(iter.into_iter().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display() {
        let v = Value::Tuple(vec![Value::atom("a"), Value::Int(1), Value::Pid(Pid(2))]);
        assert_eq!(v.to_string(), "{a,1,<p2>}");
        assert_eq!(Value::List(vec![]).to_string(), "[]");
    }

    #[test]
    fn term_order() {
        assert!(Value::Int(100) < Value::atom("a"));
        assert!(Value::atom("z") < Value::Pid(Pid(1)));
        assert!(Value::Pid(Pid(9)) < Value::Tuple(vec![]));
        assert!(Value::Tuple(vec![Value::Int(5)]) < Value::List(vec![]));
    }
}
