//! Small-step expression semantics over local states `(env, focus, stack)`.
//!
//! Every step produces exactly one [`EvalLabel`]. Steps that need the system
//! layer (`self()`, `spawn`, `receive`) leave a [`Future`] in the focus, which
//! the caller fills in.

use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Clauses, Expr, ExprRef, Pattern, Program};
use super::matching::{apply_binop, match_pattern, select_clause};
use super::value::{Env, Value};
use crate::ids::Pid;

/// Placeholder for a value supplied by the system layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Future(pub u32);

impl fmt::Display for Future {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "κ{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Focus {
    Expr(ExprRef),
    Value(Value),
    Future(Future),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgsKind {
    Tuple,
    List,
    Call,
    Spawn,
}

/// Continuation frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// Left-to-right evaluation of a tuple, list, call or spawn argument list.
    /// `pending` is stored reversed so that `pop` yields the next expression.
    Args {
        kind: ArgsKind,
        name: String,
        done: Vec<Value>,
        pending: Vec<ExprRef>,
        tail: Option<ExprRef>,
        env: Env,
    },
    ListTail {
        items: Vec<Value>,
    },
    BinLeft {
        op: BinOp,
        rhs: ExprRef,
        env: Env,
    },
    BinRight {
        op: BinOp,
        lhs: Value,
    },
    SendTarget {
        message: ExprRef,
        env: Env,
    },
    SendMessage {
        target: Value,
    },
    Case {
        clauses: Clauses,
        env: Env,
    },
    Let {
        pattern: Pattern,
        body: ExprRef,
        env: Env,
    },
    Seq {
        rest: ExprRef,
        env: Env,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalState {
    pub env: Env,
    pub focus: Focus,
    pub stack: Vec<Frame>,
    next_future: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalLabel {
    Local,
    SelfPid {
        future: Future,
    },
    Send {
        value: Value,
        to: Pid,
    },
    Rec {
        future: Future,
        clauses: Clauses,
    },
    /// The system layer builds the child's initial state from `(function, args)`.
    Spawn {
        future: Future,
        function: String,
        args: Vec<Value>,
    },
}

/// What the next step of a local state will be, without taking it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Local,
    SelfPid,
    Spawn,
    Send,
    Receive,
    /// `final(ls)` holds.
    Final,
    /// Waiting for a future to be filled.
    Awaiting,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("bad arithmetic: {lhs} {op} {rhs}")]
    BadArith {
        op: &'static str,
        lhs: Value,
        rhs: Value,
    },
    #[error("bad argument: {what}")]
    BadArg { what: String },
    #[error("no case clause matching {0}")]
    NoCaseClause(Value),
    #[error("no match of right hand side value {0}")]
    BadMatch(Value),
    #[error("send to a non-pid {0}")]
    BadTarget(Value),
    #[error("undefined function {name}/{arity}")]
    Undefined { name: String, arity: usize },
    #[error("local state is final")]
    Final,
    #[error("local state awaits future {0}")]
    Awaiting(Future),
}

impl EvalError {
    /// Atom used in the crash value `{crash, Reason}`.
    pub fn reason(&self) -> &'static str {
        match self {
            EvalError::Unbound(_) => "unbound",
            EvalError::BadArith { .. } => "badarith",
            EvalError::BadArg { .. } => "badarg",
            EvalError::NoCaseClause(_) => "case_clause",
            EvalError::BadMatch(_) => "badmatch",
            EvalError::BadTarget(_) => "badtarget",
            EvalError::Undefined { .. } => "undef",
            EvalError::Final => "final",
            EvalError::Awaiting(_) => "awaiting",
        }
    }
}

impl LocalState {
    pub fn new(env: Env, expr: ExprRef) -> Self {
        LocalState {
            env,
            focus: Focus::Expr(expr),
            stack: Vec::new(),
            next_future: 0,
        }
    }

    /// `(params ↦ args, body, [])` for a call of `function`.
    pub fn initial(program: &Program, function: &str, args: Vec<Value>) -> Result<Self, EvalError> {
        let def = program
            .lookup(function, args.len())
            .ok_or_else(|| EvalError::Undefined {
                name: function.to_string(),
                arity: args.len(),
            })?;
        let env = def.params.iter().cloned().zip(args).collect();
        Ok(LocalState::new(env, def.body.clone()))
    }

    /// A crashed process: final, with value `{crash, Reason}`.
    pub fn crashed(err: &EvalError) -> Self {
        LocalState {
            env: Env::new(),
            focus: Focus::Value(Value::Tuple(vec![
                Value::atom("crash"),
                Value::atom(err.reason()),
            ])),
            stack: Vec::new(),
            next_future: 0,
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self.focus, Focus::Value(_)) && self.stack.is_empty()
    }

    pub fn result(&self) -> Option<&Value> {
        match (&self.focus, self.stack.is_empty()) {
            (Focus::Value(v), true) => Some(v),
            _ => None,
        }
    }

    /// Binds the pending future to a value (rules Self and Spawn).
    pub fn fill_future(&mut self, future: Future, value: Value) -> Result<(), EvalError> {
        match self.focus {
            Focus::Future(k) if k == future => {
                self.focus = Focus::Value(value);
                Ok(())
            }
            _ => Err(EvalError::BadArg {
                what: format!("no pending future {future}"),
            }),
        }
    }

    /// Clauses of the receive the process is about to evaluate, if any.
    pub fn pending_receive(&self) -> Option<&Clauses> {
        match &self.focus {
            Focus::Expr(e) => match &**e {
                Expr::Receive(cs) => Some(cs),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn next_kind(&self) -> StepKind {
        match &self.focus {
            Focus::Future(_) => StepKind::Awaiting,
            Focus::Value(_) => match self.stack.last() {
                None => StepKind::Final,
                Some(Frame::Args {
                    kind: ArgsKind::Spawn,
                    pending,
                    ..
                }) if pending.is_empty() => StepKind::Spawn,
                Some(Frame::SendMessage { target }) if target.as_pid().is_some() => StepKind::Send,
                Some(_) => StepKind::Local,
            },
            Focus::Expr(e) => match &**e {
                Expr::Receive(_) => StepKind::Receive,
                Expr::SelfPid => StepKind::SelfPid,
                Expr::Spawn { args, .. } if args.is_empty() => StepKind::Spawn,
                _ => StepKind::Local,
            },
        }
    }

    /// Applies `f` to every value held by the state (environments, focus
    /// and frames).
    pub fn map_values(&self, f: &dyn Fn(&Value) -> Value) -> LocalState {
        let env = |e: &Env| -> Env { e.iter().map(|(k, v)| (k.clone(), f(v))).collect() };
        let vals = |vs: &[Value]| -> Vec<Value> { vs.iter().map(f).collect() };
        let stack = self
            .stack
            .iter()
            .map(|fr| match fr {
                Frame::Args {
                    kind,
                    name,
                    done,
                    pending,
                    tail,
                    env: e,
                } => Frame::Args {
                    kind: *kind,
                    name: name.clone(),
                    done: vals(done),
                    pending: pending.clone(),
                    tail: tail.clone(),
                    env: env(e),
                },
                Frame::ListTail { items } => Frame::ListTail { items: vals(items) },
                Frame::BinLeft { op, rhs, env: e } => Frame::BinLeft {
                    op: *op,
                    rhs: rhs.clone(),
                    env: env(e),
                },
                Frame::BinRight { op, lhs } => Frame::BinRight { op: *op, lhs: f(lhs) },
                Frame::SendTarget { message, env: e } => Frame::SendTarget {
                    message: message.clone(),
                    env: env(e),
                },
                Frame::SendMessage { target } => Frame::SendMessage { target: f(target) },
                Frame::Case { clauses, env: e } => Frame::Case {
                    clauses: clauses.clone(),
                    env: env(e),
                },
                Frame::Let { pattern, body, env: e } => Frame::Let {
                    pattern: pattern.clone(),
                    body: body.clone(),
                    env: env(e),
                },
                Frame::Seq { rest, env: e } => Frame::Seq {
                    rest: rest.clone(),
                    env: env(e),
                },
            })
            .collect();
        LocalState {
            env: env(&self.env),
            focus: match &self.focus {
                Focus::Value(v) => Focus::Value(f(v)),
                other => other.clone(),
            },
            stack,
            next_future: self.next_future,
        }
    }

    fn fresh_future(&mut self) -> Future {
        let k = Future(self.next_future);
        self.next_future += 1;
        k
    }
}

/// One evaluation step `ls →z ls′`.
pub fn eval_step(program: &Program, ls: &LocalState) -> Result<(EvalLabel, LocalState), EvalError> {
    let mut next = ls.clone();
    let label = step_in_place(program, &mut next)?;
    Ok((label, next))
}

/// Like [`eval_step`], but a runtime error turns the state into a crashed
/// final state through a `Local` step.
pub fn advance(program: &Program, ls: &LocalState) -> (EvalLabel, LocalState) {
    match eval_step(program, ls) {
        Ok(r) => r,
        Err(e) => (EvalLabel::Local, LocalState::crashed(&e)),
    }
}

fn step_in_place(program: &Program, ls: &mut LocalState) -> Result<EvalLabel, EvalError> {
    let focus = std::mem::replace(&mut ls.focus, Focus::Value(Value::Int(0)));
    match focus {
        Focus::Future(k) => {
            ls.focus = Focus::Future(k);
            Err(EvalError::Awaiting(k))
        }
        Focus::Value(v) => match ls.stack.pop() {
            None => {
                ls.focus = Focus::Value(v);
                Err(EvalError::Final)
            }
            Some(frame) => continue_with(program, ls, v, frame),
        },
        Focus::Expr(e) => decompose(program, ls, e),
    }
}

fn decompose(program: &Program, ls: &mut LocalState, e: ExprRef) -> Result<EvalLabel, EvalError> {
    match &*e {
        Expr::Int(n) => ls.focus = Focus::Value(Value::Int(*n)),
        Expr::Atom(a) => ls.focus = Focus::Value(Value::Atom(a.clone())),
        Expr::Var(x) => {
            let v = ls.env.get(x).cloned().ok_or_else(|| EvalError::Unbound(x.clone()))?;
            ls.focus = Focus::Value(v);
        }
        Expr::Tuple(items) => start_args(program, ls, ArgsKind::Tuple, "", items, None)?,
        Expr::List { items, tail } => start_args(program, ls, ArgsKind::List, "", items, tail.clone())?,
        Expr::Call { name, args } => start_args(program, ls, ArgsKind::Call, name, args, None)?,
        Expr::Spawn { name, args } => {
            if args.is_empty() {
                return Ok(finish_args(program, ls, ArgsKind::Spawn, name, Vec::new())?
                    .expect("spawn yields a label"));
            }
            start_args(program, ls, ArgsKind::Spawn, name, args, None)?
        }
        Expr::BinOp(op, l, r) => {
            ls.stack.push(Frame::BinLeft {
                op: *op,
                rhs: r.clone(),
                env: ls.env.clone(),
            });
            ls.focus = Focus::Expr(l.clone());
        }
        Expr::Let {
            pattern,
            value,
            body,
        } => {
            ls.stack.push(Frame::Let {
                pattern: pattern.clone(),
                body: body.clone(),
                env: ls.env.clone(),
            });
            ls.focus = Focus::Expr(value.clone());
        }
        Expr::Seq(first, rest) => {
            ls.stack.push(Frame::Seq {
                rest: rest.clone(),
                env: ls.env.clone(),
            });
            ls.focus = Focus::Expr(first.clone());
        }
        Expr::Case { scrutinee, clauses } => {
            ls.stack.push(Frame::Case {
                clauses: clauses.clone(),
                env: ls.env.clone(),
            });
            ls.focus = Focus::Expr(scrutinee.clone());
        }
        Expr::Send { target, message } => {
            ls.stack.push(Frame::SendTarget {
                message: message.clone(),
                env: ls.env.clone(),
            });
            ls.focus = Focus::Expr(target.clone());
        }
        Expr::Receive(clauses) => {
            let future = ls.fresh_future();
            ls.focus = Focus::Future(future);
            return Ok(EvalLabel::Rec {
                future,
                clauses: clauses.clone(),
            });
        }
        Expr::SelfPid => {
            let future = ls.fresh_future();
            ls.focus = Focus::Future(future);
            return Ok(EvalLabel::SelfPid { future });
        }
    }
    Ok(EvalLabel::Local)
}

fn start_args(
    program: &Program,
    ls: &mut LocalState,
    kind: ArgsKind,
    name: &str,
    items: &[ExprRef],
    tail: Option<ExprRef>,
) -> Result<(), EvalError> {
    let Some((first, rest)) = items.split_first() else {
        // Nothing to evaluate: `{}`, `[]`, `f()`.
        let label = finish_args(program, ls, kind, name, Vec::new())?;
        debug_assert!(label.is_none());
        return Ok(());
    };
    ls.stack.push(Frame::Args {
        kind,
        name: name.to_string(),
        done: Vec::with_capacity(items.len()),
        pending: rest.iter().rev().cloned().collect(),
        tail,
        env: ls.env.clone(),
    });
    ls.focus = Focus::Expr(first.clone());
    Ok(())
}

/// All arguments evaluated. Returns a label only for spawn.
fn finish_args(
    program: &Program,
    ls: &mut LocalState,
    kind: ArgsKind,
    name: &str,
    done: Vec<Value>,
) -> Result<Option<EvalLabel>, EvalError> {
    match kind {
        ArgsKind::Tuple => ls.focus = Focus::Value(Value::Tuple(done)),
        ArgsKind::List => ls.focus = Focus::Value(Value::List(done)),
        ArgsKind::Call => {
            let def = program.lookup(name, done.len()).ok_or_else(|| EvalError::Undefined {
                name: name.to_string(),
                arity: done.len(),
            })?;
            // Calls carry no return frame: the callee's value flows straight
            // to the caller's continuation, so tail calls run in constant stack.
            ls.env = def.params.iter().cloned().zip(done).collect();
            ls.focus = Focus::Expr(def.body.clone());
        }
        ArgsKind::Spawn => {
            if program.lookup(name, done.len()).is_none() {
                return Err(EvalError::Undefined {
                    name: name.to_string(),
                    arity: done.len(),
                });
            }
            let future = ls.fresh_future();
            ls.focus = Focus::Future(future);
            return Ok(Some(EvalLabel::Spawn {
                future,
                function: name.to_string(),
                args: done,
            }));
        }
    }
    Ok(None)
}

fn continue_with(
    program: &Program,
    ls: &mut LocalState,
    v: Value,
    frame: Frame,
) -> Result<EvalLabel, EvalError> {
    match frame {
        Frame::Args {
            kind,
            name,
            mut done,
            mut pending,
            tail,
            env,
        } => {
            done.push(v);
            if let Some(next) = pending.pop() {
                ls.env = env.clone();
                ls.focus = Focus::Expr(next);
                ls.stack.push(Frame::Args {
                    kind,
                    name,
                    done,
                    pending,
                    tail,
                    env,
                });
            } else if let Some(t) = tail {
                ls.env = env;
                ls.focus = Focus::Expr(t);
                ls.stack.push(Frame::ListTail { items: done });
            } else {
                ls.env = env;
                if let Some(label) = finish_args(program, ls, kind, &name, done)? {
                    return Ok(label);
                }
            }
        }
        Frame::ListTail { mut items } => match v {
            Value::List(rest) => {
                items.extend(rest);
                ls.focus = Focus::Value(Value::List(items));
            }
            other => {
                return Err(EvalError::BadArg {
                    what: format!("improper list tail {other}"),
                })
            }
        },
        Frame::BinLeft { op, rhs, env } => {
            ls.env = env;
            ls.focus = Focus::Expr(rhs);
            ls.stack.push(Frame::BinRight { op, lhs: v });
        }
        Frame::BinRight { op, lhs } => {
            ls.focus = Focus::Value(apply_binop(op, &lhs, &v)?);
        }
        Frame::SendTarget { message, env } => {
            ls.env = env;
            ls.focus = Focus::Expr(message);
            ls.stack.push(Frame::SendMessage { target: v });
        }
        Frame::SendMessage { target } => {
            let to = target.as_pid().ok_or(EvalError::BadTarget(target))?;
            ls.focus = Focus::Value(v.clone());
            return Ok(EvalLabel::Send { value: v, to });
        }
        Frame::Case { clauses, env } => {
            let (i, extended) =
                select_clause(&clauses, &v, &env).ok_or(EvalError::NoCaseClause(v))?;
            ls.env = extended;
            ls.focus = Focus::Expr(clauses[i].body.clone());
        }
        Frame::Let { pattern, body, env } => {
            let mut bindings = Vec::new();
            if !match_pattern(&pattern, &v, &mut bindings) {
                return Err(EvalError::BadMatch(v));
            }
            ls.env = env;
            ls.env.extend(bindings);
            ls.focus = Focus::Expr(body);
        }
        Frame::Seq { rest, env } => {
            ls.env = env;
            ls.focus = Focus::Expr(rest);
        }
    }
    Ok(EvalLabel::Local)
}

impl fmt::Display for Focus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Focus::Expr(e) => write!(f, "{e}"),
            Focus::Value(v) => write!(f, "{v}"),
            Focus::Future(k) => write!(f, "{k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use std::sync::Arc;

    fn program(src: &str) -> Program {
        parse(src).unwrap()
    }

    /// Runs local steps until a non-local label or a final state.
    fn run_local(p: &Program, mut ls: LocalState) -> (Option<EvalLabel>, LocalState) {
        loop {
            if ls.is_final() {
                return (None, ls);
            }
            let (label, next) = eval_step(p, &ls).unwrap();
            ls = next;
            if label != EvalLabel::Local {
                return (Some(label), ls);
            }
        }
    }

    #[test]
    fn arithmetic_is_one_local_step_at_a_time() {
        let p = program("main() -> 1 + 2.");
        let ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let mut cur = ls;
        let mut steps = 0;
        while !cur.is_final() {
            let (label, next) = eval_step(&p, &cur).unwrap();
            assert_eq!(label, EvalLabel::Local);
            cur = next;
            steps += 1;
        }
        assert_eq!(cur.result(), Some(&Value::Int(3)));
        assert_eq!(steps, 5);
    }

    #[test]
    fn addition_reduces_directly() {
        // (1+2) with an empty stack after the operands are values.
        let p = program("main() -> 0.");
        let ls = LocalState {
            env: Env::new(),
            focus: Focus::Value(Value::Int(2)),
            stack: vec![Frame::BinRight {
                op: BinOp::Add,
                lhs: Value::Int(1),
            }],
            next_future: 0,
        };
        let (label, next) = eval_step(&p, &ls).unwrap();
        assert_eq!(label, EvalLabel::Local);
        assert_eq!(next.focus, Focus::Value(Value::Int(3)));
        assert!(next.is_final());
    }

    #[test]
    fn final_states() {
        let e = Env::new();
        let v = LocalState {
            env: e.clone(),
            focus: Focus::Value(Value::Int(42)),
            stack: vec![],
            next_future: 0,
        };
        assert!(v.is_final());
        let unevaluated = LocalState::new(e.clone(), Arc::new(Expr::BinOp(BinOp::Add, Arc::new(Expr::Int(1)), Arc::new(Expr::Int(2)))));
        assert!(!unevaluated.is_final());
        let with_frame = LocalState {
            stack: vec![Frame::Seq {
                rest: Arc::new(Expr::Int(1)),
                env: e,
            }],
            ..v
        };
        assert!(!with_frame.is_final());
    }

    #[test]
    fn send_label_after_subterms() {
        let p = program("main(P) -> P ! {a, 1}.");
        let ls = LocalState::initial(&p, "main", vec![Value::Pid(Pid(2))]).unwrap();
        let (label, ls) = run_local(&p, ls);
        assert_eq!(
            label,
            Some(EvalLabel::Send {
                value: Value::Tuple(vec![Value::atom("a"), Value::Int(1)]),
                to: Pid(2)
            })
        );
        assert_eq!(ls.result(), Some(&Value::Tuple(vec![Value::atom("a"), Value::Int(1)])));
    }

    #[test]
    fn receive_label_leaves_future() {
        let p = program("main() -> receive {a, X} -> X end.");
        let ls = LocalState::initial(&p, "main", vec![]).unwrap();
        assert_eq!(ls.next_kind(), StepKind::Receive);
        let (label, next) = eval_step(&p, &ls).unwrap();
        match label {
            EvalLabel::Rec { future, clauses } => {
                assert_eq!(clauses.len(), 1);
                assert_eq!(clauses[0].to_string(), "{a, X} -> X");
                assert_eq!(next.focus, Focus::Future(future));
                assert_eq!(next.next_kind(), StepKind::Awaiting);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spawn_and_self_labels() {
        let p = program("w(X) -> X.\nmain() -> S = self(), spawn(w, [S]).");
        let ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let (label, mut ls) = run_local(&p, ls);
        let Some(EvalLabel::SelfPid { future }) = label else { panic!("{label:?}") };
        ls.fill_future(future, Value::Pid(Pid(1))).unwrap();
        assert_eq!(ls.next_kind(), StepKind::Local);
        let (label, mut ls) = run_local(&p, ls);
        let Some(EvalLabel::Spawn { future, function, args }) = label else { panic!("{label:?}") };
        assert_eq!(function, "w");
        assert_eq!(args, vec![Value::Pid(Pid(1))]);
        ls.fill_future(future, Value::Pid(Pid(2))).unwrap();
        assert_eq!(ls.result(), Some(&Value::Pid(Pid(2))));
    }

    #[test]
    fn next_kind_agrees_with_labels() {
        let p = program(
            "w(X) -> X.\nmain() -> S = self(), P = spawn(w, [1]), P ! {S, [1, 2 | [3]]}, case 3 of 3 -> ok end.",
        );
        let mut ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let mut pid = 1;
        while !ls.is_final() {
            let kind = ls.next_kind();
            let (label, next) = eval_step(&p, &ls).unwrap();
            ls = next;
            let expected = match &label {
                EvalLabel::Local => StepKind::Local,
                EvalLabel::SelfPid { .. } => StepKind::SelfPid,
                EvalLabel::Send { .. } => StepKind::Send,
                EvalLabel::Rec { .. } => StepKind::Receive,
                EvalLabel::Spawn { .. } => StepKind::Spawn,
            };
            assert_eq!(kind, expected);
            if let EvalLabel::SelfPid { future } | EvalLabel::Spawn { future, .. } = label {
                pid += 1;
                ls.fill_future(future, Value::Pid(Pid(pid))).unwrap();
            }
        }
        assert_eq!(ls.result(), Some(&Value::atom("ok")));
    }

    #[test]
    fn tail_calls_do_not_grow_the_stack() {
        let p = program("loop(N) -> case N of 0 -> done; _ -> loop(N - 1) end.");
        let mut ls = LocalState::initial(&p, "loop", vec![Value::Int(200)]).unwrap();
        let mut max_depth = 0;
        while !ls.is_final() {
            ls = eval_step(&p, &ls).unwrap().1;
            max_depth = max_depth.max(ls.stack.len());
        }
        assert_eq!(ls.result(), Some(&Value::atom("done")));
        assert!(max_depth <= 3, "stack grew to {max_depth}");
    }

    #[test]
    fn runtime_errors() {
        let p = program("main() -> 1 + a.");
        let mut ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let err = loop {
            match eval_step(&p, &ls) {
                Ok((_, next)) => ls = next,
                Err(e) => break e,
            }
        };
        assert!(matches!(err, EvalError::BadArith { .. }));
        let (label, crashed) = advance(&p, &ls);
        assert_eq!(label, EvalLabel::Local);
        assert!(crashed.is_final());
        assert_eq!(crashed.result().unwrap().to_string(), "{crash,badarith}");

        let p = program("main() -> case 1 of 2 -> ok end.");
        let mut ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let err = loop {
            match eval_step(&p, &ls) {
                Ok((_, next)) => ls = next,
                Err(e) => break e,
            }
        };
        assert_eq!(err, EvalError::NoCaseClause(Value::Int(1)));
    }

    #[test]
    fn stepping_a_final_state_is_an_error() {
        let p = program("main() -> 42.");
        let ls = LocalState::initial(&p, "main", vec![]).unwrap();
        let (_, done) = eval_step(&p, &ls).unwrap();
        assert_eq!(eval_step(&p, &done), Err(EvalError::Final));
    }
}
