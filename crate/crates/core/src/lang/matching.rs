//! Pattern matching, guard evaluation and `matchrec`.

use super::ast::{BinOp, Clause, Clauses, Expr, Pattern};
use super::eval::{EvalError, Focus, Future, LocalState};
use super::value::{Env, Message, Value};
use crate::ids::Tag;

/// Tries to match `value` against `pattern`, pushing bindings on success.
pub fn match_pattern(pattern: &Pattern, value: &Value, out: &mut Vec<(String, Value)>) -> bool {
    match (pattern, value) {
        (Pattern::Wildcard, _) => true,
        (Pattern::Var(v), _) => {
            out.push((v.clone(), value.clone()));
            true
        }
        (Pattern::Int(n), Value::Int(m)) => n == m,
        (Pattern::Atom(a), Value::Atom(b)) => a == b,
        (Pattern::Tuple(ps), Value::Tuple(vs)) => {
            ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| match_pattern(p, v, out))
        }
        (Pattern::List { items, tail }, Value::List(vs)) => match tail {
            None => {
                items.len() == vs.len()
                    && items.iter().zip(vs).all(|(p, v)| match_pattern(p, v, out))
            }
            Some(t) => {
                vs.len() >= items.len()
                    && items.iter().zip(vs).all(|(p, v)| match_pattern(p, v, out))
                    && match_pattern(t, &Value::List(vs[items.len()..].to_vec()), out)
            }
        },
        _ => false,
    }
}

pub fn apply_binop(op: BinOp, lhs: &Value, rhs: &Value) -> Result<Value, EvalError> {
    use BinOp::*;
    let ints = || match (lhs, rhs) {
        (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
        _ => Err(EvalError::BadArith {
            op: op.symbol(),
            lhs: lhs.clone(),
            rhs: rhs.clone(),
        }),
    };
    let overflow = || EvalError::BadArith {
        op: op.symbol(),
        lhs: lhs.clone(),
        rhs: rhs.clone(),
    };
    Ok(match op {
        Add => {
            let (a, b) = ints()?;
            Value::Int(a.checked_add(b).ok_or_else(overflow)?)
        }
        Sub => {
            let (a, b) = ints()?;
            Value::Int(a.checked_sub(b).ok_or_else(overflow)?)
        }
        Mul => {
            let (a, b) = ints()?;
            Value::Int(a.checked_mul(b).ok_or_else(overflow)?)
        }
        Div => {
            let (a, b) = ints()?;
            Value::Int(a.checked_div(b).ok_or_else(overflow)?)
        }
        Eq => Value::bool(lhs == rhs),
        Ne => Value::bool(lhs != rhs),
        Lt => Value::bool(lhs < rhs),
        Le => Value::bool(lhs <= rhs),
        Gt => Value::bool(lhs > rhs),
        Ge => Value::bool(lhs >= rhs),
        And | Or => {
            let (a, b) = match (lhs.as_bool(), rhs.as_bool()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(EvalError::BadArg {
                        what: format!("{} {} {}", lhs, op.symbol(), rhs),
                    })
                }
            };
            Value::bool(if op == And { a && b } else { a || b })
        }
    })
}

/// Big-step evaluation of guard expressions (no side effects by construction).
fn eval_guard_expr(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    match e {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Atom(a) => Ok(Value::Atom(a.clone())),
        Expr::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Tuple(items) => items
            .iter()
            .map(|i| eval_guard_expr(i, env))
            .collect::<Result<_, _>>()
            .map(Value::Tuple),
        Expr::List { items, tail } => {
            let mut vs: Vec<Value> = items
                .iter()
                .map(|i| eval_guard_expr(i, env))
                .collect::<Result<_, _>>()?;
            if let Some(t) = tail {
                match eval_guard_expr(t, env)? {
                    Value::List(rest) => vs.extend(rest),
                    other => return Err(EvalError::BadArg { what: format!("improper list tail {other}") }),
                }
            }
            Ok(Value::List(vs))
        }
        Expr::BinOp(op, l, r) => {
            let l = eval_guard_expr(l, env)?;
            let r = eval_guard_expr(r, env)?;
            apply_binop(*op, &l, &r)
        }
        other => Err(EvalError::BadArg {
            what: format!("non-guard expression {other}"),
        }),
    }
}

/// A guard holds iff it evaluates to `true`; evaluation errors count as false.
pub fn guard_holds(guard: Option<&Expr>, env: &Env) -> bool {
    match guard {
        None => true,
        Some(g) => matches!(eval_guard_expr(g, env), Ok(v) if v.as_bool() == Some(true)),
    }
}

/// First clause (top to bottom) whose pattern matches and whose guard holds.
/// Returns the clause index and the extended environment.
pub fn select_clause(clauses: &[Clause], value: &Value, env: &Env) -> Option<(usize, Env)> {
    for (i, clause) in clauses.iter().enumerate() {
        let mut bindings = Vec::new();
        if !match_pattern(&clause.pattern, value, &mut bindings) {
            continue;
        }
        let mut extended = env.clone();
        extended.extend(bindings);
        if guard_holds(clause.guard.as_deref(), &extended) {
            return Some((i, extended));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// The oldest message matching some clause.
    OldestMatching,
    /// The message carrying this tag, if some clause accepts it.
    ByTag(Tag),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub state: LocalState,
    pub mailbox: Vec<Message>,
    pub tag: Tag,
    pub value: Value,
    pub index: usize,
}

/// Selects a message from `mailbox` for a pending receive and binds the
/// future `future` in `ls` to the body of the selected clause.
pub fn matchrec(
    ls: &LocalState,
    future: Future,
    clauses: &Clauses,
    mailbox: &[Message],
    mode: MatchMode,
) -> Option<MatchResult> {
    if ls.focus != Focus::Future(future) {
        return None;
    }
    let pick = |index: usize| -> Option<MatchResult> {
        let msg = &mailbox[index];
        let (clause, env) = select_clause(clauses, &msg.value, &ls.env)?;
        let mut state = ls.clone();
        state.env = env;
        state.focus = Focus::Expr(clauses[clause].body.clone());
        let mut rest = mailbox.to_vec();
        rest.remove(index);
        Some(MatchResult {
            state,
            mailbox: rest,
            tag: msg.tag,
            value: msg.value.clone(),
            index,
        })
    };
    match mode {
        MatchMode::OldestMatching => (0..mailbox.len()).find_map(pick),
        MatchMode::ByTag(tag) => {
            let index = mailbox.iter().position(|m| m.tag == tag)?;
            pick(index)
        }
    }
}
