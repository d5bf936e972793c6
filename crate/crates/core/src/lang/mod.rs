//! The mini actor language: syntax, values and the local (expression) layer.

pub mod ast;
pub mod eval;
mod lexer;
pub mod matching;
mod parser;
pub mod value;

use thiserror::Error;

pub use ast::{BinOp, Clause, Clauses, Expr, ExprRef, FunDef, Pattern, Program};
pub use eval::{advance, eval_step, EvalError, EvalLabel, Focus, Frame, Future, LocalState, StepKind};
pub use matching::{matchrec, MatchMode, MatchResult};
pub use parser::parse;
pub use value::{Env, Message, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ParseError),
    #[error("call to undefined function {name}/{arity} in {caller}")]
    UnknownFunction {
        name: String,
        arity: usize,
        caller: String,
    },
    #[error("call to {name}/{arity} in {caller}, but {name} is defined with arity {defined:?}")]
    ArityMismatch {
        name: String,
        arity: usize,
        defined: Vec<usize>,
        caller: String,
    },
    #[error("variable {var} is unbound in {function}")]
    UnboundVariable { var: String, function: String },
}

/// `final(ls)`.
pub fn is_final(ls: &LocalState) -> bool {
    ls.is_final()
}
