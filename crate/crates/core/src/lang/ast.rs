use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type ExprRef = Arc<Expr>;
pub type Clauses = Arc<[Clause]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Eq => "==",
            BinOp::Ne => "/=",
            BinOp::Lt => "<",
            BinOp::Le => "=<",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Atom(String),
    Var(String),
    Tuple(Vec<ExprRef>),
    /// `[a, b | tail]`; `tail` is `None` for a proper list literal.
    List {
        items: Vec<ExprRef>,
        tail: Option<ExprRef>,
    },
    BinOp(BinOp, ExprRef, ExprRef),
    /// `Pattern = value, body`
    Let {
        pattern: Pattern,
        value: ExprRef,
        body: ExprRef,
    },
    Seq(ExprRef, ExprRef),
    Case {
        scrutinee: ExprRef,
        clauses: Clauses,
    },
    Call {
        name: String,
        args: Vec<ExprRef>,
    },
    Spawn {
        name: String,
        args: Vec<ExprRef>,
    },
    Send {
        target: ExprRef,
        message: ExprRef,
    },
    Receive(Clauses),
    SelfPid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Int(i64),
    Atom(String),
    Var(String),
    Wildcard,
    Tuple(Vec<Pattern>),
    List {
        items: Vec<Pattern>,
        tail: Option<Box<Pattern>>,
    },
}

impl Pattern {
    /// Variables bound by this pattern, in left-to-right order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Pattern::Var(v) => out.push(v),
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.collect_vars(out)),
            Pattern::List { items, tail } => {
                items.iter().for_each(|p| p.collect_vars(out));
                if let Some(t) = tail {
                    t.collect_vars(out);
                }
            }
            Pattern::Int(_) | Pattern::Atom(_) | Pattern::Wildcard => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub pattern: Pattern,
    pub guard: Option<ExprRef>,
    pub body: ExprRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: ExprRef,
}

/// A linked program: function definitions keyed by `(name, arity)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub fundefs: BTreeMap<(String, usize), FunDef>,
}

impl Program {
    pub fn lookup(&self, name: &str, arity: usize) -> Option<&FunDef> {
        self.fundefs.get(&(name.to_string(), arity))
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.fundefs.keys().map(|(n, a)| (n.as_str(), *a))
    }
}

// Printing: compact, Erlang-like, used for snapshots and error messages.

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Tuple(items) => {
                write!(f, "{{")?;
                write_sep(f, items)?;
                write!(f, "}}")
            }
            Expr::List { items, tail } => {
                write!(f, "[")?;
                write_sep(f, items)?;
                if let Some(t) = tail {
                    write!(f, " | {t}")?;
                }
                write!(f, "]")
            }
            Expr::BinOp(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Let {
                pattern,
                value,
                body,
            } => write!(f, "{pattern} = {value}, {body}"),
            Expr::Seq(a, b) => write!(f, "{a}, {b}"),
            Expr::Case { scrutinee, clauses } => {
                write!(f, "case {scrutinee} of ")?;
                write_clauses(f, clauses)?;
                write!(f, " end")
            }
            Expr::Call { name, args } => {
                write!(f, "{name}(")?;
                write_sep(f, args)?;
                write!(f, ")")
            }
            Expr::Spawn { name, args } => {
                write!(f, "spawn({name}, [")?;
                write_sep(f, args)?;
                write!(f, "])")
            }
            Expr::Send { target, message } => write!(f, "{target} ! {message}"),
            Expr::Receive(clauses) => {
                write!(f, "receive ")?;
                write_clauses(f, clauses)?;
                write!(f, " end")
            }
            Expr::SelfPid => write!(f, "self()"),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Int(n) => write!(f, "{n}"),
            Pattern::Atom(a) => write!(f, "{a}"),
            Pattern::Var(v) => write!(f, "{v}"),
            Pattern::Wildcard => write!(f, "_"),
            Pattern::Tuple(ps) => {
                write!(f, "{{")?;
                write_sep(f, ps)?;
                write!(f, "}}")
            }
            Pattern::List { items, tail } => {
                write!(f, "[")?;
                write_sep(f, items)?;
                if let Some(t) = tail {
                    write!(f, " | {t}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pattern)?;
        if let Some(g) = &self.guard {
            write!(f, " when {g}")?;
        }
        write!(f, " -> {}", self.body)
    }
}

fn write_sep<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn write_clauses(f: &mut fmt::Formatter<'_>, clauses: &[Clause]) -> fmt::Result {
    for (i, c) in clauses.iter().enumerate() {
        if i > 0 {
            write!(f, "; ")?;
        }
        write!(f, "{c}")?;
    }
    Ok(())
}
