//! Recursive-descent parser and link checker for `.kern` sources.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::ast::{BinOp, Clause, Expr, ExprRef, FunDef, Pattern, Program};
use super::lexer::{tokenize, Spanned, Tok};
use super::{LangError, ParseError};

/// Parses and links a program.
pub fn parse(source: &str) -> Result<Program, LangError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut fundefs: BTreeMap<(String, usize), FunDef> = BTreeMap::new();
    while parser.peek() != &Tok::Eof {
        let (line, col) = parser.position();
        let def = parser.fundef()?;
        let key = (def.name.clone(), def.params.len());
        if fundefs.contains_key(&key) {
            return Err(ParseError {
                line,
                col,
                message: format!("function {}/{} defined twice", key.0, key.1),
            }
            .into());
        }
        fundefs.insert(key, def);
    }
    let program = Program { fundefs };
    link(&program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn position(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, col) = self.position();
        Err(ParseError {
            line,
            col,
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(wanted)
        }
    }

    fn fundef(&mut self) -> PResult<FunDef> {
        let name = match self.bump() {
            Tok::Atom(a) => a,
            _ => {
                self.pos -= 1;
                return self.unexpected("a function name");
            }
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        if params.contains(&v) {
                            return self.error(format!("parameter {v} repeated"));
                        }
                        self.bump();
                        params.push(v);
                    }
                    _ => return self.unexpected("a parameter variable"),
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Arrow, "`->`")?;
        let body = self.body()?;
        self.expect(Tok::Dot, "`.` at the end of the function")?;
        Ok(FunDef { name, params, body })
    }

    /// `item, item, ...` folded right into `Let`/`Seq` nodes.
    fn body(&mut self) -> PResult<ExprRef> {
        let mut items = vec![self.seq_item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.seq_item()?);
        }
        let mut acc: Option<ExprRef> = None;
        for item in items.into_iter().rev() {
            acc = Some(match (item, acc) {
                (SeqItem::Expr(e), None) => e,
                (SeqItem::Bind(p, v), None) => {
                    // A trailing binding evaluates to the bound value.
                    let result = Arc::new(pattern_as_expr(&p));
                    Arc::new(Expr::Let {
                        pattern: p,
                        value: v,
                        body: result,
                    })
                }
                (SeqItem::Expr(e), Some(rest)) => Arc::new(Expr::Seq(e, rest)),
                (SeqItem::Bind(p, v), Some(rest)) => Arc::new(Expr::Let {
                    pattern: p,
                    value: v,
                    body: rest,
                }),
            });
        }
        Ok(acc.expect("at least one item"))
    }

    fn seq_item(&mut self) -> PResult<SeqItem> {
        let save = self.pos;
        if let Ok(p) = self.pattern() {
            if *self.peek() == Tok::Match {
                self.bump();
                let value = self.expr()?;
                return Ok(SeqItem::Bind(p, value));
            }
        }
        self.pos = save;
        Ok(SeqItem::Expr(self.expr()?))
    }

    fn expr(&mut self) -> PResult<ExprRef> {
        let lhs = self.or_expr()?;
        if *self.peek() == Tok::Bang {
            self.bump();
            let rhs = self.expr()?;
            return Ok(Arc::new(Expr::Send {
                target: lhs,
                message: rhs,
            }));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> PResult<ExprRef> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Arc::new(Expr::BinOp(BinOp::Or, lhs, rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<ExprRef> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Arc::new(Expr::BinOp(BinOp::And, lhs, rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<ExprRef> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Arc::new(Expr::BinOp(op, lhs, rhs)))
    }

    fn add_expr(&mut self) -> PResult<ExprRef> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Arc::new(Expr::BinOp(op, lhs, rhs));
        }
    }

    fn mul_expr(&mut self) -> PResult<ExprRef> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Div => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Arc::new(Expr::BinOp(op, lhs, rhs));
        }
    }

    fn unary(&mut self) -> PResult<ExprRef> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Int(n) = *self.peek() {
                self.bump();
                return Ok(Arc::new(Expr::Int(-n)));
            }
            let operand = self.unary()?;
            return Ok(Arc::new(Expr::BinOp(
                BinOp::Sub,
                Arc::new(Expr::Int(0)),
                operand,
            )));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<ExprRef> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Arc::new(Expr::Int(n)))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Arc::new(Expr::Var(v)))
            }
            Tok::Atom(a) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.expr_list(Tok::RParen)?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Arc::new(Expr::Call { name: a, args }))
                } else {
                    Ok(Arc::new(Expr::Atom(a)))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBrace => {
                self.bump();
                let items = self.expr_list(Tok::RBrace)?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Arc::new(Expr::Tuple(items)))
            }
            Tok::LBracket => {
                self.bump();
                let items = self.expr_list(Tok::RBracket)?;
                let tail = if *self.peek() == Tok::Bar {
                    if items.is_empty() {
                        return self.error("`|` needs at least one element before it");
                    }
                    self.bump();
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Arc::new(Expr::List { items, tail }))
            }
            Tok::Case => {
                self.bump();
                let scrutinee = self.expr()?;
                self.expect(Tok::Of, "`of`")?;
                let clauses = self.clauses()?;
                Ok(Arc::new(Expr::Case {
                    scrutinee,
                    clauses: clauses.into(),
                }))
            }
            Tok::Receive => {
                self.bump();
                let clauses = self.clauses()?;
                Ok(Arc::new(Expr::Receive(clauses.into())))
            }
            Tok::Spawn => {
                self.bump();
                self.expect(Tok::LParen, "`(` after spawn")?;
                let name = match self.bump() {
                    Tok::Atom(a) => a,
                    _ => {
                        self.pos -= 1;
                        return self.unexpected("a function name as the first argument of spawn");
                    }
                };
                self.expect(Tok::Comma, "`,`")?;
                self.expect(Tok::LBracket, "an argument list `[...]`")?;
                let args = self.expr_list(Tok::RBracket)?;
                self.expect(Tok::RBracket, "`]`")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Arc::new(Expr::Spawn { name, args }))
            }
            Tok::SelfKw => {
                self.bump();
                self.expect(Tok::LParen, "`(` after self")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Arc::new(Expr::SelfPid))
            }
            _ => self.unexpected("an expression"),
        }
    }

    fn expr_list(&mut self, close: Tok) -> PResult<Vec<ExprRef>> {
        let mut items = Vec::new();
        if *self.peek() == close {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(items);
            }
        }
    }

    fn clauses(&mut self) -> PResult<Vec<Clause>> {
        let mut out = vec![self.clause()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            out.push(self.clause()?);
        }
        self.expect(Tok::End, "`;` or `end`")?;
        Ok(out)
    }

    fn clause(&mut self) -> PResult<Clause> {
        let pattern = self.pattern()?;
        let guard = if *self.peek() == Tok::When {
            self.bump();
            let (line, col) = self.position();
            let g = self.expr()?;
            if let Some(bad) = guard_violation(&g) {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("{bad} is not allowed in a guard"),
                });
            }
            Some(g)
        } else {
            None
        };
        self.expect(Tok::Arrow, "`->`")?;
        let body = self.body()?;
        Ok(Clause {
            pattern,
            guard,
            body,
        })
    }

    /// Parses a pattern and checks linearity.
    fn pattern(&mut self) -> PResult<Pattern> {
        let (line, col) = self.position();
        let p = self.pattern_inner()?;
        let mut seen = BTreeSet::new();
        for v in p.variables() {
            if !seen.insert(v) {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("variable {v} occurs twice in a pattern"),
                });
            }
        }
        Ok(p)
    }

    fn pattern_inner(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Pattern::Int(n))
            }
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(Pattern::Int(-n)),
                    _ => {
                        self.pos -= 1;
                        self.unexpected("an integer")
                    }
                }
            }
            Tok::Atom(a) => {
                if *self.peek_at(1) == Tok::LParen {
                    return self.unexpected("a pattern");
                }
                self.bump();
                Ok(Pattern::Atom(a))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Pattern::Var(v))
            }
            Tok::Underscore => {
                self.bump();
                Ok(Pattern::Wildcard)
            }
            Tok::LBrace => {
                self.bump();
                let items = self.pattern_list(Tok::RBrace)?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Pattern::Tuple(items))
            }
            Tok::LBracket => {
                self.bump();
                let items = self.pattern_list(Tok::RBracket)?;
                let tail = if *self.peek() == Tok::Bar && !items.is_empty() {
                    self.bump();
                    Some(Box::new(self.pattern_inner()?))
                } else {
                    None
                };
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Pattern::List { items, tail })
            }
            _ => self.unexpected("a pattern"),
        }
    }

    fn pattern_list(&mut self, close: Tok) -> PResult<Vec<Pattern>> {
        let mut items = Vec::new();
        if *self.peek() == close {
            return Ok(items);
        }
        loop {
            items.push(self.pattern_inner()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(items);
            }
        }
    }
}

enum SeqItem {
    Expr(ExprRef),
    Bind(Pattern, ExprRef),
}

fn pattern_as_expr(p: &Pattern) -> Expr {
    match p {
        Pattern::Int(n) => Expr::Int(*n),
        Pattern::Atom(a) => Expr::Atom(a.clone()),
        Pattern::Var(v) => Expr::Var(v.clone()),
        // `_ = E` as the last item yields `ok`; the value is irrelevant.
        Pattern::Wildcard => Expr::Atom("ok".into()),
        Pattern::Tuple(ps) => Expr::Tuple(ps.iter().map(|p| Arc::new(pattern_as_expr(p))).collect()),
        Pattern::List { items, tail } => Expr::List {
            items: items.iter().map(|p| Arc::new(pattern_as_expr(p))).collect(),
            tail: tail.as_ref().map(|t| Arc::new(pattern_as_expr(t))),
        },
    }
}

fn guard_violation(e: &Expr) -> Option<&'static str> {
    match e {
        Expr::Int(_) | Expr::Atom(_) | Expr::Var(_) => None,
        Expr::Tuple(items) => items.iter().find_map(|i| guard_violation(i)),
        Expr::List { items, tail } => items
            .iter()
            .chain(tail.iter())
            .find_map(|i| guard_violation(i)),
        Expr::BinOp(_, l, r) => guard_violation(l).or_else(|| guard_violation(r)),
        Expr::Call { .. } => Some("a function call"),
        Expr::Spawn { .. } => Some("spawn"),
        Expr::Send { .. } => Some("a send"),
        Expr::Receive(_) => Some("receive"),
        Expr::SelfPid => Some("self()"),
        Expr::Case { .. } => Some("case"),
        Expr::Let { .. } | Expr::Seq(..) => Some("a sequence"),
    }
}

/// Link check: every call and spawn names an existing function with the
/// right arity, and every variable is bound before use.
fn link(program: &Program) -> Result<(), LangError> {
    for def in program.fundefs.values() {
        let mut scope: Vec<String> = def.params.clone();
        check_expr(program, &def.name, &def.body, &mut scope)?;
    }
    Ok(())
}

fn check_expr(
    program: &Program,
    fname: &str,
    e: &Expr,
    scope: &mut Vec<String>,
) -> Result<(), LangError> {
    let check_fn = |name: &str, arity: usize| {
        if program.lookup(name, arity).is_some() {
            return Ok(());
        }
        let arities: Vec<usize> = program
            .keys()
            .filter(|(n, _)| *n == name)
            .map(|(_, a)| a)
            .collect();
        if arities.is_empty() {
            Err(LangError::UnknownFunction {
                name: name.to_string(),
                arity,
                caller: fname.to_string(),
            })
        } else {
            Err(LangError::ArityMismatch {
                name: name.to_string(),
                arity,
                defined: arities,
                caller: fname.to_string(),
            })
        }
    };
    match e {
        Expr::Int(_) | Expr::Atom(_) | Expr::SelfPid => Ok(()),
        Expr::Var(v) => {
            if scope.iter().any(|s| s == v) {
                Ok(())
            } else {
                Err(LangError::UnboundVariable {
                    var: v.clone(),
                    function: fname.to_string(),
                })
            }
        }
        Expr::Tuple(items) => items
            .iter()
            .try_for_each(|i| check_expr(program, fname, i, scope)),
        Expr::List { items, tail } => items
            .iter()
            .chain(tail.iter())
            .try_for_each(|i| check_expr(program, fname, i, scope)),
        Expr::BinOp(_, l, r) => {
            check_expr(program, fname, l, scope)?;
            check_expr(program, fname, r, scope)
        }
        Expr::Let {
            pattern,
            value,
            body,
        } => {
            check_expr(program, fname, value, scope)?;
            with_bindings(scope, pattern, |scope| {
                check_expr(program, fname, body, scope)
            })
        }
        Expr::Seq(a, b) => {
            check_expr(program, fname, a, scope)?;
            check_expr(program, fname, b, scope)
        }
        Expr::Case { scrutinee, clauses } => {
            check_expr(program, fname, scrutinee, scope)?;
            check_clauses(program, fname, clauses, scope)
        }
        Expr::Receive(clauses) => check_clauses(program, fname, clauses, scope),
        Expr::Call { name, args } | Expr::Spawn { name, args } => {
            check_fn(name, args.len())?;
            args.iter()
                .try_for_each(|a| check_expr(program, fname, a, scope))
        }
        Expr::Send { target, message } => {
            check_expr(program, fname, target, scope)?;
            check_expr(program, fname, message, scope)
        }
    }
}

fn check_clauses(
    program: &Program,
    fname: &str,
    clauses: &[Clause],
    scope: &mut Vec<String>,
) -> Result<(), LangError> {
    for c in clauses {
        with_bindings(scope, &c.pattern, |scope| {
            if let Some(g) = &c.guard {
                check_expr(program, fname, g, scope)?;
            }
            check_expr(program, fname, &c.body, scope)
        })?;
    }
    Ok(())
}

fn with_bindings<T>(
    scope: &mut Vec<String>,
    pattern: &Pattern,
    f: impl FnOnce(&mut Vec<String>) -> T,
) -> T {
    let before = scope.len();
    scope.extend(pattern.variables().into_iter().map(str::to_string));
    let out = f(scope);
    scope.truncate(before);
    out
}
