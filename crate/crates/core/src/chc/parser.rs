use num_bigint::BigInt;
use num_traits::Zero;

use super::{Atom, ChcError, Clause, Program};
use crate::constraints::{Conj, Fresh, LinConstraint, LinExpr, Rat, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(BigInt),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(RelOp),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RelOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Ne,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn err(&self, msg: impl Into<String>) -> ChcError {
        ChcError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ChcError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '%' {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.bump() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '≠' => Tok::Rel(RelOp::Ne),
                '≤' => Tok::Rel(RelOp::Le),
                '≥' => Tok::Rel(RelOp::Ge),
                ':' => {
                    if self.bump() != Some('-') {
                        return Err(self.err("expected ':-'"));
                    }
                    Tok::Neck
                }
                '=' => match self.peek() {
                    Some('<') => {
                        self.bump();
                        Tok::Rel(RelOp::Le)
                    }
                    Some('\\') => {
                        self.bump();
                        if self.bump() != Some('=') {
                            return Err(self.err("expected '=\\='"));
                        }
                        Tok::Rel(RelOp::Ne)
                    }
                    _ => Tok::Rel(RelOp::Eq),
                },
                '\\' => {
                    if self.bump() != Some('=') {
                        return Err(self.err("expected '\\='"));
                    }
                    Tok::Rel(RelOp::Ne)
                }
                '<' => {
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Rel(RelOp::Le)
                    } else {
                        Tok::Rel(RelOp::Lt)
                    }
                }
                '>' => {
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Rel(RelOp::Ge)
                    } else {
                        Tok::Rel(RelOp::Gt)
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut s = c.to_string();
                    while let Some(d) = self.peek().filter(|d| d.is_ascii_digit()) {
                        s.push(d);
                        self.bump();
                    }
                    Tok::Int(s.parse().unwrap())
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = c.to_string();
                    while let Some(d) = self.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                        s.push(d);
                        self.bump();
                    }
                    if c.is_uppercase() || c == '_' {
                        Tok::Var(s)
                    } else {
                        Tok::Ident(s)
                    }
                }
                other => {
                    return Err(ChcError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected character '{other}'"),
                    })
                }
            };
            out.push(Spanned { tok, line, col });
        }
    }
}

pub(crate) fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('c')
        && chars.clone().next().is_some_and(|c| c.is_ascii_digit())
        && chars.all(|c| c.is_ascii_digit() || c == '_')
}

enum BodyItem {
    Constraint(LinConstraint),
    Disequality(LinExpr),
    Atom(Atom),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    fresh: Fresh,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ChcError {
        let s = &self.toks[self.pos];
        ChcError::Syntax {
            line: s.line,
            col: s.col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ChcError> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn clauses(&mut self) -> Result<Vec<Clause>, ChcError> {
        let mut out = Vec::new();
        let mut position = 0usize;
        while *self.peek() != Tok::Eof {
            position += 1;
            let mut id = None;
            if let Tok::Ident(s) = self.peek() {
                if is_label(s)
                    && *self.peek_at(1) == Tok::Dot
                    && matches!(self.peek_at(2), Tok::Ident(_))
                {
                    id = Some(s.clone());
                    self.next();
                    self.next();
                }
            }
            let id = id.unwrap_or_else(|| format!("c{position}"));
            out.extend(self.clause(id)?);
        }
        Ok(out)
    }

    fn clause(&mut self, id: String) -> Result<Vec<Clause>, ChcError> {
        let head = self.atom()?;
        let mut items = Vec::new();
        match self.peek().clone() {
            Tok::Dot => {
                self.next();
            }
            Tok::Neck => {
                self.next();
                // `false :- .` denotes nothing
                if *self.peek() == Tok::Dot {
                    self.next();
                    return Ok(Vec::new());
                }
                loop {
                    if let Some(item) = self.body_item()? {
                        items.push(item);
                    }
                    match self.peek().clone() {
                        Tok::Comma => {
                            self.next();
                        }
                        Tok::Dot => {
                            self.next();
                            break;
                        }
                        t => return Err(self.err(format!("expected ',' or '.', found {t:?}"))),
                    }
                }
            }
            t => return Err(self.err(format!("expected ':-' or '.', found {t:?}"))),
        }
        let mut cons = Vec::new();
        let mut diseqs = Vec::new();
        let mut body = Vec::new();
        for item in items {
            match item {
                BodyItem::Constraint(c) => cons.push(c),
                BodyItem::Disequality(e) => diseqs.push(e),
                BodyItem::Atom(a) => body.push(a),
            }
        }
        let base = Conj::new(cons);
        if diseqs.is_empty() {
            return Ok(vec![Clause::new(id, head, base, body)]);
        }
        // each `e =\= 0` splits into `e < 0` and `e > 0`
        let mut variants = vec![base];
        for e in &diseqs {
            let mut next = Vec::with_capacity(variants.len() * 2);
            for v in &variants {
                let mut lo = v.clone();
                lo.push(LinConstraint::lt(e.clone(), LinExpr::zero()));
                let mut hi = v.clone();
                hi.push(LinConstraint::gt(e.clone(), LinExpr::zero()));
                next.push(lo);
                next.push(hi);
            }
            variants = next;
        }
        Ok(variants
            .into_iter()
            .enumerate()
            .map(|(i, c)| Clause::new(format!("{id}_{}", i + 1), head.clone(), c, body.clone()))
            .collect())
    }

    fn atom(&mut self) -> Result<Atom, ChcError> {
        let name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                s
            }
            t => return Err(self.err(format!("expected predicate, found {t:?}"))),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                args.push(self.expr()?);
                match self.peek().clone() {
                    Tok::Comma => {
                        self.next();
                    }
                    Tok::RParen => {
                        self.next();
                        break;
                    }
                    t => return Err(self.err(format!("expected ',' or ')', found {t:?}"))),
                }
            }
        }
        Ok(Atom::new(name, args))
    }

    fn body_item(&mut self) -> Result<Option<BodyItem>, ChcError> {
        if let Tok::Ident(s) = self.peek() {
            if s == "true" && *self.peek_at(1) != Tok::LParen {
                self.next();
                return Ok(None);
            }
            return Ok(Some(BodyItem::Atom(self.atom()?)));
        }
        let lhs = self.expr()?;
        let op = match self.peek().clone() {
            Tok::Rel(op) => {
                self.next();
                op
            }
            t => return Err(self.err(format!("expected comparison, found {t:?}"))),
        };
        let rhs = self.expr()?;
        Ok(Some(match op {
            RelOp::Eq => BodyItem::Constraint(LinConstraint::eq(lhs, rhs)),
            RelOp::Le => BodyItem::Constraint(LinConstraint::le(lhs, rhs)),
            RelOp::Lt => BodyItem::Constraint(LinConstraint::lt(lhs, rhs)),
            RelOp::Ge => BodyItem::Constraint(LinConstraint::ge(lhs, rhs)),
            RelOp::Gt => BodyItem::Constraint(LinConstraint::gt(lhs, rhs)),
            RelOp::Ne => BodyItem::Disequality(lhs - rhs),
        }))
    }

    fn expr(&mut self) -> Result<LinExpr, ChcError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    e = e + self.term()?;
                }
                Tok::Minus => {
                    self.next();
                    e = e - self.term()?;
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<LinExpr, ChcError> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(-self.term()?);
        }
        let mut e = self.factor()?;
        while matches!(self.peek(), Tok::Star | Tok::Slash) {
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            let div = self.next() == Tok::Slash;
            let rhs = self.factor()?;
            if div {
                if !rhs.is_constant() || rhs.constant_term().is_zero() {
                    return Err(ChcError::Nonlinear { line, col });
                }
                e = e.scale(&(Rat::from_integer(1.into()) / rhs.constant_term()));
            } else if rhs.is_constant() {
                e = e.scale(rhs.constant_term());
            } else if e.is_constant() {
                e = rhs.scale(e.constant_term());
            } else {
                return Err(ChcError::Nonlinear { line, col });
            }
        }
        Ok(e)
    }

    fn factor(&mut self) -> Result<LinExpr, ChcError> {
        match self.next() {
            Tok::Int(n) => Ok(LinExpr::constant(Rat::from_integer(n))),
            Tok::Var(s) if s == "_" => Ok(LinExpr::var(self.fresh.var("_"))),
            Tok::Var(s) => Ok(LinExpr::var(Var::new(s))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Minus => Ok(-self.factor()?),
            t => Err(self.err(format!("expected expression, found {t:?}"))),
        }
    }
}

/// Parses clauses without building a program (no cross-clause checks).
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, ChcError> {
    let toks = Lexer::new(text).tokens()?;
    Parser {
        toks,
        pos: 0,
        fresh: Fresh::new(),
    }
    .clauses()
}

/// Parses a program in Prolog-style clause syntax.
pub fn parse_program(text: &str) -> Result<Program, ChcError> {
    Program::new(parse_clauses(text)?)
}
