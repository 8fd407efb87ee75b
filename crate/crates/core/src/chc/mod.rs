//! Constrained Horn clauses: atoms, clauses, programs, syntactic
//! interpretations, and their concrete syntaxes.

mod model;
mod parser;
mod printer;
mod smtlib;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;

use crate::constraints::{Conj, ConstraintError, Fresh, LinExpr, Var};

pub use model::{model_check, ConstrainedFact, Interpretation, ModelCheck};
pub use parser::{parse_clauses, parse_program};
pub use printer::{print_clause, print_program};
pub use smtlib::export_smtlib_horn;

/// Atom arguments are arbitrary linear expressions.
pub type Term = LinExpr;

/// The predicate name used for integrity-constraint heads.
pub const FALSE: &str = "false";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChcError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: nonlinear term")]
    Nonlinear { line: usize, col: usize },
    #[error("predicate {pred} used with arity {found}, expected {expected}")]
    Arity {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate clause id {0}")]
    DuplicateId(String),
    #[error("clause {0}: false cannot appear in a clause body")]
    FalseInBody(String),
    #[error("no fact for predicate {0}")]
    MissingFact(String),
    #[error("cannot export: {0}")]
    Unsupported(String),
    #[error("program is already dimension-instrumented")]
    AlreadyInstrumented,
    #[error("unknown clause id {0}")]
    UnknownClause(String),
    #[error("trace tree does not fit the program: {0}")]
    TraceMismatch(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Splits a versioned predicate name `base__tag` into its parts. Names
/// without `__` have no version.
pub fn split_version(pred: &str) -> (&str, Option<&str>) {
    match pred.find("__") {
        Some(i) => (&pred[..i], Some(&pred[i + 2..])),
        None => (pred, None),
    }
}

pub fn base_name(pred: &str) -> &str {
    split_version(pred).0
}

/// `false` and its versions.
pub fn is_false_pred(pred: &str) -> bool {
    base_name(pred) == FALSE
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn falsum() -> Self {
        Atom::new(FALSE, Vec::new())
    }

    pub fn is_false(&self) -> bool {
        is_false_pred(&self.pred)
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.args.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr>) -> Atom {
        Atom::new(
            self.pred.clone(),
            self.args.iter().map(|a| a.substitute(map)).collect(),
        )
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Atom {
        Atom::new(
            self.pred.clone(),
            self.args.iter().map(|a| a.rename(map)).collect(),
        )
    }

    /// Argument variables when every argument is a distinct variable.
    pub fn distinct_vars(&self) -> Option<Vec<Var>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.args.len());
        for a in &self.args {
            let v = a.as_var()?;
            if !seen.insert(v.clone()) {
                return None;
            }
            out.push(v.clone());
        }
        Some(out)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        printer::fmt_atom(f, self, &|v| v.to_string())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub id: String,
    pub head: Atom,
    pub constraint: Conj,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn new(id: impl Into<String>, head: Atom, constraint: Conj, body: Vec<Atom>) -> Self {
        Clause {
            id: id.into(),
            head,
            constraint,
            body,
        }
    }

    pub fn is_integrity(&self) -> bool {
        self.head.is_false()
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut vs = self.head.vars();
        vs.extend(self.constraint.vars());
        for a in &self.body {
            vs.extend(a.vars());
        }
        vs
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Clause {
        Clause {
            id: self.id.clone(),
            head: self.head.rename(map),
            constraint: self.constraint.rename(map),
            body: self.body.iter().map(|a| a.rename(map)).collect(),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr>) -> Clause {
        Clause {
            id: self.id.clone(),
            head: self.head.substitute(map),
            constraint: self.constraint.substitute(map),
            body: self.body.iter().map(|a| a.substitute(map)).collect(),
        }
    }

    /// Copy with every variable replaced by a fresh one.
    pub fn rename_apart(&self, fresh: &mut Fresh) -> Clause {
        let map: BTreeMap<Var, Var> = self
            .vars()
            .into_iter()
            .map(|v| {
                let hint = v.name().split('#').next().unwrap_or("V").to_string();
                (v, fresh.var(&hint))
            })
            .collect();
        self.rename(&map)
    }

    /// Renames variables to `V0, V1, ...` in order of first occurrence, so
    /// that alpha-equivalent clauses compare equal.
    pub fn canonical(&self) -> Clause {
        let mut order: Vec<Var> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut visit = |e: &LinExpr, order: &mut Vec<Var>| {
            for v in e.vars() {
                if seen.insert(v.clone()) {
                    order.push(v.clone());
                }
            }
        };
        for a in &self.head.args {
            visit(a, &mut order);
        }
        for atom in &self.body {
            for a in &atom.args {
                visit(a, &mut order);
            }
        }
        for c in self.constraint.items() {
            visit(c.expr(), &mut order);
        }
        let map = order
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, Var::new(format!("V{i}"))))
            .collect();
        self.rename(&map)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_clause(self))
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An ordered set of clauses with a consistent predicate table.
#[derive(Clone, PartialEq, Eq)]
pub struct Program {
    clauses: Vec<Clause>,
    arities: IndexMap<String, usize>,
    instrumented: bool,
}

impl Program {
    /// Validates ids, arities, and the absence of `false` in bodies.
    pub fn new(clauses: Vec<Clause>) -> Result<Program, ChcError> {
        Self::with_predicates(clauses, IndexMap::new())
    }

    /// Like [`Program::new`], also declaring predicates that may have no
    /// clauses.
    pub fn with_predicates(
        clauses: Vec<Clause>,
        declared: IndexMap<String, usize>,
    ) -> Result<Program, ChcError> {
        let mut arities = declared;
        let mut ids = BTreeSet::new();
        for c in &clauses {
            if !ids.insert(c.id.clone()) {
                return Err(ChcError::DuplicateId(c.id.clone()));
            }
            for a in &c.body {
                if a.is_false() {
                    return Err(ChcError::FalseInBody(c.id.clone()));
                }
            }
            for a in c.atoms() {
                match arities.get(&a.pred) {
                    Some(&n) if n != a.arity() => {
                        return Err(ChcError::Arity {
                            pred: a.pred.clone(),
                            expected: n,
                            found: a.arity(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        arities.insert(a.pred.clone(), a.arity());
                    }
                }
            }
        }
        Ok(Program {
            clauses,
            arities,
            instrumented: false,
        })
    }

    pub fn empty() -> Program {
        Program {
            clauses: Vec::new(),
            arities: IndexMap::new(),
            instrumented: false,
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn into_clauses(self) -> Vec<Clause> {
        self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clause(&self, id: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.id == id)
    }

    pub fn clauses_for<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses.iter().filter(move |c| c.head.pred == pred)
    }

    pub fn arities(&self) -> &IndexMap<String, usize> {
        &self.arities
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.arities.get(pred).copied()
    }

    /// Predicate symbols in order of first occurrence.
    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.arities.keys().map(|s| s.as_str())
    }

    /// Predicates that are not `false` or one of its versions.
    pub fn user_predicates(&self) -> impl Iterator<Item = &str> {
        self.predicates().filter(|p| !is_false_pred(p))
    }

    /// Versions of `false` occurring as clause heads.
    pub fn false_predicates(&self) -> Vec<&str> {
        self.predicates().filter(|p| is_false_pred(p)).collect()
    }

    pub fn is_instrumented(&self) -> bool {
        self.instrumented
    }

    pub fn set_instrumented(&mut self, flag: bool) {
        self.instrumented = flag;
    }

    /// Every clause has at most one body atom.
    pub fn is_linear(&self) -> bool {
        self.clauses.iter().all(|c| c.body.len() <= 1)
    }

    /// Clause-wise comparison up to consistent variable renaming.
    pub fn alpha_eq(&self, other: &Program) -> bool {
        self.clauses.len() == other.clauses.len()
            && self
                .clauses
                .iter()
                .zip(&other.clauses)
                .all(|(a, b)| a.canonical() == b.canonical())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_program(self))
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
