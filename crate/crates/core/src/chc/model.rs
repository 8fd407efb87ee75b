use std::collections::BTreeMap;
use std::fmt;

use super::{is_false_pred, Atom, ChcError, Clause, Program};
use crate::constraints::{
    is_sat_integer, is_sat_rational, Conj, Fresh, LinConstraint, LinExpr, Var,
    DEFAULT_NODE_BUDGET,
};

/// `p(x̄) ← φ1 ∨ … ∨ φn` with distinct head variables. Ordinary facts have a
/// single disjunct; lifted facts may have several; no disjuncts means false.
#[derive(Clone, PartialEq, Eq)]
pub struct ConstrainedFact {
    pub predicate: String,
    pub head_vars: Vec<Var>,
    pub disjuncts: Vec<Conj>,
}

impl ConstrainedFact {
    pub fn new(predicate: impl Into<String>, head_vars: Vec<Var>, constraint: Conj) -> Self {
        ConstrainedFact {
            predicate: predicate.into(),
            head_vars,
            disjuncts: vec![constraint],
        }
    }

    /// `p(x̄) ← true` with head variables `A1..An`.
    pub fn top(predicate: impl Into<String>, arity: usize) -> Self {
        Self::new(predicate, default_vars(arity), Conj::top())
    }

    pub fn disjunctive(predicate: impl Into<String>, head_vars: Vec<Var>, disjuncts: Vec<Conj>) -> Self {
        ConstrainedFact {
            predicate: predicate.into(),
            head_vars,
            disjuncts,
        }
    }

    pub fn arity(&self) -> usize {
        self.head_vars.len()
    }

    /// The single disjunct of a non-disjunctive fact.
    pub fn constraint(&self) -> Option<&Conj> {
        match self.disjuncts.as_slice() {
            [c] => Some(c),
            _ => None,
        }
    }

    /// Disjuncts instantiated at the given argument terms.
    pub fn instantiate(&self, args: &[LinExpr]) -> Vec<Conj> {
        let map: BTreeMap<Var, LinExpr> = self
            .head_vars
            .iter()
            .cloned()
            .zip(args.iter().cloned())
            .collect();
        self.disjuncts.iter().map(|d| d.substitute(&map)).collect()
    }

    /// The same fact over different head variables.
    pub fn rename_head(&self, vars: Vec<Var>) -> ConstrainedFact {
        let map: BTreeMap<Var, Var> = self.head_vars.iter().cloned().zip(vars.iter().cloned()).collect();
        ConstrainedFact {
            predicate: self.predicate.clone(),
            head_vars: vars,
            disjuncts: self.disjuncts.iter().map(|d| d.rename(&map)).collect(),
        }
    }

    /// As clauses `p(x̄) :- φi.`, one per disjunct.
    pub fn to_clauses(&self, id: &str) -> Vec<Clause> {
        let head = Atom::new(
            self.predicate.clone(),
            self.head_vars.iter().cloned().map(LinExpr::var).collect(),
        );
        let n = self.disjuncts.len();
        self.disjuncts
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let id = if n == 1 {
                    id.to_string()
                } else {
                    format!("{id}_{}", i + 1)
                };
                Clause::new(id, head.clone(), d.clone(), Vec::new())
            })
            .collect()
    }
}

pub(crate) fn default_vars(arity: usize) -> Vec<Var> {
    (1..=arity).map(|i| Var::new(format!("A{i}"))).collect()
}

impl fmt::Display for ConstrainedFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.head_vars.is_empty() {
            let vs: Vec<&str> = self.head_vars.iter().map(|v| v.name()).collect();
            write!(f, "({})", vs.join(","))?;
        }
        f.write_str(" <- ")?;
        match self.disjuncts.len() {
            0 => f.write_str("false"),
            1 => write!(f, "{}", self.disjuncts[0]),
            _ => {
                let ds: Vec<String> = self.disjuncts.iter().map(|d| format!("({d})")).collect();
                f.write_str(&ds.join(" ; "))
            }
        }
    }
}

impl fmt::Debug for ConstrainedFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// At most one constrained fact per predicate.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Interpretation {
    facts: BTreeMap<String, ConstrainedFact>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts<I: IntoIterator<Item = ConstrainedFact>>(facts: I) -> Self {
        let mut i = Self::new();
        for f in facts {
            i.insert(f);
        }
        i
    }

    /// `p(x̄) ← true` for every non-`false` predicate of the program.
    pub fn all_true(p: &Program) -> Self {
        Self::from_facts(
            p.arities()
                .iter()
                .filter(|(q, _)| !is_false_pred(q))
                .map(|(q, &n)| ConstrainedFact::top(q.clone(), n)),
        )
    }

    /// Replaces any existing fact for the same predicate.
    pub fn insert(&mut self, f: ConstrainedFact) {
        self.facts.insert(f.predicate.clone(), f);
    }

    pub fn get(&self, pred: &str) -> Option<&ConstrainedFact> {
        self.facts.get(pred)
    }

    pub fn remove(&mut self, pred: &str) -> Option<ConstrainedFact> {
        self.facts.remove(pred)
    }

    pub fn contains(&self, pred: &str) -> bool {
        self.facts.contains_key(pred)
    }

    pub fn facts(&self) -> impl Iterator<Item = &ConstrainedFact> {
        self.facts.values()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.facts.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Union, with facts of `other` taking precedence.
    pub fn union(&self, other: &Interpretation) -> Interpretation {
        let mut out = self.clone();
        for f in other.facts() {
            out.insert(f.clone());
        }
        out
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in self.facts.values() {
            writeln!(f, "{fact}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelCheck {
    pub ok: bool,
    pub violated: Vec<String>,
}

fn int_sat(c: &Conj) -> Result<bool, ChcError> {
    if !is_sat_rational(c) {
        return Ok(false);
    }
    Ok(is_sat_integer(c, DEFAULT_NODE_BUDGET)?)
}

/// Some choice of one negated literal per head disjunct is jointly
/// satisfiable with the premise.
fn escapes(premise: &Conj, negations: &[Vec<LinConstraint>]) -> Result<bool, ChcError> {
    let Some((first, rest)) = negations.split_first() else {
        return int_sat(premise);
    };
    for lit in first {
        let mut next = premise.clone();
        next.push(lit.clone());
        if is_sat_rational(&next) && escapes(&next, rest)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn clause_holds(c: &Clause, i: &Interpretation) -> Result<bool, ChcError> {
    let mut fresh = Fresh::new();
    let c = c.rename_apart(&mut fresh);
    // premises: clause constraint times every combination of body disjuncts
    let mut premises = vec![c.constraint.clone()];
    for a in &c.body {
        let fact = i
            .get(&a.pred)
            .ok_or_else(|| ChcError::MissingFact(a.pred.clone()))?;
        let ds = fact.instantiate(&a.args);
        let mut next = Vec::new();
        for p in &premises {
            for d in &ds {
                let q = p.and(d);
                if is_sat_rational(&q) {
                    next.push(q);
                }
            }
        }
        premises = next;
    }
    let head_ds: Vec<Conj> = if c.is_integrity() {
        Vec::new()
    } else {
        let fact = i
            .get(&c.head.pred)
            .ok_or_else(|| ChcError::MissingFact(c.head.pred.clone()))?;
        fact.instantiate(&c.head.args)
    };
    if head_ds.iter().any(|d| d.is_empty()) {
        return Ok(true);
    }
    let mut negations: Vec<Vec<LinConstraint>> = Vec::new();
    for d in &head_ds {
        if d.is_trivially_false() {
            continue;
        }
        negations.push(d.items().iter().flat_map(|con| con.negate()).collect());
    }
    for p in &premises {
        if escapes(p, &negations)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks every clause against the interpretation over the integers.
/// `false` and its versions are interpreted as false and need no fact.
pub fn model_check(p: &Program, i: &Interpretation) -> Result<ModelCheck, ChcError> {
    let mut violated = Vec::new();
    for c in p.clauses() {
        if !clause_holds(c, i)? {
            violated.push(c.id.clone());
        }
    }
    Ok(ModelCheck {
        ok: violated.is_empty(),
        violated,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn fact(src: &str) -> ConstrainedFact {
        // parse `p(A,B) :- constraint.` as a fact
        let prog = parse_program(src).unwrap();
        let c = &prog.clauses()[0];
        ConstrainedFact::new(
            c.head.pred.clone(),
            c.head.distinct_vars().unwrap(),
            c.constraint.clone(),
        )
    }

    const FIB: &str = "\
c1. fib(A,B):- A>=0, A=<1, B=A.
c2. fib(A,B):- A>1, A2=A-2, A1=A-1, fib(A2,B2), fib(A1,B1), B=B1+B2.
c3. false:- A>5, fib(A,B), B<A.
";

    #[test]
    fn fib_true_model_violates_c3() {
        let p = parse_program(FIB).unwrap();
        let r = model_check(&p, &Interpretation::all_true(&p)).unwrap();
        assert!(!r.ok);
        assert_eq!(r.violated, ["c3"]);
    }

    #[test]
    fn no_integrity_constraints_true_is_model() {
        let p = parse_program("p(X):- X>0. p(X):- p(Y), X=Y+1.").unwrap();
        assert!(model_check(&p, &Interpretation::all_true(&p)).unwrap().ok);
    }

    #[test]
    fn revlen_invariant_is_model() {
        let p = parse_program(
            "applen(A,B,C):- A=0, B=C, B>=0.
             applen(A,B,C):- applen(A1,B,C1), A=A1+1, C=C1+1.
             revlen(A,B):- A=0, B=0.
             revlen(A,B):- revlen(A1,C), applen(C,D,B), A=A1+1, D=1.
             false :- revlen(A,B), A=\\=B.",
        )
        .unwrap();
        let i = Interpretation::from_facts([
            fact("applen(A,B,C) :- B>=0, A>=0, A+B=C."),
            fact("revlen(A,B) :- B>=0, A=B."),
        ]);
        assert!(model_check(&p, &i).unwrap().ok);
        let weak = Interpretation::from_facts([
            fact("applen(A,B,C) :- B>=0."),
            fact("revlen(A,B) :- B>=0, A=B."),
        ]);
        assert!(!model_check(&p, &weak).unwrap().ok);
    }

    #[test]
    fn disjunctive_head_is_checked_jointly() {
        // X in [0,2] is covered by X=<1 or X>=1 but by neither alone
        let p = parse_program("p(X):- X>=0, X=<2.").unwrap();
        let x = Var::new("X");
        let lifted = ConstrainedFact::disjunctive(
            "p",
            vec![x.clone()],
            vec![
                Conj::singleton(LinConstraint::le(LinExpr::var(x.clone()), LinExpr::int(1))),
                Conj::singleton(LinConstraint::ge(LinExpr::var(x), LinExpr::int(1))),
            ],
        );
        assert!(model_check(&p, &Interpretation::from_facts([lifted])).unwrap().ok);
    }

    #[test]
    fn integer_semantics() {
        // 2*X=1 has no integer solution, so the clause holds vacuously
        let p = parse_program("false :- 2*X=1.").unwrap();
        assert!(model_check(&p, &Interpretation::new()).unwrap().ok);
    }

    #[test]
    fn missing_fact_is_an_error() {
        let p = parse_program("p(X):- q(X). q(1).").unwrap();
        let i = Interpretation::from_facts([ConstrainedFact::top("p", 1)]);
        assert_eq!(model_check(&p, &i), Err(ChcError::MissingFact("q".into())));
    }
}
