//! Dimension instrumentation: every predicate gains a final argument holding
//! the dimension of its derivation.

use std::collections::{BTreeMap, BTreeSet};

use crate::chc::{Atom, ChcError, Clause, Program};
use crate::constraints::{project, Conj, LinConstraint, LinExpr, Var};

/// Disjuncts relating child dimensions to the dimension `out` of their
/// parent. Each disjunct becomes its own clause copy.
pub fn unfold_dim(children: &[Var], out: &Var) -> Vec<Conj> {
    let k = || LinExpr::var(out.clone());
    let kv = |v: &Var| LinExpr::var(v.clone());
    match children.len() {
        0 => vec![Conj::singleton(LinConstraint::eq(k(), LinExpr::int(0)))],
        1 => vec![Conj::singleton(LinConstraint::eq(k(), kv(&children[0])))],
        n => {
            let mut out_ds = Vec::new();
            // unique maximum
            for i in 0..n {
                let mut d = Conj::singleton(LinConstraint::eq(k(), kv(&children[i])));
                for j in (0..n).filter(|&j| j != i) {
                    d.push(LinConstraint::ge(kv(&children[i]), kv(&children[j]) + LinExpr::int(1)));
                }
                out_ds.push(d);
            }
            // maximum attained by (at least) the pair i, j
            for i in 0..n {
                for j in i + 1..n {
                    let mut d = Conj::new([
                        LinConstraint::eq(kv(&children[i]), kv(&children[j])),
                        LinConstraint::eq(k(), kv(&children[i]) + LinExpr::int(1)),
                    ]);
                    for l in (0..n).filter(|&l| l != i && l != j) {
                        d.push(LinConstraint::ge(kv(&children[i]), kv(&children[l])));
                    }
                    out_ds.push(d);
                }
            }
            out_ds
        }
    }
}

/// Number of clause copies produced for a clause with `n` body atoms.
pub fn disjunct_count(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        n + n * (n - 1) / 2
    }
}

/// Names `K, K1..Kn` unless the clause already uses one of them.
fn dim_vars(c: &Clause) -> (Var, Vec<Var>) {
    let used: BTreeSet<String> = c.vars().iter().map(|v| v.name().to_string()).collect();
    let n = c.body.len();
    for prefix in ["K", "Dim", "KD", "DimK"] {
        let head = prefix.to_string();
        let body: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
        if !used.contains(&head) && body.iter().all(|b| !used.contains(b)) {
            return (Var::new(head), body.into_iter().map(Var::new).collect());
        }
    }
    let head = Var::new("K#dim");
    let body = (1..=n).map(|i| Var::new(format!("K{i}#dim"))).collect();
    (head, body)
}

fn with_arg(a: &Atom, v: &Var) -> Atom {
    let mut args = a.args.clone();
    args.push(LinExpr::var(v.clone()));
    Atom::new(a.pred.clone(), args)
}

/// The instrumented program together with the original clause of every
/// instrumented clause.
#[derive(Clone, Debug)]
pub struct Instrumented {
    pub program: Program,
    pub provenance: BTreeMap<String, String>,
}

/// Adds a dimension argument to every predicate (including `false`) and
/// unfolds the dimension relation into one clause per disjunct. Copies of a
/// clause with several disjuncts get ids `<id>_1`, `<id>_2`, ...
pub fn instrument(p: &Program) -> Result<Program, ChcError> {
    Ok(instrument_with_provenance(p)?.program)
}

pub fn instrument_with_provenance(p: &Program) -> Result<Instrumented, ChcError> {
    if p.is_instrumented() {
        return Err(ChcError::AlreadyInstrumented);
    }
    let mut clauses = Vec::new();
    let mut provenance = BTreeMap::new();
    for c in p.clauses() {
        let (k, ks) = dim_vars(c);
        let head = with_arg(&c.head, &k);
        let body: Vec<Atom> = c.body.iter().zip(&ks).map(|(a, v)| with_arg(a, v)).collect();
        let ds = unfold_dim(&ks, &k);
        let single = ds.len() == 1;
        for (j, d) in ds.into_iter().enumerate() {
            let id = if single {
                c.id.clone()
            } else {
                format!("{}_{}", c.id, j + 1)
            };
            provenance.insert(id.clone(), c.id.clone());
            clauses.push(Clause::new(id, head.clone(), c.constraint.and(&d), body.clone()));
        }
    }
    let declared = p
        .arities()
        .iter()
        .map(|(q, &n)| (q.clone(), n + 1))
        .collect();
    let mut program = Program::with_predicates(clauses, declared)?;
    program.set_instrumented(true);
    Ok(Instrumented {
        program,
        provenance,
    })
}

/// Appends dimension properties written over the instrumented predicates,
/// e.g. `false :- mc91(N,X,K), K>2.` A property whose `false` head has no
/// argument while the instrumented program already uses `false/1` gets a
/// dimension argument like any other clause. Property clauses receive the
/// first unused ids `c<n>`. The result is an ordinary program (it may be
/// instrumented again).
pub fn append_property(pdim: &Program, property: &[Clause]) -> Result<Program, ChcError> {
    let mut clauses: Vec<Clause> = pdim.clauses().to_vec();
    let mut ids: BTreeSet<String> = clauses.iter().map(|c| c.id.clone()).collect();
    let false_arity = pdim.arity(crate::chc::FALSE);
    let mut next = pdim.len();
    for c in property {
        next += 1;
        while ids.contains(&format!("c{next}")) {
            next += 1;
        }
        let id = format!("c{next}");
        ids.insert(id.clone());
        let needs_dim = c.is_integrity() && c.head.args.is_empty() && false_arity == Some(1);
        if !needs_dim {
            clauses.push(Clause {
                id,
                ..c.clone()
            });
            continue;
        }
        let (k, _) = dim_vars(c);
        let children: Option<Vec<Var>> = c
            .body
            .iter()
            .map(|a| a.args.last().and_then(|e| e.as_var()).cloned())
            .collect();
        let children = children.ok_or_else(|| {
            ChcError::TraceMismatch(format!(
                "property clause {}: body atoms need a variable dimension argument",
                c.id
            ))
        })?;
        let ds = unfold_dim(&children, &k);
        let single = ds.len() == 1;
        for (j, d) in ds.into_iter().enumerate() {
            let cid = if single {
                id.clone()
            } else {
                format!("{id}_{}", j + 1)
            };
            clauses.push(Clause::new(
                cid,
                with_arg(&c.head, &k),
                c.constraint.and(&d),
                c.body.clone(),
            ));
        }
    }
    Program::with_predicates(clauses, pdim.arities().clone())
}

/// Drops the last argument of every atom and projects the variables it
/// mentioned out of the clause constraint.
pub fn strip_dim(p: &Program) -> Result<Program, ChcError> {
    let mut clauses = Vec::new();
    for c in p.clauses() {
        let mut dim_vars: BTreeSet<Var> = BTreeSet::new();
        let strip = |a: &Atom, dv: &mut BTreeSet<Var>| {
            let mut args = a.args.clone();
            if let Some(last) = args.pop() {
                dv.extend(last.vars().cloned());
            }
            Atom::new(a.pred.clone(), args)
        };
        let head = strip(&c.head, &mut dim_vars);
        let body: Vec<Atom> = c.body.iter().map(|a| strip(a, &mut dim_vars)).collect();
        let mut keep = c.vars();
        keep.retain(|v| !dim_vars.contains(v));
        let constraint = project(&c.constraint, &keep);
        clauses.push(Clause::new(c.id.clone(), head, constraint, body));
    }
    let declared = p
        .arities()
        .iter()
        .map(|(q, &n)| (q.clone(), n.saturating_sub(1)))
        .collect();
    Program::with_predicates(clauses, declared)
}
