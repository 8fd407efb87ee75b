//! Closed convex polyhedra in constraint representation.

use std::collections::BTreeSet;

use super::linear::{rat, Conj, LinConstraint, LinExpr, Rel, Var};
use super::project::{project, simplify};
use super::simplex::{entails, entails_conj, is_sat_rational};

/// A closed polyhedron over a declared set of variables. Strict constraints
/// given to [`Polyhedron::new`] are replaced by their closure.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polyhedron {
    vars: BTreeSet<Var>,
    cons: Conj,
}

fn close(c: &Conj) -> Conj {
    Conj::new(c.items().iter().map(|con| match con.rel() {
        Rel::Lt => LinConstraint::new(con.expr().clone(), Rel::Le),
        _ => con.clone(),
    }))
}

impl Polyhedron {
    pub fn new(vars: BTreeSet<Var>, cons: &Conj) -> Self {
        debug_assert!(cons.vars().is_subset(&vars));
        let closed = close(cons);
        let cons = if is_sat_rational(&closed) {
            simplify(&closed)
        } else {
            Conj::bottom()
        };
        Polyhedron { vars, cons }
    }

    pub fn universe(vars: BTreeSet<Var>) -> Self {
        Polyhedron {
            vars,
            cons: Conj::top(),
        }
    }

    pub fn empty(vars: BTreeSet<Var>) -> Self {
        Polyhedron {
            vars,
            cons: Conj::bottom(),
        }
    }

    pub fn vars(&self) -> &BTreeSet<Var> {
        &self.vars
    }

    pub fn constraints(&self) -> &Conj {
        &self.cons
    }

    pub fn is_empty(&self) -> bool {
        self.cons.is_trivially_false()
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Polyhedron) -> bool {
        other.is_empty() || entails_conj(&other.cons, &self.cons)
    }

    /// Smallest closed convex polyhedron containing both arguments.
    pub fn hull(&self, other: &Polyhedron) -> Polyhedron {
        debug_assert_eq!(self.vars, other.vars);
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        if self.contains(other) {
            return self.clone();
        }
        if other.contains(self) {
            return other.clone();
        }
        // x = xa + xb, a(xa) scaled by la, b(xb) scaled by lb, la + lb = 1
        let la = Var::new("#hull_la");
        let lb = Var::new("#hull_lb");
        let copy = |v: &Var, tag: &str| Var::new(format!("{}#hull_{tag}", v.name()));
        let scaled = |cons: &Conj, tag: &str, lam: &Var| -> Vec<LinConstraint> {
            cons.items()
                .iter()
                .map(|con| {
                    let mut e = LinExpr::term(con.expr().constant_term().clone(), lam.clone());
                    for (v, a) in con.expr().coeffs() {
                        e.add_term(a.clone(), copy(v, tag));
                    }
                    LinConstraint::new(e, con.rel())
                })
                .collect()
        };
        let mut all = Conj::new(scaled(&self.cons, "a", &la));
        all.extend(scaled(&other.cons, "b", &lb));
        all.push(LinConstraint::ge(LinExpr::var(la.clone()), LinExpr::int(0)));
        all.push(LinConstraint::ge(LinExpr::var(lb.clone()), LinExpr::int(0)));
        all.push(LinConstraint::eq(
            LinExpr::var(la) + LinExpr::var(lb),
            LinExpr::constant(rat(1)),
        ));
        for v in &self.vars {
            all.push(LinConstraint::eq(
                LinExpr::var(v.clone()),
                LinExpr::var(copy(v, "a")) + LinExpr::var(copy(v, "b")),
            ));
        }
        Polyhedron {
            vars: self.vars.clone(),
            cons: project(&all, &self.vars),
        }
    }

    /// Widening: the constraints of `self` (equalities split into two
    /// inequalities) that `other` entails, plus those of `other` that can
    /// replace a constraint of `self` without changing it.
    pub fn widen(&self, other: &Polyhedron) -> Polyhedron {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let old: Vec<LinConstraint> = self.cons.items().iter().flat_map(|c| c.halves()).collect();
        let mut kept: Vec<LinConstraint> = old
            .iter()
            .filter(|c| entails(&other.cons, c))
            .cloned()
            .collect();
        for c in other.cons.items().iter().flat_map(|c| c.halves()) {
            if kept.contains(&c) {
                continue;
            }
            let swaps = (0..old.len()).any(|i| {
                let mut alt: Conj = old
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, d)| d.clone())
                    .collect();
                alt.push(c.clone());
                entails(&alt, &old[i])
            });
            if swaps {
                kept.push(c);
            }
        }
        Polyhedron::new(self.vars.clone(), &Conj::new(kept))
    }

    pub fn meet(&self, other: &Polyhedron) -> Polyhedron {
        Polyhedron::new(self.vars.clone(), &self.cons.and(&other.cons))
    }
}
