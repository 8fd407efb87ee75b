//! Variable elimination and constraint simplification.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use super::linear::{Conj, LinConstraint, LinExpr, Rat, Rel, Var};
use super::simplex::{entails, is_sat_rational};

/// `∃ (vars(c) \ keep). c` over the rationals, with redundant constraints
/// removed. Unsatisfiable input yields bottom.
pub fn project(c: &Conj, keep: &BTreeSet<Var>) -> Conj {
    if c.is_trivially_false() || !is_sat_rational(c) {
        return Conj::bottom();
    }
    let mut items: Vec<LinConstraint> = c.items().to_vec();

    // Gaussian substitution through equalities on eliminated variables.
    loop {
        let pick = items.iter().enumerate().find_map(|(i, con)| {
            if con.rel() != Rel::Eq {
                return None;
            }
            con.vars().find(|v| !keep.contains(*v)).map(|v| (i, v.clone()))
        });
        let Some((i, v)) = pick else { break };
        let eq = items.swap_remove(i);
        let a = eq.expr().coeff(&v);
        // a*v + rest = 0  =>  v = -rest / a
        let mut rest = eq.expr().clone();
        rest.add_term(-a.clone(), v.clone());
        let solved = rest.scale(&(-Rat::from_integer(1.into()) / a));
        let map = [(v, solved)].into_iter().collect();
        items = items
            .into_iter()
            .map(|con| con.substitute(&map))
            .filter(|con| !con.is_trivially_true())
            .collect();
    }

    // Fourier-Motzkin on the remaining eliminated variables.
    loop {
        let candidates: BTreeSet<Var> = items
            .iter()
            .flat_map(|con| con.vars().cloned().collect::<Vec<_>>())
            .filter(|v| !keep.contains(v))
            .collect();
        let best = candidates
            .into_iter()
            .map(|v| {
                let (mut pos, mut neg) = (0usize, 0usize);
                for con in &items {
                    let a = con.expr().coeff(&v);
                    if a.is_positive() {
                        pos += 1;
                    } else if a.is_negative() {
                        neg += 1;
                    }
                }
                (pos * neg, v)
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let Some((_, v)) = best else { break };
        items = eliminate(items, &v);
        items = remove_redundant(items);
    }

    let conj = Conj::new(items);
    simplify(&conj)
}

fn eliminate(items: Vec<LinConstraint>, v: &Var) -> Vec<LinConstraint> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for con in items {
        let a = con.expr().coeff(v);
        if a.is_zero() {
            out.push(con);
        } else {
            debug_assert!(con.rel() != Rel::Eq);
            if a.is_positive() {
                pos.push((a, con));
            } else {
                neg.push((-a, con));
            }
        }
    }
    for (a, p) in &pos {
        for (b, n) in &neg {
            let e: LinExpr = p.expr().scale(b) + n.expr().scale(a);
            let rel = if p.is_strict() || n.is_strict() {
                Rel::Lt
            } else {
                Rel::Le
            };
            let con = LinConstraint::new(e, rel);
            if !con.is_trivially_true() {
                out.push(con);
            }
        }
    }
    out
}

fn remove_redundant(items: Vec<LinConstraint>) -> Vec<LinConstraint> {
    let mut kept: Vec<LinConstraint> = Conj::new(items).into_items();
    let mut i = 0;
    while i < kept.len() {
        let others: Conj = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, c)| c.clone())
            .collect();
        if entails(&others, &kept[i]) {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

/// Equivalent conjunction with implied equalities made explicit and
/// redundant constraints dropped.
pub fn simplify(c: &Conj) -> Conj {
    if c.is_trivially_false() || !is_sat_rational(c) {
        return Conj::bottom();
    }
    let mut items: Vec<LinConstraint> = Vec::new();
    for con in c.items() {
        if con.rel() == Rel::Le {
            let reverse = LinConstraint::new(-con.expr().clone(), Rel::Le);
            if entails(c, &reverse) {
                items.push(LinConstraint::new(con.expr().clone(), Rel::Eq));
                continue;
            }
        }
        items.push(con.clone());
    }
    Conj::new(remove_redundant(items))
}
