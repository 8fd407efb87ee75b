#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use horndim::chc::{parse_program, Clause, Program};
use horndim::constraints::{equivalent, project, Conj, LinConstraint, LinExpr, Var};
use horndim::derivations::{enumerate, EnumOptions, Root, TraceTree};
use horndim::driver::corpus_entry;

pub fn corpus_program(name: &str) -> Program {
    corpus_entry(name).expect("bundled program").program()
}

pub fn corpus_query(name: &str) -> Program {
    corpus_entry(name).expect("bundled program").query().unwrap()
}

/// Feasible trees rooted at `root` with at most `max` nodes. The enumeration
/// must be exhaustive.
pub fn feasible_trees(p: &Program, root: Root, max: usize) -> Vec<TraceTree> {
    let mut e = enumerate(p, root, EnumOptions::new(max).feasible());
    let out: Vec<TraceTree> = e.by_ref().collect();
    assert_eq!(e.undecided, 0, "integer checks ran out of budget");
    assert!(!e.timed_out);
    out
}

pub fn all_trees(p: &Program, root: Root, max: usize) -> Vec<TraceTree> {
    enumerate(p, root, EnumOptions::new(max)).collect()
}

/// `false` plus every user predicate.
pub fn roots(p: &Program) -> Vec<Root> {
    let mut out = vec![Root::False];
    out.extend(p.user_predicates().map(|q| Root::Pred(q.to_string())));
    out
}

/// The clause with head arguments replaced by `H<i>` and the arguments of
/// the `j`-th body atom by `B<j>_<i>`, local variables projected away.
fn canonical(c: &Clause, order: &[usize]) -> (String, Vec<String>, Conj) {
    let mut cons = c.constraint.clone();
    for (i, a) in c.head.args.iter().enumerate() {
        let v = Var::new(format!("#H{i}"));
        cons.push(LinConstraint::eq(LinExpr::var(v), a.clone()));
    }
    let mut preds = Vec::new();
    for (j, &b) in order.iter().enumerate() {
        let atom = &c.body[b];
        preds.push(atom.pred.clone());
        for (i, a) in atom.args.iter().enumerate() {
            let v = Var::new(format!("#B{j}_{i}"));
            cons.push(LinConstraint::eq(LinExpr::var(v), a.clone()));
        }
    }
    let keep: BTreeSet<Var> = cons
        .vars()
        .into_iter()
        .filter(|v| v.name().starts_with('#'))
        .collect();
    (c.head.pred.clone(), preds, project(&cons, &keep))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for i in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(i, n - 1);
            out.push(p);
        }
    }
    out
}

/// Same head predicate, same body predicates (in some order), and mutually
/// entailing constraints once arguments are aligned.
pub fn clauses_match(a: &Clause, b: &Clause) -> bool {
    if a.body.len() != b.body.len() {
        return false;
    }
    let identity: Vec<usize> = (0..a.body.len()).collect();
    let (ha, pa, ca) = canonical(a, &identity);
    permutations(b.body.len()).iter().any(|perm| {
        let (hb, pb, cb) = canonical(b, perm);
        ha == hb && pa == pb && equivalent(&ca, &cb)
    })
}

pub fn clause_counts(p: &Program) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for c in p.clauses() {
        *out.entry(c.head.pred.clone()).or_insert(0) += 1;
    }
    out
}

/// Compares two programs version by version: equal clause counts and a
/// one-to-one clause matching.
pub fn compare_programs(ours: &Program, expected: &Program) -> Result<(), String> {
    let (co, ce) = (clause_counts(ours), clause_counts(expected));
    if co != ce {
        return Err(format!("clause counts differ: ours {co:?}, expected {ce:?}"));
    }
    let mut used = vec![false; ours.len()];
    for e in expected.clauses() {
        let hit = ours
            .clauses()
            .iter()
            .enumerate()
            .find(|(i, c)| !used[*i] && clauses_match(c, e));
        match hit {
            Some((i, _)) => used[i] = true,
            None => return Err(format!("no clause matches {e}")),
        }
    }
    Ok(())
}

pub fn parse(src: &str) -> Program {
    parse_program(src).unwrap()
}
