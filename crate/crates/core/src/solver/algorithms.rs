use std::collections::{BTreeMap, BTreeSet};

use super::{run_oracle, OracleConfig, SafeResult, SolverError, Status, Witness};
use crate::chc::{
    base_name, is_false_pred, model_check, split_version, ChcError, Clause, ConstrainedFact,
    Interpretation, Program,
};
use crate::constraints::{is_sat_rational, project, Conj, Var};
use crate::derivations::{expand, feasible, TraceTree};
use crate::pe::{atleast, atmost, Specialized};

fn head_vars(n: usize) -> Vec<Var> {
    (1..=n).map(|i| Var::new(format!("A{i}"))).collect()
}

/// Whether a fact for `fact_pred` stands for predicate `pred`: the same
/// name, or an unversioned name and any of its versions.
fn covers(fact_pred: &str, pred: &str) -> bool {
    fact_pred == pred || (split_version(fact_pred).1.is_none() && base_name(pred) == fact_pred)
}

/// Merges the facts of all versions of each predicate of `p` into one
/// disjunctive fact, dropping dimension arguments beyond `p`'s arity.
/// Predicates with no version get the empty disjunction.
pub fn lift(s: &Interpretation, p: &Program) -> Interpretation {
    lift_all(std::slice::from_ref(s), p)
}

fn lift_all(parts: &[Interpretation], p: &Program) -> Interpretation {
    let mut disjuncts: BTreeMap<String, Vec<Conj>> = p
        .user_predicates()
        .map(|q| (q.to_string(), Vec::new()))
        .collect();
    for s in parts {
        for f in s.facts() {
            if is_false_pred(&f.predicate) {
                continue;
            }
            let base = base_name(&f.predicate);
            let Some(n) = p.arity(base) else { continue };
            if f.arity() < n {
                continue;
            }
            let vars = head_vars(f.arity());
            let keep: BTreeSet<Var> = vars[..n].iter().cloned().collect();
            let renamed = f.rename_head(vars);
            let out = disjuncts.entry(base.to_string()).or_default();
            for d in &renamed.disjuncts {
                if !is_sat_rational(d) {
                    continue;
                }
                let d = if f.arity() > n { project(d, &keep) } else { d.clone() };
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
    }
    Interpretation::from_facts(disjuncts.into_iter().map(|(q, ds)| {
        let n = p.arity(&q).unwrap_or(0);
        ConstrainedFact::disjunctive(q, head_vars(n), ds)
    }))
}

/// The facts of `s` whose predicate labels a node of the derivation of `t`.
pub fn restrict(s: &Interpretation, t: &TraceTree, p: &Program) -> Result<Interpretation, ChcError> {
    let labels = expand(p, t)?.predicates();
    Ok(Interpretation::from_facts(
        s.facts()
            .filter(|f| labels.iter().any(|l| covers(&f.predicate, l)))
            .cloned(),
    ))
}

/// Replaces the clauses of every predicate covered by a fact of `s` with
/// that fact. A fact one argument short of the predicate leaves the last
/// (dimension) argument unconstrained.
pub fn subst(p: &Program, s: &Interpretation) -> Result<Program, ChcError> {
    let mut chosen: BTreeMap<&str, &ConstrainedFact> = BTreeMap::new();
    for q in p.user_predicates() {
        let exact = s.get(q);
        let fact = exact.or_else(|| s.facts().find(|f| covers(&f.predicate, q)));
        if let Some(f) = fact {
            let n = p.arity(q).unwrap_or(0);
            if f.arity() == n || f.arity() + 1 == n {
                chosen.insert(q, f);
            }
        }
    }
    let mut clauses: Vec<Clause> = Vec::new();
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    let mut spare = 0;
    let place = |q: &str, id: String, f: &ConstrainedFact, clauses: &mut Vec<Clause>| {
        let n = p.arity(q).unwrap_or(0);
        let mut vars = head_vars(f.arity());
        if f.arity() + 1 == n {
            vars.push(Var::new("#dim"));
        }
        let mut g = f.rename_head(vars[..f.arity()].to_vec());
        g.head_vars = vars;
        g.predicate = q.to_string();
        clauses.extend(g.to_clauses(&id));
    };
    for c in p.clauses() {
        let q = c.head.pred.as_str();
        match chosen.get(q) {
            None => clauses.push(c.clone()),
            Some(f) => {
                if placed.insert(q) {
                    place(q, c.id.clone(), f, &mut clauses);
                }
            }
        }
    }
    for (q, f) in &chosen {
        if !placed.contains(q) {
            spare += 1;
            place(q, format!("c0_{spare}"), f, &mut clauses);
        }
    }
    let mut out = Program::with_predicates(clauses, p.arities().clone())?;
    out.set_instrumented(p.is_instrumented());
    Ok(out)
}

/// Maps a counterexample of a specialized program to `p` and replays it.
fn genuine(p: &Program, spec: &Specialized, t: &TraceTree, k: u32) -> SafeResult {
    let mapped = spec.map_trace(t);
    let rooted = p.clause(&mapped.id).is_some_and(|c| c.is_integrity());
    match feasible(p, &mapped) {
        Ok(true) if rooted => SafeResult::unsafe_(mapped).at_dimension(k),
        _ => SafeResult::unknown()
            .note(format!("counterexample {t} does not replay as {mapped}"))
            .at_dimension(k),
    }
}

fn model_of(r: &SafeResult) -> Interpretation {
    match &r.witness {
        Witness::Model(m) => m.clone(),
        _ => Interpretation::new(),
    }
}

/// Checks `P^{≤k}` and `P^{>k}` (concurrently), raising `k` while the
/// second is unknown.
pub fn solve_partition(p: &Program, k0: u32, cfg: &OracleConfig) -> Result<SafeResult, SolverError> {
    let mut parts: Vec<Interpretation> = Vec::new();
    let mut notes = Vec::new();
    let mut k = k0;
    loop {
        if k > cfg.recursion_cap {
            let mut r = SafeResult::unknown()
                .note(format!("dimension cap {} reached", cfg.recursion_cap))
                .at_dimension(cfg.recursion_cap);
            r.notes.splice(0..0, notes);
            return Ok(r);
        }
        let lo = atmost(p, k)?;
        let hi = atleast(p, k + 1)?;
        let (rlo, rhi) = std::thread::scope(|sc| {
            let a = sc.spawn(|| run_oracle(&lo.program, cfg));
            let b = sc.spawn(|| run_oracle(&hi.program, cfg));
            (a.join().expect("oracle thread"), b.join().expect("oracle thread"))
        });
        let (rlo, rhi) = (rlo?, rhi?);
        notes.extend(rlo.notes.iter().map(|n| format!("k={k} low: {n}")));
        notes.extend(rhi.notes.iter().map(|n| format!("k={k} high: {n}")));
        let finish = |mut r: SafeResult, notes: Vec<String>| {
            r.notes.splice(0..0, notes);
            Ok(r)
        };
        if let Some(t) = rlo.trace().filter(|_| rlo.status == Status::Unsafe) {
            return finish(genuine(p, &lo, t, k), notes);
        }
        if let Some(t) = rhi.trace().filter(|_| rhi.status == Status::Unsafe) {
            return finish(genuine(p, &hi, t, k), notes);
        }
        if rlo.status == Status::Unknown {
            return finish(SafeResult::unknown().at_dimension(k), notes);
        }
        parts.push(model_of(&rlo));
        if rhi.status == Status::Safe {
            parts.push(model_of(&rhi));
            let lifted = lift_all(&parts, p);
            let r = match model_check(p, &lifted) {
                Ok(mc) if mc.ok => SafeResult::safe(lifted),
                _ => SafeResult {
                    status: Status::Safe,
                    witness: Witness::PartModels(parts),
                    dimension: None,
                    notes: vec!["lifted interpretation is not a model; keeping the part models".into()],
                },
            };
            return finish(r.at_dimension(k), notes);
        }
        k += 1;
    }
}

/// Checks `P^{≤k}` with the facts of `s` substituted, discarding facts that
/// took part in spurious counterexamples and raising `k` while the lifted
/// model does not cover `p`.
pub fn solve_inc(
    p: &Program,
    k0: u32,
    s0: &Interpretation,
    cfg: &OracleConfig,
) -> Result<SafeResult, SolverError> {
    let mut k = k0;
    let mut s = s0.clone();
    let mut notes = Vec::new();
    loop {
        if k > cfg.recursion_cap {
            let mut r = SafeResult::unknown()
                .note(format!("dimension cap {} reached", cfg.recursion_cap))
                .at_dimension(cfg.recursion_cap);
            r.notes.splice(0..0, notes);
            return Ok(r);
        }
        let lo = atmost(p, k)?;
        let q = subst(&lo.program, &s)?;
        let r = run_oracle(&q, cfg)?;
        notes.extend(r.notes.iter().map(|n| format!("k={k}: {n}")));
        let out = match r.status {
            Status::Unknown => SafeResult::unknown().at_dimension(k),
            Status::Unsafe => {
                let t = r.trace().expect("unsafe verdicts carry a trace");
                let used = restrict(&s, t, &q)?;
                if used.is_empty() {
                    genuine(p, &lo, t, k)
                } else {
                    notes.push(format!("k={k}: spurious counterexample {t}"));
                    for f in used.predicates().map(str::to_string).collect::<Vec<_>>() {
                        s.remove(&f);
                    }
                    continue;
                }
            }
            Status::Safe => {
                let m = model_of(&r);
                let lifted = lift(&m, p);
                match model_check(p, &lifted) {
                    Ok(mc) if mc.ok => SafeResult::safe(lifted).at_dimension(k),
                    _ => {
                        notes.push(format!("k={k}: lifted model does not cover the program"));
                        s = m;
                        k += 1;
                        continue;
                    }
                }
            }
        };
        let mut out = out;
        out.notes.splice(0..0, notes);
        return Ok(out);
    }
}
