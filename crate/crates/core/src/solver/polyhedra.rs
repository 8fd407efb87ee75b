use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{bounded::safe_bounded, Deadline, OracleConfig, SafeResult};
use crate::chc::{is_false_pred, model_check, Clause, ConstrainedFact, Interpretation, Program};
use crate::constraints::{is_sat_rational, project, Fresh, LinConstraint, LinExpr, Polyhedron, Var};

fn head_vars(arity: usize) -> Vec<Var> {
    (1..=arity).map(|i| Var::new(format!("A{i}"))).collect()
}

struct Analyzer<'a> {
    program: &'a Program,
    clauses: Vec<Clause>,
    vars: HashMap<String, Vec<Var>>,
}

impl Analyzer<'_> {
    /// Strongest postcondition of one clause, projected onto the head.
    fn post(&self, c: &Clause, state: &BTreeMap<String, Polyhedron>) -> Option<Polyhedron> {
        let mut conj = c.constraint.clone();
        for b in &c.body {
            let poly = &state[&b.pred];
            if poly.is_empty() {
                return None;
            }
            let map: BTreeMap<Var, LinExpr> = self.vars[&b.pred]
                .iter()
                .cloned()
                .zip(b.args.iter().cloned())
                .collect();
            conj = conj.and(&poly.constraints().substitute(&map));
        }
        let hv = &self.vars[&c.head.pred];
        for (v, a) in hv.iter().zip(&c.head.args) {
            conj.push(LinConstraint::eq(LinExpr::var(v.clone()), a.clone()));
        }
        if !is_sat_rational(&conj) {
            return None;
        }
        let keep: BTreeSet<Var> = hv.iter().cloned().collect();
        let proj = project(&conj, &keep).tighten_integer();
        let poly = Polyhedron::new(keep, &proj);
        (!poly.is_empty()).then_some(poly)
    }

    fn step(&self, q: &str, state: &BTreeMap<String, Polyhedron>) -> Polyhedron {
        let mut acc = Polyhedron::empty(self.vars[q].iter().cloned().collect());
        for c in self.clauses.iter().filter(|c| c.head.pred == q) {
            if let Some(p) = self.post(c, state) {
                acc = acc.hull(&p);
            }
        }
        acc
    }
}

/// Kleene iteration in the polyhedra domain with delayed widening and one
/// narrowing pass. Returns one polyhedron per predicate, or `None` on
/// timeout.
pub fn analyze(p: &Program, cfg: &OracleConfig) -> Option<BTreeMap<String, Polyhedron>> {
    let deadline = Deadline::after(cfg.timeout);
    let mut fresh = Fresh::new();
    let clauses = p
        .clauses()
        .iter()
        .map(|c| {
            let mut c = c.rename_apart(&mut fresh);
            c.constraint = c.constraint.tighten_integer();
            c
        })
        .collect();
    let vars: HashMap<String, Vec<Var>> = p
        .arities()
        .iter()
        .map(|(q, &n)| (q.clone(), head_vars(n)))
        .collect();
    let an = Analyzer {
        program: p,
        clauses,
        vars,
    };
    let preds: Vec<String> = an.program.predicates().map(str::to_string).collect();
    let mut state: BTreeMap<String, Polyhedron> = preds
        .iter()
        .map(|q| (q.clone(), Polyhedron::empty(an.vars[q].iter().cloned().collect())))
        .collect();
    let mut updates: HashMap<String, usize> = HashMap::new();
    loop {
        let mut changed = false;
        for q in &preds {
            if deadline.passed() {
                return None;
            }
            let new = an.step(q, &state);
            let old = &state[q];
            if old.contains(&new) {
                continue;
            }
            let n = updates.entry(q.clone()).or_default();
            *n += 1;
            let joined = old.hull(&new);
            let next = if *n > cfg.widening_delay {
                old.widen(&joined)
            } else {
                joined
            };
            state.insert(q.clone(), next);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    // one descending pass, in place and with `false` last; each update
    // keeps a post-fixpoint
    let (queries, rest): (Vec<&String>, Vec<&String>) = preds.iter().partition(|q| is_false_pred(q));
    for q in rest.into_iter().chain(queries) {
        let next = an.step(q, &state);
        state.insert(q.clone(), next);
    }
    Some(state)
}

fn interpretation(p: &Program, state: &BTreeMap<String, Polyhedron>) -> Interpretation {
    Interpretation::from_facts(p.user_predicates().map(|q| {
        let poly = &state[q];
        ConstrainedFact::new(q, head_vars(p.arity(q).unwrap_or(0)), poly.constraints().clone())
    }))
}

/// Safe when the analysis shows every version of `false` unreachable;
/// otherwise looks for a real counterexample with the bounded search.
pub fn safe_polyhedra(p: &Program, cfg: &OracleConfig) -> SafeResult {
    let Some(state) = analyze(p, cfg) else {
        return SafeResult::unknown().note("polyhedra analysis timed out");
    };
    let reachable: Vec<&str> = p
        .predicates()
        .filter(|q| is_false_pred(q) && !state[*q].is_empty())
        .collect();
    let mut note = None;
    if reachable.is_empty() {
        let model = interpretation(p, &state);
        match model_check(p, &model) {
            Ok(mc) if mc.ok => return SafeResult::safe(model),
            Ok(mc) => note = Some(format!("invariant violates {}", mc.violated.join(", "))),
            Err(e) => note = Some(format!("invariant check failed: {e}")),
        }
    }
    let r = safe_bounded(p, cfg);
    if r.status != super::Status::Unknown {
        return r;
    }
    r.note(note.unwrap_or_else(|| {
        format!("polyhedra: {} may be reachable", reachable.join(", "))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::parse_program;
    use crate::solver::{OracleKind, Status};

    fn cfg() -> OracleConfig {
        OracleConfig::with_kind(OracleKind::Polyhedra)
    }

    #[test]
    fn counter_invariant() {
        let p = parse_program(
            "c(X) :- X=0.\nc(Y) :- c(X), X<10, Y=X+1.\nfalse :- c(X), X>10.\n",
        )
        .unwrap();
        let st = analyze(&p, &cfg()).unwrap();
        let x = || LinExpr::var(Var::new("A1"));
        let expected = crate::constraints::Conj::new([
            LinConstraint::ge(x(), LinExpr::int(0)),
            LinConstraint::le(x(), LinExpr::int(10)),
        ]);
        assert!(crate::constraints::equivalent(st["c"].constraints(), &expected));
        assert!(st["false"].is_empty());
        let r = safe_polyhedra(&p, &cfg());
        assert_eq!(r.status, Status::Safe);
    }

    #[test]
    fn reachable_false_uses_bounded_search() {
        let p = parse_program("false :- 0=0.").unwrap();
        let r = safe_polyhedra(&p, &cfg());
        assert_eq!(r.status, Status::Unsafe);
        assert_eq!(r.trace().unwrap().to_string(), "c1");
    }

    #[test]
    fn unreachable_predicates_are_empty() {
        let p = parse_program("p(X) :- p(X).\nfalse :- p(X).\n").unwrap();
        let st = analyze(&p, &cfg()).unwrap();
        assert!(st["p"].is_empty());
        assert_eq!(safe_polyhedra(&p, &cfg()).status, Status::Safe);
    }
}
