//! Partial evaluation with property-based abstraction, and its two
//! instantiations producing dimension-bounded programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;

use crate::chc::{is_false_pred, Atom, ChcError, Clause, ConstrainedFact, Program};
use crate::constraints::{
    entails_conj, is_sat_rational, project, simplify, Conj, Fresh, LinConstraint, LinExpr, Var,
};
use crate::instrument::{instrument_with_provenance, strip_dim};

/// Canonical head variables of constrained facts built here.
pub fn canon_vars(n: usize) -> Vec<Var> {
    (0..n).map(|i| Var::new(format!("#x{i}"))).collect()
}

/// The fixed properties used for abstraction, indexed by position.
#[derive(Clone, Debug, Default)]
pub struct PsiSet {
    props: Vec<ConstrainedFact>,
}

impl PsiSet {
    pub fn new(props: Vec<ConstrainedFact>) -> Self {
        PsiSet { props }
    }

    pub fn props(&self) -> &[ConstrainedFact] {
        &self.props
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    /// Largest number of properties attached to one predicate.
    fn max_per_predicate(&self) -> usize {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for p in &self.props {
            *counts.entry(p.predicate.as_str()).or_default() += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }
}

/// A conjunction of properties, identified by their indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AbstractFact {
    pub pred: String,
    pub indices: BTreeSet<usize>,
}

fn single(f: &ConstrainedFact) -> &Conj {
    f.constraint()
        .expect("partial evaluation works on non-disjunctive facts")
}

/// The representative of a fact: every property of its predicate that it
/// entails.
pub fn rep(psi: &PsiSet, f: &ConstrainedFact) -> AbstractFact {
    let theta = single(f);
    let indices = psi
        .props
        .iter()
        .enumerate()
        .filter(|(_, q)| q.predicate == f.predicate && q.arity() == f.arity())
        .filter(|(_, q)| {
            let inst = q.instantiate(&f.head_vars.iter().cloned().map(LinExpr::var).collect::<Vec<_>>());
            inst.iter().all(|d| entails_conj(theta, d))
        })
        .map(|(i, _)| i)
        .collect();
    AbstractFact {
        pred: f.predicate.clone(),
        indices,
    }
}

pub fn abstract_facts(psi: &PsiSet, s: &[ConstrainedFact]) -> BTreeSet<AbstractFact> {
    s.iter().map(|f| rep(psi, f)).collect()
}

/// The conjunction of the properties of an abstract fact, over canonical
/// head variables.
pub fn concretize(psi: &PsiSet, a: &AbstractFact, arity: usize) -> ConstrainedFact {
    let vars = canon_vars(arity);
    let args: Vec<LinExpr> = vars.iter().cloned().map(LinExpr::var).collect();
    let mut c = Conj::top();
    for &i in &a.indices {
        for d in psi.props[i].instantiate(&args) {
            c = c.and(&d);
        }
    }
    ConstrainedFact::new(a.pred.clone(), vars, c)
}

/// `θ` instantiated at the clause head and conjoined with the clause
/// constraint, or `None` if unsatisfiable.
fn specialize(f: &ConstrainedFact, c: &Clause) -> Option<Conj> {
    let mut phi = c.constraint.clone();
    for d in f.instantiate(&c.head.args) {
        phi = phi.and(&d);
    }
    is_sat_rational(&phi).then_some(phi)
}

/// Projection of `phi` onto the arguments of a body atom, as a fact over
/// canonical variables.
fn call_fact(phi: &Conj, a: &Atom) -> ConstrainedFact {
    let vars = canon_vars(a.arity());
    let mut c = phi.clone();
    for (v, arg) in vars.iter().zip(&a.args) {
        c.push(LinConstraint::eq(LinExpr::var(v.clone()), arg.clone()));
    }
    let keep: BTreeSet<Var> = vars.iter().cloned().collect();
    ConstrainedFact::new(a.pred.clone(), vars, project(&c, &keep))
}

/// One unfolding step: the call patterns of body atoms reachable from the
/// given facts.
pub fn pe_step(p: &Program, s: &[ConstrainedFact]) -> Vec<ConstrainedFact> {
    let mut fresh = Fresh::new();
    let mut out = Vec::new();
    for f in s {
        for c in p.clauses_for(&f.predicate) {
            let c = c.rename_apart(&mut fresh);
            let Some(phi) = specialize(f, &c) else {
                continue;
            };
            for a in &c.body {
                out.push(call_fact(&phi, a));
            }
        }
    }
    out
}

/// Least fixpoint of `S ↦ S0 ∪ abstract(pe_step(S))` over abstract facts.
pub fn lfp(
    p: &Program,
    psi: &PsiSet,
    s0: &[ConstrainedFact],
) -> Result<BTreeSet<AbstractFact>, ChcError> {
    let npreds = p.arities().len().max(1);
    let cap = npreds
        .saturating_mul(1usize.checked_shl(psi.max_per_predicate() as u32).unwrap_or(usize::MAX))
        .saturating_add(1);
    let mut s = abstract_facts(psi, s0);
    let mut expanded: BTreeSet<AbstractFact> = BTreeSet::new();
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > cap {
            return Err(ChcError::TraceMismatch(format!(
                "partial evaluation did not converge within {cap} iterations"
            )));
        }
        let mut next = s.clone();
        for a in s.iter().filter(|a| !expanded.contains(*a)) {
            let arity = p.arity(&a.pred).unwrap_or(0);
            let f = concretize(psi, a, arity);
            next.extend(abstract_facts(psi, &pe_step(p, &[f])));
        }
        expanded.extend(s.iter().cloned());
        if next == s {
            return Ok(s);
        }
        debug_assert!(s.is_subset(&next));
        s = next;
    }
}

/// Dimension tag of a version.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VersionTag {
    Exactly(u32),
    AtMost(u32),
    AtLeast(u32),
    Any,
    /// A version of a generic property set.
    Other(usize),
}

impl VersionTag {
    fn suffix(&self) -> String {
        match self {
            VersionTag::Exactly(d) => format!("eq{d}"),
            VersionTag::AtMost(d) => format!("le{d}"),
            VersionTag::AtLeast(d) => format!("ge{d}"),
            VersionTag::Any => "any".into(),
            VersionTag::Other(n) => format!("v{n}"),
        }
    }
}

impl fmt::Display for VersionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionTag::Exactly(d) => write!(f, "={d}"),
            VersionTag::AtMost(d) => write!(f, "≤{d}"),
            VersionTag::AtLeast(d) => write!(f, "≥{d}"),
            VersionTag::Any => f.write_str("any"),
            VersionTag::Other(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionedPredicate {
    pub name: String,
    pub base: String,
    pub tag: VersionTag,
    pub arity: usize,
    pub fact: AbstractFact,
}

impl VersionedPredicate {
    /// `p^{≤1}` style rendering.
    pub fn display(&self) -> String {
        format!("{}^{{{}}}", self.base, self.tag)
    }
}

/// Output of a specialization: the program, the input clause each output
/// clause came from, and the versions it defines.
#[derive(Clone, Debug)]
pub struct Specialized {
    pub program: Program,
    pub provenance: BTreeMap<String, String>,
    pub versions: Vec<VersionedPredicate>,
}

impl Specialized {
    pub fn version(&self, name: &str) -> Option<&VersionedPredicate> {
        self.versions.iter().find(|v| v.name == name)
    }

    /// Versions of a base predicate that have clauses.
    pub fn versions_of(&self, base: &str) -> Vec<&VersionedPredicate> {
        self.versions.iter().filter(|v| v.base == base).collect()
    }

    /// Maps a trace of the specialized program back to the input program.
    pub fn map_trace(&self, t: &crate::derivations::TraceTree) -> crate::derivations::TraceTree {
        t.map_ids(&|id| self.provenance.get(id).cloned().unwrap_or_else(|| id.to_string()))
    }
}

/// Generates the specialized clauses for the fixpoint `sstar`. `tag` names
/// each abstract fact's version; clashing names get a numeric suffix.
pub fn pe_cls(
    p: &Program,
    psi: &PsiSet,
    sstar: &BTreeSet<AbstractFact>,
    tag: &dyn Fn(&AbstractFact) -> VersionTag,
) -> Result<Specialized, ChcError> {
    let pred_pos: HashMap<&str, usize> = p
        .predicates()
        .enumerate()
        .map(|(i, q)| (q, i))
        .collect();
    let mut ordered: Vec<&AbstractFact> = sstar.iter().collect();
    ordered.sort_by_key(|a| (pred_pos.get(a.pred.as_str()).copied(), (*a).clone()));

    let mut versions: Vec<VersionedPredicate> = Vec::new();
    let mut names: HashMap<AbstractFact, String> = HashMap::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for a in &ordered {
        let t = tag(a);
        let base_name = format!("{}__{}", a.pred, t.suffix());
        let mut name = base_name.clone();
        let mut n = 1;
        while taken.contains(&name) {
            n += 1;
            name = format!("{base_name}_{n}");
        }
        taken.insert(name.clone());
        names.insert((*a).clone(), name.clone());
        versions.push(VersionedPredicate {
            name,
            base: a.pred.clone(),
            tag: t,
            arity: p.arity(&a.pred).unwrap_or(0),
            fact: (*a).clone(),
        });
    }

    // (head version, clause, body versions)
    let mut raw: Vec<(String, Clause, String)> = Vec::new();
    for a in &ordered {
        let arity = p.arity(&a.pred).unwrap_or(0);
        let f = concretize(psi, a, arity);
        for c in p.clauses_for(&a.pred) {
            let Some(phi) = specialize(&f, c) else {
                continue;
            };
            let mut body = Vec::with_capacity(c.body.len());
            for b in &c.body {
                let v = rep(psi, &call_fact(&phi, b));
                let name = names.get(&v).ok_or_else(|| {
                    ChcError::TraceMismatch(format!(
                        "version {:?} of {} is not in the fixpoint",
                        v.indices, v.pred
                    ))
                })?;
                body.push(Atom::new(name.clone(), b.args.clone()));
            }
            let head = Atom::new(names[*a].clone(), c.head.args.clone());
            raw.push((
                names[*a].clone(),
                Clause::new(String::new(), head, simplify(&phi), body),
                c.id.clone(),
            ));
        }
    }

    // drop clauses that call versions without clauses, until stable
    loop {
        let defined: BTreeSet<&str> = raw.iter().map(|(h, _, _)| h.as_str()).collect();
        let before = raw.len();
        let keep: Vec<bool> = raw
            .iter()
            .map(|(_, c, _)| c.body.iter().all(|b| defined.contains(b.pred.as_str())))
            .collect();
        let mut it = keep.into_iter();
        raw.retain(|_| it.next().unwrap());
        if raw.len() == before {
            break;
        }
    }
    let defined: BTreeSet<String> = raw.iter().map(|(h, _, _)| h.clone()).collect();
    versions.retain(|v| defined.contains(&v.name));

    let mut clauses = Vec::with_capacity(raw.len());
    let mut provenance = BTreeMap::new();
    for (i, (_, mut c, src)) in raw.into_iter().enumerate() {
        c.id = format!("c{}", i + 1);
        provenance.insert(c.id.clone(), src);
        clauses.push(c);
    }
    let declared: IndexMap<String, usize> = versions
        .iter()
        .map(|v| (v.name.clone(), v.arity))
        .collect();
    let program = Program::with_predicates(clauses, declared)?;
    Ok(Specialized {
        program,
        provenance,
        versions,
    })
}

/// Partial evaluation with a generic property set; versions are numbered
/// `p__v1`, `p__v2`, ... per predicate in fixpoint order.
pub fn partial_evaluate(
    p: &Program,
    psi: &PsiSet,
    s0: &[ConstrainedFact],
) -> Result<Specialized, ChcError> {
    let sstar = lfp(p, psi, s0)?;
    let mut numbering: HashMap<AbstractFact, usize> = HashMap::new();
    let mut per_pred: HashMap<String, usize> = HashMap::new();
    for a in &sstar {
        let n = per_pred.entry(a.pred.clone()).or_default();
        *n += 1;
        numbering.insert(a.clone(), *n);
    }
    pe_cls(p, psi, &sstar, &|a| VersionTag::Other(numbering[a]))
}

/// Adds `Ki >= 0` for the dimension argument of every body atom. Every
/// derivation satisfies these, so derivability is unchanged.
fn with_nonnegative_dims(pdim: &Program) -> Result<Program, ChcError> {
    let clauses = pdim
        .clauses()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            for b in &c.body.clone() {
                if let Some(k) = b.args.last() {
                    c.constraint
                        .push(LinConstraint::ge(k.clone(), LinExpr::int(0)));
                }
            }
            c
        })
        .collect();
    let mut out = Program::with_predicates(clauses, pdim.arities().clone())?;
    out.set_instrumented(true);
    Ok(out)
}

fn dim_fact(pred: &str, arity: usize, rel: fn(LinExpr, LinExpr) -> LinConstraint, d: i64) -> ConstrainedFact {
    let vars = canon_vars(arity);
    let z = LinExpr::var(vars[arity - 1].clone());
    ConstrainedFact::new(pred, vars, Conj::singleton(rel(z, LinExpr::int(d))))
}

/// Which dimension-bounded program to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    AtMost(u32),
    AtLeast(u32),
}

/// Relation of each property: for at-most `(=, d)` and `(≤, d)` pairs, for
/// at-least `(≥, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Prop {
    Eq(u32),
    Le(u32),
    Ge(u32),
}

fn compose(
    spec: Specialized,
    inst_prov: &BTreeMap<String, String>,
    strip: bool,
) -> Result<Specialized, ChcError> {
    let provenance = spec
        .provenance
        .iter()
        .map(|(k, v)| (k.clone(), inst_prov.get(v).cloned().unwrap_or_else(|| v.clone())))
        .collect();
    let program = if strip {
        strip_dim(&spec.program)?
    } else {
        spec.program
    };
    Ok(Specialized {
        program,
        provenance,
        versions: spec.versions,
    })
}

fn dimension_bounded(p: &Program, bound: Bound, strip: bool) -> Result<Specialized, ChcError> {
    let inst = instrument_with_provenance(p)?;
    let pdim = with_nonnegative_dims(&inst.program)?;
    let mut props: Vec<ConstrainedFact> = Vec::new();
    let mut kinds: Vec<Prop> = Vec::new();
    let mut s0: Vec<ConstrainedFact> = Vec::new();
    for (q, &n) in pdim.arities() {
        match bound {
            Bound::AtMost(k) => {
                for d in 0..=k {
                    props.push(dim_fact(q, n, LinConstraint::eq, d as i64));
                    kinds.push(Prop::Eq(d));
                    props.push(dim_fact(q, n, LinConstraint::le, d as i64));
                    kinds.push(Prop::Le(d));
                }
                s0.push(dim_fact(q, n, LinConstraint::le, k as i64));
                s0.push(dim_fact(q, n, LinConstraint::eq, k as i64));
            }
            Bound::AtLeast(k) => {
                for d in 0..=k {
                    props.push(dim_fact(q, n, LinConstraint::ge, d as i64));
                    kinds.push(Prop::Ge(d));
                }
                s0.push(dim_fact(q, n, LinConstraint::ge, k as i64));
            }
        }
    }
    let psi = PsiSet::new(props);
    let sstar = lfp(&pdim, &psi, &s0)?;
    let tag = |a: &AbstractFact| -> VersionTag {
        let ks: Vec<Prop> = a.indices.iter().map(|&i| kinds[i]).collect();
        if let Some(d) = ks.iter().find_map(|k| match k {
            Prop::Eq(d) => Some(*d),
            _ => None,
        }) {
            return VersionTag::Exactly(d);
        }
        if let Some(d) = ks
            .iter()
            .filter_map(|k| match k {
                Prop::Le(d) => Some(*d),
                _ => None,
            })
            .min()
        {
            return VersionTag::AtMost(d);
        }
        match ks
            .iter()
            .filter_map(|k| match k {
                Prop::Ge(d) => Some(*d),
                _ => None,
            })
            .max()
        {
            Some(d) if d > 0 => VersionTag::AtLeast(d),
            _ => VersionTag::Any,
        }
    };
    let spec = pe_cls(&pdim, &psi, &sstar, &tag)?;
    compose(spec, &inst.provenance, strip)
}

/// `P^{≤k}`: derivations of dimension at most `k`, with versions `p__eq<d>`
/// and `p__le<d>`.
pub fn atmost(p: &Program, k: u32) -> Result<Specialized, ChcError> {
    dimension_bounded(p, Bound::AtMost(k), false)
}

/// `P^{>k-1}`: derivations of dimension at least `k`, with versions
/// `p__ge<d>` and `p__any`.
pub fn atleast(p: &Program, k: u32) -> Result<Specialized, ChcError> {
    dimension_bounded(p, Bound::AtLeast(k), false)
}

/// Either construction, optionally with dimension arguments projected away.
pub fn specialize_dimension(p: &Program, bound: Bound, strip: bool) -> Result<Specialized, ChcError> {
    dimension_bounded(p, bound, strip)
}

/// The versions of `false` with clauses in a specialized program.
pub fn false_versions(s: &Specialized) -> Vec<&str> {
    s.program
        .predicates()
        .filter(|q| is_false_pred(q))
        .collect()
}
