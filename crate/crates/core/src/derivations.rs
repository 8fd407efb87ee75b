//! Trace trees, AND-trees, tree dimension, feasibility, and a brute-force
//! enumerator of derivations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use serde_json::{json, Value};

use crate::chc::{is_false_pred, Atom, ChcError, Clause, Program};
use crate::constraints::{
    is_sat_integer, is_sat_rational, project, Conj, Fresh, LinConstraint, LinExpr, Var,
    DEFAULT_NODE_BUDGET,
};

/// A tree of clause identifiers, written as a term: `c3(c2(c1,c1))`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceTree {
    pub id: String,
    pub children: Vec<TraceTree>,
}

impl TraceTree {
    pub fn leaf(id: impl Into<String>) -> Self {
        TraceTree {
            id: id.into(),
            children: Vec::new(),
        }
    }

    pub fn node(id: impl Into<String>, children: Vec<TraceTree>) -> Self {
        TraceTree {
            id: id.into(),
            children,
        }
    }

    /// Parses the term syntax. Identifiers may contain letters, digits, and
    /// underscores.
    pub fn parse(s: &str) -> Result<TraceTree, ChcError> {
        let chars: Vec<char> = s.chars().collect();
        let mut pos = 0;
        let t = parse_tree(&chars, &mut pos)?;
        skip_ws(&chars, &mut pos);
        if pos != chars.len() {
            return Err(trace_syntax(pos, "trailing input"));
        }
        Ok(t)
    }

    /// Horton-Strahler number: 0 for a leaf; the maximum child dimension if
    /// it is attained once, one more if attained by several children.
    pub fn dim(&self) -> usize {
        let mut best = 0;
        let mut count = 0;
        for c in &self.children {
            let d = c.dim();
            if count == 0 || d > best {
                best = d;
                count = 1;
            } else if d == best {
                count += 1;
            }
        }
        match count {
            0 | 1 => best,
            _ => best + 1,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(|c| c.leaf_count()).sum()
        }
    }

    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }

    pub fn preorder(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |t| out.push(t.id.as_str()));
        out
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a TraceTree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.preorder().into_iter().map(String::from).collect()
    }

    /// Relabels every node.
    pub fn map_ids(&self, f: &dyn Fn(&str) -> String) -> TraceTree {
        TraceTree {
            id: f(&self.id),
            children: self.children.iter().map(|c| c.map_ids(f)).collect(),
        }
    }

    /// Complete binary tree of the given height over a single id.
    pub fn complete_binary(id: &str, height: usize) -> TraceTree {
        if height == 0 {
            TraceTree::leaf(id)
        } else {
            let c = Self::complete_binary(id, height - 1);
            TraceTree::node(id, vec![c.clone(), c])
        }
    }
}

fn trace_syntax(pos: usize, msg: &str) -> ChcError {
    ChcError::Syntax {
        line: 1,
        col: pos + 1,
        msg: msg.to_string(),
    }
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_tree(chars: &[char], pos: &mut usize) -> Result<TraceTree, ChcError> {
    skip_ws(chars, pos);
    let start = *pos;
    while *pos < chars.len() && (chars[*pos].is_alphanumeric() || chars[*pos] == '_') {
        *pos += 1;
    }
    if start == *pos {
        return Err(trace_syntax(*pos, "expected clause id"));
    }
    let id: String = chars[start..*pos].iter().collect();
    skip_ws(chars, pos);
    let mut children = Vec::new();
    if *pos < chars.len() && chars[*pos] == '(' {
        *pos += 1;
        loop {
            children.push(parse_tree(chars, pos)?);
            skip_ws(chars, pos);
            match chars.get(*pos) {
                Some(',') => *pos += 1,
                Some(')') => {
                    *pos += 1;
                    break;
                }
                _ => return Err(trace_syntax(*pos, "expected ',' or ')'")),
            }
        }
    }
    Ok(TraceTree { id, children })
}

impl fmt::Display for TraceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TraceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A derivation tree: each node is a renamed clause instance whose head is
/// the corresponding body atom of its parent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AndTree {
    pub atom: Atom,
    pub constraint: Conj,
    pub clause: String,
    pub children: Vec<AndTree>,
}

impl AndTree {
    pub fn to_json(&self) -> Value {
        json!({
            "atom": self.atom.to_string(),
            "clause": self.clause,
            "constraint": self.constraint.items().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "children": self.children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }

    /// Predicates labelling some node.
    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_preds(&mut out);
        out
    }

    fn collect_preds(&self, out: &mut BTreeSet<String>) {
        out.insert(self.atom.pred.clone());
        for c in &self.children {
            c.collect_preds(out);
        }
    }
}

/// Builds the AND-tree of a trace tree. The root clause keeps its variable
/// names; every other node is renamed apart and unified with its parent's
/// body atom.
pub fn expand(p: &Program, t: &TraceTree) -> Result<AndTree, ChcError> {
    let mut fresh = Fresh::new();
    expand_node(p, t, None, &mut fresh)
}

fn expand_node(
    p: &Program,
    t: &TraceTree,
    target: Option<&Atom>,
    fresh: &mut Fresh,
) -> Result<AndTree, ChcError> {
    let clause = p
        .clause(&t.id)
        .ok_or_else(|| ChcError::UnknownClause(t.id.clone()))?;
    if clause.body.len() != t.children.len() {
        return Err(ChcError::TraceMismatch(format!(
            "clause {} has {} body atoms but the trace gives {} children",
            t.id,
            clause.body.len(),
            t.children.len()
        )));
    }
    // generated names in the root clause could collide with fresh ones
    let keep_names = target.is_none() && clause.vars().iter().all(|v| v.is_source_name());
    let mut c = if keep_names {
        clause.clone()
    } else {
        clause.rename_apart(fresh)
    };
    if let Some(target) = target {
        if target.pred != c.head.pred {
            return Err(ChcError::TraceMismatch(format!(
                "clause {} defines {} but {} is expected",
                t.id, c.head.pred, target.pred
            )));
        }
        c = unify_head(&c, target);
    }
    let children = c
        .body
        .iter()
        .zip(&t.children)
        .map(|(a, ct)| expand_node(p, ct, Some(a), fresh))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AndTree {
        atom: c.head,
        constraint: c.constraint,
        clause: t.id.clone(),
        children,
    })
}

/// Makes the (renamed-apart) clause head equal to `target`: by substitution
/// when the head arguments are distinct variables, by equalities otherwise.
fn unify_head(c: &Clause, target: &Atom) -> Clause {
    if let Some(vars) = c.head.distinct_vars() {
        let map: BTreeMap<Var, LinExpr> = vars.into_iter().zip(target.args.iter().cloned()).collect();
        return c.substitute(&map);
    }
    let mut out = c.clone();
    for (h, a) in c.head.args.iter().zip(&target.args) {
        out.constraint.push(LinConstraint::eq(h.clone(), a.clone()));
    }
    out.head = target.clone();
    out
}

/// Conjunction of all node constraints.
pub fn constr(t: &AndTree) -> Conj {
    let mut out = t.constraint.clone();
    for c in &t.children {
        out = out.and(&constr(c));
    }
    out
}

/// Whether the trace tree's constraints have an integer solution.
pub fn feasible(p: &Program, t: &TraceTree) -> Result<bool, ChcError> {
    let c = constr(&expand(p, t)?);
    if !is_sat_rational(&c) {
        return Ok(false);
    }
    Ok(is_sat_integer(&c, DEFAULT_NODE_BUDGET)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Root {
    /// Any clause with head `false` or a version of it.
    False,
    Pred(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimFilter {
    Any,
    Exactly(usize),
    AtMost(usize),
}

impl DimFilter {
    pub fn accepts(self, d: usize) -> bool {
        match self {
            DimFilter::Any => true,
            DimFilter::Exactly(k) => d == k,
            DimFilter::AtMost(k) => d <= k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub max_nodes: usize,
    pub feasible_only: bool,
    pub dim: DimFilter,
    /// Enumeration stops, setting [`Enumerator::timed_out`], once passed.
    pub deadline: Option<Instant>,
}

impl EnumOptions {
    pub fn new(max_nodes: usize) -> Self {
        EnumOptions {
            max_nodes,
            feasible_only: false,
            dim: DimFilter::Any,
            deadline: None,
        }
    }

    pub fn feasible(mut self) -> Self {
        self.feasible_only = true;
        self
    }

    pub fn with_dim(mut self, dim: DimFilter) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

#[derive(Clone)]
struct Entry {
    tree: TraceTree,
    /// Rational projection of the subtree's constraints onto the canonical
    /// head variables; only kept in feasible-only mode.
    summary: Option<Conj>,
}

fn head_var(i: usize) -> Var {
    Var::new(format!("#h{i}"))
}

/// Lazily yields trace trees in order of node count, ties broken by the
/// preorder sequence of clause positions in the program.
pub struct Enumerator<'a> {
    program: &'a Program,
    roots: Vec<usize>,
    opts: EnumOptions,
    order: HashMap<String, usize>,
    tables: HashMap<(String, usize), Vec<Entry>>,
    size: usize,
    buffer: std::vec::IntoIter<TraceTree>,
    fresh: Fresh,
    /// Trees dropped because the integer check ran out of budget.
    pub undecided: usize,
    pub timed_out: bool,
}

/// Enumerates trace trees rooted at `root` with at most `opts.max_nodes`
/// nodes.
pub fn enumerate<'a>(p: &'a Program, root: Root, opts: EnumOptions) -> Enumerator<'a> {
    let roots = p
        .clauses()
        .iter()
        .enumerate()
        .filter(|(_, c)| match &root {
            Root::False => is_false_pred(&c.head.pred),
            Root::Pred(q) => c.head.pred == *q,
        })
        .map(|(i, _)| i)
        .collect();
    let order = p
        .clauses()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.clone(), i))
        .collect();
    Enumerator {
        program: p,
        roots,
        opts,
        order,
        tables: HashMap::new(),
        size: 0,
        buffer: Vec::new().into_iter(),
        fresh: Fresh::new(),
        undecided: 0,
        timed_out: false,
    }
}

impl<'a> Enumerator<'a> {
    /// Trees of exactly `n` nodes rooted at a clause of `pred`.
    fn table(&mut self, pred: &str, n: usize) -> Vec<Entry> {
        let key = (pred.to_string(), n);
        if let Some(t) = self.tables.get(&key) {
            return t.clone();
        }
        let p = self.program;
        let mut out = Vec::new();
        for (ci, c) in p.clauses().iter().enumerate() {
            if c.head.pred == pred {
                out.extend(self.build(ci, n));
            }
        }
        self.tables.insert(key, out.clone());
        out
    }

    /// Trees of exactly `n` nodes whose root is clause `ci`.
    fn build(&mut self, ci: usize, n: usize) -> Vec<Entry> {
        let p = self.program;
        let c = &p.clauses()[ci];
        let m = c.body.len();
        if m == 0 {
            if n != 1 {
                return Vec::new();
            }
            return self.combine(c, Vec::new()).into_iter().collect();
        }
        if n < m + 1 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for sizes in compositions(n - 1, m) {
            let mut lists = Vec::with_capacity(m);
            let mut empty = false;
            for (a, &s) in c.body.iter().zip(&sizes) {
                let t = self.table(&a.pred, s);
                if t.is_empty() {
                    empty = true;
                    break;
                }
                lists.push(t);
            }
            if empty {
                continue;
            }
            let mut idx = vec![0usize; m];
            'product: loop {
                let kids: Vec<&Entry> = idx.iter().zip(&lists).map(|(&i, l)| &l[i]).collect();
                if let Some(e) = self.combine(c, kids) {
                    out.push(e);
                }
                let mut k = m;
                loop {
                    if k == 0 {
                        break 'product;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < lists[k].len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
        out
    }

    fn out_of_time(&mut self) -> bool {
        if !self.timed_out && self.opts.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn combine(&mut self, c: &Clause, kids: Vec<&Entry>) -> Option<Entry> {
        if self.out_of_time() {
            return None;
        }
        let tree = TraceTree::node(c.id.clone(), kids.iter().map(|e| e.tree.clone()).collect());
        if !self.opts.feasible_only {
            return Some(Entry {
                tree,
                summary: None,
            });
        }
        let cl = c.rename_apart(&mut self.fresh);
        let mut conj = cl.constraint.clone();
        for (a, e) in cl.body.iter().zip(&kids) {
            let map: BTreeMap<Var, LinExpr> = a
                .args
                .iter()
                .enumerate()
                .map(|(i, arg)| (head_var(i), arg.clone()))
                .collect();
            conj = conj.and(&e.summary.as_ref().unwrap().substitute(&map));
        }
        let mut keep = BTreeSet::new();
        for (i, arg) in cl.head.args.iter().enumerate() {
            conj.push(LinConstraint::eq(LinExpr::var(head_var(i)), arg.clone()));
            keep.insert(head_var(i));
        }
        if !is_sat_rational(&conj) {
            return None;
        }
        Some(Entry {
            tree,
            summary: Some(project(&conj, &keep)),
        })
    }

    fn fill(&mut self) -> bool {
        while self.size < self.opts.max_nodes {
            if self.out_of_time() {
                return false;
            }
            self.size += 1;
            let n = self.size;
            let p = self.program;
            let mut trees = Vec::new();
            for ci in self.roots.clone() {
                for e in self.build_root(ci, n) {
                    trees.push(e.tree);
                }
            }
            if self.out_of_time() {
                return false;
            }
            let order = &self.order;
            let key = |t: &TraceTree| -> Vec<usize> {
                t.preorder().iter().map(|id| order[*id]).collect()
            };
            trees.sort_by_cached_key(key);
            let mut keep = Vec::new();
            for t in trees {
                if !self.opts.dim.accepts(t.dim()) {
                    continue;
                }
                if self.opts.feasible_only {
                    match feasible(p, &t) {
                        Ok(true) => {}
                        Ok(false) => continue,
                        Err(_) => {
                            self.undecided += 1;
                            continue;
                        }
                    }
                }
                keep.push(t);
            }
            if !keep.is_empty() {
                self.buffer = keep.into_iter();
                return true;
            }
        }
        false
    }

    fn build_root(&mut self, ci: usize, n: usize) -> Vec<Entry> {
        // Root clauses of `false` are never body atoms, so they are not
        // cached under a predicate table.
        let pred = self.program.clauses()[ci].head.pred.clone();
        if is_false_pred(&pred) {
            self.build(ci, n)
        } else {
            let id = self.program.clauses()[ci].id.clone();
            self.table(&pred, n)
                .into_iter()
                .filter(|e| e.tree.id == id)
                .collect()
        }
    }
}

impl Iterator for Enumerator<'_> {
    type Item = TraceTree;

    fn next(&mut self) -> Option<TraceTree> {
        loop {
            if let Some(t) = self.buffer.next() {
                return Some(t);
            }
            if !self.fill() {
                return None;
            }
        }
    }
}

/// Ordered ways of writing `total` as `parts` positive summands.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return if total >= 1 { vec![vec![total]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::parse_program;
    use crate::constraints::equivalent;

    pub(crate) const FIB: &str = "\
c1. fib(A,B):- A>=0, A=<1, B=A.
c2. fib(A,B):- A>1, A2=A-2, A1=A-1, fib(A2,B2), fib(A1,B1), B=B1+B2.
c3. false:- A>5, fib(A,B), B<A.
";

    fn t(s: &str) -> TraceTree {
        TraceTree::parse(s).unwrap()
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(t("c3(c2(c2(c1,c1),c1))").dim(), 1);
        assert_eq!(t("c").dim(), 0);
        for h in 0..6 {
            assert_eq!(TraceTree::complete_binary("c", h).dim(), h);
        }
        // children with dimensions 1, 1, 2: unique maximum
        let one = t("a(b,b)");
        let two = t("a(a(b,b),a(b,b))");
        assert_eq!(TraceTree::node("r", vec![one.clone(), one, two]).dim(), 2);
    }

    #[test]
    fn trace_term_round_trip() {
        for s in ["c3(c2(c1,c1))", "c1", "c4(c1,c2(c3),c5)"] {
            assert_eq!(t(s).to_string(), s);
        }
        assert!(TraceTree::parse("c1(").is_err());
        assert!(TraceTree::parse("c1 c2").is_err());
    }

    #[test]
    fn fig3_tree_is_infeasible() {
        let p = parse_program(FIB).unwrap();
        let tree = expand(&p, &t("c3(c2(c1,c1))")).unwrap();
        let c = constr(&tree);
        assert!(!is_sat_rational(&c));
        assert!(!feasible(&p, &t("c3(c2(c1,c1))")).unwrap());
        assert_eq!(tree.children.len(), 1);
        assert_eq!(tree.children[0].children.len(), 2);
    }

    #[test]
    fn leaf_expansion() {
        let p = parse_program(FIB).unwrap();
        let leaf = expand(&p, &t("c1")).unwrap();
        assert_eq!(leaf.atom.to_string(), "fib(A,B)");
        let expected = p.clause("c1").unwrap().constraint.clone();
        assert!(equivalent(&leaf.constraint, &expected));
        assert!(feasible(&p, &t("c1")).unwrap());
    }

    #[test]
    fn shape_errors() {
        let p = parse_program(FIB).unwrap();
        assert!(matches!(expand(&p, &t("c1(c1)")), Err(ChcError::TraceMismatch(_))));
        assert!(matches!(expand(&p, &t("c9")), Err(ChcError::UnknownClause(_))));
        assert!(matches!(expand(&p, &t("c3(c3(c1))")), Err(ChcError::TraceMismatch(_))));
    }

    #[test]
    fn fib_false_trees_up_to_four_nodes() {
        let p = parse_program(FIB).unwrap();
        let got: Vec<String> = enumerate(&p, Root::False, EnumOptions::new(4))
            .map(|t| t.to_string())
            .collect();
        assert_eq!(got, ["c3(c1)", "c3(c2(c1,c1))"]);
    }

    #[test]
    fn single_node_trees_are_bodiless_clauses() {
        let p = parse_program(FIB).unwrap();
        let got: Vec<String> = enumerate(&p, Root::Pred("fib".into()), EnumOptions::new(1))
            .map(|t| t.to_string())
            .collect();
        assert_eq!(got, ["c1"]);
    }

    #[test]
    fn dimension_filter() {
        let p = parse_program(FIB).unwrap();
        let opts = EnumOptions::new(7).with_dim(DimFilter::Exactly(1));
        let trees: Vec<TraceTree> = enumerate(&p, Root::Pred("fib".into()), opts).collect();
        assert!(!trees.is_empty());
        assert!(trees.iter().all(|t| t.dim() == 1));
    }

    #[test]
    fn feasible_only_matches_filtering() {
        let p = parse_program(FIB).unwrap();
        let all: Vec<TraceTree> = enumerate(&p, Root::Pred("fib".into()), EnumOptions::new(9))
            .filter(|t| feasible(&p, t).unwrap())
            .collect();
        let pruned: Vec<TraceTree> =
            enumerate(&p, Root::Pred("fib".into()), EnumOptions::new(9).feasible()).collect();
        assert_eq!(all, pruned);
        assert!(pruned.len() >= 3);
    }

    #[test]
    fn counterexample_of_four_clause_program() {
        let p = parse_program(
            "c1. false:- X=0, p(X).\nc2. false:- q(X).\nc3. p(X):- X>0.\nc4. q(X):- X=0.\n",
        )
        .unwrap();
        assert!(feasible(&p, &t("c2(c4)")).unwrap());
        assert!(!feasible(&p, &t("c1(c3)")).unwrap());
        let got: Vec<String> = enumerate(&p, Root::False, EnumOptions::new(5).feasible())
            .map(|t| t.to_string())
            .collect();
        assert_eq!(got, ["c2(c4)"]);
    }

    #[test]
    fn and_tree_json() {
        let p = parse_program(FIB).unwrap();
        let j = expand(&p, &t("c3(c1)")).unwrap().to_json();
        assert_eq!(j["clause"], "c3");
        assert_eq!(j["atom"], "false");
        assert_eq!(j["children"][0]["clause"], "c1");
    }
}
