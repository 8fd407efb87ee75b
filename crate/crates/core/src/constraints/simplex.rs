//! Exact satisfiability for conjunctions of linear constraints.
//!
//! General simplex over bounded variables with Bland's rule. Each
//! multi-variable constraint gets a slack variable whose bounds encode the
//! constraint; strict bounds are represented with an infinitesimal `δ`
//! (values are pairs `r + d·δ` compared lexicographically). Integer mode
//! tightens all constraints to non-strict form and runs depth-first
//! branch-and-bound on fractional original variables.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::linear::{Conj, LinConstraint, Rat, Rel, Var};
use super::ConstraintError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Rational,
    Integer,
}

/// Default branch-and-bound node budget for integer mode.
pub const DEFAULT_NODE_BUDGET: usize = 10_000;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct DRat {
    r: Rat,
    d: Rat,
}

impl DRat {
    fn real(r: Rat) -> Self {
        DRat { r, d: Rat::zero() }
    }

    fn zero() -> Self {
        Self::real(Rat::zero())
    }

    fn add(&self, o: &DRat) -> DRat {
        DRat {
            r: &self.r + &o.r,
            d: &self.d + &o.d,
        }
    }

    fn sub(&self, o: &DRat) -> DRat {
        DRat {
            r: &self.r - &o.r,
            d: &self.d - &o.d,
        }
    }

    fn scale(&self, k: &Rat) -> DRat {
        DRat {
            r: &self.r * k,
            d: &self.d * k,
        }
    }
}

#[derive(Clone, Debug)]
struct Row {
    basic: usize,
    /// basic = sum(coeff * nonbasic)
    coeffs: BTreeMap<usize, Rat>,
}

#[derive(Clone, Debug)]
struct Tableau {
    n_orig: usize,
    lower: Vec<Option<DRat>>,
    upper: Vec<Option<DRat>>,
    value: Vec<DRat>,
    rows: Vec<Row>,
    row_of: Vec<Option<usize>>,
    conflict: bool,
}

impl Tableau {
    fn build(conj: &Conj, vars: &BTreeMap<Var, usize>) -> Tableau {
        let n_orig = vars.len();
        let mut t = Tableau {
            n_orig,
            lower: vec![None; n_orig],
            upper: vec![None; n_orig],
            value: vec![DRat::zero(); n_orig],
            rows: Vec::new(),
            row_of: vec![None; n_orig],
            conflict: false,
        };
        for c in conj.items() {
            if c.is_trivially_false() {
                t.conflict = true;
                return t;
            }
            t.add_constraint(c, vars);
        }
        t
    }

    fn add_constraint(&mut self, c: &LinConstraint, vars: &BTreeMap<Var, usize>) {
        let expr = c.expr();
        let rhs = -expr.constant_term().clone();
        let coeffs = expr.coeffs();
        if coeffs.len() == 1 {
            let (v, a) = coeffs.iter().next().unwrap();
            let idx = vars[v];
            let bound = &rhs / a;
            self.bound(idx, bound, c.rel(), a.is_positive());
            return;
        }
        let slack = self.lower.len();
        self.lower.push(None);
        self.upper.push(None);
        self.row_of.push(Some(self.rows.len()));
        let row: BTreeMap<usize, Rat> = coeffs.iter().map(|(v, a)| (vars[v], a.clone())).collect();
        let mut val = DRat::zero();
        for (j, a) in &row {
            val = val.add(&self.value[*j].scale(a));
        }
        self.value.push(val);
        self.rows.push(Row {
            basic: slack,
            coeffs: row,
        });
        self.bound(slack, rhs, c.rel(), true);
    }

    /// `x rel b` when `upper_side`, otherwise `x rel' b` with the relation
    /// reversed (the coefficient was negative).
    fn bound(&mut self, x: usize, b: Rat, rel: Rel, upper_side: bool) {
        match rel {
            Rel::Eq => {
                self.set_lower(x, DRat::real(b.clone()));
                self.set_upper(x, DRat::real(b));
            }
            Rel::Le if upper_side => self.set_upper(x, DRat::real(b)),
            Rel::Le => self.set_lower(x, DRat::real(b)),
            Rel::Lt if upper_side => self.set_upper(
                x,
                DRat {
                    r: b,
                    d: -Rat::one(),
                },
            ),
            Rel::Lt => self.set_lower(
                x,
                DRat {
                    r: b,
                    d: Rat::one(),
                },
            ),
        }
    }

    fn set_lower(&mut self, x: usize, b: DRat) {
        if self.lower[x].as_ref().is_some_and(|l| *l >= b) {
            return;
        }
        if self.upper[x].as_ref().is_some_and(|u| *u < b) {
            self.conflict = true;
        }
        self.lower[x] = Some(b.clone());
        if self.row_of[x].is_none() && self.value[x] < b {
            self.update_nonbasic(x, b);
        }
    }

    fn set_upper(&mut self, x: usize, b: DRat) {
        if self.upper[x].as_ref().is_some_and(|u| *u <= b) {
            return;
        }
        if self.lower[x].as_ref().is_some_and(|l| *l > b) {
            self.conflict = true;
        }
        self.upper[x] = Some(b.clone());
        if self.row_of[x].is_none() && self.value[x] > b {
            self.update_nonbasic(x, b);
        }
    }

    fn update_nonbasic(&mut self, x: usize, v: DRat) {
        let delta = v.sub(&self.value[x]);
        for row in &self.rows {
            if let Some(a) = row.coeffs.get(&x) {
                let nb = self.value[row.basic].add(&delta.scale(a));
                self.value[row.basic] = nb;
            }
        }
        self.value[x] = v;
    }

    fn below_lower(&self, x: usize) -> bool {
        self.lower[x].as_ref().is_some_and(|l| self.value[x] < *l)
    }

    fn above_upper(&self, x: usize) -> bool {
        self.upper[x].as_ref().is_some_and(|u| self.value[x] > *u)
    }

    fn can_increase(&self, x: usize) -> bool {
        self.upper[x].as_ref().is_none_or(|u| self.value[x] < *u)
    }

    fn can_decrease(&self, x: usize) -> bool {
        self.lower[x].as_ref().is_none_or(|l| self.value[x] > *l)
    }

    /// Restores feasibility of all basic variables, or reports infeasibility.
    fn check(&mut self) -> bool {
        if self.conflict {
            return false;
        }
        loop {
            let mut pick: Option<(usize, usize)> = None;
            for (ri, row) in self.rows.iter().enumerate() {
                let b = row.basic;
                if (self.below_lower(b) || self.above_upper(b)) && pick.is_none_or(|(pb, _)| b < pb)
                {
                    pick = Some((b, ri));
                }
            }
            let Some((b, ri)) = pick else {
                return true;
            };
            let raise = self.below_lower(b);
            let target = if raise {
                self.lower[b].clone().unwrap()
            } else {
                self.upper[b].clone().unwrap()
            };
            let entering = self.rows[ri].coeffs.iter().find_map(|(&j, a)| {
                let ok = if raise == a.is_positive() {
                    self.can_increase(j)
                } else {
                    self.can_decrease(j)
                };
                ok.then_some(j)
            });
            let Some(j) = entering else {
                return false;
            };
            self.pivot_and_update(ri, j, target);
        }
    }

    fn pivot_and_update(&mut self, ri: usize, j: usize, target: DRat) {
        let b = self.rows[ri].basic;
        let a = self.rows[ri].coeffs[&j].clone();
        let theta = target.sub(&self.value[b]).scale(&(Rat::one() / &a));
        self.value[b] = target;
        self.value[j] = self.value[j].add(&theta);
        for (k, row) in self.rows.iter().enumerate() {
            if k == ri {
                continue;
            }
            if let Some(c) = row.coeffs.get(&j) {
                let nb = self.value[row.basic].add(&theta.scale(c));
                self.value[row.basic] = nb;
            }
        }
        self.pivot(ri, j);
    }

    fn pivot(&mut self, ri: usize, j: usize) {
        let old = std::mem::replace(
            &mut self.rows[ri],
            Row {
                basic: j,
                coeffs: BTreeMap::new(),
            },
        );
        let a = &old.coeffs[&j];
        let inv = Rat::one() / a;
        let mut fresh = BTreeMap::new();
        fresh.insert(old.basic, inv.clone());
        for (l, c) in &old.coeffs {
            if *l != j {
                fresh.insert(*l, -(c * &inv));
            }
        }
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == ri {
                continue;
            }
            if let Some(c) = row.coeffs.remove(&j) {
                for (l, f) in &fresh {
                    let add = &c * f;
                    match row.coeffs.get_mut(l) {
                        Some(e) => {
                            *e += add;
                            if e.is_zero() {
                                row.coeffs.remove(l);
                            }
                        }
                        None => {
                            row.coeffs.insert(*l, add);
                        }
                    }
                }
            }
        }
        self.rows[ri].coeffs = fresh;
        self.row_of[old.basic] = None;
        self.row_of[j] = Some(ri);
    }

    /// A concrete rational assignment to the original variables, choosing
    /// `δ` small enough that every strict bound holds.
    fn concrete_values(&self) -> Vec<Rat> {
        let mut delta = Rat::one();
        let n = self.value.len();
        for x in 0..n {
            let v = &self.value[x];
            if let Some(l) = &self.lower[x] {
                // need l.r + l.d δ <= v.r + v.d δ
                if l.r < v.r && l.d > v.d {
                    let cand = (&v.r - &l.r) / (&l.d - &v.d);
                    if cand < delta {
                        delta = cand;
                    }
                }
            }
            if let Some(u) = &self.upper[x] {
                if v.r < u.r && v.d > u.d {
                    let cand = (&u.r - &v.r) / (&v.d - &u.d);
                    if cand < delta {
                        delta = cand;
                    }
                }
            }
        }
        // strictly inside: halve so strict inequalities stay strict
        delta /= Rat::from_integer(2.into());
        self.value[..self.n_orig]
            .iter()
            .map(|v| &v.r + &v.d * &delta)
            .collect()
    }
}

fn index_vars(conj: &Conj) -> BTreeMap<Var, usize> {
    conj.vars()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect()
}

fn solve_rational(conj: &Conj) -> Option<BTreeMap<Var, Rat>> {
    let vars = index_vars(conj);
    let mut t = Tableau::build(conj, &vars);
    if !t.check() {
        return None;
    }
    let values = t.concrete_values();
    Some(vars.into_iter().map(|(v, i)| (v, values[i].clone())).collect())
}

fn solve_integer(conj: &Conj, budget: usize) -> Result<Option<BTreeMap<Var, Rat>>, ConstraintError> {
    let tight = conj.tighten_integer();
    if tight.is_trivially_false() {
        return Ok(None);
    }
    let vars = index_vars(&tight);
    let t = Tableau::build(&tight, &vars);
    let mut nodes = 0usize;
    let found = branch_and_bound(t, &mut nodes, budget)?;
    Ok(found.map(|values| {
        vars.into_iter()
            .map(|(v, i)| (v, values[i].clone()))
            .collect()
    }))
}

fn branch_and_bound(
    mut t: Tableau,
    nodes: &mut usize,
    budget: usize,
) -> Result<Option<Vec<Rat>>, ConstraintError> {
    *nodes += 1;
    if *nodes > budget {
        return Err(ConstraintError::BudgetExhausted(budget));
    }
    if !t.check() {
        return Ok(None);
    }
    // all bounds are non-strict here, so every δ-part is zero
    let frac = (0..t.n_orig).find(|&i| !t.value[i].r.is_integer());
    let Some(i) = frac else {
        return Ok(Some(t.value[..t.n_orig].iter().map(|v| v.r.clone()).collect()));
    };
    let v = t.value[i].r.clone();
    let mut left = t.clone();
    left.set_upper(i, DRat::real(v.floor()));
    if let Some(sol) = branch_and_bound(left, nodes, budget)? {
        return Ok(Some(sol));
    }
    t.set_lower(i, DRat::real(v.ceil()));
    branch_and_bound(t, nodes, budget)
}

/// Satisfiability of a conjunction; integer mode uses the default budget.
pub fn is_sat(c: &Conj, mode: Mode) -> Result<bool, ConstraintError> {
    match mode {
        Mode::Rational => Ok(is_sat_rational(c)),
        Mode::Integer => is_sat_integer(c, DEFAULT_NODE_BUDGET),
    }
}

pub fn is_sat_rational(c: &Conj) -> bool {
    if c.is_empty() {
        return true;
    }
    if c.is_trivially_false() {
        return false;
    }
    let vars = index_vars(c);
    Tableau::build(c, &vars).check()
}

/// Integer satisfiability with an explicit branch-and-bound node budget.
pub fn is_sat_integer(c: &Conj, budget: usize) -> Result<bool, ConstraintError> {
    if !is_sat_rational(c) {
        return Ok(false);
    }
    Ok(solve_integer(c, budget)?.is_some())
}

/// A satisfying assignment, if any.
pub fn model(c: &Conj, mode: Mode) -> Result<Option<BTreeMap<Var, Rat>>, ConstraintError> {
    match mode {
        Mode::Rational => Ok(solve_rational(c)),
        Mode::Integer => solve_integer(c, DEFAULT_NODE_BUDGET),
    }
}

/// `c |= f` over the rationals.
pub fn entails(c: &Conj, f: &LinConstraint) -> bool {
    if f.is_trivially_true() {
        return true;
    }
    f.negate().into_iter().all(|g| {
        let mut q = c.clone();
        q.push(g);
        !is_sat_rational(&q)
    })
}

/// `c |= d` for every constraint of `d`.
pub fn entails_conj(c: &Conj, d: &Conj) -> bool {
    d.items().iter().all(|f| entails(c, f))
}

/// Mutual entailment.
pub fn equivalent(a: &Conj, b: &Conj) -> bool {
    entails_conj(a, b) && entails_conj(b, a)
}
