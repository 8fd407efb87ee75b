//! Linear expressions and constraints over rational-valued variables.
//!
//! Every [`LinConstraint`] is stored as `expr rel 0` with `rel` one of `=`,
//! `<=`, `<`. Coefficients are scaled to coprime integers so that two
//! syntactically different but proportional constraints compare equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number.
pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A variable name. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Whether the name is a legal variable in the concrete clause syntax.
    pub fn is_source_name(&self) -> bool {
        is_source_var_name(&self.0)
    }
}

pub(crate) fn is_source_var_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() || c == '_' => {}
        _ => return false,
    }
    s != "_" && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Generator of variable names that cannot clash with names from source text
/// (they contain `#`, which the parser never accepts).
#[derive(Debug, Default, Clone)]
pub struct Fresh {
    next: usize,
}

impl Fresh {
    pub fn new() -> Self {
        Fresh { next: 0 }
    }

    pub fn var(&mut self, hint: &str) -> Var {
        self.next += 1;
        Var::new(format!("{hint}#{}", self.next))
    }
}

/// `sum(coeff * var) + constant` in canonical form: no zero coefficients,
/// variables ordered by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinExpr {
    coeffs: BTreeMap<Var, Rat>,
    constant: Rat,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: Rat) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rat(n))
    }

    pub fn var(v: Var) -> Self {
        Self::term(Rat::one(), v)
    }

    pub fn term(coeff: Rat, v: Var) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(coeff, v);
        e
    }

    pub fn from_terms<I: IntoIterator<Item = (Rat, Var)>>(terms: I, constant: Rat) -> Self {
        let mut e = LinExpr::constant(constant);
        for (c, v) in terms {
            e.add_term(c, v);
        }
        e
    }

    pub fn add_term(&mut self, coeff: Rat, v: Var) {
        if coeff.is_zero() {
            return;
        }
        match self.coeffs.get_mut(&v) {
            Some(c) => {
                *c += coeff;
                if c.is_zero() {
                    self.coeffs.remove(&v);
                }
            }
            None => {
                self.coeffs.insert(v, coeff);
            }
        }
    }

    pub fn add_constant(&mut self, c: &Rat) {
        self.constant += c;
    }

    pub fn coeffs(&self) -> &BTreeMap<Var, Rat> {
        &self.coeffs
    }

    pub fn coeff(&self, v: &Var) -> Rat {
        self.coeffs.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn constant_term(&self) -> &Rat {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    /// The variable if the expression is exactly `1 * v`.
    pub fn as_var(&self) -> Option<&Var> {
        if self.constant.is_zero() && self.coeffs.len() == 1 {
            let (v, c) = self.coeffs.iter().next().unwrap();
            if c.is_one() {
                return Some(v);
            }
        }
        None
    }

    pub fn scale(&self, k: &Rat) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self
                .coeffs
                .iter()
                .map(|(v, c)| (v.clone(), c * k))
                .collect(),
            constant: &self.constant * k,
        }
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match map.get(v) {
                Some(e) => out = out + e.scale(c),
                None => out.add_term(c.clone(), v.clone()),
            }
        }
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            let v = map.get(v).cloned().unwrap_or_else(|| v.clone());
            out.add_term(c.clone(), v);
        }
        out
    }

    /// Evaluates the expression; unassigned variables are an error (`None`).
    pub fn eval(&self, point: &BTreeMap<Var, Rat>) -> Option<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * point.get(v)?;
        }
        Some(acc)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.constant += rhs.constant;
        for (v, c) in rhs.coeffs {
            self.add_term(c, v);
        }
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + (-rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        LinExpr {
            coeffs: self.coeffs.into_iter().map(|(v, c)| (v, -c)).collect(),
            constant: -self.constant,
        }
    }
}

impl Mul<&Rat> for LinExpr {
    type Output = LinExpr;
    fn mul(self, k: &Rat) -> LinExpr {
        self.scale(k)
    }
}

fn write_rat(f: &mut fmt::Formatter<'_>, r: &Rat) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

/// Writes `sum(coeff*var)` followed by `constant` (if nonzero or alone).
fn write_terms(
    f: &mut fmt::Formatter<'_>,
    coeffs: &BTreeMap<Var, Rat>,
    constant: &Rat,
    names: &dyn Fn(&Var) -> String,
) -> fmt::Result {
    let mut first = true;
    for (v, c) in coeffs {
        let abs = c.abs();
        if c.is_negative() {
            f.write_str("-")?;
        } else if !first {
            f.write_str("+")?;
        }
        if !abs.is_one() {
            write_rat(f, &abs)?;
            f.write_str("*")?;
        }
        f.write_str(&names(v))?;
        first = false;
    }
    if first {
        write_rat(f, constant)?;
    } else if !constant.is_zero() {
        if constant.is_negative() {
            f.write_str("-")?;
        } else {
            f.write_str("+")?;
        }
        write_rat(f, &constant.abs())?;
    }
    Ok(())
}

impl LinExpr {
    pub(crate) fn fmt_with(
        &self,
        f: &mut fmt::Formatter<'_>,
        names: &dyn Fn(&Var) -> String,
    ) -> fmt::Result {
        write_terms(f, &self.coeffs, &self.constant, names)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &|v| v.to_string())
    }
}

impl fmt::Debug for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Rel {
    Eq,
    Le,
    Lt,
}

/// `expr rel 0`, canonical.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinConstraint {
    expr: LinExpr,
    rel: Rel,
}

impl LinConstraint {
    pub fn new(expr: LinExpr, rel: Rel) -> Self {
        canonicalize(expr, rel)
    }

    /// `lhs = rhs`
    pub fn eq(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs - rhs, Rel::Eq)
    }

    /// `lhs <= rhs`
    pub fn le(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs - rhs, Rel::Le)
    }

    /// `lhs < rhs`
    pub fn lt(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs - rhs, Rel::Lt)
    }

    /// `lhs >= rhs`
    pub fn ge(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::le(rhs, lhs)
    }

    /// `lhs > rhs`
    pub fn gt(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::lt(rhs, lhs)
    }

    pub fn truth() -> Self {
        LinConstraint {
            expr: LinExpr::zero(),
            rel: Rel::Le,
        }
    }

    pub fn falsity() -> Self {
        LinConstraint {
            expr: LinExpr::int(1),
            rel: Rel::Le,
        }
    }

    pub fn expr(&self) -> &LinExpr {
        &self.expr
    }

    pub fn rel(&self) -> Rel {
        self.rel
    }

    pub fn is_strict(&self) -> bool {
        self.rel == Rel::Lt
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.expr.vars()
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.expr.coeffs.contains_key(v)
    }

    pub fn is_trivially_true(&self) -> bool {
        self.expr.is_constant() && holds(self.rel, &self.expr.constant)
    }

    pub fn is_trivially_false(&self) -> bool {
        self.expr.is_constant() && !holds(self.rel, &self.expr.constant)
    }

    /// Negation as a disjunction of constraints (one disjunct, or two for `=`).
    pub fn negate(&self) -> Vec<LinConstraint> {
        match self.rel {
            // not (e <= 0)  <=>  -e < 0
            Rel::Le => vec![LinConstraint::new(-self.expr.clone(), Rel::Lt)],
            // not (e < 0)  <=>  -e <= 0
            Rel::Lt => vec![LinConstraint::new(-self.expr.clone(), Rel::Le)],
            Rel::Eq => vec![
                LinConstraint::new(self.expr.clone(), Rel::Lt),
                LinConstraint::new(-self.expr.clone(), Rel::Lt),
            ],
        }
    }

    /// Splits `e = 0` into `e <= 0, -e <= 0`; other relations are returned as is.
    pub fn halves(&self) -> Vec<LinConstraint> {
        match self.rel {
            Rel::Eq => vec![
                LinConstraint::new(self.expr.clone(), Rel::Le),
                LinConstraint::new(-self.expr.clone(), Rel::Le),
            ],
            _ => vec![self.clone()],
        }
    }

    /// Integer tightening: over integer points, `e < 0` is `e + 1 <= 0`, and
    /// constants of non-strict constraints round to the nearest integer that
    /// keeps the same integer solutions. Canonical coefficients are coprime
    /// integers, so `sum(a*x)` ranges over all integers.
    pub fn tighten_integer(&self) -> LinConstraint {
        if self.expr.is_constant() {
            return if self.is_trivially_true() {
                Self::truth()
            } else {
                Self::falsity()
            };
        }
        let c = &self.expr.constant;
        let mut expr = self.expr.clone();
        match self.rel {
            Rel::Le => {
                // a.x <= -c  ->  a.x <= floor(-c)
                expr.constant = -((-c).floor());
                LinConstraint { expr, rel: Rel::Le }
            }
            Rel::Lt => {
                // a.x < -c  ->  a.x <= ceil(-c) - 1
                expr.constant = -((-c).ceil() - Rat::one());
                LinConstraint { expr, rel: Rel::Le }
            }
            Rel::Eq => {
                if c.is_integer() {
                    self.clone()
                } else {
                    Self::falsity()
                }
            }
        }
    }

    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr>) -> LinConstraint {
        LinConstraint::new(self.expr.substitute(map), self.rel)
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> LinConstraint {
        LinConstraint::new(self.expr.rename(map), self.rel)
    }

    pub fn holds_at(&self, point: &BTreeMap<Var, Rat>) -> Option<bool> {
        Some(holds(self.rel, &self.expr.eval(point)?))
    }

    pub(crate) fn fmt_with(
        &self,
        f: &mut fmt::Formatter<'_>,
        names: &dyn Fn(&Var) -> String,
    ) -> fmt::Result {
        // Print as `terms rel constant`, scaled so every number is an integer.
        let mut expr = self.expr.clone();
        let den = expr.constant.denom().clone();
        if !den.is_one() {
            expr = expr.scale(&Rat::from_integer(den));
        }
        let mut rel = match self.rel {
            Rel::Eq => "=",
            Rel::Le => "=<",
            Rel::Lt => "<",
        };
        let leading_negative = expr
            .coeffs
            .values()
            .next()
            .map(|c| c.is_negative())
            .unwrap_or(false);
        if leading_negative && self.rel != Rel::Eq {
            expr = -expr;
            rel = match self.rel {
                Rel::Le => ">=",
                Rel::Lt => ">",
                Rel::Eq => unreachable!(),
            };
        }
        let rhs = -expr.constant.clone();
        write_terms(f, &expr.coeffs, &Rat::zero(), names)?;
        f.write_str(rel)?;
        write_rat(f, &rhs)
    }
}

fn holds(rel: Rel, c: &Rat) -> bool {
    match rel {
        Rel::Eq => c.is_zero(),
        Rel::Le => !c.is_positive(),
        Rel::Lt => c.is_negative(),
    }
}

fn canonicalize(mut expr: LinExpr, rel: Rel) -> LinConstraint {
    if expr.is_constant() {
        return if holds(rel, &expr.constant) {
            LinConstraint::truth()
        } else {
            LinConstraint::falsity()
        };
    }
    // Clear denominators of the coefficients, then divide by their gcd.
    let mut lcm = BigInt::one();
    for c in expr.coeffs.values() {
        lcm = lcm.lcm(c.denom());
    }
    let mut gcd = BigInt::zero();
    for c in expr.coeffs.values() {
        let n = (c * Rat::from_integer(lcm.clone())).to_integer();
        gcd = gcd.gcd(&n);
    }
    let mut factor = Rat::new(lcm, gcd);
    if rel == Rel::Eq && expr.coeffs.values().next().unwrap().is_negative() {
        factor = -factor;
    }
    if !factor.is_one() {
        expr = expr.scale(&factor);
    }
    LinConstraint { expr, rel }
}

impl fmt::Display for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &|v| v.to_string())
    }
}

impl fmt::Debug for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A conjunction of linear constraints, sorted and duplicate-free. A
/// conjunction containing an unsatisfiable ground constraint collapses to
/// the single constraint `1 =< 0`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Conj {
    items: Vec<LinConstraint>,
}

impl Conj {
    pub fn top() -> Self {
        Conj::default()
    }

    pub fn bottom() -> Self {
        Conj {
            items: vec![LinConstraint::falsity()],
        }
    }

    pub fn new<I: IntoIterator<Item = LinConstraint>>(items: I) -> Self {
        let mut c = Conj::top();
        c.extend(items);
        c
    }

    pub fn singleton(c: LinConstraint) -> Self {
        Self::new([c])
    }

    pub fn push(&mut self, c: LinConstraint) {
        self.extend([c]);
    }

    pub fn extend<I: IntoIterator<Item = LinConstraint>>(&mut self, items: I) {
        if self.is_trivially_false() {
            return;
        }
        for c in items {
            if c.is_trivially_true() {
                continue;
            }
            if c.is_trivially_false() {
                *self = Conj::bottom();
                return;
            }
            if let Err(pos) = self.items.binary_search(&c) {
                self.items.insert(pos, c);
            }
        }
    }

    pub fn and(&self, other: &Conj) -> Conj {
        let mut c = self.clone();
        c.extend(other.items.iter().cloned());
        c
    }

    pub fn items(&self) -> &[LinConstraint] {
        &self.items
    }

    pub fn into_items(self) -> Vec<LinConstraint> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// The empty conjunction (`true`).
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_trivially_false(&self) -> bool {
        self.items.len() == 1 && self.items[0].is_trivially_false()
    }

    pub fn has_strict(&self) -> bool {
        self.items.iter().any(|c| c.is_strict())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.items
            .iter()
            .flat_map(|c| c.vars().cloned())
            .collect()
    }

    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr>) -> Conj {
        Conj::new(self.items.iter().map(|c| c.substitute(map)))
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Conj {
        Conj::new(self.items.iter().map(|c| c.rename(map)))
    }

    pub fn tighten_integer(&self) -> Conj {
        Conj::new(self.items.iter().map(|c| c.tighten_integer()))
    }

    /// Whether the point satisfies every constraint (`None` if a variable is
    /// unassigned).
    pub fn holds_at(&self, point: &BTreeMap<Var, Rat>) -> Option<bool> {
        for c in &self.items {
            if !c.holds_at(point)? {
                return Some(false);
            }
        }
        Some(true)
    }

    pub(crate) fn fmt_with(
        &self,
        f: &mut fmt::Formatter<'_>,
        names: &dyn Fn(&Var) -> String,
    ) -> fmt::Result {
        if self.items.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            c.fmt_with(f, names)?;
        }
        Ok(())
    }
}

impl FromIterator<LinConstraint> for Conj {
    fn from_iter<T: IntoIterator<Item = LinConstraint>>(iter: T) -> Self {
        Conj::new(iter)
    }
}

impl fmt::Display for Conj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &|v| v.to_string())
    }
}

impl fmt::Debug for Conj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}
