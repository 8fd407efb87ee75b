use std::fmt::Write;

use num_traits::{Signed, Zero};

use super::{Atom, ChcError, Program};
use crate::constraints::{LinConstraint, LinExpr, Rat, Rel, Var};

fn is_simple_symbol(s: &str) -> bool {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || EXTRA.contains(c) => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
}

pub(crate) fn symbol(s: &str) -> String {
    if is_simple_symbol(s) {
        s.to_string()
    } else {
        format!("|{s}|")
    }
}

fn int(r: &Rat) -> Result<String, ChcError> {
    if !r.is_integer() {
        return Err(ChcError::Unsupported(format!("non-integer coefficient {r}")));
    }
    Ok(if r.is_negative() {
        format!("(- {})", r.numer().abs())
    } else {
        r.numer().to_string()
    })
}

fn expr(e: &LinExpr) -> Result<String, ChcError> {
    let mut parts = Vec::new();
    for (v, c) in e.coeffs() {
        if *c == Rat::from_integer(1.into()) {
            parts.push(symbol(v.name()));
        } else {
            parts.push(format!("(* {} {})", int(c)?, symbol(v.name())));
        }
    }
    if !e.constant_term().is_zero() || parts.is_empty() {
        parts.push(int(e.constant_term())?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    })
}

fn constraint(c: &LinConstraint) -> Result<String, ChcError> {
    let op = match c.rel() {
        Rel::Eq => "=",
        Rel::Le => "<=",
        Rel::Lt => "<",
    };
    Ok(format!("({op} {} 0)", expr(c.expr())?))
}

fn atom(a: &Atom) -> Result<String, ChcError> {
    if a.args.is_empty() {
        return Ok(symbol(&a.pred));
    }
    let args: Result<Vec<_>, _> = a.args.iter().map(expr).collect();
    Ok(format!("({} {})", symbol(&a.pred), args?.join(" ")))
}

/// SMT-LIB2 script in the HORN logic. Heads of `false` and its versions
/// become `false`.
pub fn export_smtlib_horn(p: &Program) -> Result<String, ChcError> {
    let mut out = String::from("(set-logic HORN)\n");
    for (pred, &n) in p.arities() {
        if super::is_false_pred(pred) {
            continue;
        }
        let sorts = vec!["Int"; n].join(" ");
        writeln!(out, "(declare-fun {} ({sorts}) Bool)", symbol(pred)).unwrap();
    }
    for c in p.clauses() {
        let mut premises = Vec::new();
        for con in c.constraint.items() {
            premises.push(constraint(con)?);
        }
        for a in &c.body {
            premises.push(atom(a)?);
        }
        let premise = match premises.len() {
            0 => "true".to_string(),
            1 => premises.pop().unwrap(),
            _ => format!("(and {})", premises.join(" ")),
        };
        let head = if c.is_integrity() {
            "false".to_string()
        } else {
            atom(&c.head)?
        };
        let body = format!("(=> {premise} {head})");
        let vars: Vec<Var> = c.vars().into_iter().collect();
        if vars.is_empty() {
            writeln!(out, "(assert {body})").unwrap();
        } else {
            let binders: Vec<String> = vars
                .iter()
                .map(|v| format!("({} Int)", symbol(v.name())))
                .collect();
            writeln!(out, "(assert (forall ({}) {body}))", binders.join(" ")).unwrap();
        }
    }
    out.push_str("(check-sat)\n");
    Ok(out)
}
