use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use super::{Atom, Clause, Program};
use crate::constraints::linear::is_source_var_name;
use crate::constraints::Var;

pub(crate) fn fmt_atom(
    f: &mut fmt::Formatter<'_>,
    atom: &Atom,
    names: &dyn Fn(&Var) -> String,
) -> fmt::Result {
    f.write_str(&atom.pred)?;
    if atom.args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in atom.args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        a.fmt_with(f, names)?;
    }
    f.write_str(")")
}

/// Printable names for a clause's variables. Names that are legal in the
/// concrete syntax are kept; generated names are replaced by the first
/// unused name derived from their hint, or `A`..`Z`, `A1`.. otherwise.
pub(crate) fn clause_names(c: &Clause) -> BTreeMap<Var, String> {
    let vars = c.vars();
    let mut used: BTreeSet<String> = vars
        .iter()
        .filter(|v| v.is_source_name())
        .map(|v| v.name().to_string())
        .collect();
    let mut out = BTreeMap::new();
    for v in &vars {
        if v.is_source_name() {
            out.insert(v.clone(), v.name().to_string());
            continue;
        }
        let hint = v.name().split('#').next().unwrap_or("");
        let name = if is_source_var_name(hint) {
            std::iter::once(hint.to_string())
                .chain((1..).map(|i| format!("{hint}{i}")))
                .find(|n| !used.contains(n))
                .unwrap()
        } else {
            (0..)
                .flat_map(|round: usize| {
                    ('A'..='Z').map(move |ch| {
                        if round == 0 {
                            ch.to_string()
                        } else {
                            format!("{ch}{round}")
                        }
                    })
                })
                .find(|n| !used.contains(n))
                .unwrap()
        };
        used.insert(name.clone());
        out.insert(v.clone(), name);
    }
    out
}

struct ClauseDisplay<'a>(&'a Clause);

impl fmt::Display for ClauseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.0;
        let map = clause_names(c);
        let names = |v: &Var| map.get(v).cloned().unwrap_or_else(|| v.to_string());
        if super::parser::is_label(&c.id) {
            write!(f, "{}. ", c.id)?;
        }
        fmt_atom(f, &c.head, &names)?;
        if c.constraint.is_empty() && c.body.is_empty() {
            return f.write_str(".");
        }
        f.write_str(" :- ")?;
        let mut first = true;
        for con in c.constraint.items() {
            if !first {
                f.write_str(", ")?;
            }
            con.fmt_with(f, &names)?;
            first = false;
        }
        for a in &c.body {
            if !first {
                f.write_str(", ")?;
            }
            fmt_atom(f, a, &names)?;
            first = false;
        }
        f.write_str(".")
    }
}

pub fn print_clause(c: &Clause) -> String {
    ClauseDisplay(c).to_string()
}

/// One clause per line, labelled with its id.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for c in p.clauses() {
        writeln!(out, "{}", ClauseDisplay(c)).unwrap();
    }
    out
}
