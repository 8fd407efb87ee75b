use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use num_traits::{One, Zero};

use super::sexp::{parse_all, Sexp};
use super::{bounded::safe_bounded, Deadline, OracleConfig, SafeResult, SolverError, Status};
use crate::chc::{export_smtlib_horn, ConstrainedFact, Interpretation, Program};
use crate::constraints::{Conj, LinConstraint, LinExpr, Rat, Var};

/// Environment variable naming the external solver command.
pub const SOLVER_ENV: &str = "HORNDIM_SOLVER";

const MAX_DISJUNCTS: usize = 64;

/// Writes the program as SMT-LIB to a temporary file and runs
/// `<command> <file>`, reading `sat`, `unsat` or `unknown` from the first
/// output line.
pub fn safe_external(p: &Program, cfg: &OracleConfig) -> Result<SafeResult, SolverError> {
    let cmd = cfg.command().ok_or(SolverError::NoCommand)?;
    let deadline = Deadline::after(cfg.timeout);
    let mut script = export_smtlib_horn(p)?;
    script.push_str("(get-model)\n");
    let mut file = tempfile::Builder::new()
        .prefix("horndim")
        .suffix(".smt2")
        .tempfile()?;
    file.write_all(script.as_bytes())?;
    file.flush()?;

    let mut parts = cmd.split_whitespace();
    let prog = parts.next().ok_or(SolverError::NoCommand)?;
    let mut child = Command::new(prog)
        .args(parts)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SolverError::Spawn(format!("{prog}: {e}")))?;
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if deadline.passed() {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(SafeResult::unknown().note("external solver timed out"));
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let out = reader.join().unwrap_or_default();
    let mut lines = out.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().unwrap_or("").trim();
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    match first {
        "sat" => Ok(match parse_model(p, &rest) {
            Some(m) => SafeResult::safe(m),
            None => SafeResult::unknown().note("external solver reported sat without a usable model"),
        }),
        "unsat" => {
            let mut bcfg = cfg.clone();
            bcfg.timeout = deadline.remaining().max(Duration::from_millis(1));
            let r = safe_bounded(p, &bcfg);
            Ok(if r.status == Status::Unsafe {
                r
            } else {
                r.note("external solver reported unsat; no counterexample within the node budget")
            })
        }
        "unknown" | "timeout" => Ok(SafeResult::unknown().note("external solver returned unknown")),
        other => Err(SolverError::Malformed(other.chars().take(80).collect())),
    }
}

/// Reads `define-fun` entries for the program's predicates from a solver
/// model. Predicates the model does not mention are taken as false.
/// `None` if some definition uses unsupported syntax.
pub fn parse_model(p: &Program, text: &str) -> Option<Interpretation> {
    let sexps = parse_all(text).ok()?;
    let mut defs: BTreeMap<String, (Vec<String>, Sexp)> = BTreeMap::new();
    fn collect(s: &Sexp, defs: &mut BTreeMap<String, (Vec<String>, Sexp)>) {
        let Some(l) = s.list() else { return };
        if l.len() == 5 && l[0].atom() == Some("define-fun") {
            if let (Some(name), Some(params)) = (l[1].atom(), l[2].list()) {
                let names = params
                    .iter()
                    .filter_map(|p| p.list().and_then(|q| q.first()).and_then(Sexp::atom))
                    .map(str::to_string)
                    .collect();
                defs.insert(name.to_string(), (names, l[4].clone()));
            }
            return;
        }
        for x in l {
            collect(x, defs);
        }
    }
    for s in &sexps {
        collect(s, &mut defs);
    }
    let mut facts = Vec::new();
    for q in p.user_predicates() {
        let n = p.arity(q).unwrap_or(0);
        let vars: Vec<Var> = (1..=n).map(|i| Var::new(format!("A{i}"))).collect();
        match defs.get(q) {
            None => facts.push(ConstrainedFact::disjunctive(q, vars, Vec::new())),
            Some((params, body)) => {
                if params.len() != n {
                    return None;
                }
                let env: BTreeMap<String, Sexp> = params
                    .iter()
                    .zip(&vars)
                    .map(|(p, v)| (p.clone(), Sexp::Atom(v.name().to_string())))
                    .collect();
                let body = substitute(body, &env);
                let ds = dnf(&body, false)?;
                facts.push(ConstrainedFact::disjunctive(q, vars, ds));
            }
        }
    }
    Some(Interpretation::from_facts(facts))
}

/// Replaces bound names and expands `let`.
fn substitute(s: &Sexp, env: &BTreeMap<String, Sexp>) -> Sexp {
    match s {
        Sexp::Atom(a) => env.get(a).cloned().unwrap_or_else(|| s.clone()),
        Sexp::List(l) => {
            if l.len() == 3 && l[0].atom() == Some("let") {
                if let Some(binds) = l[1].list() {
                    let mut inner = env.clone();
                    for b in binds {
                        if let Some([Sexp::Atom(x), e]) = b.list() {
                            inner.insert(x.clone(), substitute(e, env));
                        }
                    }
                    return substitute(&l[2], &inner);
                }
            }
            Sexp::List(l.iter().map(|x| substitute(x, env)).collect())
        }
    }
}

fn product(a: Vec<Conj>, b: Vec<Conj>) -> Option<Vec<Conj>> {
    let mut out = Vec::new();
    for x in &a {
        for y in &b {
            out.push(x.and(y));
            if out.len() > MAX_DISJUNCTS {
                return None;
            }
        }
    }
    Some(out)
}

/// Disjunctive normal form of a formula, negated if `neg`.
fn dnf(s: &Sexp, neg: bool) -> Option<Vec<Conj>> {
    let top = || vec![Conj::top()];
    match s {
        Sexp::Atom(a) => match (a.as_str(), neg) {
            ("true", false) | ("false", true) => Some(top()),
            ("true", true) | ("false", false) => Some(Vec::new()),
            _ => None,
        },
        Sexp::List(l) => {
            let (head, args) = l.split_first()?;
            let op = head.atom()?;
            match op {
                "not" if args.len() == 1 => dnf(&args[0], !neg),
                "and" | "or" => {
                    let conj = (op == "and") != neg;
                    if conj {
                        let mut acc = top();
                        for a in args {
                            acc = product(acc, dnf(a, neg)?)?;
                        }
                        Some(acc)
                    } else {
                        let mut acc = Vec::new();
                        for a in args {
                            acc.extend(dnf(a, neg)?);
                        }
                        (acc.len() <= MAX_DISJUNCTS).then_some(acc)
                    }
                }
                "=>" if args.len() == 2 => {
                    let rewritten = Sexp::List(vec![
                        Sexp::Atom("or".into()),
                        Sexp::List(vec![Sexp::Atom("not".into()), args[0].clone()]),
                        args[1].clone(),
                    ]);
                    dnf(&rewritten, neg)
                }
                "<=" | "<" | ">=" | ">" | "=" if args.len() == 2 => {
                    let a = term(&args[0])?;
                    let b = term(&args[1])?;
                    let c = match op {
                        "<=" => LinConstraint::le(a, b),
                        "<" => LinConstraint::lt(a, b),
                        ">=" => LinConstraint::ge(a, b),
                        ">" => LinConstraint::gt(a, b),
                        _ => LinConstraint::eq(a, b),
                    };
                    Some(if neg {
                        c.negate().into_iter().map(Conj::singleton).collect()
                    } else {
                        vec![Conj::singleton(c)]
                    })
                }
                _ => None,
            }
        }
    }
}

fn term(s: &Sexp) -> Option<LinExpr> {
    match s {
        Sexp::Atom(a) => {
            if let Ok(n) = a.parse::<num_bigint::BigInt>() {
                return Some(LinExpr::constant(Rat::from_integer(n)));
            }
            if a.starts_with(|c: char| c.is_ascii_digit()) {
                return None;
            }
            Some(LinExpr::var(Var::new(a)))
        }
        Sexp::List(l) => {
            let (head, args) = l.split_first()?;
            let ts: Vec<LinExpr> = args.iter().map(term).collect::<Option<_>>()?;
            match (head.atom()?, ts.as_slice()) {
                ("+", _) => Some(ts.into_iter().fold(LinExpr::zero(), |a, b| a + b)),
                ("-", [x]) => Some(-x.clone()),
                ("-", [x, rest @ ..]) => Some(rest.iter().fold(x.clone(), |a, b| a - b.clone())),
                ("*", _) => {
                    let mut acc = LinExpr::constant(Rat::one());
                    for t in ts {
                        acc = if acc.is_constant() {
                            t.scale(acc.constant_term())
                        } else if t.is_constant() {
                            acc.scale(t.constant_term())
                        } else {
                            return None;
                        };
                    }
                    Some(acc)
                }
                ("/", [x, y]) if y.is_constant() && !y.constant_term().is_zero() => {
                    Some(x.scale(&(Rat::one() / y.constant_term())))
                }
                _ => None,
            }
        }
    }
}
