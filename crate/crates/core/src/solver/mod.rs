//! Safety oracles and the dimension-driven verification algorithms built
//! on top of them.

mod algorithms;
mod bounded;
mod external;
mod polyhedra;
mod sexp;

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use crate::chc::{model_check, ChcError, Interpretation, Program};
use crate::derivations::{feasible, TraceTree};

pub use algorithms::{lift, restrict, solve_inc, solve_partition, subst};
pub use bounded::safe_bounded;
pub use external::{parse_model, safe_external, SOLVER_ENV};
pub use polyhedra::{analyze, safe_polyhedra};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Safe,
    Unsafe,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Safe => "safe",
            Status::Unsafe => "unsafe",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Witness {
    None,
    Trace(TraceTree),
    Model(Interpretation),
    /// Models of the dimension-bounded parts, kept when their lift is not a
    /// model of the original program.
    PartModels(Vec<Interpretation>),
}

#[derive(Clone, Debug)]
pub struct SafeResult {
    pub status: Status,
    pub witness: Witness,
    /// Dimension bound at which the verdict was reached, if any.
    pub dimension: Option<u32>,
    pub notes: Vec<String>,
}

impl SafeResult {
    pub fn safe(model: Interpretation) -> Self {
        SafeResult {
            status: Status::Safe,
            witness: Witness::Model(model),
            dimension: None,
            notes: Vec::new(),
        }
    }

    pub fn unsafe_(trace: TraceTree) -> Self {
        SafeResult {
            status: Status::Unsafe,
            witness: Witness::Trace(trace),
            dimension: None,
            notes: Vec::new(),
        }
    }

    pub fn unknown() -> Self {
        SafeResult {
            status: Status::Unknown,
            witness: Witness::None,
            dimension: None,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, msg: impl Into<String>) -> Self {
        self.notes.push(msg.into());
        self
    }

    pub fn at_dimension(mut self, k: u32) -> Self {
        self.dimension = Some(k);
        self
    }

    pub fn trace(&self) -> Option<&TraceTree> {
        match &self.witness {
            Witness::Trace(t) => Some(t),
            _ => None,
        }
    }

    pub fn model(&self) -> Option<&Interpretation> {
        match &self.witness {
            Witness::Model(m) => Some(m),
            _ => None,
        }
    }

    pub fn witness_json(&self) -> Value {
        let facts = |i: &Interpretation| -> Value {
            i.facts().map(|f| Value::String(f.to_string())).collect()
        };
        match &self.witness {
            Witness::None => Value::Null,
            Witness::Trace(t) => json!({ "trace": t.to_string() }),
            Witness::Model(m) => json!({ "model": facts(m) }),
            Witness::PartModels(ms) => {
                json!({ "part_models": ms.iter().map(facts).collect::<Vec<_>>() })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Bounded,
    Polyhedra,
    External,
    Portfolio,
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub timeout: Duration,
    /// Largest trace tree, in nodes, the bounded oracle explores.
    pub node_budget: usize,
    pub widening_delay: usize,
    pub external_command: Option<String>,
    /// Largest dimension bound the algorithms try.
    pub recursion_cap: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Portfolio,
            timeout: Duration::from_secs(30),
            node_budget: 10,
            widening_delay: 2,
            external_command: None,
            recursion_cap: 5,
        }
    }
}

impl OracleConfig {
    pub fn with_kind(kind: OracleKind) -> Self {
        OracleConfig {
            kind,
            ..Default::default()
        }
    }

    /// The external command, with the environment taking precedence.
    pub fn command(&self) -> Option<String> {
        std::env::var(SOLVER_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .or_else(|| self.external_command.clone())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Chc(#[from] ChcError),
    #[error("no external solver configured (set {SOLVER_ENV})")]
    NoCommand,
    #[error("cannot run external solver: {0}")]
    Spawn(String),
    #[error("malformed solver output: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) struct Deadline(Instant);

impl Deadline {
    pub(crate) fn after(d: Duration) -> Self {
        Deadline(Instant::now() + d)
    }

    pub(crate) fn passed(&self) -> bool {
        Instant::now() >= self.0
    }

    pub(crate) fn remaining(&self) -> Duration {
        self.0.saturating_duration_since(Instant::now())
    }
}

/// Demotes any verdict whose witness does not check to unknown.
pub fn check_witness(p: &Program, r: SafeResult) -> SafeResult {
    let verdict = match (&r.status, &r.witness) {
        (Status::Safe, Witness::Model(m)) => match model_check(p, m) {
            Ok(mc) if mc.ok => Ok(()),
            Ok(mc) => Err(format!("model violates {}", mc.violated.join(", "))),
            Err(e) => Err(format!("model check failed: {e}")),
        },
        (Status::Unsafe, Witness::Trace(t)) => {
            let rooted = p
                .clause(&t.id)
                .is_some_and(|c| c.is_integrity());
            match feasible(p, t) {
                Ok(true) if rooted => Ok(()),
                Ok(true) => Err(format!("trace {t} is not rooted at false")),
                Ok(false) => Err(format!("trace {t} is infeasible")),
                Err(e) => Err(format!("trace {t}: {e}")),
            }
        }
        (Status::Unknown, _) => Ok(()),
        _ => Err("verdict without a witness".to_string()),
    };
    match verdict {
        Ok(()) => r,
        Err(msg) => {
            let mut u = SafeResult::unknown().note(format!("rejected {} verdict: {msg}", r.status));
            u.notes.extend(r.notes);
            u
        }
    }
}

/// Runs the configured oracle on `p`, with witness checking.
pub fn run_oracle(p: &Program, cfg: &OracleConfig) -> Result<SafeResult, SolverError> {
    let r = match cfg.kind {
        OracleKind::Bounded => safe_bounded(p, cfg),
        OracleKind::Polyhedra => safe_polyhedra(p, cfg),
        OracleKind::External => safe_external(p, cfg)?,
        OracleKind::Portfolio => {
            let mut notes = Vec::new();
            let mut out = None;
            for kind in [OracleKind::Polyhedra, OracleKind::Bounded, OracleKind::External] {
                let r = match kind {
                    OracleKind::Polyhedra => safe_polyhedra(p, cfg),
                    OracleKind::Bounded => safe_bounded(p, cfg),
                    _ => {
                        if cfg.command().is_none() {
                            continue;
                        }
                        match safe_external(p, cfg) {
                            Ok(r) => r,
                            Err(e) => SafeResult::unknown().note(e.to_string()),
                        }
                    }
                };
                let r = check_witness(p, r);
                notes.extend(r.notes.iter().cloned());
                if r.status != Status::Unknown {
                    out = Some(r);
                    break;
                }
            }
            let mut r = out.unwrap_or_else(SafeResult::unknown);
            r.notes = notes;
            r
        }
    };
    Ok(check_witness(p, r))
}
