use std::time::Instant;

use super::{OracleConfig, SafeResult};
use crate::chc::Program;
use crate::derivations::{enumerate, EnumOptions, Root};

/// Searches false-rooted trees up to the node budget, smallest first, for a
/// feasible one. Never proves safety.
pub fn safe_bounded(p: &Program, cfg: &OracleConfig) -> SafeResult {
    let opts = EnumOptions::new(cfg.node_budget)
        .feasible()
        .with_deadline(Instant::now() + cfg.timeout);
    let mut trees = enumerate(p, Root::False, opts);
    if let Some(t) = trees.next() {
        return SafeResult::unsafe_(t);
    }
    let mut r = SafeResult::unknown();
    if trees.timed_out {
        r = r.note("bounded search timed out");
    }
    if trees.undecided > 0 {
        r = r.note(format!(
            "{} trees left undecided by the integer budget",
            trees.undecided
        ));
    }
    r
}
