use crate::chc::{parse_program, ChcError, Interpretation, Program};
use crate::instrument::{append_property, instrument};
use crate::solver::Status;

use super::read_facts;

/// A program bundled with the tool, with its expected verdict.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    /// Integrity constraint over the instrumented program, if the verdict
    /// concerns a dimension property.
    pub property: Option<&'static str>,
    /// Initial facts for `solve-inc`.
    pub seed: Option<&'static str>,
    pub expected: Status,
    /// Dimension at which the verdict is expected.
    pub dimension: Option<u32>,
    /// Expected counterexample, for unsafe entries.
    pub witness: Option<&'static str>,
}

impl CorpusEntry {
    pub fn program(&self) -> Program {
        parse_program(self.source).expect("bundled program parses")
    }

    /// The program whose safety is the expected verdict: the source, or
    /// its instrumentation with the property appended.
    pub fn query(&self) -> Result<Program, ChcError> {
        let p = self.program();
        match self.property {
            None => Ok(p),
            Some(prop) => append_property(&instrument(&p)?, parse_program(prop)?.clauses()),
        }
    }

    pub fn seed_facts(&self) -> Result<Interpretation, ChcError> {
        match self.seed {
            None => Ok(Interpretation::new()),
            Some(s) => read_facts(s),
        }
    }
}

pub fn corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "fib",
            source: include_str!("../../corpus/fib.chc"),
            property: None,
            seed: None,
            expected: Status::Safe,
            dimension: Some(1),
            witness: None,
        },
        CorpusEntry {
            name: "mc91",
            source: include_str!("../../corpus/mc91.chc"),
            property: Some(include_str!("../../corpus/mc91.prop.chc")),
            seed: None,
            expected: Status::Safe,
            dimension: Some(2),
            witness: None,
        },
        CorpusEntry {
            name: "cc",
            source: include_str!("../../corpus/cc.chc"),
            property: Some(include_str!("../../corpus/cc.prop.chc")),
            seed: None,
            expected: Status::Safe,
            dimension: None,
            witness: None,
        },
        CorpusEntry {
            name: "revlen",
            source: include_str!("../../corpus/revlen.chc"),
            property: None,
            seed: None,
            expected: Status::Safe,
            dimension: Some(1),
            witness: None,
        },
        CorpusEntry {
            name: "pp",
            source: include_str!("../../corpus/pp.chc"),
            property: None,
            seed: None,
            expected: Status::Safe,
            dimension: None,
            witness: None,
        },
        CorpusEntry {
            name: "fourclause",
            source: include_str!("../../corpus/fourclause.chc"),
            property: None,
            seed: Some("p(X) :- true."),
            expected: Status::Unsafe,
            dimension: None,
            witness: Some("c2(c4)"),
        },
    ]
}

pub fn corpus_entry(name: &str) -> Option<CorpusEntry> {
    corpus().into_iter().find(|e| e.name == name)
}
