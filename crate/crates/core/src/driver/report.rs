use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::solver::{SafeResult, Status};

/// Machine-readable record of one run. Only `timings` varies between runs
/// with the same arguments.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub input: String,
    pub subcommand: String,
    pub params: Value,
    /// Verdict, for commands that produce one.
    pub status: Option<Status>,
    pub result: Option<SafeResult>,
    /// Text or JSON produced by transformation commands.
    pub output: Value,
    pub provenance: Option<BTreeMap<String, String>>,
    /// Verdict the bundled corpus expects for this input.
    pub expected: Option<Status>,
    pub timings: BTreeMap<String, u128>,
}

impl RunReport {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "schema": 1,
            "input": self.input,
            "subcommand": self.subcommand,
            "params": self.params,
            "status": self.status.map(|s| s.to_string()).unwrap_or_else(|| "success".into()),
            "timings": self.timings,
        });
        let obj = v.as_object_mut().unwrap();
        if let Some(r) = &self.result {
            obj.insert("dimension_reached".into(), json!(r.dimension));
            obj.insert("witness".into(), r.witness_json());
            obj.insert("notes".into(), json!(r.notes));
        }
        if !self.output.is_null() {
            obj.insert("output".into(), self.output.clone());
        }
        if let Some(p) = &self.provenance {
            obj.insert("provenance".into(), json!(p));
        }
        if let Some(e) = self.expected {
            obj.insert("expected".into(), json!(e.to_string()));
        }
        v
    }

    /// The report without its timings, for comparing runs.
    pub fn stable_json(&self) -> Value {
        let mut v = self.to_json();
        v.as_object_mut().unwrap().remove("timings");
        v
    }
}
