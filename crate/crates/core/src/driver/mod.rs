//! Command-line front end.

mod corpus;
mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::chc::{
    export_smtlib_horn, model_check, parse_program, ChcError, ConstrainedFact, Interpretation,
    Program,
};
use crate::constraints::{Conj, LinConstraint, LinExpr, Var};
use crate::derivations::{enumerate, EnumOptions, Root, TraceTree};
use crate::instrument::{append_property, instrument_with_provenance, strip_dim};
use crate::pe::{specialize_dimension, Bound};
use crate::solver::{solve_inc, solve_partition, OracleConfig, OracleKind, SafeResult, Status};

pub use corpus::{corpus, corpus_entry, CorpusEntry};
pub use report::RunReport;

#[derive(Parser, Debug)]
#[command(name = "horndim", version, about = "Dimension-based analysis of constrained Horn clauses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Dimension bound.
    #[arg(short = 'k', long = "dimension", global = true, default_value_t = 0)]
    pub k: u32,
    #[arg(long, global = true, value_enum, default_value_t = OracleKind::Portfolio)]
    pub oracle: OracleKind,
    /// Oracle timeout in seconds.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub timeout: f64,
    /// Largest trace tree (in nodes) explored by bounded search and
    /// enumeration.
    #[arg(long, global = true, default_value_t = 10)]
    pub budget: usize,
    /// Drop dimension arguments from generated programs.
    #[arg(long, global = true)]
    pub strip_dim: bool,
    /// Integrity constraints appended after instrumentation.
    #[arg(long, global = true)]
    pub property: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include the clause provenance map of generated programs.
    #[arg(long, global = true)]
    pub provenance: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and print a program.
    Parse { file: String },
    /// Dimension of a trace term such as `c3(c2(c1,c1))`.
    Dim { trace: String },
    /// Add dimension arguments.
    Instrument { file: String },
    /// Derivations of dimension at most k.
    Atmost { file: String },
    /// Derivations of dimension at least k.
    Atleast { file: String },
    /// List trace trees rooted at false (or at --root).
    Enumerate {
        file: String,
        #[arg(long)]
        root: Option<String>,
        /// Only feasible trees.
        #[arg(long)]
        feasible: bool,
    },
    /// Check that the facts in a file form a model.
    CheckModel { file: String, model: PathBuf },
    /// Split derivations by dimension and query both parts.
    SolvePartition { file: String },
    /// Query dimension-bounded programs with increasing bound.
    SolveInc {
        file: String,
        /// Initial facts.
        #[arg(long)]
        seed: Option<PathBuf>,
    },
    /// Print the program as an SMT-LIB HORN script.
    ExportSmtlib { file: String },
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("{0}")]
    Chc(#[from] ChcError),
    #[error("{0}")]
    Solver(#[from] crate::solver::SolverError),
    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

/// Parses fact clauses `p(x̄) :- φ.`; several clauses for one predicate
/// form a disjunction.
pub fn read_facts(src: &str) -> Result<Interpretation, ChcError> {
    let p = parse_program(src)?;
    let mut facts: BTreeMap<String, ConstrainedFact> = BTreeMap::new();
    for c in p.clauses() {
        if !c.is_fact() || c.is_integrity() {
            return Err(ChcError::Unsupported(format!(
                "clause {} is not a fact",
                c.id
            )));
        }
        let n = c.head.arity();
        let vars: Vec<Var> = (1..=n).map(|i| Var::new(format!("A{i}"))).collect();
        let mut d = Conj::new(
            vars.iter()
                .zip(&c.head.args)
                .map(|(v, a)| LinConstraint::eq(LinExpr::var(v.clone()), a.clone())),
        );
        d.extend(c.constraint.items().iter().cloned());
        let keep = vars.iter().cloned().collect();
        let d = crate::constraints::project(&d, &keep);
        facts
            .entry(c.head.pred.clone())
            .or_insert_with(|| ConstrainedFact::disjunctive(c.head.pred.clone(), vars, Vec::new()))
            .disjuncts
            .push(d);
    }
    Ok(Interpretation::from_facts(facts.into_values()))
}

fn read(path: &Path) -> Result<String, DriverError> {
    std::fs::read_to_string(path).map_err(|err| DriverError::Io {
        path: path.display().to_string(),
        err,
    })
}

/// Loads `file`, or a bundled program written `corpus:<name>`.
fn load(file: &str) -> Result<(Program, Option<CorpusEntry>), DriverError> {
    if let Some(name) = file.strip_prefix("corpus:") {
        let e = corpus_entry(name)
            .ok_or_else(|| DriverError::Usage(format!("no bundled program named {name}")))?;
        return Ok((e.program(), Some(e)));
    }
    let path = Path::new(file);
    let p = parse_program(&read(path)?)?;
    let entry = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(corpus_entry);
    Ok((p, entry))
}

struct Outcome {
    status: Option<Status>,
    result: Option<SafeResult>,
    output: Value,
    provenance: Option<BTreeMap<String, String>>,
}

impl Outcome {
    fn text(s: String) -> Self {
        Outcome {
            status: None,
            result: None,
            output: Value::String(s),
            provenance: None,
        }
    }
}

fn with_property(cli: &Cli, p: Program, entry: Option<&CorpusEntry>) -> Result<Program, DriverError> {
    let prop = match (&cli.property, entry.and_then(|e| e.property)) {
        (Some(path), _) => read(path)?,
        (None, Some(src)) => src.to_string(),
        (None, None) => return Ok(p),
    };
    let inst = instrument_with_provenance(&p)?;
    Ok(append_property(&inst.program, parse_program(&prop)?.clauses())?)
}

fn oracle_config(cli: &Cli) -> Result<OracleConfig, DriverError> {
    if !(cli.timeout > 0.0 && cli.timeout.is_finite()) {
        return Err(DriverError::Usage("--timeout must be positive".into()));
    }
    if cli.budget == 0 {
        return Err(DriverError::Usage("--budget must be at least 1".into()));
    }
    Ok(OracleConfig {
        kind: cli.oracle,
        timeout: Duration::from_secs_f64(cli.timeout),
        node_budget: cli.budget,
        ..OracleConfig::default()
    })
}

fn execute(cli: &Cli, timings: &mut BTreeMap<String, u128>) -> Result<(String, Outcome), DriverError> {
    let t0 = Instant::now();
    let mut loaded = |file: &str| -> Result<(Program, Option<CorpusEntry>), DriverError> {
        let r = load(file)?;
        timings.insert("parse_ms".into(), t0.elapsed().as_millis());
        Ok(r)
    };
    Ok(match &cli.command {
        Command::Parse { file } => {
            let (p, _) = loaded(file)?;
            (file.clone(), Outcome::text(p.to_string()))
        }
        Command::Dim { trace } => {
            let t = TraceTree::parse(trace)?;
            let mut o = Outcome::text(String::new());
            o.output = json!(t.dim());
            (trace.clone(), o)
        }
        Command::Instrument { file } => {
            let (p, _) = loaded(file)?;
            let inst = instrument_with_provenance(&p)?;
            let prog = match &cli.property {
                Some(path) => append_property(&inst.program, parse_program(&read(path)?)?.clauses())?,
                None => inst.program,
            };
            let prog = if cli.strip_dim { strip_dim(&prog)? } else { prog };
            let mut o = Outcome::text(prog.to_string());
            o.provenance = cli.provenance.then_some(inst.provenance);
            (file.clone(), o)
        }
        Command::Atmost { file } | Command::Atleast { file } => {
            let (p, entry) = loaded(file)?;
            let p = with_property(cli, p, entry.as_ref())?;
            let bound = match cli.command {
                Command::Atmost { .. } => Bound::AtMost(cli.k),
                _ => Bound::AtLeast(cli.k),
            };
            let s = specialize_dimension(&p, bound, cli.strip_dim)?;
            let mut o = Outcome::text(s.program.to_string());
            o.provenance = cli.provenance.then_some(s.provenance);
            (file.clone(), o)
        }
        Command::Enumerate {
            file,
            root,
            feasible,
        } => {
            let (p, _) = loaded(file)?;
            let root = match root {
                Some(q) => Root::Pred(q.clone()),
                None => Root::False,
            };
            let mut opts = EnumOptions::new(cli.budget);
            if *feasible {
                opts = opts.feasible();
            }
            let trees: Vec<Value> = enumerate(&p, root, opts)
                .map(|t| json!({ "trace": t.to_string(), "dim": t.dim() }))
                .collect();
            let mut o = Outcome::text(String::new());
            o.output = Value::Array(trees);
            (file.clone(), o)
        }
        Command::CheckModel { file, model } => {
            let (p, _) = loaded(file)?;
            let i = read_facts(&read(model)?)?;
            let mc = model_check(&p, &i)?;
            let mut o = Outcome::text(String::new());
            o.status = Some(if mc.ok { Status::Safe } else { Status::Unsafe });
            o.output = json!({ "model": mc.ok, "violated": mc.violated });
            (file.clone(), o)
        }
        Command::SolvePartition { file } | Command::SolveInc { file, .. } => {
            let (p, entry) = loaded(file)?;
            let p = with_property(cli, p, entry.as_ref())?;
            let cfg = oracle_config(cli)?;
            let t1 = Instant::now();
            let r = match &cli.command {
                Command::SolveInc { seed, .. } => {
                    let s0 = match (seed, &entry) {
                        (Some(path), _) => read_facts(&read(path)?)?,
                        (None, Some(e)) => e.seed_facts()?,
                        (None, None) => Interpretation::new(),
                    };
                    solve_inc(&p, cli.k, &s0, &cfg)?
                }
                _ => solve_partition(&p, cli.k, &cfg)?,
            };
            timings.insert("solve_ms".into(), t1.elapsed().as_millis());
            let o = Outcome {
                status: Some(r.status),
                output: Value::Null,
                result: Some(r),
                provenance: None,
            };
            (file.clone(), o)
        }
        Command::ExportSmtlib { file } => {
            let (p, _) = loaded(file)?;
            (file.clone(), Outcome::text(export_smtlib_horn(&p)?))
        }
    })
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Parse { .. } => "parse",
        Command::Dim { .. } => "dim",
        Command::Instrument { .. } => "instrument",
        Command::Atmost { .. } => "atmost",
        Command::Atleast { .. } => "atleast",
        Command::Enumerate { .. } => "enumerate",
        Command::CheckModel { .. } => "check-model",
        Command::SolvePartition { .. } => "solve-partition",
        Command::SolveInc { .. } => "solve-inc",
        Command::ExportSmtlib { .. } => "export-smtlib",
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Safe => 0,
        Status::Unsafe => 1,
        Status::Unknown => 2,
    }
}

pub const EXIT_ERROR: i32 = 3;

/// Runs the command and builds its report.
pub fn run(cli: &Cli) -> Result<RunReport, DriverError> {
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let (input, o) = execute(cli, &mut timings)?;
    timings.insert("total_ms".into(), start.elapsed().as_millis());
    let expected = match &cli.command {
        Command::SolvePartition { file } | Command::SolveInc { file, .. } => {
            load(file).ok().and_then(|(_, e)| e).map(|e| e.expected)
        }
        _ => None,
    };
    Ok(RunReport {
        input,
        subcommand: subcommand_name(&cli.command).to_string(),
        params: json!({
            "k": cli.k,
            "oracle": cli.oracle,
            "timeout": cli.timeout,
            "budget": cli.budget,
            "strip_dim": cli.strip_dim,
            "property": cli.property.as_ref().map(|p| p.display().to_string()),
        }),
        status: o.status,
        result: o.result,
        output: o.output,
        provenance: o.provenance,
        expected,
        timings,
    })
}

/// Entry point: parses arguments, runs, prints, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("horndim: {e}");
            return EXIT_ERROR;
        }
    };
    let code = report.status.map(exit_code).unwrap_or(0);
    let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    match &cli.out {
        Some(path) => {
            if let Err(err) = std::fs::write(path, json + "\n") {
                eprintln!("horndim: {}: {err}", path.display());
                return EXIT_ERROR;
            }
            match &report.output {
                Value::String(s) => print!("{s}"),
                Value::Null => println!("{}", report.status.map(|s| s.to_string()).unwrap_or_default()),
                v => println!("{v}"),
            }
        }
        None => println!("{json}"),
    }
    code
}
