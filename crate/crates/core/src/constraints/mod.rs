//! Exact linear arithmetic: satisfiability, entailment, projection, and
//! polyhedral hull/widening.

pub mod linear;
pub mod polyhedron;
pub mod project;
pub mod simplex;

pub use linear::{rat, Conj, Fresh, LinConstraint, LinExpr, Rat, Rel, Var};
pub use polyhedron::Polyhedron;
pub use project::{project, simplify};
pub use simplex::{
    entails, entails_conj, equivalent, is_sat, is_sat_integer, is_sat_rational, model, Mode,
    DEFAULT_NODE_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("integer search exhausted its budget of {0} nodes")]
    BudgetExhausted(usize),
}
