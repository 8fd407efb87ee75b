pub mod chc;
pub mod constraints;
pub mod derivations;
pub mod instrument;
pub mod pe;
pub mod solver;
pub mod driver;
