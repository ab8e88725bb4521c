//! Extensible variants over coproducts of functors, as an explicit
//! constraint-solving and evaluation engine: two solvers for the membership,
//! injection, and subtraction predicates (ordered instance chains and closed
//! type families), qualified-type inference for a small term language with
//! generalized defaulting, an evidence-directed evaluator, and a row-typing
//! baseline checker.

pub mod chain;
pub mod cli;
pub mod defaulting;
pub mod family;
pub mod lang;
pub mod pretty;
pub mod rows;
pub mod solver;
pub mod types;
pub mod unify;
