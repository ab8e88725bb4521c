//! A common face over the two solvers, plus the given-assumption lookup they
//! share. Inference and the CLI talk to `PredSolver` and stay agnostic about
//! which engine is underneath.

use crate::chain::{ChainError, ChainSolver, SolverFlags, TraceHook};
use crate::family::{FamilyError, FamilySolver};
use crate::types::{Pred, Solution};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Depth,
    Family(String),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Depth => write!(f, "hypothesis recursion depth exceeded"),
            SolveError::Family(m) => write!(f, "{}", m),
        }
    }
}

impl From<ChainError> for SolveError {
    fn from(_: ChainError) -> Self {
        SolveError::Depth
    }
}

impl From<FamilyError> for SolveError {
    fn from(e: FamilyError) -> Self {
        SolveError::Family(e.to_string())
    }
}

pub trait PredSolver {
    fn solve_pred(&self, p: &Pred, givens: &[Pred]) -> Result<Solution, SolveError>;
    fn solve_pred_traced(
        &self,
        p: &Pred,
        givens: &[Pred],
        hook: TraceHook<'_>,
    ) -> Result<Solution, SolveError>;
    fn label(&self) -> &'static str;
    fn flags(&self) -> SolverFlags;
}

/// Instance-chain entailment.
pub struct Chains {
    solver: ChainSolver,
}

impl Chains {
    pub fn new(flags: SolverFlags) -> Chains {
        Chains {
            solver: ChainSolver::new(flags),
        }
    }
}

impl PredSolver for Chains {
    fn solve_pred(&self, p: &Pred, givens: &[Pred]) -> Result<Solution, SolveError> {
        Ok(self.solver.solve(p, givens)?)
    }

    fn solve_pred_traced(
        &self,
        p: &Pred,
        givens: &[Pred],
        hook: TraceHook<'_>,
    ) -> Result<Solution, SolveError> {
        Ok(self.solver.solve_traced(p, givens, hook)?)
    }

    fn label(&self) -> &'static str {
        "chains"
    }

    fn flags(&self) -> SolverFlags {
        self.solver.flags
    }
}

/// Closed-family rewriting. Given assumptions discharge goals only by exact
/// rewriting (equality-style), never by chain reasoning; the Functor
/// predicate has no family encoding and is shared with the chain solver.
pub struct Families {
    family: FamilySolver,
    functor: ChainSolver,
    flags: SolverFlags,
}

impl Families {
    pub fn new(flags: SolverFlags) -> Families {
        Families {
            family: FamilySolver::new(),
            functor: ChainSolver::new(flags),
            flags,
        }
    }
}

impl PredSolver for Families {
    fn solve_pred(&self, p: &Pred, givens: &[Pred]) -> Result<Solution, SolveError> {
        if let Some(sol) = crate::chain::given_lookup(p, givens) {
            return Ok(sol);
        }
        match p {
            Pred::Functor(_) => Ok(self.functor.solve(p, givens)?),
            _ => Ok(self.family.solve(p)?),
        }
    }

    fn solve_pred_traced(
        &self,
        p: &Pred,
        givens: &[Pred],
        hook: TraceHook<'_>,
    ) -> Result<Solution, SolveError> {
        if let Some(sol) = crate::chain::given_lookup(p, givens) {
            return Ok(sol);
        }
        match p {
            Pred::Functor(_) => Ok(self.functor.solve_traced(p, givens, hook)?),
            _ => Ok(self.family.solve_traced(p, hook)?),
        }
    }

    fn label(&self) -> &'static str {
        "families"
    }

    fn flags(&self) -> SolverFlags {
        self.flags
    }
}
