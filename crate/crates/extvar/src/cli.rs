//! Command implementations behind the binary: check, run, and solve with
//! solver selection, defaulting control, and tracing. Output is byte-stable
//! for a fixed input and configuration.

use crate::chain::{SolverFlags, TraceEvent};
use crate::lang::ast::SurfaceTy;
use crate::lang::parser::{parse_solve_pred, SolvePred};
use crate::lang::{self, LangFlags, ProgramError};
use crate::pretty::render_binding;
use crate::rows;
use crate::solver::{Chains, Families, PredSolver};
use crate::types::{Pred, TypeExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Chains,
    Families,
    Rows,
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chains" => Ok(SolverKind::Chains),
            "families" => Ok(SolverKind::Families),
            "rows" => Ok(SolverKind::Rows),
            other => Err(format!(
                "unknown solver {}; expected chains, families, or rows",
                other
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CliConfig {
    pub solver: SolverKind,
    pub generalized: bool,
    pub defaulting: bool,
    pub expose: bool,
    pub trace: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            solver: SolverKind::Chains,
            generalized: false,
            defaulting: true,
            expose: false,
            trace: false,
        }
    }
}

impl CliConfig {
    /// The generalized clauses have no family translation; rows are a
    /// checking baseline only.
    pub fn validate(&self, command: &str) -> Result<(), String> {
        if self.generalized && self.solver == SolverKind::Families {
            return Err("--generalized has no meaning with --solver=families".to_string());
        }
        if self.generalized && self.solver == SolverKind::Rows {
            return Err("--generalized has no meaning with --solver=rows".to_string());
        }
        if self.solver == SolverKind::Rows && command == "solve" {
            return Err("--solver=rows applies to check and run only".to_string());
        }
        Ok(())
    }

    fn lang_flags(&self) -> LangFlags {
        LangFlags {
            generalized: self.generalized,
            defaulting: self.defaulting,
            expose: self.expose,
        }
    }

    fn solver_flags(&self) -> SolverFlags {
        SolverFlags {
            generalized: self.generalized,
            ..Default::default()
        }
    }

    fn make_solver(&self) -> Box<dyn PredSolver> {
        match self.solver {
            SolverKind::Families => Box::new(Families::new(self.solver_flags())),
            _ => Box::new(Chains::new(self.solver_flags())),
        }
    }
}

/// One line per let binding, in declaration order:
/// `name : forall a b. (P1, P2) => T`.
pub fn cmd_check(src: &str, cfg: &CliConfig) -> Result<Vec<String>, ProgramError> {
    if cfg.solver == SolverKind::Rows {
        let prog = lang::parse_program(src)?;
        let checked = rows::check_rows(&prog)?;
        return Ok(checked
            .lines
            .iter()
            .map(|(n, s)| format!("{} : {}", n, s))
            .collect());
    }
    let solver = cfg.make_solver();
    let checked = lang::check_source(src, solver.as_ref(), cfg.lang_flags())?;
    Ok(checked
        .lines
        .iter()
        .map(|(n, s)| render_binding(n, s))
        .collect())
}

/// The value of `main` in literal syntax.
pub fn cmd_run(src: &str, cfg: &CliConfig) -> Result<String, ProgramError> {
    if cfg.solver == SolverKind::Rows {
        let prog = lang::parse_program(src)?;
        let checked = rows::check_rows(&prog)?;
        if checked.main_type.is_none() {
            return Err(ProgramError::Type("program has no main".to_string()));
        }
        let v = rows::run_rows(&checked)?;
        return Ok(rows::render_rvalue(&v));
    }
    let solver = cfg.make_solver();
    let v = lang::run_source(src, solver.as_ref(), cfg.lang_flags())?;
    Ok(lang::render_value(&v))
}

/// Solve one predicate over opaque functor atoms. With tracing, one line per
/// clause or equation attempt precedes the verdict.
pub fn cmd_solve(pred_src: &str, cfg: &CliConfig) -> Result<Vec<String>, ProgramError> {
    let parsed = parse_solve_pred(pred_src).map_err(|e| ProgramError::Parse(e.to_string()))?;
    let pred = lower_solve_pred(&parsed)?;
    let solver = cfg.make_solver();
    let mut lines = Vec::new();
    let solution = if cfg.trace {
        let mut hook = |e: TraceEvent| lines.push(format!("try {}: {}", e.id, e.outcome));
        solver.solve_pred_traced(&pred, &[], &mut hook)
    } else {
        solver.solve_pred(&pred, &[])
    };
    match solution {
        Ok(sol) => {
            lines.push(sol.to_string());
            Ok(lines)
        }
        Err(e) => Err(ProgramError::Type(e.to_string())),
    }
}

fn lower_solve_pred(p: &SolvePred) -> Result<Pred, ProgramError> {
    Ok(match p {
        SolvePred::In(a, b, fails) => {
            let (a, b) = (lower_solve_ty(a)?, lower_solve_ty(b)?);
            if *fails {
                Pred::NotIn(a, b)
            } else {
                Pred::In(a, b)
            }
        }
        SolvePred::Leq(a, b) => Pred::Leq(lower_solve_ty(a)?, lower_solve_ty(b)?),
        SolvePred::Minus(a, b, out) => {
            let out = match out {
                Some(t) => lower_solve_ty(t)?,
                None => TypeExpr::var("h"),
            };
            Pred::Minus(lower_solve_ty(a)?, lower_solve_ty(b)?, out)
        }
    })
}

// Solve-mode types are coproducts over opaque atoms: names are leaf atoms
// regardless of spelling (Int and Bool included), lower-case names are
// variables.
fn lower_solve_ty(t: &SurfaceTy) -> Result<TypeExpr, ProgramError> {
    match t {
        SurfaceTy::Name(n) => Ok(TypeExpr::atom(n)),
        SurfaceTy::Int => Ok(TypeExpr::atom("Int")),
        SurfaceTy::Bool => Ok(TypeExpr::atom("Bool")),
        SurfaceTy::Var(v) => Ok(TypeExpr::var(v)),
        SurfaceTy::Coprod(a, b) => Ok(TypeExpr::coprod(lower_solve_ty(a)?, lower_solve_ty(b)?)),
        other => Err(ProgramError::Parse(format!(
            "solve predicates range over coproducts of atoms; {:?} is not one",
            other
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: SolverKind) -> CliConfig {
        CliConfig {
            solver: kind,
            ..Default::default()
        }
    }

    #[test]
    fn solve_family_rewrite_examples() {
        let out = cmd_solve("Into B ((A :+: B) :+: C)", &cfg(SolverKind::Families)).unwrap();
        assert_eq!(out, vec!["holds L (R Refl)"]);
        let out = cmd_solve("Into D (A :+: B)", &cfg(SolverKind::Families)).unwrap();
        assert_eq!(out, vec!["fails"]);
        let out = cmd_solve("Into f (f :+: g)", &cfg(SolverKind::Families)).unwrap();
        assert_eq!(out, vec!["stuck"]);
    }

    #[test]
    fn solve_chain_subtraction_with_remainder() {
        let out = cmd_solve(
            "((Int :+: Char) :+: Bool) :-: Char",
            &cfg(SolverKind::Chains),
        )
        .unwrap();
        assert_eq!(out, vec!["holds Le Bool (Onr Int); remainder Int :+: Bool"]);
    }

    #[test]
    fn solve_negation_suffix() {
        let out = cmd_solve("In D (A :+: B) fails", &cfg(SolverKind::Chains)).unwrap();
        assert_eq!(out, vec!["holds"]);
    }

    #[test]
    fn solve_trace_lines_precede_the_verdict() {
        let mut c = cfg(SolverKind::Chains);
        c.trace = true;
        let out = cmd_solve("In B (A :+: B)", &c).unwrap();
        assert!(out.len() > 1);
        assert!(out[0].starts_with("try Fig3."));
        assert_eq!(out.last().unwrap(), "holds");
    }

    #[test]
    fn config_rules() {
        let mut c = cfg(SolverKind::Families);
        c.generalized = true;
        assert!(c.validate("solve").is_err());
        let c = cfg(SolverKind::Rows);
        assert!(c.validate("solve").is_err());
        assert!(c.validate("check").is_ok());
    }
}
