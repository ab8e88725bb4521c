//! The surface mini-language: parser, qualified-type inference, and the
//! evidence-directed evaluator.

pub mod ast;
pub mod eval;
pub mod infer;
pub mod parser;

pub use ast::Program;
pub use eval::{evaluate, inject_value, render_value, route_branch, Routed, Value};
pub use infer::{check_program, CheckedProgram, LangError, LangFlags};
pub use parser::{parse_program, ParseError};

use crate::solver::PredSolver;

/// Program-level failures, partitioned the way the front end reports them.
#[derive(Debug, Clone, PartialEq)]
pub enum ProgramError {
    Parse(String),
    Type(String),
    Ambiguity(String),
    PatternFailure(String),
    Internal(String),
}

impl std::fmt::Display for ProgramError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProgramError::Parse(m)
            | ProgramError::Type(m)
            | ProgramError::Ambiguity(m)
            | ProgramError::PatternFailure(m)
            | ProgramError::Internal(m) => write!(f, "{}", m),
        }
    }
}

impl ProgramError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ProgramError::Parse(_) => 2,
            ProgramError::Type(_) | ProgramError::Internal(_) => 3,
            ProgramError::Ambiguity(_) => 4,
            ProgramError::PatternFailure(_) => 5,
        }
    }
}

impl From<ParseError> for ProgramError {
    fn from(e: ParseError) -> Self {
        ProgramError::Parse(e.to_string())
    }
}

impl From<LangError> for ProgramError {
    fn from(e: LangError) -> Self {
        match e {
            LangError::Ambiguity { .. } => ProgramError::Ambiguity(e.to_string()),
            _ => ProgramError::Type(e.to_string()),
        }
    }
}

impl From<eval::RunError> for ProgramError {
    fn from(e: eval::RunError) -> Self {
        match e {
            eval::RunError::Check(le) => le.into(),
            eval::RunError::Pattern(m) => {
                ProgramError::PatternFailure(format!("pattern match failure: {}", m))
            }
            eval::RunError::Internal(m) => ProgramError::Internal(format!("internal error: {}", m)),
        }
    }
}

/// Parse and check a program; the result carries everything needed to print
/// schemes or evaluate `main`.
pub fn check_source(
    src: &str,
    solver: &dyn PredSolver,
    flags: LangFlags,
) -> Result<CheckedProgram, ProgramError> {
    let prog = parse_program(src)?;
    Ok(check_program(&prog, solver, flags)?)
}

/// Parse, check, and evaluate a program's `main`.
pub fn run_source(
    src: &str,
    solver: &dyn PredSolver,
    flags: LangFlags,
) -> Result<Value, ProgramError> {
    let checked = check_source(src, solver, flags)?;
    if checked.main.is_none() {
        return Err(ProgramError::Type("program has no main".to_string()));
    }
    Ok(evaluate(&checked, solver)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::SolverFlags;
    use crate::pretty::render_binding;
    use crate::solver::{Chains, Families};

    const PRELUDE: &str = "\
data Const = Const Int
data Sum = Plus self self
data Product = Times self self

type E1 = Fix (Const :+: Sum)
type E1' = Fix (Sum :+: Const)
type E2 = Fix ((Const :+: Sum) :+: Product)

let x = inj' (Plus (inj' (Const 1)) (inj' (Const 2)))
let y = inj' (Times (inj' (Const 3)) x)

let evalConst = \\(Const n) r -> n
let evalSum = \\(Plus a b) r -> r a + r b
let evalProduct = \\(Times a b) r -> r a * r b

let eval1 = cases (evalConst ? evalSum)
let eval2 = cases (evalProduct ? (evalSum ? evalConst))
";

    fn chains() -> Chains {
        Chains::new(SolverFlags::default())
    }

    fn flags_default_on() -> LangFlags {
        LangFlags {
            generalized: false,
            defaulting: true,
            expose: false,
        }
    }

    fn line_for(checked: &CheckedProgram, name: &str) -> String {
        let (n, s) = checked
            .lines
            .iter()
            .find(|(n, _)| n == name)
            .expect("binding missing");
        render_binding(n, s)
    }

    #[test]
    fn principal_types_of_the_expression_terms() {
        let solver = chains();
        let checked = check_source(PRELUDE, &solver, flags_default_on()).unwrap();
        assert_eq!(
            line_for(&checked, "x"),
            "x : forall a. (Const :<: a, Sum :<: a) => Fix a"
        );
        assert_eq!(
            line_for(&checked, "y"),
            "y : forall a. (Const :<: a, Product :<: a, Sum :<: a) => Fix a"
        );
        assert_eq!(
            line_for(&checked, "eval1"),
            "eval1 : forall a. (a :-: Const = Sum) => Fix a -> Int"
        );
        assert_eq!(
            line_for(&checked, "eval2"),
            "eval2 : forall a b. (a :-: Product = b, b :-: Sum = Const) => Fix a -> Int"
        );
    }

    #[test]
    fn desugar_scheme_matches_expected_shape() {
        let src = format!(
            "{}\ndata Square = Square self\nlet desugarSqr = cases ((\\(Square e) r -> inj' (Times (r e) (r e))) ? (\\e r -> In (fmap desugarSqr e)))",
            PRELUDE
        );
        let solver = chains();
        let checked = check_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(
            line_for(&checked, "desugarSqr"),
            "desugarSqr : forall a b. (Functor b, Product :<: b, a :-: Square = b) => Fix a -> Fix b"
        );
    }

    #[test]
    fn composition_defaults_and_evaluates() {
        let src = format!("{}default ((g :+: h) :-: g = h)\nmain = eval1 x\n", PRELUDE);
        let solver = chains();
        let v = run_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(v, Value::Int(3));
    }

    #[test]
    fn composition_without_default_is_ambiguous() {
        let src = format!("{}main = eval1 x\n", PRELUDE);
        let solver = chains();
        let err = run_source(&src, &solver, flags_default_on()).unwrap_err();
        match err {
            ProgramError::Ambiguity(m) => {
                assert!(m.contains(":-:"), "constraints listed: {}", m);
                assert!(m.contains(":<:"), "constraints listed: {}", m);
            }
            other => panic!("expected ambiguity, got {:?}", other),
        }
    }

    #[test]
    fn annotations_resolve_the_composition() {
        let solver = chains();
        for (ty, expected) in [("E1", 3), ("E1'", 3)] {
            let src = format!("{}main = eval1 (x :: {})\n", PRELUDE, ty);
            let v = run_source(&src, &solver, flags_default_on()).unwrap();
            assert_eq!(v, Value::Int(expected));
        }
    }

    #[test]
    fn products_evaluate_via_defaulting() {
        let src = format!("{}default ((g :+: h) :-: g = h)\nmain = eval2 y\n", PRELUDE);
        let solver = chains();
        let v = run_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(v, Value::Int(9));
    }

    #[test]
    fn families_solver_checks_the_same_programs() {
        let solver = Families::new(SolverFlags::default());
        let src = format!("{}default ((g :+: h) :-: g = h)\nmain = eval1 x\n", PRELUDE);
        let v = run_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(v, Value::Int(3));
    }

    #[test]
    fn exposure_witnesses_incoherence() {
        let lefty = "let lefty = \\(In s) -> ((\\l -> True) .?. (\\r -> False)) s\n";
        let solver = chains();
        let expose = LangFlags {
            expose: true,
            ..flags_default_on()
        };
        let src = format!(
            "{}{}main = (\\w -> (eval1 w, lefty w)) (x :: E1)\n",
            PRELUDE, lefty
        );
        let v = run_source(&src, &solver, expose).unwrap();
        assert_eq!(
            v,
            Value::Pair(Box::new(Value::Int(3)), Box::new(Value::Bool(false)))
        );
        let src = format!(
            "{}{}main = (\\w -> (eval1 w, lefty w)) (x :: E1')\n",
            PRELUDE, lefty
        );
        let v = run_source(&src, &solver, expose).unwrap();
        assert_eq!(
            v,
            Value::Pair(Box::new(Value::Int(3)), Box::new(Value::Bool(true)))
        );
    }

    #[test]
    fn exposure_patterns_require_the_flag() {
        let src = format!(
            "{}let lefty = \\(In s) -> ((\\l -> True) .?. (\\r -> False)) s\n",
            PRELUDE
        );
        let solver = chains();
        let err = check_source(&src, &solver, flags_default_on()).unwrap_err();
        assert!(matches!(err, ProgramError::Type(_)));
    }

    #[test]
    fn branch_order_is_irrelevant() {
        let solver = chains();
        for order in ["evalConst ? evalSum", "evalSum ? evalConst"] {
            for ty in ["E1", "E1'"] {
                let src = format!(
                    "{}let evalX = cases ({})\nmain = evalX (x :: {})\n",
                    PRELUDE, order, ty
                );
                let v = run_source(&src, &solver, flags_default_on()).unwrap();
                assert_eq!(v, Value::Int(3), "order {} at {}", order, ty);
            }
        }
    }

    #[test]
    fn signature_annotations_are_checked() {
        let solver = chains();
        let good = format!(
            "{}let ev : forall a. (a :-: Const = Sum) => Fix a -> Int = cases (evalConst ? evalSum)\n",
            PRELUDE
        );
        check_source(&good, &solver, flags_default_on()).unwrap();
        // a wrong signature is rejected
        let bad = format!(
            "{}let ev : forall a. (a :-: Product = Sum) => Fix a -> Int = cases (evalConst ? evalSum)\n",
            PRELUDE
        );
        let err = check_source(&bad, &solver, flags_default_on()).unwrap_err();
        assert!(matches!(err, ProgramError::Type(_)));
    }

    #[test]
    fn signature_with_negative_assumption_types_under_chains_only() {
        // inj at f e -> (f :+: g) e from the assumption In f g fails
        let src = "let weird : forall f g e. (In f g fails) => f e -> (f :+: g) e = \\v -> inj v\n";
        let solver = chains();
        check_source(src, &solver, LangFlags::default()).unwrap();
        let fams = Families::new(SolverFlags::default());
        let err = check_source(src, &fams, LangFlags::default()).unwrap_err();
        assert!(matches!(err, ProgramError::Type(_)));
    }

    #[test]
    fn prj_infers_a_subtraction_scheme() {
        let solver = chains();
        let checked = check_source("let f = \\v -> prj v\n", &solver, flags_default_on()).unwrap();
        assert_eq!(
            line_for(&checked, "f"),
            "f : forall a b c d. (a :-: c = d) => a b -> Maybe (c b)"
        );
    }

    #[test]
    fn prj_round_trips_through_the_evaluator() {
        let solver = chains();
        let src = format!(
            "{}main = (prj ((inj (Const 1)) :: (Const :+: Sum) E1)) :: Maybe (Const E1)\n",
            PRELUDE
        );
        let v = run_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(
            v,
            Value::MaybeV(Some(Box::new(Value::Con(
                "Const".into(),
                vec![Value::Int(1)]
            ))))
        );
        // projecting the component that is not present gives Nothing
        let src = format!(
            "{}main = (prj ((inj (Const 1)) :: (Const :+: Sum) E1)) :: Maybe (Sum E1)\n",
            PRELUDE
        );
        let v = run_source(&src, &solver, flags_default_on()).unwrap();
        assert_eq!(v, Value::MaybeV(None));
    }

    #[test]
    fn generalized_compound_branches_evaluate() {
        // two-at-once subtraction of (Const :+: Sum) using the compound
        // branch, annotated to pin the shape
        let src = format!(
            "{}let evalCS = (evalConst .?. evalSum) ? evalProduct\nlet evalAll = cases evalCS\nmain = evalAll (y :: E2)\n",
            PRELUDE
        );
        let solver = Chains::new(SolverFlags::generalized());
        let flags = LangFlags {
            generalized: true,
            defaulting: true,
            expose: false,
        };
        let v = run_source(&src, &solver, flags);
        // (Const :+: Sum) branch handles the left summand of E2's functor
        assert_eq!(v.unwrap(), Value::Int(9));
    }

    #[test]
    fn generalized_nested_branch_is_ambiguous() {
        let src = format!(
            "{}let eval2' = cases ((evalConst ? evalSum) ? evalProduct)\n",
            PRELUDE
        );
        let solver = Chains::new(SolverFlags::generalized());
        let flags = LangFlags {
            generalized: true,
            defaulting: false,
            expose: false,
        };
        let err = check_source(&src, &solver, flags).unwrap_err();
        assert!(
            matches!(err, ProgramError::Ambiguity(_)),
            "got {:?}",
            err
        );
    }

    #[test]
    fn local_lets_are_supported() {
        let solver = chains();
        let v = run_source(
            "main = let two = 2 in two + 1\n",
            &solver,
            flags_default_on(),
        )
        .unwrap();
        assert_eq!(v, Value::Int(3));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let solver = chains();
        let err = check_source("let x = (1\n", &solver, flags_default_on()).unwrap_err();
        assert!(matches!(err, ProgramError::Parse(_)));
    }
}
