//! Ambiguity detection over inferred schemes and the generalized defaulting
//! mechanism that instantiates ambiguous variables from matching default
//! declarations.

use crate::solver::{PredSolver, SolveError};
use crate::types::{Pred, Scheme, Solution, Subst, TypeExpr};
use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

/// A defaulting rule: constraints matching `pattern`, with the ambiguous
/// variable in the head position, instantiate that variable by `template`.
/// The built-in surface form `default ((g :+: h) :-: g = h)` produces
/// pattern `head :-: g = h` with template `g :+: h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultDecl {
    pub head: Rc<str>,
    pub pattern: Pred,
    pub template: TypeExpr,
}

impl DefaultDecl {
    /// The subtraction-shaped declaration: minuend pattern over two distinct
    /// variables, one of which is the subtrahend and the other the output.
    pub fn from_minus_form(
        left: &str,
        right: &str,
        subtrahend: &str,
        output: &str,
    ) -> Result<DefaultDecl, DefaultError> {
        let names: BTreeSet<&str> = [left, right].into_iter().collect();
        if names.len() != 2 {
            return Err(DefaultError::MalformedDecl(
                "minuend variables must be distinct".to_string(),
            ));
        }
        if !names.contains(subtrahend) || !names.contains(output) || subtrahend == output {
            return Err(DefaultError::MalformedDecl(
                "subtrahend and output must be the two minuend variables".to_string(),
            ));
        }
        let head: Rc<str> = "%head".into();
        let template = TypeExpr::coprod(TypeExpr::var(left), TypeExpr::var(right));
        let pattern = Pred::Minus(
            TypeExpr::Var(head.clone(), crate::types::Kind::Functor),
            TypeExpr::var(subtrahend),
            TypeExpr::var(output),
        );
        Ok(DefaultDecl {
            head,
            pattern,
            template,
        })
    }

    /// Declaration-time sanity check: substituting the template back for the
    /// head must make the pattern provable over opaque stand-ins for its
    /// variables.
    pub fn validate(&self, solver: &dyn PredSolver) -> Result<(), DefaultError> {
        let tvars = self.template.free_vars();
        let pvars = self.pattern.free_vars();
        if tvars.contains(&self.head) {
            return Err(DefaultError::MalformedDecl(
                "head variable may not occur in the template".to_string(),
            ));
        }
        if !tvars.iter().all(|v| pvars.contains(v)) {
            return Err(DefaultError::MalformedDecl(
                "template variables must occur in the pattern".to_string(),
            ));
        }
        // skolemize everything but the head, instantiate the head by the
        // template, and require the instantiated pattern to hold
        let mut skolems = Subst::new();
        for vname in pvars.iter() {
            if **vname != *self.head {
                skolems.bind(vname.clone(), TypeExpr::atom(&format!("%sk_{}", vname)));
            }
        }
        skolems.bind(self.head.clone(), skolems.apply(&self.template));
        let instantiated = skolems.apply_pred(&self.pattern);
        match solver.solve_pred(&instantiated, &[]) {
            Ok(Solution::Holds(_)) => Ok(()),
            Ok(other) => Err(DefaultError::Insensible {
                pattern: instantiated,
                solution: other,
            }),
            Err(e) => Err(DefaultError::Solver(e)),
        }
    }
}

/// Quantified variables occurring in the constraints but not determined by
/// the body. A variable reachable from the body through the subtraction
/// functional dependency (first and second positions determine the third)
/// counts as determined.
pub fn find_ambiguous(s: &Scheme) -> BTreeSet<Rc<str>> {
    let quantified: BTreeSet<Rc<str>> = s.vars.iter().map(|(n, _)| n.clone()).collect();
    let mut determined: BTreeSet<Rc<str>> = s.body.free_vars();
    loop {
        let mut changed = false;
        for p in &s.preds {
            if let Pred::Minus(f, g, h) = p {
                let inputs: BTreeSet<Rc<str>> =
                    f.free_vars().into_iter().chain(g.free_vars()).collect();
                if inputs.iter().all(|v| determined.contains(v)) {
                    for v in h.free_vars() {
                        if determined.insert(v) {
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = BTreeSet::new();
    for p in &s.preds {
        for v in p.free_vars() {
            if quantified.contains(&v) && !determined.contains(&v) {
                out.insert(v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum DefaultError {
    MalformedDecl(String),
    Insensible { pattern: Pred, solution: Solution },
    /// No declaration applies to an ambiguous variable.
    Ambiguity {
        vars: Vec<Rc<str>>,
        constraints: Vec<Pred>,
    },
    /// Two defaults (or two matching constraints) disagree.
    Conflict {
        var: Rc<str>,
        first: TypeExpr,
        second: TypeExpr,
    },
    /// A retained constraint does not hold after instantiation.
    Residual { pred: Pred, solution: Solution },
    Solver(SolveError),
}

impl fmt::Display for DefaultError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefaultError::MalformedDecl(m) => write!(f, "malformed default declaration: {}", m),
            DefaultError::Insensible { pattern, solution } => write!(
                f,
                "default declaration is not sensible: {} {}",
                pattern, solution
            ),
            DefaultError::Ambiguity { vars, constraints } => {
                let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
                write!(f, "ambiguous type variable(s) {}", names.join(", "))?;
                if !constraints.is_empty() {
                    let cs: Vec<String> = constraints.iter().map(|p| p.to_string()).collect();
                    write!(f, " constrained by: {}", cs.join(", "))?;
                }
                Ok(())
            }
            DefaultError::Conflict { var, first, second } => write!(
                f,
                "conflicting defaults for {}: {} vs {}",
                var, first, second
            ),
            DefaultError::Residual { pred, solution } => {
                write!(f, "constraint {} {} after defaulting", pred, solution)
            }
            DefaultError::Solver(e) => write!(f, "solver error: {}", e),
        }
    }
}

/// The substitution and per-variable choices produced by defaulting.
#[derive(Debug, Clone, Default)]
pub struct AmbiguityReport {
    pub ambiguous: Vec<Rc<str>>,
    pub retained: Vec<Pred>,
    pub applied: Vec<(Rc<str>, TypeExpr)>,
    pub subst: Subst,
}

/// Instantiate every ambiguous variable from the matching declarations, then
/// re-solve all retained constraints, which must hold.
pub fn apply_defaults(
    preds: &[Pred],
    ambiguous: &BTreeSet<Rc<str>>,
    decls: &[DefaultDecl],
    solver: &dyn PredSolver,
) -> Result<AmbiguityReport, DefaultError> {
    let mut report = AmbiguityReport {
        ambiguous: ambiguous.iter().cloned().collect(),
        retained: preds.to_vec(),
        ..Default::default()
    };
    let mut unresolved: BTreeSet<Rc<str>> = ambiguous.clone();
    let mut subst = Subst::new();
    while !unresolved.is_empty() {
        let mut progressed = false;
        for var in unresolved.clone() {
            let mut candidate: Option<TypeExpr> = None;
            for decl in decls {
                for p in preds {
                    let p = subst.apply_pred(p);
                    if let Some(inst) = match_decl(decl, &var, &p) {
                        match &candidate {
                            None => candidate = Some(inst),
                            Some(prev) if *prev == inst => {}
                            Some(prev) => {
                                return Err(DefaultError::Conflict {
                                    var: var.clone(),
                                    first: prev.clone(),
                                    second: inst,
                                });
                            }
                        }
                    }
                }
            }
            if let Some(inst) = candidate {
                report.applied.push((var.clone(), inst.clone()));
                subst.bind(var.clone(), inst);
                unresolved.remove(&var);
                progressed = true;
            }
        }
        if !progressed {
            let vars: Vec<Rc<str>> = unresolved.iter().cloned().collect();
            let constraints = preds
                .iter()
                .filter(|p| p.free_vars().iter().any(|v| unresolved.contains(v)))
                .cloned()
                .collect();
            return Err(DefaultError::Ambiguity { vars, constraints });
        }
    }
    // every retained constraint must now hold
    for p in preds {
        let p = subst.apply_pred(p);
        match solver.solve_pred(&p, &[]) {
            Ok(Solution::Holds(ev)) => {
                // pick up improvement from the re-solve
                if let (Pred::Minus(_, _, TypeExpr::Var(name, _)), Some(rem)) = (&p, ev.remainder())
                {
                    subst.bind(name.clone(), rem.clone());
                }
            }
            Ok(other) => {
                return Err(DefaultError::Residual {
                    pred: p,
                    solution: other,
                })
            }
            Err(e) => return Err(DefaultError::Solver(e)),
        }
    }
    report.subst = subst;
    Ok(report)
}

/// Match one constraint against a declaration pattern with `var` in head
/// position. The non-head pattern fields must come out ground.
fn match_decl(decl: &DefaultDecl, var: &Rc<str>, p: &Pred) -> Option<TypeExpr> {
    let (Pred::Minus(pf, pg, ph), Pred::Minus(f, g, h)) = (&decl.pattern, p) else {
        return None;
    };
    // head position must be exactly the ambiguous variable
    match (pf, f) {
        (TypeExpr::Var(hn, _), TypeExpr::Var(fn_, _)) if **hn == *decl.head && fn_ == var => {}
        _ => return None,
    }
    let mut binding = Subst::new();
    for (pat, actual) in [(pg, g), (ph, h)] {
        if !actual.is_ground() {
            return None;
        }
        match pat {
            TypeExpr::Var(n, _) => match binding.get(n) {
                Some(prev) if prev == actual => {}
                Some(_) => return None,
                None => binding.bind(n.clone(), actual.clone()),
            },
            other if other == actual => {}
            _ => return None,
        }
    }
    Some(binding.apply(&decl.template))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::SolverFlags;
    use crate::solver::Chains;
    use crate::types::{Kind, TypeExpr as T};

    fn paper_decl() -> DefaultDecl {
        DefaultDecl::from_minus_form("g", "h", "g", "h").unwrap()
    }

    fn chains() -> Chains {
        Chains::new(SolverFlags::default())
    }

    fn cst() -> T {
        T::atom("Const")
    }
    fn sum() -> T {
        T::atom("Sum")
    }
    fn fvar() -> T {
        T::var("f")
    }

    fn scheme(vars: &[&str], preds: Vec<Pred>, body: T) -> Scheme {
        Scheme {
            vars: vars.iter().map(|v| ((*v).into(), Kind::Functor)).collect(),
            preds,
            body,
        }
    }

    #[test]
    fn ambiguous_variable_in_composition() {
        let s = scheme(
            &["f"],
            vec![
                Pred::Leq(sum(), fvar()),
                Pred::Leq(cst(), fvar()),
                Pred::Minus(fvar(), cst(), sum()),
            ],
            T::Int,
        );
        let amb = find_ambiguous(&s);
        assert_eq!(amb.len(), 1);
        assert!(amb.contains("f"));
    }

    #[test]
    fn body_variables_are_not_ambiguous() {
        let s = scheme(&["f"], vec![Pred::Leq(cst(), fvar())], T::fix(fvar()));
        assert!(find_ambiguous(&s).is_empty());
        let s = scheme(&[], vec![], T::Int);
        assert!(find_ambiguous(&s).is_empty());
    }

    #[test]
    fn fd_determined_output_is_not_ambiguous() {
        // (f :-: Product = q, q :-: Sum = Const) => Fix f -> Int: q is
        // reachable from the body through the dependency.
        let s = scheme(
            &["f", "q"],
            vec![
                Pred::Minus(fvar(), T::atom("Product"), T::var("q")),
                Pred::Minus(T::var("q"), sum(), cst()),
            ],
            T::fun(T::fix(fvar()), T::Int),
        );
        assert!(find_ambiguous(&s).is_empty());
    }

    #[test]
    fn fd_input_position_stays_ambiguous() {
        // q sits in an input position of the first constraint
        let s = scheme(
            &["f", "q"],
            vec![
                Pred::Minus(fvar(), T::var("q"), T::atom("Product")),
                Pred::Minus(T::var("q"), cst(), sum()),
            ],
            T::fun(T::fix(fvar()), T::Int),
        );
        let amb = find_ambiguous(&s);
        assert_eq!(amb.len(), 1);
        assert!(amb.contains("q"));
    }

    #[test]
    fn paper_shaped_default_fires() {
        let preds = vec![
            Pred::Leq(sum(), fvar()),
            Pred::Leq(cst(), fvar()),
            Pred::Minus(fvar(), cst(), sum()),
        ];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f")].into_iter().collect();
        let solver = chains();
        let report = apply_defaults(&preds, &amb, &[paper_decl()], &solver).unwrap();
        assert_eq!(report.subst.apply(&fvar()), T::coprod(cst(), sum()));
    }

    #[test]
    fn no_declaration_reports_ambiguity() {
        let preds = vec![
            Pred::Leq(sum(), fvar()),
            Pred::Leq(cst(), fvar()),
            Pred::Minus(fvar(), cst(), sum()),
        ];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f")].into_iter().collect();
        let solver = chains();
        let err = apply_defaults(&preds, &amb, &[], &solver).unwrap_err();
        match err {
            DefaultError::Ambiguity { vars, constraints } => {
                assert_eq!(vars, vec![Rc::from("f")]);
                assert_eq!(constraints.len(), 3);
            }
            other => panic!("expected ambiguity, got {}", other),
        }
    }

    #[test]
    fn pattern_shape_absent_reports_ambiguity() {
        let preds = vec![Pred::Leq(cst(), fvar())];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f")].into_iter().collect();
        let solver = chains();
        let err = apply_defaults(&preds, &amb, &[paper_decl()], &solver).unwrap_err();
        assert!(matches!(err, DefaultError::Ambiguity { .. }));
    }

    #[test]
    fn chained_defaults_resolve_in_rounds() {
        // f :-: Product = q needs q defaulted first
        let preds = vec![
            Pred::Minus(fvar(), T::atom("Product"), T::var("q")),
            Pred::Minus(T::var("q"), sum(), cst()),
            Pred::Leq(T::atom("Product"), fvar()),
            Pred::Leq(sum(), fvar()),
            Pred::Leq(cst(), fvar()),
        ];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f"), Rc::from("q")].into_iter().collect();
        let solver = chains();
        let report = apply_defaults(&preds, &amb, &[paper_decl()], &solver).unwrap();
        assert_eq!(report.subst.apply(&T::var("q")), T::coprod(sum(), cst()));
        assert_eq!(
            report.subst.apply(&fvar()),
            T::coprod(T::atom("Product"), T::coprod(sum(), cst()))
        );
    }

    #[test]
    fn template_order_follows_declaration() {
        // default ((h :+: g) :-: g = h) puts the subtrahend on the right
        let flipped = DefaultDecl::from_minus_form("h", "g", "g", "h").unwrap();
        let solver = chains();
        flipped.validate(&solver).unwrap();
        let preds = vec![Pred::Minus(fvar(), cst(), sum())];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f")].into_iter().collect();
        let report = apply_defaults(&preds, &amb, &[flipped], &solver).unwrap();
        assert_eq!(report.subst.apply(&fvar()), T::coprod(sum(), cst()));
    }

    #[test]
    fn validation_accepts_the_subtraction_decl() {
        paper_decl().validate(&chains()).unwrap();
    }

    #[test]
    fn validation_rejects_bogus_shapes() {
        assert!(DefaultDecl::from_minus_form("g", "g", "g", "g").is_err());
        assert!(DefaultDecl::from_minus_form("g", "h", "g", "g").is_err());
    }

    #[test]
    fn determinism_under_predicate_order() {
        let mut preds = vec![
            Pred::Leq(sum(), fvar()),
            Pred::Minus(fvar(), cst(), sum()),
            Pred::Leq(cst(), fvar()),
        ];
        let amb: BTreeSet<Rc<str>> = [Rc::from("f")].into_iter().collect();
        let solver = chains();
        let first = apply_defaults(&preds, &amb, &[paper_decl()], &solver).unwrap();
        preds.reverse();
        let second = apply_defaults(&preds, &amb, &[paper_decl()], &solver).unwrap();
        assert_eq!(first.subst.apply(&fvar()), second.subst.apply(&fvar()));
    }
}
