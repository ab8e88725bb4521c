//! Canonical rendering of schemes: quantified variables are renamed a, b, c,
//! ... by first occurrence (body first, then constraints in inference order)
//! and the rendered constraints are sorted lexicographically, so output is
//! byte-stable for a fixed input.

use crate::types::{Pred, Scheme, Subst, TypeExpr};
use std::collections::BTreeSet;
use std::rc::Rc;

fn canonical_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    let round = i / 26;
    if round == 0 {
        letter.to_string()
    } else {
        format!("{}{}", letter, round)
    }
}

fn occurrence_order(t: &TypeExpr, seen: &mut Vec<Rc<str>>) {
    match t {
        TypeExpr::Var(n, _) => {
            if !seen.iter().any(|s| s == n) {
                seen.push(n.clone());
            }
        }
        TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => {}
        TypeExpr::Coprod(a, b)
        | TypeExpr::Fun(a, b)
        | TypeExpr::Pair(a, b)
        | TypeExpr::App(a, b) => {
            occurrence_order(a, seen);
            occurrence_order(b, seen);
        }
        TypeExpr::Fix(a) | TypeExpr::Maybe(a) => occurrence_order(a, seen),
        TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
            for a in args {
                occurrence_order(a, seen);
            }
        }
    }
}

fn pred_occurrence_order(p: &Pred, seen: &mut Vec<Rc<str>>) {
    match p {
        Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => {
            occurrence_order(a, seen);
            occurrence_order(b, seen);
        }
        Pred::Minus(a, b, c) => {
            occurrence_order(a, seen);
            occurrence_order(b, seen);
            occurrence_order(c, seen);
        }
        Pred::Functor(a) => occurrence_order(a, seen),
    }
}

/// The canonical form of a scheme, with renamed variables and sorted
/// constraints.
pub fn canonical_scheme(s: &Scheme) -> Scheme {
    let quantified: BTreeSet<Rc<str>> = s.vars.iter().map(|(n, _)| n.clone()).collect();
    let mut order: Vec<Rc<str>> = Vec::new();
    occurrence_order(&s.body, &mut order);
    for p in &s.preds {
        pred_occurrence_order(p, &mut order);
    }
    order.retain(|n| quantified.contains(n));
    let mut renaming = Subst::new();
    let mut new_vars = Vec::new();
    for (i, old) in order.iter().enumerate() {
        let kind = s
            .vars
            .iter()
            .find(|(n, _)| n == old)
            .map(|(_, k)| *k)
            .unwrap_or(crate::types::Kind::Functor);
        let fresh: Rc<str> = canonical_name(i).into();
        renaming.bind(old.clone(), TypeExpr::Var(fresh.clone(), kind));
        new_vars.push((fresh, kind));
    }
    let body = renaming.apply(&s.body);
    let mut preds: Vec<Pred> = s.preds.iter().map(|p| renaming.apply_pred(p)).collect();
    preds.sort_by_key(|p| p.to_string());
    preds.dedup();
    Scheme {
        vars: new_vars,
        preds,
        body,
    }
}

/// `forall a b. (P1, P2) => T`, omitting empty sections.
pub fn render_scheme(s: &Scheme) -> String {
    let canon = canonical_scheme(s);
    let mut out = String::new();
    if !canon.vars.is_empty() {
        out.push_str("forall ");
        let names: Vec<String> = canon.vars.iter().map(|(n, _)| n.to_string()).collect();
        out.push_str(&names.join(" "));
        out.push_str(". ");
    }
    if !canon.preds.is_empty() {
        let ps: Vec<String> = canon.preds.iter().map(|p| p.to_string()).collect();
        out.push('(');
        out.push_str(&ps.join(", "));
        out.push_str(") => ");
    }
    out.push_str(&canon.body.to_string());
    out
}

/// One `name : scheme` line as printed by the checker.
pub fn render_binding(name: &str, s: &Scheme) -> String {
    format!("{} : {}", name, render_scheme(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Kind;

    fn fvar(n: &str) -> TypeExpr {
        TypeExpr::var(n)
    }

    #[test]
    fn renames_by_body_occurrence_and_sorts_preds() {
        let s = Scheme {
            vars: vec![("t9".into(), Kind::Functor)],
            preds: vec![
                Pred::Leq(TypeExpr::atom("Sum"), fvar("t9")),
                Pred::Leq(TypeExpr::atom("Const"), fvar("t9")),
            ],
            body: TypeExpr::fix(fvar("t9")),
        };
        assert_eq!(
            render_scheme(&s),
            "forall a. (Const :<: a, Sum :<: a) => Fix a"
        );
    }

    #[test]
    fn subtraction_scheme_layout() {
        let s = Scheme {
            vars: vec![("t3".into(), Kind::Functor)],
            preds: vec![Pred::Minus(
                fvar("t3"),
                TypeExpr::atom("Const"),
                TypeExpr::atom("Sum"),
            )],
            body: TypeExpr::fun(TypeExpr::fix(fvar("t3")), TypeExpr::Int),
        };
        assert_eq!(
            render_binding("eval1", &s),
            "eval1 : forall a. (a :-: Const = Sum) => Fix a -> Int"
        );
    }

    #[test]
    fn monomorphic_schemes_render_bare() {
        let s = Scheme::mono(TypeExpr::Int);
        assert_eq!(render_scheme(&s), "Int");
    }

    #[test]
    fn duplicate_preds_collapse() {
        let s = Scheme {
            vars: vec![("x".into(), Kind::Functor)],
            preds: vec![
                Pred::Leq(TypeExpr::atom("Const"), fvar("x")),
                Pred::Leq(TypeExpr::atom("Const"), fvar("x")),
            ],
            body: TypeExpr::fix(fvar("x")),
        };
        assert_eq!(render_scheme(&s), "forall a. (Const :<: a) => Fix a");
    }
}
