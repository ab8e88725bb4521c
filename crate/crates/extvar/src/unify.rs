//! First-order unification: most general unifiers (occurs check enforced),
//! one-way matching, and unifiability over rational trees (no occurs check),
//! which decides apartness for closed-family equation selection.

use crate::types::{Kind, Subst, TypeExpr};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub enum UnifyOutcome {
    Unifier(Subst),
    NoUnifier(NoUnify),
}

/// Why unification failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoUnify {
    Clash,
    Occurs,
    Kind,
}

impl UnifyOutcome {
    pub fn unifier(self) -> Option<Subst> {
        match self {
            UnifyOutcome::Unifier(s) => Some(s),
            UnifyOutcome::NoUnifier(_) => None,
        }
    }

    pub fn is_unifier(&self) -> bool {
        matches!(self, UnifyOutcome::Unifier(_))
    }
}

fn kind_compatible(var_kind: Kind, t: &TypeExpr) -> bool {
    match t {
        TypeExpr::Var(_, k) => *k == var_kind,
        other => other.kind() == var_kind,
    }
}

/// Most general unifier under finite trees.
pub fn mgu(t1: &TypeExpr, t2: &TypeExpr) -> UnifyOutcome {
    let mut s = Subst::new();
    match unify_into(t1, t2, &mut s) {
        Ok(()) => UnifyOutcome::Unifier(s),
        Err(e) => UnifyOutcome::NoUnifier(e),
    }
}

/// Unification where `rigid` variables stand for fixed unknown types: a
/// rigid variable unifies only with itself or with a bindable variable.
/// Used when checking an inferred type against a signature.
pub fn mgu_rigid(t1: &TypeExpr, t2: &TypeExpr, rigid: &dyn Fn(&str) -> bool) -> UnifyOutcome {
    let mut s = Subst::new();
    match unify_rigid_into(t1, t2, &mut s, rigid) {
        Ok(()) => UnifyOutcome::Unifier(s),
        Err(e) => UnifyOutcome::NoUnifier(e),
    }
}

fn unify_rigid_into(
    t1: &TypeExpr,
    t2: &TypeExpr,
    s: &mut Subst,
    rigid: &dyn Fn(&str) -> bool,
) -> Result<(), NoUnify> {
    let a = s.apply(t1);
    let b = s.apply(t2);
    match (&a, &b) {
        (TypeExpr::Var(n1, _), TypeExpr::Var(n2, _)) if n1 == n2 => Ok(()),
        (TypeExpr::Var(n1, k1), TypeExpr::Var(n2, k2)) => {
            if k1 != k2 {
                Err(NoUnify::Kind)
            } else if !rigid(n1) {
                s.bind(n1.clone(), b.clone());
                Ok(())
            } else if !rigid(n2) {
                s.bind(n2.clone(), a.clone());
                Ok(())
            } else {
                Err(NoUnify::Clash)
            }
        }
        (TypeExpr::Var(n, k), other) | (other, TypeExpr::Var(n, k)) => {
            if rigid(n) {
                Err(NoUnify::Clash)
            } else if other.contains_var(n) {
                Err(NoUnify::Occurs)
            } else if !kind_compatible(*k, other) {
                Err(NoUnify::Kind)
            } else {
                s.bind(n.clone(), other.clone());
                Ok(())
            }
        }
        _ => decompose_with(&a, &b, s, &mut |x, y, s| unify_rigid_into(x, y, s, rigid)),
    }
}

/// Simultaneous mgu of two argument lists.
pub fn mgu_many(ts1: &[TypeExpr], ts2: &[TypeExpr]) -> UnifyOutcome {
    if ts1.len() != ts2.len() {
        return UnifyOutcome::NoUnifier(NoUnify::Clash);
    }
    let mut s = Subst::new();
    for (a, b) in ts1.iter().zip(ts2) {
        if let Err(e) = unify_into(a, b, &mut s) {
            return UnifyOutcome::NoUnifier(e);
        }
    }
    UnifyOutcome::Unifier(s)
}

fn unify_into(t1: &TypeExpr, t2: &TypeExpr, s: &mut Subst) -> Result<(), NoUnify> {
    let a = s.apply(t1);
    let b = s.apply(t2);
    match (&a, &b) {
        (TypeExpr::Var(n1, _), TypeExpr::Var(n2, _)) if n1 == n2 => Ok(()),
        (TypeExpr::Var(n, k), other) | (other, TypeExpr::Var(n, k)) => {
            if other.contains_var(n) {
                Err(NoUnify::Occurs)
            } else if !kind_compatible(*k, other) {
                Err(NoUnify::Kind)
            } else {
                s.bind(n.clone(), other.clone());
                Ok(())
            }
        }
        _ => decompose_with(&a, &b, s, &mut unify_into),
    }
}

fn decompose_with(
    a: &TypeExpr,
    b: &TypeExpr,
    s: &mut Subst,
    rec: &mut dyn FnMut(&TypeExpr, &TypeExpr, &mut Subst) -> Result<(), NoUnify>,
) -> Result<(), NoUnify> {
    match (a, b) {
        (TypeExpr::Atom(n1, k1), TypeExpr::Atom(n2, k2)) => {
            if n1 == n2 && k1 == k2 {
                Ok(())
            } else {
                Err(NoUnify::Clash)
            }
        }
        (TypeExpr::Int, TypeExpr::Int) | (TypeExpr::Bool, TypeExpr::Bool) => Ok(()),
        (TypeExpr::Coprod(a1, b1), TypeExpr::Coprod(a2, b2))
        | (TypeExpr::Fun(a1, b1), TypeExpr::Fun(a2, b2))
        | (TypeExpr::Pair(a1, b1), TypeExpr::Pair(a2, b2))
        | (TypeExpr::App(a1, b1), TypeExpr::App(a2, b2)) => {
            rec(a1, a2, s)?;
            rec(b1, b2, s)
        }
        (TypeExpr::Fix(a1), TypeExpr::Fix(a2)) | (TypeExpr::Maybe(a1), TypeExpr::Maybe(a2)) => {
            rec(a1, a2, s)
        }
        (TypeExpr::Con(n1, args1), TypeExpr::Con(n2, args2)) => {
            if n1 != n2 || args1.len() != args2.len() {
                return Err(NoUnify::Clash);
            }
            for (x, y) in args1.iter().zip(args2) {
                rec(x, y, s)?;
            }
            Ok(())
        }
        // Unreduced family applications are opaque; callers flatten them to
        // fresh variables before asking about unifiability.
        (TypeExpr::Fam(n1, args1), TypeExpr::Fam(n2, args2)) => {
            if n1 != n2 || args1.len() != args2.len() {
                return Err(NoUnify::Clash);
            }
            for (x, y) in args1.iter().zip(args2) {
                rec(x, y, s)?;
            }
            Ok(())
        }
        _ => Err(NoUnify::Clash),
    }
}

/// One-way matching: a substitution over `pattern`'s variables only, such
/// that the instantiated pattern equals `target`. Repeated pattern variables
/// must match equal subterms; target variables are treated as constants.
pub fn match_onto(pattern: &TypeExpr, target: &TypeExpr) -> UnifyOutcome {
    let mut s = Vec::new();
    match match_into(pattern, target, &mut s) {
        Ok(()) => UnifyOutcome::Unifier(Subst::from_match_bindings(s)),
        Err(e) => UnifyOutcome::NoUnifier(e),
    }
}

/// Simultaneous matching of argument lists (shared bindings).
pub fn match_many(pats: &[TypeExpr], targets: &[TypeExpr]) -> UnifyOutcome {
    if pats.len() != targets.len() {
        return UnifyOutcome::NoUnifier(NoUnify::Clash);
    }
    let mut s = Vec::new();
    for (p, t) in pats.iter().zip(targets) {
        if let Err(e) = match_into(p, t, &mut s) {
            return UnifyOutcome::NoUnifier(e);
        }
    }
    UnifyOutcome::Unifier(Subst::from_match_bindings(s))
}

fn match_into(
    pattern: &TypeExpr,
    target: &TypeExpr,
    s: &mut Vec<(Rc<str>, TypeExpr)>,
) -> Result<(), NoUnify> {
    match pattern {
        TypeExpr::Var(n, k) => match s.iter().find(|(m, _)| m == n) {
            Some((_, prev)) => {
                if prev == target {
                    Ok(())
                } else {
                    Err(NoUnify::Clash)
                }
            }
            None => {
                if !kind_compatible(*k, target) {
                    return Err(NoUnify::Kind);
                }
                s.push((n.clone(), target.clone()));
                Ok(())
            }
        },
        _ => match (pattern, target) {
            (TypeExpr::Atom(n1, k1), TypeExpr::Atom(n2, k2)) => {
                if n1 == n2 && k1 == k2 {
                    Ok(())
                } else {
                    Err(NoUnify::Clash)
                }
            }
            (TypeExpr::Int, TypeExpr::Int) | (TypeExpr::Bool, TypeExpr::Bool) => Ok(()),
            (TypeExpr::Coprod(a1, b1), TypeExpr::Coprod(a2, b2))
            | (TypeExpr::Fun(a1, b1), TypeExpr::Fun(a2, b2))
            | (TypeExpr::Pair(a1, b1), TypeExpr::Pair(a2, b2))
            | (TypeExpr::App(a1, b1), TypeExpr::App(a2, b2)) => {
                match_into(a1, a2, s)?;
                match_into(b1, b2, s)
            }
            (TypeExpr::Fix(a1), TypeExpr::Fix(a2))
            | (TypeExpr::Maybe(a1), TypeExpr::Maybe(a2)) => match_into(a1, a2, s),
            (TypeExpr::Con(n1, args1), TypeExpr::Con(n2, args2)) => {
                if n1 != n2 || args1.len() != args2.len() {
                    return Err(NoUnify::Clash);
                }
                for (x, y) in args1.iter().zip(args2) {
                    match_into(x, y, s)?;
                }
                Ok(())
            }
            _ => Err(NoUnify::Clash),
        },
    }
}

/// Unifiability over rational trees: the occurs check is dropped and cyclic
/// bindings are tolerated. Only the boolean is exposed; no infinite type is
/// ever materialized. Bindings are kept unapplied and resolved one step at a
/// time, so every term reachable during the walk is a subterm of the inputs
/// and the visited set guarantees termination.
pub fn unifiable_infinitary(t1: &TypeExpr, t2: &TypeExpr) -> bool {
    let mut binds: HashMap<Rc<str>, TypeExpr> = HashMap::new();
    let mut seen: HashSet<(TypeExpr, TypeExpr)> = HashSet::new();
    uni(t1, t2, &mut binds, &mut seen)
}

/// Simultaneous infinitary unifiability of argument lists.
pub fn unifiable_infinitary_many(ts1: &[TypeExpr], ts2: &[TypeExpr]) -> bool {
    if ts1.len() != ts2.len() {
        return false;
    }
    let mut binds: HashMap<Rc<str>, TypeExpr> = HashMap::new();
    let mut seen: HashSet<(TypeExpr, TypeExpr)> = HashSet::new();
    ts1.iter().zip(ts2).all(|(a, b)| uni(a, b, &mut binds, &mut seen))
}

/// Two types that cannot be made equal under any substitution, even one
/// producing regular infinite trees.
pub fn apart(t1: &TypeExpr, t2: &TypeExpr) -> bool {
    !unifiable_infinitary(t1, t2)
}

fn walk<'a>(t: &'a TypeExpr, binds: &'a HashMap<Rc<str>, TypeExpr>) -> &'a TypeExpr {
    let mut cur = t;
    let mut hops = 0;
    while let TypeExpr::Var(n, _) = cur {
        match binds.get(n) {
            Some(next) => {
                cur = next;
                hops += 1;
                // A variable bound through a cycle of variables resolves to
                // itself; stop rather than spin.
                if hops > binds.len() {
                    return cur;
                }
            }
            None => return cur,
        }
    }
    cur
}

fn uni(
    t1: &TypeExpr,
    t2: &TypeExpr,
    binds: &mut HashMap<Rc<str>, TypeExpr>,
    seen: &mut HashSet<(TypeExpr, TypeExpr)>,
) -> bool {
    let a = walk(t1, binds).clone();
    let b = walk(t2, binds).clone();
    if a == b {
        return true;
    }
    let key = (a.clone(), b.clone());
    if !seen.insert(key) {
        // Coinductive: this pair is already in progress.
        return true;
    }
    match (&a, &b) {
        (TypeExpr::Var(n, k), other) | (other, TypeExpr::Var(n, k)) => {
            if !kind_compatible(*k, other) {
                return false;
            }
            binds.insert(n.clone(), other.clone());
            true
        }
        (TypeExpr::Atom(n1, k1), TypeExpr::Atom(n2, k2)) => n1 == n2 && k1 == k2,
        (TypeExpr::Int, TypeExpr::Int) | (TypeExpr::Bool, TypeExpr::Bool) => true,
        (TypeExpr::Coprod(a1, b1), TypeExpr::Coprod(a2, b2))
        | (TypeExpr::Fun(a1, b1), TypeExpr::Fun(a2, b2))
        | (TypeExpr::Pair(a1, b1), TypeExpr::Pair(a2, b2))
        | (TypeExpr::App(a1, b1), TypeExpr::App(a2, b2)) => {
            uni(a1, a2, binds, seen) && uni(b1, b2, binds, seen)
        }
        (TypeExpr::Fix(a1), TypeExpr::Fix(a2)) | (TypeExpr::Maybe(a1), TypeExpr::Maybe(a2)) => {
            uni(a1, a2, binds, seen)
        }
        (TypeExpr::Con(n1, args1), TypeExpr::Con(n2, args2))
        | (TypeExpr::Fam(n1, args1), TypeExpr::Fam(n2, args2)) => {
            n1 == n2
                && args1.len() == args2.len()
                && args1
                    .iter()
                    .zip(args2)
                    .all(|(x, y)| uni(x, y, binds, seen))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TypeExpr as T;

    fn a() -> T {
        T::atom("A")
    }
    fn b() -> T {
        T::atom("B")
    }
    fn c() -> T {
        T::atom("C")
    }
    fn f() -> T {
        T::var("f")
    }
    fn g() -> T {
        T::var("g")
    }
    fn cp(l: T, r: T) -> T {
        T::coprod(l, r)
    }

    #[test]
    fn mgu_binds_var() {
        let out = mgu(&f(), &cp(a(), b()));
        let s = out.unifier().unwrap();
        assert_eq!(s.apply(&f()), cp(a(), b()));
    }

    #[test]
    fn mgu_distinct_atoms_fail() {
        assert_eq!(mgu(&a(), &b()), UnifyOutcome::NoUnifier(NoUnify::Clash));
    }

    #[test]
    fn mgu_occurs_check() {
        assert_eq!(
            mgu(&f(), &cp(f(), g())),
            UnifyOutcome::NoUnifier(NoUnify::Occurs)
        );
    }

    #[test]
    fn mgu_result_unifies_both_sides() {
        let t1 = cp(f(), a());
        let t2 = cp(b(), g());
        let s = mgu(&t1, &t2).unifier().unwrap();
        assert_eq!(s.apply(&t1), s.apply(&t2));
    }

    #[test]
    fn match_nonlinear_requires_equality() {
        // In x x against In A A binds x once
        let p = cp(T::var("x"), T::var("x"));
        let t = cp(a(), a());
        assert!(match_onto(&p, &t).is_unifier());
        // x cannot be both A and g
        let t2 = cp(a(), g());
        assert!(!match_onto(&p, &t2).is_unifier());
    }

    #[test]
    fn match_decomposes_structure() {
        let p = cp(T::var("x"), T::var("y"));
        let t = cp(cp(a(), b()), c());
        let s = match_onto(&p, &t).unifier().unwrap();
        assert_eq!(s.apply(&T::var("x")), cp(a(), b()));
        assert_eq!(s.apply(&T::var("y")), c());
    }

    #[test]
    fn match_success_implies_mgu_success() {
        let p = cp(T::var("x"), T::var("y"));
        let t = cp(cp(a(), b()), c());
        let m = match_onto(&p, &t).unifier().unwrap();
        let u = mgu(&p, &t).unifier().unwrap();
        assert_eq!(m.apply(&p), u.apply(&p));
    }

    #[test]
    fn infinitary_tolerates_cycles() {
        assert!(unifiable_infinitary(&f(), &cp(f(), g())));
        assert!(apart(&a(), &cp(b(), c())));
        assert!(unifiable_infinitary(&cp(f(), a()), &cp(b(), g())));
    }

    #[test]
    fn infinitary_still_rejects_clashes() {
        assert!(!unifiable_infinitary(&a(), &b()));
        assert!(!unifiable_infinitary(&cp(a(), f()), &cp(b(), g())));
    }

    #[test]
    fn mgu_success_implies_infinitary() {
        let cases = vec![
            (f(), cp(a(), b())),
            (cp(f(), g()), cp(a(), b())),
            (T::fix(f()), T::fix(cp(a(), g()))),
        ];
        for (t1, t2) in cases {
            assert!(mgu(&t1, &t2).is_unifier());
            assert!(unifiable_infinitary(&t1, &t2));
        }
    }

    #[test]
    fn kinds_separate_variables() {
        let star = T::star_var("e");
        let fun = T::var("f");
        assert!(!mgu(&star, &fun).is_unifier());
        assert!(!mgu(&star, &a()).is_unifier());
        assert!(mgu(&T::star_var("e"), &T::Int).is_unifier());
    }
}
