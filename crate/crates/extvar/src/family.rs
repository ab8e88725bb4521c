//! Closed-family rewriting for membership, injection, and subtraction, with
//! the remainder computation `OutOf`, exposed through the same `Solution`
//! interface as the chain solver.
//!
//! Equation selection: equations are tried in source order against the
//! already-reduced arguments. A matching left-hand side fires; a left-hand
//! side that does not match but is unifiable with the goal over rational
//! trees (no occurs check) stops reduction — no later equation may fire; an
//! apart left-hand side is skipped. Unreduced family applications inside the
//! arguments are treated as opaque variables for the unifiability check.

use crate::chain::{TraceEvent, TraceHook, TraceOutcome};
use crate::types::{
    Evidence, InjWitness, Kind, MinusWitness, Pred, Solution, TypeExpr,
};
use crate::unify::{match_many, unifiable_infinitary_many, UnifyOutcome};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilyError {
    UnknownFamily(String),
    Unsupported(String),
}

impl fmt::Display for FamilyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyError::UnknownFamily(n) => write!(f, "unknown type family {}", n),
            FamilyError::Unsupported(m) => write!(f, "{}", m),
        }
    }
}

/// Result of reducing a type: either a normal form free of family
/// applications, or the application reduction got stuck at.
#[derive(Debug, Clone, PartialEq)]
pub enum ReduceOutcome {
    Reduced(TypeExpr),
    StuckAt(TypeExpr),
}

#[derive(Debug, Clone)]
struct FamEq {
    lhs: Vec<TypeExpr>,
    rhs: TypeExpr,
}

fn fv(name: &str) -> TypeExpr {
    TypeExpr::Var(name.into(), Kind::Functor)
}

fn wv(name: &str) -> TypeExpr {
    TypeExpr::Var(name.into(), Kind::Star)
}

fn cp(a: TypeExpr, b: TypeExpr) -> TypeExpr {
    TypeExpr::coprod(a, b)
}

fn yep() -> TypeExpr {
    TypeExpr::con("Yep", vec![])
}

fn nope() -> TypeExpr {
    TypeExpr::con("Nope", vec![])
}

fn refl() -> TypeExpr {
    TypeExpr::con("Refl", vec![])
}

fn eq(lhs: Vec<TypeExpr>, rhs: TypeExpr) -> FamEq {
    FamEq { lhs, rhs }
}

/// The fixed equation tables. Immutable after construction. Small ground
/// applications are memoized per instance (reduction is a pure function of
/// the redex).
pub struct FamilySolver {
    tables: HashMap<&'static str, Vec<FamEq>>,
    memo: std::cell::RefCell<HashMap<(u8, u128, u128), TypeExpr, crate::types::FpBuild>>,
    atoms: std::cell::RefCell<Vec<std::rc::Rc<str>>>,
}

fn family_code(name: &str) -> Option<u8> {
    match name {
        "IsIn" => Some(0),
        "Into" => Some(1),
        "Minus" => Some(2),
        _ => None,
    }
}

impl Default for FamilySolver {
    fn default() -> Self {
        FamilySolver::new()
    }
}

impl FamilySolver {
    pub fn new() -> FamilySolver {
        let mut tables = HashMap::new();
        tables.insert(
            "IsIn",
            vec![
                eq(vec![fv("f"), fv("f")], yep()),
                eq(
                    vec![fv("f"), cp(fv("g"), fv("h"))],
                    TypeExpr::fam(
                        "Or",
                        vec![
                            TypeExpr::fam("IsIn", vec![fv("f"), fv("g")]),
                            TypeExpr::fam("IsIn", vec![fv("f"), fv("h")]),
                        ],
                    ),
                ),
                eq(vec![fv("f"), fv("g")], nope()),
            ],
        );
        tables.insert(
            "Or",
            vec![
                eq(vec![nope(), nope()], nope()),
                eq(vec![wv("b"), wv("c")], yep()),
            ],
        );
        tables.insert(
            "Into",
            vec![
                eq(vec![fv("f"), fv("f")], refl()),
                eq(
                    vec![fv("f"), cp(fv("g"), fv("h"))],
                    TypeExpr::fam(
                        "Ifi",
                        vec![
                            TypeExpr::fam("Into", vec![fv("f"), fv("g")]),
                            TypeExpr::fam("IsIn", vec![fv("f"), fv("h")]),
                            TypeExpr::fam("Into", vec![fv("f"), fv("h")]),
                            TypeExpr::fam("IsIn", vec![fv("f"), fv("g")]),
                        ],
                    ),
                ),
                eq(vec![fv("f"), fv("g")], nope()),
            ],
        );
        tables.insert(
            "Ifi",
            vec![
                eq(vec![nope(), wv("inr"), nope(), wv("inl")], nope()),
                eq(
                    vec![nope(), wv("inr"), wv("rp"), nope()],
                    TypeExpr::con("R", vec![wv("rp")]),
                ),
                eq(
                    vec![wv("lp"), nope(), wv("rp"), wv("inl")],
                    TypeExpr::con("L", vec![wv("lp")]),
                ),
                eq(vec![wv("lp"), wv("inr"), wv("rp"), wv("inl")], nope()),
            ],
        );
        tables.insert(
            "Minus",
            vec![
                eq(vec![fv("f"), fv("f")], nope()),
                eq(
                    vec![cp(fv("f"), fv("g")), fv("f")],
                    TypeExpr::con("Onl", vec![fv("g")]),
                ),
                eq(
                    vec![cp(fv("f"), fv("g")), fv("g")],
                    TypeExpr::con("Onr", vec![fv("f")]),
                ),
                eq(
                    vec![cp(fv("f"), fv("g")), fv("h")],
                    TypeExpr::fam(
                        "Ifm",
                        vec![
                            fv("g"),
                            TypeExpr::fam("Minus", vec![fv("f"), fv("h")]),
                            TypeExpr::fam("IsIn", vec![fv("h"), fv("g")]),
                            fv("f"),
                            TypeExpr::fam("Minus", vec![fv("g"), fv("h")]),
                            TypeExpr::fam("IsIn", vec![fv("h"), fv("f")]),
                        ],
                    ),
                ),
                eq(vec![fv("f"), fv("g")], nope()),
            ],
        );
        tables.insert(
            "Ifm",
            vec![
                eq(
                    vec![fv("g"), nope(), wv("inr"), fv("f"), nope(), wv("inl")],
                    nope(),
                ),
                eq(
                    vec![fv("g"), nope(), wv("inr"), fv("f"), wv("rp"), nope()],
                    TypeExpr::con("Ri", vec![fv("f"), wv("rp")]),
                ),
                eq(
                    vec![fv("g"), wv("lp"), nope(), fv("f"), wv("rp"), wv("inl")],
                    TypeExpr::con("Le", vec![fv("g"), wv("lp")]),
                ),
                eq(
                    vec![fv("g"), wv("lp"), wv("inr"), fv("f"), wv("rp"), wv("inl")],
                    nope(),
                ),
            ],
        );
        tables.insert(
            "OutOf",
            vec![
                eq(vec![TypeExpr::con("Onl", vec![fv("x")])], fv("x")),
                eq(vec![TypeExpr::con("Onr", vec![fv("x")])], fv("x")),
                eq(
                    vec![TypeExpr::con("Le", vec![fv("f"), wv("p")])],
                    cp(TypeExpr::fam("OutOf", vec![wv("p")]), fv("f")),
                ),
                eq(
                    vec![TypeExpr::con("Ri", vec![fv("f"), wv("p")])],
                    cp(fv("f"), TypeExpr::fam("OutOf", vec![wv("p")])),
                ),
            ],
        );
        FamilySolver {
            tables,
            memo: Default::default(),
            atoms: Default::default(),
        }
    }

    /// Innermost-first rewriting to a normal form or a stuck application.
    pub fn reduce(&self, t: &TypeExpr) -> Result<ReduceOutcome, FamilyError> {
        let mut ctx = Ctx {
            trace: None,
            fresh: 0,
        };
        let normal = self.norm(t, &mut ctx)?;
        Ok(classify(normal))
    }

    pub fn reduce_traced(
        &self,
        t: &TypeExpr,
        hook: TraceHook<'_>,
    ) -> Result<ReduceOutcome, FamilyError> {
        let mut ctx = Ctx {
            trace: Some(hook),
            fresh: 0,
        };
        let normal = self.norm(t, &mut ctx)?;
        Ok(classify(normal))
    }

    fn norm(&self, t: &TypeExpr, ctx: &mut Ctx<'_>) -> Result<TypeExpr, FamilyError> {
        // redex-free subtrees are shared, not rebuilt
        if !t.contains_fam() {
            return Ok(t.clone());
        }
        match t {
            TypeExpr::Fam(name, args) => {
                let key = if ctx.trace.is_none() && args.len() == 2 {
                    family_code(name).and_then(|code| {
                        let mut atoms = self.atoms.borrow_mut();
                        let ka = args[0].fingerprint(&mut atoms)?;
                        let kb = args[1].fingerprint(&mut atoms)?;
                        if crate::chain::both_small(ka, kb) {
                            Some((code, ka, kb))
                        } else {
                            None
                        }
                    })
                } else {
                    None
                };
                if let Some(k) = &key {
                    if let Some(hit) = self.memo.borrow().get(k) {
                        return Ok(hit.clone());
                    }
                }
                let mut reduced_args = Vec::with_capacity(args.len());
                for a in args {
                    reduced_args.push(self.norm(a, ctx)?);
                }
                let eqs = self
                    .tables
                    .get(&**name)
                    .ok_or_else(|| FamilyError::UnknownFamily(name.to_string()))?;
                let args_ground = reduced_args.iter().all(|a| a.is_ground());
                let needs_rename = !args_ground;
                let flat = if args_ground {
                    Vec::new()
                } else {
                    flatten_fams(&reduced_args)
                };
                for (i, e) in eqs.iter().enumerate() {
                    let owned;
                    let e = if needs_rename {
                        ctx.fresh += 1;
                        owned = FamEq {
                            lhs: e.lhs.iter().map(|p| rename(p, ctx.fresh)).collect(),
                            rhs: rename(&e.rhs, ctx.fresh),
                        };
                        &owned
                    } else {
                        e
                    };
                    match match_many(&e.lhs, &reduced_args) {
                        UnifyOutcome::Unifier(s) => {
                            ctx.emit(name, i, TraceOutcome::Matched, &reduced_args);
                            let instantiated = s.apply(&e.rhs);
                            let out = self.norm(&instantiated, ctx)?;
                            if let Some(k) = key {
                                self.memo.borrow_mut().insert(k, out.clone());
                            }
                            return Ok(out);
                        }
                        UnifyOutcome::NoUnifier(_) => {
                            // ground arguments that do not match are apart
                            if !args_ground && unifiable_infinitary_many(&e.lhs, &flat) {
                                ctx.emit(name, i, TraceOutcome::Stuck, &reduced_args);
                                return Ok(TypeExpr::Fam(name.clone(), reduced_args));
                            }
                            ctx.emit(name, i, TraceOutcome::Apart, &reduced_args);
                        }
                    }
                }
                // Only reachable for OutOf applied to a non-witness.
                Ok(TypeExpr::Fam(name.clone(), reduced_args))
            }
            TypeExpr::Coprod(a, b) => Ok(TypeExpr::coprod(self.norm(a, ctx)?, self.norm(b, ctx)?)),
            TypeExpr::Con(n, args) => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    out.push(self.norm(a, ctx)?);
                }
                Ok(TypeExpr::Con(n.clone(), out))
            }
            TypeExpr::Fix(a) => Ok(TypeExpr::fix(self.norm(a, ctx)?)),
            TypeExpr::Fun(a, b) => Ok(TypeExpr::fun(self.norm(a, ctx)?, self.norm(b, ctx)?)),
            TypeExpr::Pair(a, b) => Ok(TypeExpr::pair(self.norm(a, ctx)?, self.norm(b, ctx)?)),
            TypeExpr::App(a, b) => Ok(TypeExpr::app(self.norm(a, ctx)?, self.norm(b, ctx)?)),
            TypeExpr::Maybe(a) => Ok(TypeExpr::maybe(self.norm(a, ctx)?)),
            other => Ok(other.clone()),
        }
    }

    pub fn solve(&self, p: &Pred) -> Result<Solution, FamilyError> {
        let mut ctx = Ctx {
            trace: None,
            fresh: 0,
        };
        self.solve_in(p, &mut ctx)
    }

    pub fn solve_traced(&self, p: &Pred, hook: TraceHook<'_>) -> Result<Solution, FamilyError> {
        let mut ctx = Ctx {
            trace: Some(hook),
            fresh: 0,
        };
        self.solve_in(p, &mut ctx)
    }

    fn solve_in(&self, p: &Pred, ctx: &mut Ctx<'_>) -> Result<Solution, FamilyError> {
        match p {
            Pred::In(f, g) => {
                let out = self.norm(&TypeExpr::fam("IsIn", vec![f.clone(), g.clone()]), ctx)?;
                Ok(flag_solution(classify(out)))
            }
            Pred::NotIn(f, g) => {
                let out = self.norm(&TypeExpr::fam("IsIn", vec![f.clone(), g.clone()]), ctx)?;
                Ok(match flag_solution(classify(out)) {
                    Solution::Holds(_) => Solution::Fails,
                    Solution::Fails => Solution::Holds(Evidence::Unit),
                    stuck => stuck,
                })
            }
            Pred::Leq(f, g) => {
                let out = self.norm(&TypeExpr::fam("Into", vec![f.clone(), g.clone()]), ctx)?;
                match classify(out) {
                    ReduceOutcome::StuckAt(at) => Ok(stuck_at(at)),
                    ReduceOutcome::Reduced(t) => match con_to_inj(&t) {
                        Some(w) => Ok(Solution::Holds(Evidence::Inj(w))),
                        None => Ok(Solution::Fails),
                    },
                }
            }
            Pred::Minus(f, g, goal_out) => {
                let out = self.norm(&TypeExpr::fam("Minus", vec![f.clone(), g.clone()]), ctx)?;
                match classify(out) {
                    ReduceOutcome::StuckAt(at) => Ok(stuck_at(at)),
                    ReduceOutcome::Reduced(t) => match con_to_minus(&t) {
                        Some(w) => {
                            let rem =
                                self.norm(&TypeExpr::fam("OutOf", vec![t.clone()]), ctx)?;
                            match classify(rem) {
                                ReduceOutcome::StuckAt(at) => Ok(stuck_at(at)),
                                ReduceOutcome::Reduced(rem) => {
                                    if !goal_out.is_var() && goal_out != &rem {
                                        return Ok(Solution::Fails);
                                    }
                                    Ok(Solution::Holds(Evidence::Minus(w, rem)))
                                }
                            }
                        }
                        None => Ok(Solution::Fails),
                    },
                }
            }
            Pred::Functor(_) => Err(FamilyError::Unsupported(
                "the Functor predicate has no family encoding".to_string(),
            )),
        }
    }
}

struct Ctx<'a> {
    trace: Option<TraceHook<'a>>,
    fresh: u64,
}

impl Ctx<'_> {
    fn emit(&mut self, family: &str, index: usize, outcome: TraceOutcome, args: &[TypeExpr]) {
        if let Some(hook) = self.trace.as_mut() {
            let rendered: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            hook(TraceEvent {
                id: format!("{}.{}", family, index + 1),
                goal: format!("{} {}", family, rendered.join(" ")),
                outcome,
            });
        }
    }
}

fn rename(t: &TypeExpr, n: u64) -> TypeExpr {
    match t {
        TypeExpr::Var(name, k) => TypeExpr::Var(format!("{}#{}", name, n).into(), *k),
        TypeExpr::Coprod(a, b) => TypeExpr::coprod(rename(a, n), rename(b, n)),
        TypeExpr::Fam(name, args) => {
            TypeExpr::Fam(name.clone(), args.iter().map(|a| rename(a, n)).collect())
        }
        TypeExpr::Con(name, args) => {
            TypeExpr::Con(name.clone(), args.iter().map(|a| rename(a, n)).collect())
        }
        other => other.clone(),
    }
}

/// Replace each distinct unreduced family application with a fresh opaque
/// variable, so apartness treats it as "could be anything".
fn flatten_fams(args: &[TypeExpr]) -> Vec<TypeExpr> {
    let mut seen: HashMap<TypeExpr, TypeExpr> = HashMap::new();
    let mut counter = 0u32;
    args.iter().map(|a| flatten_one(a, &mut seen, &mut counter)).collect()
}

fn flatten_one(
    t: &TypeExpr,
    seen: &mut HashMap<TypeExpr, TypeExpr>,
    counter: &mut u32,
) -> TypeExpr {
    match t {
        TypeExpr::Fam(_, _) => seen
            .entry(t.clone())
            .or_insert_with(|| {
                *counter += 1;
                TypeExpr::Var(format!("%fam{}", counter).into(), t.kind())
            })
            .clone(),
        TypeExpr::Coprod(a, b) => TypeExpr::coprod(
            flatten_one(a, seen, counter),
            flatten_one(b, seen, counter),
        ),
        TypeExpr::Con(n, args) => TypeExpr::Con(
            n.clone(),
            args.iter().map(|a| flatten_one(a, seen, counter)).collect(),
        ),
        other => other.clone(),
    }
}

fn classify(t: TypeExpr) -> ReduceOutcome {
    match find_stuck(&t) {
        Some(at) => ReduceOutcome::StuckAt(at),
        None => ReduceOutcome::Reduced(t),
    }
}

fn find_stuck(t: &TypeExpr) -> Option<TypeExpr> {
    match t {
        TypeExpr::Fam(_, args) => {
            for a in args {
                if let Some(inner) = find_stuck(a) {
                    return Some(inner);
                }
            }
            Some(t.clone())
        }
        TypeExpr::Coprod(a, b)
        | TypeExpr::Fun(a, b)
        | TypeExpr::Pair(a, b)
        | TypeExpr::App(a, b) => find_stuck(a).or_else(|| find_stuck(b)),
        TypeExpr::Fix(a) | TypeExpr::Maybe(a) => find_stuck(a),
        TypeExpr::Con(_, args) => args.iter().find_map(find_stuck),
        _ => None,
    }
}

fn stuck_at(at: TypeExpr) -> Solution {
    Solution::Stuck(format!("does not rewrite until concrete: {}", at))
}

fn flag_solution(out: ReduceOutcome) -> Solution {
    match out {
        ReduceOutcome::StuckAt(at) => stuck_at(at),
        ReduceOutcome::Reduced(t) => {
            if t == yep() {
                Solution::Holds(Evidence::Unit)
            } else {
                Solution::Fails
            }
        }
    }
}

fn con_to_inj(t: &TypeExpr) -> Option<InjWitness> {
    match t {
        TypeExpr::Con(n, args) => match (&**n, args.as_slice()) {
            ("Refl", []) => Some(InjWitness::Refl),
            ("L", [p]) => Some(InjWitness::l(con_to_inj(p)?)),
            ("R", [p]) => Some(InjWitness::r(con_to_inj(p)?)),
            _ => None,
        },
        _ => None,
    }
}

fn con_to_minus(t: &TypeExpr) -> Option<MinusWitness> {
    match t {
        TypeExpr::Con(n, args) => match (&**n, args.as_slice()) {
            ("Onl", [rest]) => Some(MinusWitness::Onl(rest.clone())),
            ("Onr", [rest]) => Some(MinusWitness::Onr(rest.clone())),
            ("Le", [sib, p]) => Some(MinusWitness::le(sib.clone(), con_to_minus(p)?)),
            ("Ri", [sib, p]) => Some(MinusWitness::ri(sib.clone(), con_to_minus(p)?)),
            _ => None,
        },
        _ => None,
    }
}

/// Encode a subtraction witness back into its type-level constructor form.
pub fn minus_to_con(w: &MinusWitness) -> Option<TypeExpr> {
    match w {
        MinusWitness::Onl(rest) => Some(TypeExpr::con("Onl", vec![rest.clone()])),
        MinusWitness::Onr(rest) => Some(TypeExpr::con("Onr", vec![rest.clone()])),
        MinusWitness::Le(sib, p) => Some(TypeExpr::con("Le", vec![sib.clone(), minus_to_con(p)?])),
        MinusWitness::Ri(sib, p) => Some(TypeExpr::con("Ri", vec![sib.clone(), minus_to_con(p)?])),
        // No family translation exists for the generalized clauses.
        MinusWitness::Dist(_, _) => None,
    }
}

/// One-shot reduction with fresh tables.
pub fn reduce(t: &TypeExpr) -> Result<ReduceOutcome, FamilyError> {
    FamilySolver::new().reduce(t)
}

/// One-shot predicate solving with fresh tables.
pub fn solve_tf(p: &Pred) -> Result<Solution, FamilyError> {
    FamilySolver::new().solve(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{out_of, TypeExpr as T};

    fn a() -> T {
        T::atom("A")
    }
    fn b() -> T {
        T::atom("B")
    }
    fn c() -> T {
        T::atom("C")
    }
    fn d() -> T {
        T::atom("D")
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
    fn into(x: T, y: T) -> T {
        T::fam("Into", vec![x, y])
    }
    fn reduced(t: T) -> T {
        match reduce(&t).unwrap() {
            ReduceOutcome::Reduced(r) => r,
            ReduceOutcome::StuckAt(at) => panic!("stuck at {}", at),
        }
    }

    #[test]
    fn into_finds_nested_path() {
        // L (R Refl) for the middle leaf of a left-nested sum
        let r = reduced(into(b(), cp(cp(a(), b()), c())));
        assert_eq!(r, T::con("L", vec![T::con("R", vec![T::con("Refl", vec![])])]));
    }

    #[test]
    fn into_rejects_missing_atom() {
        assert_eq!(reduced(into(d(), cp(a(), b()))), T::con("Nope", vec![]));
    }

    #[test]
    fn into_reflexive_on_the_left() {
        let r = reduced(into(a(), cp(a(), b())));
        assert_eq!(r, T::con("L", vec![T::con("Refl", vec![])]));
        // the dispatch step: lp = Refl, inr = Nope, rp = Nope, inl = Yep
        let step = T::fam(
            "Ifi",
            vec![
                T::con("Refl", vec![]),
                T::con("Nope", vec![]),
                T::con("Nope", vec![]),
                T::con("Yep", vec![]),
            ],
        );
        assert_eq!(reduced(step), T::con("L", vec![T::con("Refl", vec![])]));
    }

    #[test]
    fn into_rejects_duplicates() {
        assert_eq!(reduced(into(a(), cp(a(), a()))), T::con("Nope", vec![]));
        // the dispatch step: Ifi Refl Yep Refl Yep rewrites to Nope
        let step = T::fam(
            "Ifi",
            vec![
                T::con("Refl", vec![]),
                T::con("Yep", vec![]),
                T::con("Refl", vec![]),
                T::con("Yep", vec![]),
            ],
        );
        assert_eq!(reduced(step), T::con("Nope", vec![]));
    }

    #[test]
    fn minus_removes_middle_leaf() {
        let r = reduced(T::fam("Minus", vec![cp(cp(a(), b()), c()), b()]));
        assert_eq!(
            r,
            T::con("Le", vec![c(), T::con("Onr", vec![a()])])
        );
        let rem = reduced(T::fam("OutOf", vec![r]));
        assert_eq!(rem, cp(a(), c()));
    }

    #[test]
    fn into_stuck_on_open_reflexive_overlap() {
        let r = reduce(&into(f(), cp(f(), g()))).unwrap();
        assert!(matches!(r, ReduceOutcome::StuckAt(_)));
    }

    #[test]
    fn or_short_circuits_when_apart() {
        // Or <stuck> Yep rewrites to Yep: equation one is apart on the tuple
        let t = T::fam(
            "Or",
            vec![T::fam("IsIn", vec![f(), g()]), T::con("Yep", vec![])],
        );
        assert_eq!(reduced(t), T::con("Yep", vec![]));
    }

    #[test]
    fn unknown_family_is_an_error() {
        let t = T::fam("Frob", vec![a()]);
        assert!(matches!(
            reduce(&t),
            Err(FamilyError::UnknownFamily(_))
        ));
    }

    #[test]
    fn solve_tf_injection_examples() {
        let sol = solve_tf(&Pred::Leq(a(), cp(a(), b()))).unwrap();
        assert_eq!(
            sol,
            Solution::Holds(Evidence::Inj(InjWitness::l(InjWitness::Refl)))
        );
        let sol = solve_tf(&Pred::Minus(cp(cp(a(), b()), c()), b(), T::var("h"))).unwrap();
        let Solution::Holds(Evidence::Minus(w, rem)) = &sol else {
            panic!("expected evidence, got {:?}", sol);
        };
        assert_eq!(*w, MinusWitness::le(c(), MinusWitness::Onr(a())));
        assert_eq!(*rem, cp(a(), c()));
        assert_eq!(*rem, out_of(w));
    }

    #[test]
    fn solve_tf_cannot_use_negative_assumptions() {
        // Stuck even though a chain could discharge it from In f g fails
        let sol = solve_tf(&Pred::Leq(f(), cp(f(), g()))).unwrap();
        assert!(sol.is_stuck());
    }

    #[test]
    fn reflexive_minus_rewrites_to_nope_even_open() {
        let sol = solve_tf(&Pred::Minus(f(), f(), T::var("h"))).unwrap();
        assert_eq!(sol, Solution::Fails);
    }

    #[test]
    fn minus_ground_out_reconciles() {
        let ok = solve_tf(&Pred::Minus(cp(a(), b()), a(), b())).unwrap();
        assert!(ok.holds());
        let bad = solve_tf(&Pred::Minus(cp(a(), b()), a(), c())).unwrap();
        assert_eq!(bad, Solution::Fails);
    }

    #[test]
    fn trace_reports_equation_attempts() {
        let solver = FamilySolver::new();
        let mut lines = Vec::new();
        let mut hook = |e: TraceEvent| lines.push(format!("try {}: {}", e.id, e.outcome));
        solver
            .solve_traced(&Pred::In(d(), cp(a(), b())), &mut hook)
            .unwrap();
        assert_eq!(
            lines,
            vec![
                "try IsIn.1: apart",
                "try IsIn.2: matched",
                "try IsIn.1: apart",
                "try IsIn.2: apart",
                "try IsIn.3: matched",
                "try IsIn.1: apart",
                "try IsIn.2: apart",
                "try IsIn.3: matched",
                "try Or.1: matched",
            ]
        );
    }
}
