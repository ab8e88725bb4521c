//! Kinded type expressions, predicates, substitutions, schemes, and the
//! evidence vocabulary shared by both solvers.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hasher;
use std::rc::Rc;

/// Hasher for memo keys that are already uniformly mixed fingerprints.
#[derive(Default)]
pub(crate) struct FpHasher(u64);

impl Hasher for FpHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 ^ u64::from(*b)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
    }

    fn write_u8(&mut self, v: u8) {
        self.0 = (self.0 ^ u64::from(v)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }

    fn write_u128(&mut self, v: u128) {
        self.0 = (self.0 ^ (v as u64)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 = (self.0 ^ ((v >> 64) as u64)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
}

pub(crate) type FpBuild = std::hash::BuildHasherDefault<FpHasher>;

/// The two kinds in play: ground types and functors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Star,
    Functor,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Star => write!(f, "*"),
            Kind::Functor => write!(f, "* -> *"),
        }
    }
}

/// Type expressions. Coproducts and their leaves live at kind `* -> *`;
/// `Fix` ties the knot and produces a ground type.
///
/// `App` is functor application (`f e`), which shows up in the types of the
/// injection and branching combinators. `Fam` and `Con` are internal to the
/// family solver: `Fam` is an unreduced family application, `Con` a type-level
/// constructor form (witness encodings such as `L p` or `Onl g`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Atom(Rc<str>, Kind),
    Var(Rc<str>, Kind),
    Coprod(Rc<TypeExpr>, Rc<TypeExpr>),
    Fix(Rc<TypeExpr>),
    Fun(Rc<TypeExpr>, Rc<TypeExpr>),
    Int,
    Bool,
    Pair(Rc<TypeExpr>, Rc<TypeExpr>),
    App(Rc<TypeExpr>, Rc<TypeExpr>),
    Maybe(Rc<TypeExpr>),
    Fam(Rc<str>, Vec<TypeExpr>),
    Con(Rc<str>, Vec<TypeExpr>),
}

impl TypeExpr {
    pub fn atom(name: &str) -> TypeExpr {
        TypeExpr::Atom(name.into(), Kind::Functor)
    }

    pub fn ground_atom(name: &str) -> TypeExpr {
        TypeExpr::Atom(name.into(), Kind::Star)
    }

    pub fn var(name: &str) -> TypeExpr {
        TypeExpr::Var(name.into(), Kind::Functor)
    }

    pub fn star_var(name: &str) -> TypeExpr {
        TypeExpr::Var(name.into(), Kind::Star)
    }

    pub fn coprod(l: TypeExpr, r: TypeExpr) -> TypeExpr {
        TypeExpr::Coprod(Rc::new(l), Rc::new(r))
    }

    pub fn fix(f: TypeExpr) -> TypeExpr {
        TypeExpr::Fix(Rc::new(f))
    }

    pub fn fun(a: TypeExpr, b: TypeExpr) -> TypeExpr {
        TypeExpr::Fun(Rc::new(a), Rc::new(b))
    }

    pub fn pair(a: TypeExpr, b: TypeExpr) -> TypeExpr {
        TypeExpr::Pair(Rc::new(a), Rc::new(b))
    }

    pub fn app(f: TypeExpr, e: TypeExpr) -> TypeExpr {
        TypeExpr::App(Rc::new(f), Rc::new(e))
    }

    pub fn maybe(t: TypeExpr) -> TypeExpr {
        TypeExpr::Maybe(Rc::new(t))
    }

    pub fn fam(name: &str, args: Vec<TypeExpr>) -> TypeExpr {
        TypeExpr::Fam(name.into(), args)
    }

    pub fn con(name: &str, args: Vec<TypeExpr>) -> TypeExpr {
        TypeExpr::Con(name.into(), args)
    }

    pub fn kind(&self) -> Kind {
        match self {
            TypeExpr::Atom(_, k) | TypeExpr::Var(_, k) => *k,
            TypeExpr::Coprod(_, _) => Kind::Functor,
            TypeExpr::Fix(_)
            | TypeExpr::Fun(_, _)
            | TypeExpr::Int
            | TypeExpr::Bool
            | TypeExpr::Pair(_, _)
            | TypeExpr::App(_, _)
            | TypeExpr::Maybe(_) => Kind::Star,
            // OutOf computes a functor; the other families compute witnesses.
            TypeExpr::Fam(name, _) => {
                if &**name == "OutOf" {
                    Kind::Functor
                } else {
                    Kind::Star
                }
            }
            TypeExpr::Con(_, _) => Kind::Star,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, TypeExpr::Var(_, _))
    }

    /// All `Var` names occurring in the expression.
    pub fn free_vars(&self) -> BTreeSet<Rc<str>> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Rc<str>>) {
        match self {
            TypeExpr::Var(n, _) => {
                out.insert(n.clone());
            }
            TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => {}
            TypeExpr::Coprod(a, b)
            | TypeExpr::Fun(a, b)
            | TypeExpr::Pair(a, b)
            | TypeExpr::App(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            TypeExpr::Fix(a) | TypeExpr::Maybe(a) => a.collect_vars(out),
            TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            TypeExpr::Var(n, _) => &**n == name,
            TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => false,
            TypeExpr::Coprod(a, b)
            | TypeExpr::Fun(a, b)
            | TypeExpr::Pair(a, b)
            | TypeExpr::App(a, b) => a.contains_var(name) || b.contains_var(name),
            TypeExpr::Fix(a) | TypeExpr::Maybe(a) => a.contains_var(name),
            TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
                args.iter().any(|a| a.contains_var(name))
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            TypeExpr::Var(_, _) => false,
            TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => true,
            TypeExpr::Coprod(a, b)
            | TypeExpr::Fun(a, b)
            | TypeExpr::Pair(a, b)
            | TypeExpr::App(a, b) => a.is_ground() && b.is_ground(),
            TypeExpr::Fix(a) | TypeExpr::Maybe(a) => a.is_ground(),
            TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => args.iter().all(|a| a.is_ground()),
        }
    }

    /// Number of nodes, capped to keep the walk cheap.
    pub fn size_capped(&self, cap: usize) -> usize {
        if cap == 0 {
            return 0;
        }
        match self {
            TypeExpr::Atom(_, _) | TypeExpr::Var(_, _) | TypeExpr::Int | TypeExpr::Bool => 1,
            TypeExpr::Coprod(a, b)
            | TypeExpr::Fun(a, b)
            | TypeExpr::Pair(a, b)
            | TypeExpr::App(a, b) => {
                let la = a.size_capped(cap - 1);
                1 + la + b.size_capped(cap.saturating_sub(1 + la))
            }
            TypeExpr::Fix(a) | TypeExpr::Maybe(a) => 1 + a.size_capped(cap - 1),
            TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
                let mut n = 1;
                for a in args {
                    n += a.size_capped(cap.saturating_sub(n));
                    if n >= cap {
                        break;
                    }
                }
                n
            }
        }
    }

    /// Exact bit encoding of a small tree of coproducts over interned
    /// atoms; `None` when the tree contains anything else or does not fit.
    /// Used for cheap memo keys.
    pub(crate) fn fingerprint(&self, atoms: &mut Vec<Rc<str>>) -> Option<u128> {
        let mut acc: u128 = 1;
        let mut bits: u32 = 0;
        if self.fp_go(atoms, &mut acc, &mut bits) {
            Some(acc)
        } else {
            None
        }
    }

    fn fp_go(&self, atoms: &mut Vec<Rc<str>>, acc: &mut u128, bits: &mut u32) -> bool {
        if *bits > 116 {
            return false;
        }
        match self {
            TypeExpr::Atom(n, _) => {
                // enumerated trees share atom allocations, so try pointers first
                let idx = match atoms
                    .iter()
                    .position(|a| Rc::ptr_eq(a, n) || a == n)
                {
                    Some(i) => i,
                    None => {
                        if atoms.len() >= 8 {
                            return false;
                        }
                        atoms.push(n.clone());
                        atoms.len() - 1
                    }
                };
                *acc = (*acc << 4) | 0b1000 | idx as u128;
                *bits += 4;
                true
            }
            TypeExpr::Coprod(a, b) => {
                *acc <<= 1;
                *bits += 1;
                a.fp_go(atoms, acc, bits) && b.fp_go(atoms, acc, bits)
            }
            _ => false,
        }
    }

    pub fn contains_fam(&self) -> bool {
        match self {
            TypeExpr::Fam(_, _) => true,
            TypeExpr::Var(_, _) | TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => false,
            TypeExpr::Coprod(a, b)
            | TypeExpr::Fun(a, b)
            | TypeExpr::Pair(a, b)
            | TypeExpr::App(a, b) => a.contains_fam() || b.contains_fam(),
            TypeExpr::Fix(a) | TypeExpr::Maybe(a) => a.contains_fam(),
            TypeExpr::Con(_, args) => args.iter().any(|a| a.contains_fam()),
        }
    }
}

/// In-order list of the maximal non-coproduct subtrees of a functor.
/// Duplicates are preserved.
pub fn flatten(t: &TypeExpr) -> Result<Vec<TypeExpr>, KindError> {
    if t.kind() != Kind::Functor {
        return Err(KindError {
            expected: Kind::Functor,
            found: t.kind(),
            in_type: t.clone(),
        });
    }
    let mut out = Vec::new();
    fn go(t: &TypeExpr, out: &mut Vec<TypeExpr>) {
        match t {
            TypeExpr::Coprod(a, b) => {
                go(a, out);
                go(b, out);
            }
            other => out.push(other.clone()),
        }
    }
    go(t, &mut out);
    Ok(out)
}

/// Number of subtrees of `g` syntactically equal to `f` (`g` itself counts).
pub fn occurrences(f: &TypeExpr, g: &TypeExpr) -> usize {
    let mut n = if f == g { 1 } else { 0 };
    match g {
        TypeExpr::Coprod(a, b)
        | TypeExpr::Fun(a, b)
        | TypeExpr::Pair(a, b)
        | TypeExpr::App(a, b) => {
            n += occurrences(f, a) + occurrences(f, b);
        }
        TypeExpr::Fix(a) | TypeExpr::Maybe(a) => n += occurrences(f, a),
        TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
            for a in args {
                n += occurrences(f, a);
            }
        }
        _ => {}
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindError {
    pub expected: Kind,
    pub found: Kind,
    pub in_type: TypeExpr,
}

impl fmt::Display for KindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kind error: expected {}, found {} in {}",
            self.expected, self.found, self.in_type
        )
    }
}

/// The predicate forms handled by the solvers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pred {
    /// `f` is a component of `g` (reflexively).
    In(TypeExpr, TypeExpr),
    /// `In f g` is disproven.
    NotIn(TypeExpr, TypeExpr),
    /// `f :<: g` — f injects into g.
    Leq(TypeExpr, TypeExpr),
    /// `f :-: g = h` — removing g from f leaves h. The third position is
    /// functionally determined by the first two.
    Minus(TypeExpr, TypeExpr, TypeExpr),
    /// `f` supports a structural map.
    Functor(TypeExpr),
}

impl Pred {
    pub fn free_vars(&self) -> BTreeSet<Rc<str>> {
        let mut out = BTreeSet::new();
        match self {
            Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => {
                a.collect_vars(&mut out);
                b.collect_vars(&mut out);
            }
            Pred::Minus(a, b, c) => {
                a.collect_vars(&mut out);
                b.collect_vars(&mut out);
                c.collect_vars(&mut out);
            }
            Pred::Functor(a) => a.collect_vars(&mut out),
        }
        out
    }
}

/// Finite, idempotent map from variable names to type expressions. Backed
/// by a vector: substitutions stay small in the solvers and modest during
/// inference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Subst {
    map: Vec<(Rc<str>, TypeExpr)>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn singleton(name: Rc<str>, t: TypeExpr) -> Subst {
        Subst {
            map: vec![(name, t)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, name: &str) -> Option<&TypeExpr> {
        self.map
            .iter()
            .find(|(n, _)| &**n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rc<str>, &TypeExpr)> {
        self.map.iter().map(|(n, t)| (n, t))
    }

    /// Bind `name` to `t`, keeping the substitution idempotent: `t` is first
    /// rewritten by the current substitution and existing entries are then
    /// rewritten by the new binding.
    pub fn bind(&mut self, name: Rc<str>, t: TypeExpr) {
        let t = self.apply(&t);
        let one = Subst::singleton(name.clone(), t.clone());
        for (_, v) in self.map.iter_mut() {
            *v = one.apply(v);
        }
        match self.map.iter_mut().find(|(n, _)| *n == name) {
            Some((_, slot)) => *slot = t,
            None => self.map.push((name, t)),
        }
    }

    /// `self` extended with everything in `other` (applied after `self`).
    pub fn compose(&self, other: &Subst) -> Subst {
        let mut out = Subst {
            map: Vec::with_capacity(self.map.len() + other.map.len()),
        };
        for (k, v) in &self.map {
            out.map.push((k.clone(), other.apply(v)));
        }
        for (k, v) in &other.map {
            if out.get(k).is_none() {
                out.map.push((k.clone(), v.clone()));
            }
        }
        out
    }

    /// Construct directly from match bindings. Matching binds pattern
    /// variables to subterms of a rigid target, so the result is idempotent
    /// by construction and needs no rewriting.
    pub(crate) fn from_match_bindings(pairs: Vec<(Rc<str>, TypeExpr)>) -> Subst {
        Subst { map: pairs }
    }

    pub fn apply(&self, t: &TypeExpr) -> TypeExpr {
        // ground subtrees are shared, not rebuilt
        if self.map.is_empty() || t.is_ground() {
            return t.clone();
        }
        match t {
            TypeExpr::Var(n, _) => match self.get(n) {
                Some(b) => b.clone(),
                None => t.clone(),
            },
            TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => t.clone(),
            TypeExpr::Coprod(a, b) => TypeExpr::coprod(self.apply(a), self.apply(b)),
            TypeExpr::Fun(a, b) => TypeExpr::fun(self.apply(a), self.apply(b)),
            TypeExpr::Pair(a, b) => TypeExpr::pair(self.apply(a), self.apply(b)),
            TypeExpr::App(a, b) => TypeExpr::app(self.apply(a), self.apply(b)),
            TypeExpr::Fix(a) => TypeExpr::fix(self.apply(a)),
            TypeExpr::Maybe(a) => TypeExpr::maybe(self.apply(a)),
            TypeExpr::Fam(n, args) => {
                TypeExpr::Fam(n.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            TypeExpr::Con(n, args) => {
                TypeExpr::Con(n.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
        }
    }

    pub fn apply_pred(&self, p: &Pred) -> Pred {
        match p {
            Pred::In(a, b) => Pred::In(self.apply(a), self.apply(b)),
            Pred::NotIn(a, b) => Pred::NotIn(self.apply(a), self.apply(b)),
            Pred::Leq(a, b) => Pred::Leq(self.apply(a), self.apply(b)),
            Pred::Minus(a, b, c) => Pred::Minus(self.apply(a), self.apply(b), self.apply(c)),
            Pred::Functor(a) => Pred::Functor(self.apply(a)),
        }
    }
}

/// A quantified, qualified type.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    /// Quantified variables with their kinds, in canonical order.
    pub vars: Vec<(Rc<str>, Kind)>,
    pub preds: Vec<Pred>,
    pub body: TypeExpr,
}

impl Scheme {
    pub fn mono(body: TypeExpr) -> Scheme {
        Scheme {
            vars: Vec::new(),
            preds: Vec::new(),
            body,
        }
    }
}

/// Evidence for an injection proof. `Split` only arises with the generalized
/// clauses enabled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InjWitness {
    Refl,
    L(Box<InjWitness>),
    R(Box<InjWitness>),
    Split(Box<InjWitness>, Box<InjWitness>),
}

impl InjWitness {
    pub fn l(w: InjWitness) -> InjWitness {
        InjWitness::L(Box::new(w))
    }
    pub fn r(w: InjWitness) -> InjWitness {
        InjWitness::R(Box::new(w))
    }
    pub fn split(a: InjWitness, b: InjWitness) -> InjWitness {
        InjWitness::Split(Box::new(a), Box::new(b))
    }
}

/// Evidence for a subtraction proof. `Onl`/`Onr` store the remaining summand,
/// `Le`/`Ri` the untouched sibling plus the inner proof. `Dist` (generalized
/// clauses only) carries the two stage proofs of a coproduct subtraction:
/// first `f - g`, then `(f - g) - h`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MinusWitness {
    Onl(TypeExpr),
    Onr(TypeExpr),
    Le(TypeExpr, Box<MinusWitness>),
    Ri(TypeExpr, Box<MinusWitness>),
    Dist(Box<MinusWitness>, Box<MinusWitness>),
}

impl MinusWitness {
    pub fn le(sib: TypeExpr, w: MinusWitness) -> MinusWitness {
        MinusWitness::Le(sib, Box::new(w))
    }
    pub fn ri(sib: TypeExpr, w: MinusWitness) -> MinusWitness {
        MinusWitness::Ri(sib, Box::new(w))
    }
    pub fn dist(a: MinusWitness, b: MinusWitness) -> MinusWitness {
        MinusWitness::Dist(Box::new(a), Box::new(b))
    }
}

/// The remainder type encoded by a subtraction witness.
pub fn out_of(w: &MinusWitness) -> TypeExpr {
    match w {
        MinusWitness::Onl(rest) | MinusWitness::Onr(rest) => rest.clone(),
        MinusWitness::Le(sib, inner) => TypeExpr::coprod(out_of(inner), sib.clone()),
        MinusWitness::Ri(sib, inner) => TypeExpr::coprod(sib.clone(), out_of(inner)),
        MinusWitness::Dist(_, second) => out_of(second),
    }
}

/// What a solved predicate carries.
#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    /// Membership / negation / Functor facts have no runtime content.
    Unit,
    /// Discharged against a given assumption.
    Assumed,
    Inj(InjWitness),
    /// Subtraction witness plus the determined remainder.
    Minus(MinusWitness, TypeExpr),
    /// Subtraction discharged against a given; the remainder is still known.
    AssumedMinus(TypeExpr),
}

impl Evidence {
    pub fn remainder(&self) -> Option<&TypeExpr> {
        match self {
            Evidence::Minus(_, r) | Evidence::AssumedMinus(r) => Some(r),
            _ => None,
        }
    }

    pub fn inj_witness(&self) -> Option<&InjWitness> {
        match self {
            Evidence::Inj(w) => Some(w),
            _ => None,
        }
    }

    pub fn minus_witness(&self) -> Option<&MinusWitness> {
        match self {
            Evidence::Minus(w, _) => Some(w),
            _ => None,
        }
    }
}

/// Three-valued solver outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Holds(Evidence),
    Fails,
    Stuck(String),
}

impl Solution {
    pub fn holds(&self) -> bool {
        matches!(self, Solution::Holds(_))
    }
    pub fn is_stuck(&self) -> bool {
        matches!(self, Solution::Stuck(_))
    }
    pub fn evidence(&self) -> Option<&Evidence> {
        match self {
            Solution::Holds(e) => Some(e),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl TypeExpr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // prec: 0 = top, 1 = argument of ->, 2 = coproduct operand,
        // 3 = application argument / atomic position
        match self {
            TypeExpr::Atom(n, _) | TypeExpr::Var(n, _) => write!(f, "{}", n),
            TypeExpr::Int => write!(f, "Int"),
            TypeExpr::Bool => write!(f, "Bool"),
            TypeExpr::Pair(a, b) => write!(f, "({}, {})", a, b),
            TypeExpr::Coprod(a, b) => {
                let need = prec >= 2;
                if need {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 2)?;
                write!(f, " :+: ")?;
                // right-associative: right child prints unparenthesized
                b.fmt_prec(f, 1)?;
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Fun(a, b) => {
                let need = prec >= 1;
                if need {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 1)?;
                write!(f, " -> ")?;
                b.fmt_prec(f, 0)?;
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Fix(a) => {
                let need = prec >= 3;
                if need {
                    write!(f, "(")?;
                }
                write!(f, "Fix ")?;
                a.fmt_prec(f, 3)?;
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Maybe(a) => {
                let need = prec >= 3;
                if need {
                    write!(f, "(")?;
                }
                write!(f, "Maybe ")?;
                a.fmt_prec(f, 3)?;
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::App(a, b) => {
                let need = prec >= 3;
                if need {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 2)?;
                write!(f, " ")?;
                b.fmt_prec(f, 3)?;
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Fam(n, args) | TypeExpr::Con(n, args) => {
                if args.is_empty() {
                    return write!(f, "{}", n);
                }
                let need = prec >= 3;
                if need {
                    write!(f, "(")?;
                }
                write!(f, "{}", n)?;
                for a in args {
                    write!(f, " ")?;
                    a.fmt_prec(f, 3)?;
                }
                if need {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::In(a, b) => write!(f, "In {} {}", TPrec3(a), TPrec3(b)),
            Pred::NotIn(a, b) => write!(f, "In {} {} fails", TPrec3(a), TPrec3(b)),
            Pred::Leq(a, b) => write!(f, "{} :<: {}", TPrec2(a), TPrec2(b)),
            Pred::Minus(a, b, c) => {
                write!(f, "{} :-: {} = {}", TPrec2(a), TPrec2(b), TPrec2(c))
            }
            Pred::Functor(a) => write!(f, "Functor {}", TPrec3(a)),
        }
    }
}

/// Print a type at coproduct-operand precedence.
pub struct TPrec2<'a>(pub &'a TypeExpr);
impl fmt::Display for TPrec2<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_prec(f, 2)
    }
}

/// Print a type at atomic precedence (parenthesizing compounds).
pub struct TPrec3<'a>(pub &'a TypeExpr);
impl fmt::Display for TPrec3<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_prec(f, 3)
    }
}

impl fmt::Display for InjWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl InjWitness {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            InjWitness::Refl => write!(f, "Refl"),
            InjWitness::L(w) => {
                if nested {
                    write!(f, "(")?;
                }
                write!(f, "L ")?;
                w.fmt_prec(f, true)?;
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
            InjWitness::R(w) => {
                if nested {
                    write!(f, "(")?;
                }
                write!(f, "R ")?;
                w.fmt_prec(f, true)?;
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
            InjWitness::Split(a, b) => {
                if nested {
                    write!(f, "(")?;
                }
                write!(f, "Split ")?;
                a.fmt_prec(f, true)?;
                write!(f, " ")?;
                b.fmt_prec(f, true)?;
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for MinusWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl MinusWitness {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        let open = |f: &mut fmt::Formatter<'_>| if nested { write!(f, "(") } else { Ok(()) };
        let close = |f: &mut fmt::Formatter<'_>| if nested { write!(f, ")") } else { Ok(()) };
        match self {
            MinusWitness::Onl(t) => {
                open(f)?;
                write!(f, "Onl {}", TPrec3(t))?;
                close(f)
            }
            MinusWitness::Onr(t) => {
                open(f)?;
                write!(f, "Onr {}", TPrec3(t))?;
                close(f)
            }
            MinusWitness::Le(t, w) => {
                open(f)?;
                write!(f, "Le {} ", TPrec3(t))?;
                w.fmt_prec(f, true)?;
                close(f)
            }
            MinusWitness::Ri(t, w) => {
                open(f)?;
                write!(f, "Ri {} ", TPrec3(t))?;
                w.fmt_prec(f, true)?;
                close(f)
            }
            MinusWitness::Dist(a, b) => {
                open(f)?;
                write!(f, "Dist ")?;
                a.fmt_prec(f, true)?;
                write!(f, " ")?;
                b.fmt_prec(f, true)?;
                close(f)
            }
        }
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solution::Holds(Evidence::Unit) | Solution::Holds(Evidence::Assumed) => {
                write!(f, "holds")
            }
            Solution::Holds(Evidence::Inj(w)) => write!(f, "holds {}", w),
            Solution::Holds(Evidence::Minus(w, r)) => {
                write!(f, "holds {}; remainder {}", w, r)
            }
            Solution::Holds(Evidence::AssumedMinus(r)) => {
                write!(f, "holds; remainder {}", r)
            }
            Solution::Fails => write!(f, "fails"),
            Solution::Stuck(_) => write!(f, "stuck"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> TypeExpr {
        TypeExpr::atom("A")
    }
    fn b() -> TypeExpr {
        TypeExpr::atom("B")
    }
    fn c() -> TypeExpr {
        TypeExpr::atom("C")
    }
    fn d() -> TypeExpr {
        TypeExpr::atom("D")
    }
    fn cp(l: TypeExpr, r: TypeExpr) -> TypeExpr {
        TypeExpr::coprod(l, r)
    }

    #[test]
    fn flatten_left_nested() {
        let t = cp(cp(a(), b()), c());
        assert_eq!(flatten(&t).unwrap(), vec![a(), b(), c()]);
    }

    #[test]
    fn flatten_single_atom() {
        assert_eq!(flatten(&a()).unwrap(), vec![a()]);
    }

    #[test]
    fn flatten_keeps_duplicates() {
        let t = cp(a(), cp(b(), a()));
        assert_eq!(flatten(&t).unwrap(), vec![a(), b(), a()]);
    }

    #[test]
    fn flatten_rejects_ground() {
        assert!(flatten(&TypeExpr::Int).is_err());
    }

    #[test]
    fn occurrences_counts_subtrees() {
        assert_eq!(occurrences(&a(), &cp(cp(a(), b()), a())), 2);
        assert_eq!(occurrences(&cp(a(), b()), &cp(cp(a(), b()), c())), 1);
        assert_eq!(occurrences(&d(), &cp(a(), b())), 0);
        assert_eq!(occurrences(&a(), &a()), 1);
    }

    #[test]
    fn out_of_equations() {
        // removing the middle of (A :+: B?) ... worked examples
        let w = MinusWitness::le(c(), MinusWitness::Onr(a()));
        assert_eq!(out_of(&w), cp(a(), c()));
        assert_eq!(out_of(&MinusWitness::Onl(b())), b());
        let w = MinusWitness::ri(a(), MinusWitness::Onl(b()));
        assert_eq!(out_of(&w), cp(a(), b()));
        // Dist reports the second stage's remainder
        let w = MinusWitness::dist(MinusWitness::Onl(b()), MinusWitness::Onr(c()));
        assert_eq!(out_of(&w), c());
    }

    #[test]
    fn subst_apply_and_identity() {
        let mut s = Subst::new();
        s.bind("f".into(), cp(a(), b()));
        let t = TypeExpr::fix(TypeExpr::var("f"));
        assert_eq!(s.apply(&t), TypeExpr::fix(cp(a(), b())));
        let empty = Subst::new();
        assert_eq!(empty.apply(&t), t);
    }

    #[test]
    fn subst_idempotent_after_chained_binds() {
        let mut s = Subst::new();
        s.bind("f".into(), cp(TypeExpr::var("g"), a()));
        s.bind("g".into(), b());
        let t = TypeExpr::var("f");
        let once = s.apply(&t);
        let twice = s.apply(&once);
        assert_eq!(once, twice);
        assert_eq!(once, cp(b(), a()));
    }

    #[test]
    fn free_vars_of_coprod() {
        let t = cp(TypeExpr::var("f"), cp(TypeExpr::var("g"), a()));
        let vs = t.free_vars();
        let names: Vec<&str> = vs.iter().map(|s| &**s).collect();
        assert_eq!(names, vec!["f", "g"]);
    }

    #[test]
    fn display_forms() {
        let t = cp(cp(TypeExpr::atom("Int"), TypeExpr::atom("Char")), TypeExpr::atom("Bool"));
        assert_eq!(t.to_string(), "(Int :+: Char) :+: Bool");
        assert_eq!(cp(a(), cp(b(), c())).to_string(), "A :+: B :+: C");
        let w = MinusWitness::le(TypeExpr::atom("Bool"), MinusWitness::Onr(TypeExpr::atom("Int")));
        assert_eq!(w.to_string(), "Le Bool (Onr Int)");
        let iw = InjWitness::l(InjWitness::r(InjWitness::Refl));
        assert_eq!(iw.to_string(), "L (R Refl)");
        assert_eq!(
            TypeExpr::fix(cp(a(), b())).to_string(),
            "Fix (A :+: B)"
        );
    }
}
