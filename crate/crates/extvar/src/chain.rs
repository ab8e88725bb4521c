//! Ordered-clause entailment for the membership, injection, subtraction, and
//! Functor predicates, producing three-valued solutions with evidence under a
//! set of assumed predicates.
//!
//! Clause selection: a clause whose head (after fresh renaming) is apart from
//! the goal under finite unification is skipped; a head that unifies without
//! matching leaves the goal stuck; a matching head has its hypotheses solved
//! left to right. A disproven hypothesis skips the clause, a stuck hypothesis
//! (with none disproven) leaves the goal stuck, and a fully proven clause is
//! selected: asserting clauses produce evidence, denying clauses produce
//! failure. An exhausted chain is a failure.

use crate::types::{
    Evidence, InjWitness, Kind, MinusWitness, Pred, Solution, Subst, TypeExpr,
};
use crate::unify::{match_many, mgu_many, UnifyOutcome};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverFlags {
    /// Enable the extra injection/subtraction clauses for compound sources
    /// and compound subtrahends.
    pub generalized: bool,
    /// Guard against runaway hypothesis recursion.
    pub depth_limit: usize,
}

impl Default for SolverFlags {
    fn default() -> Self {
        SolverFlags {
            generalized: false,
            depth_limit: 10_000,
        }
    }
}

impl SolverFlags {
    pub fn generalized() -> Self {
        SolverFlags {
            generalized: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainError {
    DepthExceeded,
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainError::DepthExceeded => write!(f, "hypothesis recursion depth exceeded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOutcome {
    Matched,
    Apart,
    Stuck,
    HypFailed,
}

impl fmt::Display for TraceOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceOutcome::Matched => write!(f, "matched"),
            TraceOutcome::Apart => write!(f, "apart"),
            TraceOutcome::Stuck => write!(f, "stuck"),
            TraceOutcome::HypFailed => write!(f, "hyp-failed"),
        }
    }
}

/// One record per clause or equation attempt.
#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub id: String,
    pub goal: String,
    pub outcome: TraceOutcome,
}

pub type TraceHook<'a> = &'a mut dyn FnMut(TraceEvent);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Asserts,
    Denies,
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Unit,
    Refl,
    WrapL,
    WrapR,
    Split,
    Onl,
    Onr,
    /// Le(sibling, proof of hypothesis `hyp`)
    Le { hyp: usize },
    Ri { hyp: usize },
    Dist,
}

#[derive(Debug, Clone)]
struct Clause {
    id: &'static str,
    polarity: Polarity,
    /// Input positions of the head (the subtraction output is functionally
    /// determined and handled separately).
    head: Vec<TypeExpr>,
    hyps: Vec<Pred>,
    /// Remainder template for subtraction clauses.
    output: Option<TypeExpr>,
    /// Sibling summand reference for Le/Ri evidence.
    sibling: Option<TypeExpr>,
    rule: Rule,
    generalized_only: bool,
}

impl Clause {
    fn rename(&self, n: u64) -> Clause {
        let ren = |t: &TypeExpr| rename_type(t, n);
        Clause {
            id: self.id,
            polarity: self.polarity,
            head: self.head.iter().map(ren).collect(),
            hyps: self.hyps.iter().map(|p| rename_pred(p, n)).collect(),
            output: self.output.as_ref().map(ren),
            sibling: self.sibling.as_ref().map(ren),
            rule: self.rule,
            generalized_only: self.generalized_only,
        }
    }
}

fn rename_type(t: &TypeExpr, n: u64) -> TypeExpr {
    match t {
        TypeExpr::Var(name, k) => TypeExpr::Var(format!("{}#{}", name, n).into(), *k),
        TypeExpr::Coprod(a, b) => TypeExpr::coprod(rename_type(a, n), rename_type(b, n)),
        other => other.clone(),
    }
}

fn rename_pred(p: &Pred, n: u64) -> Pred {
    match p {
        Pred::In(a, b) => Pred::In(rename_type(a, n), rename_type(b, n)),
        Pred::NotIn(a, b) => Pred::NotIn(rename_type(a, n), rename_type(b, n)),
        Pred::Leq(a, b) => Pred::Leq(rename_type(a, n), rename_type(b, n)),
        Pred::Minus(a, b, c) => Pred::Minus(rename_type(a, n), rename_type(b, n), rename_type(c, n)),
        Pred::Functor(a) => Pred::Functor(rename_type(a, n)),
    }
}

fn v(name: &str) -> TypeExpr {
    TypeExpr::Var(name.into(), Kind::Functor)
}

fn cp(a: TypeExpr, b: TypeExpr) -> TypeExpr {
    TypeExpr::coprod(a, b)
}

fn in_clauses() -> Vec<Clause> {
    vec![
        Clause {
            id: "Fig3.1",
            polarity: Polarity::Asserts,
            head: vec![v("x"), v("x")],
            hyps: vec![],
            output: None,
            sibling: None,
            rule: Rule::Unit,
            generalized_only: false,
        },
        Clause {
            id: "Fig3.2",
            polarity: Polarity::Asserts,
            head: vec![v("x"), cp(v("y"), v("z"))],
            hyps: vec![Pred::In(v("x"), v("y"))],
            output: None,
            sibling: None,
            rule: Rule::Unit,
            generalized_only: false,
        },
        Clause {
            id: "Fig3.3",
            polarity: Polarity::Asserts,
            head: vec![v("x"), cp(v("y"), v("z"))],
            hyps: vec![Pred::In(v("x"), v("z"))],
            output: None,
            sibling: None,
            rule: Rule::Unit,
            generalized_only: false,
        },
        Clause {
            id: "Fig3.4",
            polarity: Polarity::Denies,
            head: vec![v("x"), v("y")],
            hyps: vec![],
            output: None,
            sibling: None,
            rule: Rule::Unit,
            generalized_only: false,
        },
    ]
}

fn leq_clauses() -> Vec<Clause> {
    vec![
        Clause {
            id: "Fig4.1",
            polarity: Polarity::Asserts,
            head: vec![v("x"), v("x")],
            hyps: vec![],
            output: None,
            sibling: None,
            rule: Rule::Refl,
            generalized_only: false,
        },
        Clause {
            id: "Fig4.2",
            polarity: Polarity::Asserts,
            head: vec![v("x"), cp(v("y"), v("z"))],
            hyps: vec![Pred::Leq(v("x"), v("y")), Pred::NotIn(v("x"), v("z"))],
            output: None,
            sibling: None,
            rule: Rule::WrapL,
            generalized_only: false,
        },
        Clause {
            id: "Fig4.3",
            polarity: Polarity::Asserts,
            head: vec![v("x"), cp(v("y"), v("z"))],
            hyps: vec![Pred::Leq(v("x"), v("z")), Pred::NotIn(v("x"), v("y"))],
            output: None,
            sibling: None,
            rule: Rule::WrapR,
            generalized_only: false,
        },
        Clause {
            id: "Fig4.gen",
            polarity: Polarity::Asserts,
            head: vec![cp(v("x"), v("y")), v("z")],
            hyps: vec![Pred::Leq(v("x"), v("z")), Pred::Leq(v("y"), v("z"))],
            output: None,
            sibling: None,
            rule: Rule::Split,
            generalized_only: true,
        },
        Clause {
            id: "Fig4.4",
            polarity: Polarity::Denies,
            head: vec![v("x"), v("y")],
            hyps: vec![],
            output: None,
            sibling: None,
            rule: Rule::Unit,
            generalized_only: false,
        },
    ]
}

fn minus_clauses() -> Vec<Clause> {
    vec![
        Clause {
            id: "Fig5.1",
            polarity: Polarity::Asserts,
            head: vec![cp(v("x"), v("y")), v("x")],
            hyps: vec![],
            output: Some(v("y")),
            sibling: None,
            rule: Rule::Onl,
            generalized_only: false,
        },
        Clause {
            id: "Fig5.2",
            polarity: Polarity::Asserts,
            head: vec![cp(v("x"), v("y")), v("y")],
            hyps: vec![],
            output: Some(v("x")),
            sibling: None,
            rule: Rule::Onr,
            generalized_only: false,
        },
        Clause {
            id: "Fig5.gen",
            polarity: Polarity::Asserts,
            head: vec![v("x"), cp(v("y"), v("z"))],
            hyps: vec![
                Pred::Minus(v("x"), v("y"), v("k1")),
                Pred::Minus(v("k1"), v("z"), v("k2")),
            ],
            output: Some(v("k2")),
            sibling: None,
            rule: Rule::Dist,
            generalized_only: true,
        },
        Clause {
            id: "Fig5.3",
            polarity: Polarity::Asserts,
            head: vec![cp(v("x"), v("y")), v("z")],
            hyps: vec![
                Pred::NotIn(v("z"), v("y")),
                Pred::Minus(v("x"), v("z"), v("k")),
            ],
            output: Some(cp(v("k"), v("y"))),
            sibling: Some(v("y")),
            rule: Rule::Le { hyp: 1 },
            generalized_only: false,
        },
        Clause {
            id: "Fig5.4",
            polarity: Polarity::Asserts,
            head: vec![cp(v("x"), v("y")), v("z")],
            hyps: vec![
                Pred::NotIn(v("z"), v("x")),
                Pred::Minus(v("y"), v("z"), v("k")),
            ],
            output: Some(cp(v("x"), v("k"))),
            sibling: Some(v("x")),
            rule: Rule::Ri { hyp: 1 },
            generalized_only: false,
        },
    ]
}

/// The chain solver. Clause tables are immutable after construction; one
/// instance may serve any number of queries. Small ground goals are memoized
/// per instance (entailment is a pure function of the goal).
pub struct ChainSolver {
    pub flags: SolverFlags,
    in_table: Vec<Clause>,
    leq_table: Vec<Clause>,
    minus_table: Vec<Clause>,
    memo: std::cell::RefCell<
        std::collections::HashMap<MemoKey, std::rc::Rc<Solution>, crate::types::FpBuild>,
    >,
    atoms: std::cell::RefCell<Vec<std::rc::Rc<str>>>,
}

type MemoKey = (u8, u128, u128);

/// Only small goals repeat enough to earn a table slot; larger ones would
/// grow the table without ever being hit again.
pub(crate) fn both_small(a: u128, b: u128) -> bool {
    // payload bits of the two fingerprints, bounded to roughly five leaves
    let la = 127 - a.leading_zeros();
    let lb = 127 - b.leading_zeros();
    la + lb <= 24
}

/// A compact key for goals over plain coproducts of atoms; the solution of a
/// subtraction is independent of the name of a variable output position.
fn memo_key(goal: &Pred, atoms: &mut Vec<std::rc::Rc<str>>) -> Option<MemoKey> {
    let key = match goal {
        Pred::In(a, b) => (0, a.fingerprint(atoms)?, b.fingerprint(atoms)?),
        Pred::NotIn(a, b) => (1, a.fingerprint(atoms)?, b.fingerprint(atoms)?),
        Pred::Leq(a, b) => (2, a.fingerprint(atoms)?, b.fingerprint(atoms)?),
        Pred::Minus(a, b, out) if out.is_var() => {
            (3, a.fingerprint(atoms)?, b.fingerprint(atoms)?)
        }
        Pred::Functor(a) => (4, a.fingerprint(atoms)?, 1),
        _ => return None,
    };
    if both_small(key.1, key.2) {
        Some(key)
    } else {
        None
    }
}

struct Ctx<'a> {
    givens: &'a [Pred],
    trace: Option<TraceHook<'a>>,
    fresh: u64,
}

impl Ctx<'_> {
    fn emit(&mut self, id: &str, goal: &Pred, outcome: TraceOutcome) {
        if let Some(hook) = self.trace.as_mut() {
            hook(TraceEvent {
                id: id.to_string(),
                goal: goal.to_string(),
                outcome,
            });
        }
    }
}

impl ChainSolver {
    pub fn new(flags: SolverFlags) -> ChainSolver {
        ChainSolver {
            flags,
            in_table: in_clauses(),
            leq_table: leq_clauses(),
            minus_table: minus_clauses(),
            memo: Default::default(),
            atoms: Default::default(),
        }
    }

    pub fn solve(&self, goal: &Pred, givens: &[Pred]) -> Result<Solution, ChainError> {
        let mut ctx = Ctx {
            givens,
            trace: None,
            fresh: 0,
        };
        self.solve_goal(goal, 0, &mut ctx)
    }

    pub fn solve_traced(
        &self,
        goal: &Pred,
        givens: &[Pred],
        hook: TraceHook<'_>,
    ) -> Result<Solution, ChainError> {
        let mut ctx = Ctx {
            givens,
            trace: Some(hook),
            fresh: 0,
        };
        self.solve_goal(goal, 0, &mut ctx)
    }

    fn solve_goal(&self, goal: &Pred, depth: usize, ctx: &mut Ctx<'_>) -> Result<Solution, ChainError> {
        if depth > self.flags.depth_limit {
            return Err(ChainError::DepthExceeded);
        }
        if let Some(sol) = given_lookup(goal, ctx.givens) {
            return Ok(sol);
        }
        let key = if ctx.givens.is_empty() && ctx.trace.is_none() {
            memo_key(goal, &mut self.atoms.borrow_mut())
        } else {
            None
        };
        if let Some(k) = key {
            if let Some(sol) = self.memo.borrow().get(&k) {
                return Ok((**sol).clone());
            }
        }
        let sol = self.solve_dispatch(goal, depth, ctx)?;
        if let Some(k) = key {
            self.memo
                .borrow_mut()
                .insert(k, std::rc::Rc::new(sol.clone()));
        }
        Ok(sol)
    }

    fn solve_dispatch(&self, goal: &Pred, depth: usize, ctx: &mut Ctx<'_>) -> Result<Solution, ChainError> {
        match goal {
            Pred::NotIn(f, g) => {
                let inner = Pred::In(f.clone(), g.clone());
                Ok(match self.solve_goal(&inner, depth, ctx)? {
                    Solution::Holds(_) => Solution::Fails,
                    Solution::Fails => Solution::Holds(Evidence::Unit),
                    stuck => stuck,
                })
            }
            Pred::Functor(t) => self.solve_functor(goal, t, depth, ctx),
            Pred::In(_, _) => self.walk_chain(&self.in_table, goal, depth, ctx),
            Pred::Leq(_, _) => self.walk_chain(&self.leq_table, goal, depth, ctx),
            Pred::Minus(_, _, _) => self.walk_chain(&self.minus_table, goal, depth, ctx),
        }
    }

    fn solve_functor(
        &self,
        goal: &Pred,
        t: &TypeExpr,
        depth: usize,
        ctx: &mut Ctx<'_>,
    ) -> Result<Solution, ChainError> {
        if depth > self.flags.depth_limit {
            return Err(ChainError::DepthExceeded);
        }
        match t {
            TypeExpr::Coprod(a, b) => {
                ctx.emit("Fun.sum", goal, TraceOutcome::Matched);
                let left = self.solve_functor(goal, a, depth + 1, ctx)?;
                let right = self.solve_functor(goal, b, depth + 1, ctx)?;
                Ok(match (left, right) {
                    (Solution::Fails, _) | (_, Solution::Fails) => Solution::Fails,
                    (Solution::Stuck(r), _) | (_, Solution::Stuck(r)) => Solution::Stuck(r),
                    _ => Solution::Holds(Evidence::Unit),
                })
            }
            TypeExpr::Atom(_, Kind::Functor) => {
                ctx.emit("Fun.atom", goal, TraceOutcome::Matched);
                Ok(Solution::Holds(Evidence::Unit))
            }
            TypeExpr::Var(_, _) => {
                ctx.emit("Fun.var", goal, TraceOutcome::Stuck);
                Ok(Solution::Stuck(format!("Functor {} needs instantiation", t)))
            }
            _ => Ok(Solution::Fails),
        }
    }

    fn walk_chain(
        &self,
        table: &[Clause],
        goal: &Pred,
        depth: usize,
        ctx: &mut Ctx<'_>,
    ) -> Result<Solution, ChainError> {
        let inputs: [TypeExpr; 2] = match goal {
            Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => [a.clone(), b.clone()],
            Pred::Minus(a, b, _) => [a.clone(), b.clone()],
            Pred::Functor(a) => [a.clone(), a.clone()],
        };
        let goal_ground = inputs.iter().all(|t| t.is_ground());
        let needs_rename = !goal_ground;
        for clause in table {
            if clause.generalized_only && !self.flags.generalized {
                continue;
            }
            let owned;
            let clause = if needs_rename {
                ctx.fresh += 1;
                owned = clause.rename(ctx.fresh);
                &owned
            } else {
                clause
            };
            match match_many(&clause.head, &inputs) {
                UnifyOutcome::Unifier(subst) => {
                    match self.try_clause(clause, goal, subst, depth, ctx)? {
                        ClauseResult::Selected(sol) => return Ok(sol),
                        ClauseResult::Skipped => continue,
                        ClauseResult::Stuck(sol) => return Ok(sol),
                    }
                }
                UnifyOutcome::NoUnifier(_) => {
                    // a ground goal that does not match cannot unify either
                    if !goal_ground && mgu_many(&clause.head, &inputs).is_unifier() {
                        ctx.emit(clause.id, goal, TraceOutcome::Stuck);
                        return Ok(Solution::Stuck(format!(
                            "clause {} applies only under instantiation",
                            clause.id
                        )));
                    }
                    ctx.emit(clause.id, goal, TraceOutcome::Apart);
                }
            }
        }
        Ok(Solution::Fails)
    }

    fn try_clause(
        &self,
        clause: &Clause,
        goal: &Pred,
        mut subst: Subst,
        depth: usize,
        ctx: &mut Ctx<'_>,
    ) -> Result<ClauseResult, ChainError> {
        let mut evidences: Vec<Evidence> = Vec::with_capacity(clause.hyps.len());
        let mut stuck = false;
        for hyp in &clause.hyps {
            let instantiated = subst.apply_pred(hyp);
            match self.solve_goal(&instantiated, depth + 1, ctx)? {
                Solution::Holds(ev) => {
                    // A proven subtraction hypothesis improves its output
                    // variable for the hypotheses and templates that follow.
                    if let Pred::Minus(_, _, out_t) = &instantiated {
                        if let (TypeExpr::Var(name, _), Some(rem)) = (out_t, ev.remainder()) {
                            subst.bind(name.clone(), rem.clone());
                        }
                    }
                    evidences.push(ev);
                }
                Solution::Fails => {
                    ctx.emit(clause.id, goal, TraceOutcome::HypFailed);
                    return Ok(ClauseResult::Skipped);
                }
                Solution::Stuck(_) => {
                    stuck = true;
                    evidences.push(Evidence::Unit);
                }
            }
        }
        if stuck {
            ctx.emit(clause.id, goal, TraceOutcome::Stuck);
            return Ok(ClauseResult::Stuck(Solution::Stuck(format!(
                "hypotheses of clause {} undecided",
                clause.id
            ))));
        }
        ctx.emit(clause.id, goal, TraceOutcome::Matched);
        if clause.polarity == Polarity::Denies {
            return Ok(ClauseResult::Selected(Solution::Fails));
        }
        let evidence = build_evidence(clause, &subst, &evidences);
        // Reconcile the functionally determined output with the goal.
        if let Pred::Minus(_, _, goal_out) = goal {
            let remainder = match &evidence {
                Evidence::Minus(_, r) | Evidence::AssumedMinus(r) => r.clone(),
                _ => unreachable!("subtraction clause built non-subtraction evidence"),
            };
            if !goal_out.is_var() && goal_out != &remainder {
                return Ok(ClauseResult::Selected(Solution::Fails));
            }
        }
        Ok(ClauseResult::Selected(Solution::Holds(evidence)))
    }
}

enum ClauseResult {
    Selected(Solution),
    Skipped,
    Stuck(Solution),
}

fn build_evidence(clause: &Clause, subst: &Subst, hyp_evs: &[Evidence]) -> Evidence {
    let inj_of = |i: usize| -> Option<InjWitness> {
        match &hyp_evs[i] {
            Evidence::Inj(w) => Some(w.clone()),
            _ => None,
        }
    };
    let minus_of = |i: usize| -> Option<MinusWitness> {
        match &hyp_evs[i] {
            Evidence::Minus(w, _) => Some(w.clone()),
            _ => None,
        }
    };
    let remainder = || {
        clause
            .output
            .as_ref()
            .map(|t| subst.apply(t))
            .expect("subtraction clause without output template")
    };
    match clause.rule {
        Rule::Unit => Evidence::Unit,
        Rule::Refl => Evidence::Inj(InjWitness::Refl),
        Rule::WrapL => match inj_of(0) {
            Some(w) => Evidence::Inj(InjWitness::l(w)),
            None => Evidence::Assumed,
        },
        Rule::WrapR => match inj_of(0) {
            Some(w) => Evidence::Inj(InjWitness::r(w)),
            None => Evidence::Assumed,
        },
        Rule::Split => match (inj_of(0), inj_of(1)) {
            (Some(a), Some(b)) => Evidence::Inj(InjWitness::split(a, b)),
            _ => Evidence::Assumed,
        },
        Rule::Onl => Evidence::Minus(MinusWitness::Onl(remainder()), remainder()),
        Rule::Onr => Evidence::Minus(MinusWitness::Onr(remainder()), remainder()),
        Rule::Le { hyp } => {
            let sib = subst.apply(clause.sibling.as_ref().expect("Le clause without sibling"));
            match minus_of(hyp) {
                Some(w) => Evidence::Minus(MinusWitness::le(sib, w), remainder()),
                None => Evidence::AssumedMinus(remainder()),
            }
        }
        Rule::Ri { hyp } => {
            let sib = subst.apply(clause.sibling.as_ref().expect("Ri clause without sibling"));
            match minus_of(hyp) {
                Some(w) => Evidence::Minus(MinusWitness::ri(sib, w), remainder()),
                None => Evidence::AssumedMinus(remainder()),
            }
        }
        Rule::Dist => match (minus_of(0), minus_of(1)) {
            (Some(a), Some(b)) => Evidence::Minus(MinusWitness::dist(a, b), remainder()),
            _ => Evidence::AssumedMinus(remainder()),
        },
    }
}

/// Consult the assumptions before any chain work: an exact match discharges
/// the goal, and a membership goal contradicting an assumed negation fails.
/// A wanted subtraction matching a given on its determining positions picks
/// up the given's output.
pub(crate) fn given_lookup(goal: &Pred, givens: &[Pred]) -> Option<Solution> {
    if givens.is_empty() {
        return None;
    }
    for given in givens {
        if given == goal {
            return Some(Solution::Holds(match goal {
                Pred::Minus(_, _, out) => Evidence::AssumedMinus(out.clone()),
                _ => Evidence::Assumed,
            }));
        }
    }
    match goal {
        Pred::In(f, g) => {
            let neg = Pred::NotIn(f.clone(), g.clone());
            if givens.contains(&neg) {
                return Some(Solution::Fails);
            }
            None
        }
        Pred::Minus(f, g, out) => {
            for given in givens {
                if let Pred::Minus(gf, gg, gout) = given {
                    if gf == f && gg == g {
                        return Some(if out.is_var() {
                            Solution::Holds(Evidence::AssumedMinus(gout.clone()))
                        } else if out == gout {
                            Solution::Holds(Evidence::AssumedMinus(gout.clone()))
                        } else {
                            Solution::Fails
                        });
                    }
                }
            }
            None
        }
        _ => None,
    }
}

/// Entry point matching the module contract: one query, fresh tables.
pub fn solve_chain(goal: &Pred, givens: &[Pred], flags: SolverFlags) -> Result<Solution, ChainError> {
    ChainSolver::new(flags).solve(goal, givens)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImproveError {
    NotSubtraction,
    NotProved(Solution),
    Conflict { expected: TypeExpr, found: TypeExpr },
}

impl fmt::Display for ImproveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImproveError::NotSubtraction => write!(f, "improvement applies to subtractions only"),
            ImproveError::NotProved(s) => write!(f, "subtraction not proved: {}", s),
            ImproveError::Conflict { expected, found } => write!(
                f,
                "improvement conflict: determined remainder {} differs from {}",
                found, expected
            ),
        }
    }
}

/// Functional-dependency improvement: extend `s` with the determined output
/// of a proven subtraction, or verify it when already ground.
pub fn improve(p: &Pred, s: &Subst, flags: SolverFlags) -> Result<Subst, ImproveError> {
    let Pred::Minus(f, g, out) = p else {
        return Err(ImproveError::NotSubtraction);
    };
    let applied = Pred::Minus(s.apply(f), s.apply(g), TypeExpr::var("%improve"));
    let sol = solve_chain(&applied, &[], flags).map_err(|_| ImproveError::NotProved(Solution::Fails))?;
    match sol {
        Solution::Holds(ev) => {
            let rem = ev.remainder().expect("subtraction held without remainder").clone();
            let out = s.apply(out);
            match out {
                TypeExpr::Var(name, _) => {
                    let mut s2 = Subst::new();
                    s2.bind(name, rem);
                    Ok(s2)
                }
                ground if ground == rem => Ok(Subst::new()),
                ground => Err(ImproveError::Conflict {
                    expected: ground,
                    found: rem,
                }),
            }
        }
        other => Err(ImproveError::NotProved(other)),
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
    fn h() -> T {
        T::var("h")
    }
    fn cp(l: T, r: T) -> T {
        T::coprod(l, r)
    }
    fn solve(p: &Pred) -> Solution {
        solve_chain(p, &[], SolverFlags::default()).unwrap()
    }
    fn solve_gen(p: &Pred) -> Solution {
        solve_chain(p, &[], SolverFlags::generalized()).unwrap()
    }

    #[test]
    fn membership_in_right_summand() {
        assert!(solve(&Pred::In(b(), cp(a(), b()))).holds());
    }

    #[test]
    fn membership_tolerates_duplicates() {
        assert!(solve(&Pred::In(f(), cp(f(), f()))).holds());
    }

    #[test]
    fn membership_stuck_on_open_left_summand() {
        assert!(solve(&Pred::In(a(), cp(g(), a()))).is_stuck());
    }

    #[test]
    fn membership_fails_on_absent_atom() {
        assert_eq!(solve(&Pred::In(T::atom("D"), cp(a(), b()))), Solution::Fails);
        assert!(solve(&Pred::NotIn(T::atom("D"), cp(a(), b()))).holds());
    }

    #[test]
    fn injection_with_assumed_negation() {
        let givens = vec![Pred::NotIn(f(), g())];
        let sol = solve_chain(
            &Pred::Leq(f(), cp(f(), g())),
            &givens,
            SolverFlags::default(),
        )
        .unwrap();
        assert_eq!(
            sol,
            Solution::Holds(Evidence::Inj(InjWitness::l(InjWitness::Refl)))
        );
        // without the assumption the same goal is stuck
        assert!(solve(&Pred::Leq(f(), cp(f(), g()))).is_stuck());
    }

    #[test]
    fn injection_rejects_duplicates() {
        assert_eq!(solve(&Pred::Leq(a(), cp(a(), a()))), Solution::Fails);
    }

    #[test]
    fn injection_unique_path() {
        let goal = Pred::Leq(b(), cp(cp(a(), b()), c()));
        let sol = solve(&goal);
        assert_eq!(
            sol,
            Solution::Holds(Evidence::Inj(InjWitness::l(InjWitness::r(InjWitness::Refl))))
        );
    }

    #[test]
    fn subtraction_kind_sloppy_example() {
        let int = T::atom("Int");
        let ch = T::atom("Char");
        let bool_ = T::atom("Bool");
        let goal = Pred::Minus(cp(cp(int.clone(), ch.clone()), bool_.clone()), ch.clone(), h());
        let sol = solve(&goal);
        let Solution::Holds(Evidence::Minus(w, rem)) = &sol else {
            panic!("expected subtraction evidence, got {:?}", sol);
        };
        assert_eq!(*w, MinusWitness::le(bool_.clone(), MinusWitness::Onr(int.clone())));
        assert_eq!(*rem, cp(int, bool_));
    }

    #[test]
    fn subtraction_requires_unique_occurrence_in_recursive_cases() {
        // subtrahend on both sides blocks the recursive clauses
        let goal = Pred::Minus(cp(cp(a(), b()), cp(c(), a())), a(), h());
        assert_eq!(solve(&goal), Solution::Fails);
    }

    #[test]
    fn subtraction_ground_conflict_fails() {
        let goal = Pred::Minus(cp(a(), b()), a(), c());
        assert_eq!(solve(&goal), Solution::Fails);
        let ok = Pred::Minus(cp(a(), b()), a(), b());
        assert!(solve(&ok).holds());
    }

    #[test]
    fn generalized_injection_permutes() {
        let goal = Pred::Leq(cp(a(), b()), cp(b(), a()));
        assert_eq!(solve(&goal), Solution::Fails);
        let sol = solve_gen(&goal);
        assert_eq!(
            sol,
            Solution::Holds(Evidence::Inj(InjWitness::split(
                InjWitness::r(InjWitness::Refl),
                InjWitness::l(InjWitness::Refl)
            )))
        );
    }

    #[test]
    fn generalized_subtraction_of_compound() {
        // ((A :+: B) :+: C) :-: (A :+: C) has no non-generalized proof
        let goal = Pred::Minus(cp(cp(a(), b()), c()), cp(a(), c()), h());
        assert_eq!(solve(&goal), Solution::Fails);
        let sol = solve_gen(&goal);
        let Solution::Holds(Evidence::Minus(w, rem)) = &sol else {
            panic!("expected evidence, got {:?}", sol);
        };
        assert_eq!(*rem, b());
        assert_eq!(crate::types::out_of(w), b());
    }

    #[test]
    fn improvement_binds_and_checks() {
        let s = Subst::new();
        let p = Pred::Minus(cp(a(), b()), a(), h());
        let s2 = improve(&p, &s, SolverFlags::default()).unwrap();
        assert_eq!(s2.apply(&h()), b());

        let consistent = Pred::Minus(cp(a(), b()), a(), b());
        assert!(improve(&consistent, &s, SolverFlags::default())
            .unwrap()
            .is_empty());

        let conflicted = Pred::Minus(cp(a(), b()), a(), c());
        assert!(matches!(
            improve(&conflicted, &s, SolverFlags::default()),
            Err(ImproveError::Conflict { .. })
        ));
    }

    #[test]
    fn givens_discharge_exact_goals() {
        let givens = vec![Pred::Leq(a(), f())];
        let sol = solve_chain(&Pred::Leq(a(), f()), &givens, SolverFlags::default()).unwrap();
        assert_eq!(sol, Solution::Holds(Evidence::Assumed));
        // assumed subtraction still improves
        let givens = vec![Pred::Minus(f(), a(), b())];
        let sol = solve_chain(&Pred::Minus(f(), a(), h()), &givens, SolverFlags::default()).unwrap();
        assert_eq!(sol, Solution::Holds(Evidence::AssumedMinus(b())));
    }

    #[test]
    fn trace_reports_clause_attempts() {
        let mut lines = Vec::new();
        let solver = ChainSolver::new(SolverFlags::default());
        let mut hook = |e: TraceEvent| lines.push(format!("try {}: {}", e.id, e.outcome));
        solver
            .solve_traced(&Pred::In(b(), cp(a(), b())), &[], &mut hook)
            .unwrap();
        assert_eq!(
            lines,
            vec![
                "try Fig3.1: apart",
                // hypothesis In B A runs the chain before the outer verdict
                "try Fig3.1: apart",
                "try Fig3.2: apart",
                "try Fig3.3: apart",
                "try Fig3.4: matched",
                "try Fig3.2: hyp-failed",
                // hypothesis In B B is reflexive
                "try Fig3.1: matched",
                "try Fig3.3: matched",
            ]
        );
    }

    #[test]
    fn depth_limit_guards_runaway_recursion() {
        let flags = SolverFlags {
            generalized: false,
            depth_limit: 2,
        };
        // deep enough structure to trip the tiny limit
        let deep = cp(cp(cp(a(), b()), c()), cp(T::atom("D"), cp(a(), b())));
        let r = solve_chain(&Pred::In(T::atom("Z"), deep), &[], flags);
        assert_eq!(r, Err(ChainError::DepthExceeded));
    }

    #[test]
    fn functor_predicate() {
        assert!(solve(&Pred::Functor(cp(a(), b()))).holds());
        assert!(solve(&Pred::Functor(f())).is_stuck());
        assert_eq!(solve(&Pred::Functor(T::fix(a()))), Solution::Fails);
    }
}
