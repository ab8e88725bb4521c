//! Evidence-directed elaboration and call-by-value evaluation.
//!
//! After checking, every predicate at every instantiation is ground, so each
//! use of the injection and branching combinators elaborates to a concrete
//! witness. Polymorphic bindings are instanced per ground instantiation
//! (recursion is monomorphic, so an instance may refer to itself).

use super::ast::*;
use super::infer::{BuiltinId, CheckedProgram, GlobalKind, LangError};
use crate::solver::PredSolver;
use crate::types::{Evidence, InjWitness, MinusWitness, Pred, Solution, Subst, TypeExpr};
use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Check(LangError),
    /// A value did not match an exposure pattern.
    Pattern(String),
    Internal(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Check(e) => write!(f, "{}", e),
            RunError::Pattern(m) => write!(f, "pattern match failure: {}", m),
            RunError::Internal(m) => write!(f, "internal error: {}", m),
        }
    }
}

fn internal(m: impl Into<String>) -> RunError {
    RunError::Internal(m.into())
}

#[derive(Debug, Clone)]
pub enum Prim {
    Inj(InjWitness),
    InjFix(InjWitness),
    Cases,
    Prj(MinusWitness),
    FmapAt(TypeExpr),
    MkIn,
    MkInl,
    MkInr,
    Ctor(Rc<DataDecl>),
}

impl Prim {
    fn arity(&self) -> usize {
        match self {
            Prim::FmapAt(_) => 2,
            Prim::Ctor(d) => d.fields.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum EExpr {
    Int(i64),
    Bool(bool),
    Local(String),
    Global(usize),
    Lam(Vec<Pattern>, Rc<EExpr>),
    App(Rc<EExpr>, Rc<EExpr>),
    Pair(Rc<EExpr>, Rc<EExpr>),
    Add(Rc<EExpr>, Rc<EExpr>),
    Mul(Rc<EExpr>, Rc<EExpr>),
    Branch {
        witness: MinusWitness,
        m: Rc<EExpr>,
        n: Rc<EExpr>,
    },
    Dispatch(Rc<EExpr>, Rc<EExpr>),
    Prim(Prim),
    Let {
        name: String,
        bound: Rc<EExpr>,
        body: Rc<EExpr>,
    },
}

/// Runtime values: tag trees of left/right injections around constructor
/// payloads, wrapped at recursion points.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Pair(Box<Value>, Box<Value>),
    Con(String, Vec<Value>),
    Inl(Box<Value>),
    Inr(Box<Value>),
    In(Box<Value>),
    MaybeV(Option<Box<Value>>),
    Fun(FunValue),
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Pair(a1, b1), Value::Pair(a2, b2)) => a1 == a2 && b1 == b2,
            (Value::Con(n1, a1), Value::Con(n2, a2)) => n1 == n2 && a1 == a2,
            (Value::Inl(a), Value::Inl(b)) => a == b,
            (Value::Inr(a), Value::Inr(b)) => a == b,
            (Value::In(a), Value::In(b)) => a == b,
            (Value::MaybeV(a), Value::MaybeV(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FunValue {
    Closure {
        params: Vec<Pattern>,
        applied: Vec<Value>,
        body: Rc<EExpr>,
        env: Env,
    },
    Partial {
        prim: Prim,
        applied: Vec<Value>,
    },
    BranchFn {
        witness: MinusWitness,
        m: Box<Value>,
        n: Box<Value>,
    },
    DispatchFn {
        m: Box<Value>,
        n: Box<Value>,
    },
    CasesFn {
        cs: Box<Value>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Env(Option<Rc<EnvNode>>);

#[derive(Debug)]
pub struct EnvNode {
    name: String,
    value: Value,
    next: Env,
}

impl Env {
    fn extend(&self, name: String, value: Value) -> Env {
        Env(Some(Rc::new(EnvNode {
            name,
            value,
            next: self.clone(),
        })))
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.name == name {
                return Some(node.value.clone());
            }
            cur = &node.next.0;
        }
        None
    }
}

// ---------------------------------------------------------------------------
// The witness-directed value operations
// ---------------------------------------------------------------------------

/// Apply an injection witness to a value.
pub fn inject_value(w: &InjWitness, v: Value) -> Result<Value, RunError> {
    match w {
        InjWitness::Refl => Ok(v),
        InjWitness::L(inner) => Ok(Value::Inl(Box::new(inject_value(inner, v)?))),
        InjWitness::R(inner) => Ok(Value::Inr(Box::new(inject_value(inner, v)?))),
        InjWitness::Split(wl, wr) => match v {
            Value::Inl(x) => inject_value(wl, *x),
            Value::Inr(y) => inject_value(wr, *y),
            other => Err(internal(format!(
                "Split witness applied to non-tagged value {:?}",
                other
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Routed {
    Selected(Value),
    Remainder(Value),
}

/// Route a coproduct-shaped value through a subtraction witness: `Selected`
/// values belong to the subtracted component, `Remainder` values to what is
/// left.
pub fn route_branch(w: &MinusWitness, v: Value) -> Result<Routed, RunError> {
    let expect_tag = |v: Value| -> Result<Value, RunError> {
        Err(internal(format!(
            "branch witness applied to non-tagged value {:?}",
            v
        )))
    };
    match w {
        MinusWitness::Onl(_) => match v {
            Value::Inl(x) => Ok(Routed::Selected(*x)),
            Value::Inr(y) => Ok(Routed::Remainder(*y)),
            other => expect_tag(other).map(Routed::Selected),
        },
        MinusWitness::Onr(_) => match v {
            Value::Inl(x) => Ok(Routed::Remainder(*x)),
            Value::Inr(y) => Ok(Routed::Selected(*y)),
            other => expect_tag(other).map(Routed::Selected),
        },
        MinusWitness::Le(_, inner) => match v {
            Value::Inr(y) => Ok(Routed::Remainder(Value::Inr(y))),
            Value::Inl(x) => match route_branch(inner, *x)? {
                Routed::Selected(s) => Ok(Routed::Selected(s)),
                Routed::Remainder(r) => Ok(Routed::Remainder(Value::Inl(Box::new(r)))),
            },
            other => expect_tag(other).map(Routed::Selected),
        },
        MinusWitness::Ri(_, inner) => match v {
            Value::Inl(x) => Ok(Routed::Remainder(Value::Inl(x))),
            Value::Inr(y) => match route_branch(inner, *y)? {
                Routed::Selected(s) => Ok(Routed::Selected(s)),
                Routed::Remainder(r) => Ok(Routed::Remainder(Value::Inr(Box::new(r)))),
            },
            other => expect_tag(other).map(Routed::Selected),
        },
        // three-way: first stage picks out the left summand of the
        // subtracted coproduct, the second stage the right one
        MinusWitness::Dist(first, second) => match route_branch(first, v)? {
            Routed::Selected(x) => Ok(Routed::Selected(Value::Inl(Box::new(x)))),
            Routed::Remainder(r) => match route_branch(second, r)? {
                Routed::Selected(y) => Ok(Routed::Selected(Value::Inr(Box::new(y)))),
                Routed::Remainder(z) => Ok(Routed::Remainder(z)),
            },
        },
    }
}

/// The derived structural map for a ground functor: apply `h` at recursive
/// positions, leave payloads alone, preserve tags.
pub fn fmap_value(
    decls: &HashMap<String, Rc<DataDecl>>,
    functor: &TypeExpr,
    h: &Value,
    v: Value,
    machine: &Machine,
) -> Result<Value, RunError> {
    match functor {
        TypeExpr::Coprod(l, r) => match v {
            Value::Inl(x) => Ok(Value::Inl(Box::new(fmap_value(decls, l, h, *x, machine)?))),
            Value::Inr(y) => Ok(Value::Inr(Box::new(fmap_value(decls, r, h, *y, machine)?))),
            other => Err(internal(format!(
                "fmap over a coproduct applied to {:?}",
                other
            ))),
        },
        TypeExpr::Atom(name, _) => {
            let Some(decl) = decls.get(&**name) else {
                return Err(internal(format!("fmap over unknown functor {}", name)));
            };
            match v {
                Value::Con(cname, args) => {
                    if cname != decl.ctor || args.len() != decl.fields.len() {
                        return Err(internal(format!(
                            "fmap: {} value does not match its declaration",
                            cname
                        )));
                    }
                    let mut out = Vec::with_capacity(args.len());
                    for (arg, field) in args.into_iter().zip(&decl.fields) {
                        out.push(match field {
                            FieldTy::SelfRef => machine.apply(h.clone(), arg)?,
                            _ => arg,
                        });
                    }
                    Ok(Value::Con(cname, out))
                }
                other => Err(internal(format!("fmap over atom applied to {:?}", other))),
            }
        }
        other => Err(internal(format!("fmap at non-functor type {}", other))),
    }
}

// ---------------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------------

#[derive(Clone, Default)]
struct ESubst {
    base: Subst,
    inst: Subst,
    skolems: HashMap<Rc<str>, TypeExpr>,
}

impl ESubst {
    fn apply(&self, t: &TypeExpr) -> TypeExpr {
        let t = self.base.apply(t);
        let t = self.inst.apply(&t);
        if self.skolems.is_empty() {
            t
        } else {
            replace_skolems(&t, &self.skolems)
        }
    }

    fn apply_pred(&self, p: &Pred) -> Pred {
        match p {
            Pred::In(a, b) => Pred::In(self.apply(a), self.apply(b)),
            Pred::NotIn(a, b) => Pred::NotIn(self.apply(a), self.apply(b)),
            Pred::Leq(a, b) => Pred::Leq(self.apply(a), self.apply(b)),
            Pred::Minus(a, b, c) => Pred::Minus(self.apply(a), self.apply(b), self.apply(c)),
            Pred::Functor(a) => Pred::Functor(self.apply(a)),
        }
    }
}

fn replace_skolems(t: &TypeExpr, skolems: &HashMap<Rc<str>, TypeExpr>) -> TypeExpr {
    match t {
        TypeExpr::Var(n, _) => match skolems.get(n) {
            Some(rep) => rep.clone(),
            None => t.clone(),
        },
        TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => t.clone(),
        TypeExpr::Coprod(a, b) => {
            TypeExpr::coprod(replace_skolems(a, skolems), replace_skolems(b, skolems))
        }
        TypeExpr::Fun(a, b) => {
            TypeExpr::fun(replace_skolems(a, skolems), replace_skolems(b, skolems))
        }
        TypeExpr::Pair(a, b) => {
            TypeExpr::pair(replace_skolems(a, skolems), replace_skolems(b, skolems))
        }
        TypeExpr::App(a, b) => {
            TypeExpr::app(replace_skolems(a, skolems), replace_skolems(b, skolems))
        }
        TypeExpr::Fix(a) => TypeExpr::fix(replace_skolems(a, skolems)),
        TypeExpr::Maybe(a) => TypeExpr::maybe(replace_skolems(a, skolems)),
        TypeExpr::Fam(n, args) => TypeExpr::Fam(
            n.clone(),
            args.iter().map(|a| replace_skolems(a, skolems)).collect(),
        ),
        TypeExpr::Con(n, args) => TypeExpr::Con(
            n.clone(),
            args.iter().map(|a| replace_skolems(a, skolems)).collect(),
        ),
    }
}

struct Elab<'a> {
    prog: &'a CheckedProgram,
    solver: &'a dyn PredSolver,
    memo: HashMap<String, usize>,
    globals: Vec<Option<EExpr>>,
}

struct ElabCtx {
    subst: ESubst,
    /// the binding instance under elaboration, for monomorphic recursion
    current: Option<(String, usize)>,
    locals: Vec<String>,
}

impl<'a> Elab<'a> {
    fn ground_pred(&self, ctx: &ElabCtx, p: &Pred) -> Result<Pred, RunError> {
        let applied = ctx.subst.apply_pred(p);
        let ok = match &applied {
            Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => {
                a.is_ground() && b.is_ground()
            }
            Pred::Minus(a, b, _) => a.is_ground() && b.is_ground(),
            Pred::Functor(a) => a.is_ground(),
        };
        if !ok {
            return Err(internal(format!(
                "predicate {} is not ground at elaboration",
                applied
            )));
        }
        Ok(applied)
    }

    fn solve_inj(&self, ctx: &ElabCtx, p: &Pred) -> Result<InjWitness, RunError> {
        let p = self.ground_pred(ctx, p)?;
        match self.solver.solve_pred(&p, &[]) {
            Ok(Solution::Holds(Evidence::Inj(w))) => Ok(w),
            other => Err(internal(format!(
                "no injection evidence for {} ({:?})",
                p, other
            ))),
        }
    }

    fn solve_minus(&self, ctx: &ElabCtx, p: &Pred) -> Result<MinusWitness, RunError> {
        let p = self.ground_pred(ctx, p)?;
        match self.solver.solve_pred(&p, &[]) {
            Ok(Solution::Holds(Evidence::Minus(w, _))) => Ok(w),
            other => Err(internal(format!(
                "no branching evidence for {} ({:?})",
                p, other
            ))),
        }
    }

    fn instance(
        &mut self,
        name: &str,
        ground: Vec<(Rc<str>, TypeExpr)>,
    ) -> Result<usize, RunError> {
        for (v, t) in &ground {
            if !t.is_ground() {
                return Err(internal(format!(
                    "instantiation of {} leaves {} open at {}",
                    name, v, t
                )));
            }
        }
        let mut key = String::from(name);
        for (v, t) in &ground {
            key.push_str(&format!("@{}={}", v, t));
        }
        if let Some(idx) = self.memo.get(&key) {
            return Ok(*idx);
        }
        let idx = self.globals.len();
        self.globals.push(None);
        self.memo.insert(key, idx);
        let gb = self
            .prog
            .bindings
            .get(name)
            .ok_or_else(|| internal(format!("unknown binding {}", name)))?
            .clone();
        let GlobalKind::UserLet { body, skolem_map } = &gb.kind else {
            return Err(internal(format!("{} is not a user binding", name)));
        };
        let subst = if skolem_map.is_empty() {
            let mut inst = Subst::new();
            for (v, t) in &ground {
                inst.bind(v.clone(), t.clone());
            }
            ESubst {
                base: self.prog.subst.clone(),
                inst,
                skolems: HashMap::new(),
            }
        } else {
            let by_var: HashMap<&Rc<str>, &TypeExpr> =
                ground.iter().map(|(v, t)| (v, t)).collect();
            let mut skolems = HashMap::new();
            for (decl_var, skolem_atom) in skolem_map {
                let Some(t) = by_var.get(decl_var) else {
                    return Err(internal(format!(
                        "missing instantiation for {} of {}",
                        decl_var, name
                    )));
                };
                skolems.insert(skolem_atom.clone(), (*t).clone());
            }
            ESubst {
                base: self.prog.subst.clone(),
                inst: Subst::new(),
                skolems,
            }
        };
        let mut ctx = ElabCtx {
            subst,
            current: Some((name.to_string(), idx)),
            locals: Vec::new(),
        };
        let ee = self.expr(body, &mut ctx)?;
        self.globals[idx] = Some(ee);
        Ok(idx)
    }

    fn expr(&mut self, e: &Expr, ctx: &mut ElabCtx) -> Result<EExpr, RunError> {
        match &e.kind {
            ExprKind::Int(n) => Ok(EExpr::Int(*n)),
            ExprKind::Bool(b) => Ok(EExpr::Bool(*b)),
            ExprKind::Var(name) => {
                if ctx.locals.iter().any(|l| l == name) {
                    return Ok(EExpr::Local(name.clone()));
                }
                if let Some((cur_name, cur_idx)) = &ctx.current {
                    if cur_name == name && !self.prog.node_inst.contains_key(&e.id) {
                        return Ok(EExpr::Global(*cur_idx));
                    }
                }
                let gb = self
                    .prog
                    .bindings
                    .get(name)
                    .ok_or_else(|| internal(format!("unknown name {} at elaboration", name)))?
                    .clone();
                match &gb.kind {
                    GlobalKind::Ctor(decl) => Ok(EExpr::Prim(Prim::Ctor(decl.clone()))),
                    GlobalKind::Builtin(id) => self.builtin(*id, e.id, ctx),
                    GlobalKind::UserLet { .. } => {
                        let inst = self.prog.node_inst.get(&e.id).ok_or_else(|| {
                            internal(format!("use of {} has no instantiation record", name))
                        })?;
                        let ground: Vec<(Rc<str>, TypeExpr)> = inst
                            .mapping
                            .iter()
                            .map(|(v, t)| (v.clone(), ctx.subst.apply(t)))
                            .collect();
                        let idx = self.instance(name, ground)?;
                        Ok(EExpr::Global(idx))
                    }
                }
            }
            ExprKind::Lam(pats, body) => {
                let mut pushed = 0;
                for p in pats {
                    for b in pattern_binders(p) {
                        ctx.locals.push(b);
                        pushed += 1;
                    }
                }
                let eb = self.expr(body, ctx)?;
                for _ in 0..pushed {
                    ctx.locals.pop();
                }
                Ok(EExpr::Lam(pats.clone(), Rc::new(eb)))
            }
            ExprKind::App(f, x) => Ok(EExpr::App(
                Rc::new(self.expr(f, ctx)?),
                Rc::new(self.expr(x, ctx)?),
            )),
            ExprKind::Pair(a, b) => Ok(EExpr::Pair(
                Rc::new(self.expr(a, ctx)?),
                Rc::new(self.expr(b, ctx)?),
            )),
            ExprKind::BinOp(op, a, b) => {
                let ea = Rc::new(self.expr(a, ctx)?);
                let eb = Rc::new(self.expr(b, ctx)?);
                match op {
                    BinOp::Add => Ok(EExpr::Add(ea, eb)),
                    BinOp::Mul => Ok(EExpr::Mul(ea, eb)),
                    BinOp::Dispatch => Ok(EExpr::Dispatch(ea, eb)),
                    BinOp::Branch => {
                        let preds = self
                            .prog
                            .node_preds
                            .get(&e.id)
                            .ok_or_else(|| internal("branch without recorded constraint"))?;
                        let witness = self.solve_minus(ctx, &preds[0])?;
                        Ok(EExpr::Branch {
                            witness,
                            m: ea,
                            n: eb,
                        })
                    }
                }
            }
            ExprKind::Ann(inner, _) => self.expr(inner, ctx),
            ExprKind::Let { name, bound, body } => {
                let eb = self.expr(bound, ctx)?;
                ctx.locals.push(name.clone());
                let ebody = self.expr(body, ctx)?;
                ctx.locals.pop();
                Ok(EExpr::Let {
                    name: name.clone(),
                    bound: Rc::new(eb),
                    body: Rc::new(ebody),
                })
            }
        }
    }

    fn builtin(&mut self, id: BuiltinId, node: NodeId, ctx: &ElabCtx) -> Result<EExpr, RunError> {
        let pred = |elab: &Elab<'a>| -> Result<Pred, RunError> {
            elab.prog
                .node_preds
                .get(&node)
                .and_then(|ps| ps.first().cloned())
                .ok_or_else(|| internal("builtin use without recorded constraint"))
        };
        match id {
            BuiltinId::Inj => {
                let w = self.solve_inj(ctx, &pred(self)?)?;
                Ok(EExpr::Prim(Prim::Inj(w)))
            }
            BuiltinId::InjFix => {
                let w = self.solve_inj(ctx, &pred(self)?)?;
                Ok(EExpr::Prim(Prim::InjFix(w)))
            }
            BuiltinId::Prj => {
                let w = self.solve_minus(ctx, &pred(self)?)?;
                Ok(EExpr::Prim(Prim::Prj(w)))
            }
            BuiltinId::Fmap => {
                let p = self.ground_pred(ctx, &pred(self)?)?;
                let Pred::Functor(t) = p else {
                    return Err(internal("fmap recorded a non-Functor constraint"));
                };
                Ok(EExpr::Prim(Prim::FmapAt(t)))
            }
            BuiltinId::Cases => Ok(EExpr::Prim(Prim::Cases)),
            BuiltinId::MkIn => Ok(EExpr::Prim(Prim::MkIn)),
            BuiltinId::MkInl => Ok(EExpr::Prim(Prim::MkInl)),
            BuiltinId::MkInr => Ok(EExpr::Prim(Prim::MkInr)),
        }
    }
}

fn pattern_binders(p: &Pattern) -> Vec<String> {
    match p {
        Pattern::Var(x) => vec![x.clone()],
        Pattern::Wild => vec![],
        Pattern::Con { binders, .. } => binders.iter().filter(|b| *b != "_").cloned().collect(),
        Pattern::In(p) | Pattern::Inl(p) | Pattern::Inr(p) => pattern_binders(p),
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

pub struct Machine {
    globals: Vec<EExpr>,
    values: RefCell<Vec<Option<Value>>>,
    in_progress: RefCell<Vec<bool>>,
    decls_by_functor: HashMap<String, Rc<DataDecl>>,
}

impl Machine {
    fn global(&self, idx: usize) -> Result<Value, RunError> {
        if let Some(v) = &self.values.borrow()[idx] {
            return Ok(v.clone());
        }
        if self.in_progress.borrow()[idx] {
            return Err(internal("value recursion without an intervening lambda"));
        }
        self.in_progress.borrow_mut()[idx] = true;
        let e = self.globals[idx].clone();
        let v = self.eval(&e, &Env::default())?;
        self.in_progress.borrow_mut()[idx] = false;
        self.values.borrow_mut()[idx] = Some(v.clone());
        Ok(v)
    }

    pub fn eval(&self, e: &EExpr, env: &Env) -> Result<Value, RunError> {
        match e {
            EExpr::Int(n) => Ok(Value::Int(*n)),
            EExpr::Bool(b) => Ok(Value::Bool(*b)),
            EExpr::Local(name) => env
                .lookup(name)
                .ok_or_else(|| internal(format!("unbound local {}", name))),
            EExpr::Global(idx) => self.global(*idx),
            EExpr::Lam(params, body) => Ok(Value::Fun(FunValue::Closure {
                params: params.clone(),
                applied: Vec::new(),
                body: body.clone(),
                env: env.clone(),
            })),
            EExpr::App(f, x) => {
                let vf = self.eval(f, env)?;
                let vx = self.eval(x, env)?;
                self.apply(vf, vx)
            }
            EExpr::Pair(a, b) => Ok(Value::Pair(
                Box::new(self.eval(a, env)?),
                Box::new(self.eval(b, env)?),
            )),
            EExpr::Add(a, b) => {
                let (x, y) = (self.eval(a, env)?, self.eval(b, env)?);
                match (x, y) {
                    (Value::Int(x), Value::Int(y)) => Ok(Value::Int(x + y)),
                    _ => Err(internal("+ applied to non-integers")),
                }
            }
            EExpr::Mul(a, b) => {
                let (x, y) = (self.eval(a, env)?, self.eval(b, env)?);
                match (x, y) {
                    (Value::Int(x), Value::Int(y)) => Ok(Value::Int(x * y)),
                    _ => Err(internal("* applied to non-integers")),
                }
            }
            EExpr::Branch { witness, m, n } => Ok(Value::Fun(FunValue::BranchFn {
                witness: witness.clone(),
                m: Box::new(self.eval(m, env)?),
                n: Box::new(self.eval(n, env)?),
            })),
            EExpr::Dispatch(m, n) => Ok(Value::Fun(FunValue::DispatchFn {
                m: Box::new(self.eval(m, env)?),
                n: Box::new(self.eval(n, env)?),
            })),
            EExpr::Prim(p) => {
                if p.arity() == 0 {
                    self.apply_prim(p, Vec::new())
                } else {
                    Ok(Value::Fun(FunValue::Partial {
                        prim: p.clone(),
                        applied: Vec::new(),
                    }))
                }
            }
            EExpr::Let { name, bound, body } => {
                let vb = self.eval(bound, env)?;
                self.eval(body, &env.extend(name.clone(), vb))
            }
        }
    }

    pub fn apply(&self, f: Value, arg: Value) -> Result<Value, RunError> {
        match f {
            Value::Fun(FunValue::Closure {
                params,
                mut applied,
                body,
                env,
            }) => {
                applied.push(arg);
                if applied.len() == params.len() {
                    let mut env = env.clone();
                    for (p, v) in params.iter().zip(applied) {
                        env = self.bind_pattern(p, v, env)?;
                    }
                    self.eval(&body, &env)
                } else {
                    Ok(Value::Fun(FunValue::Closure {
                        params,
                        applied,
                        body,
                        env,
                    }))
                }
            }
            Value::Fun(FunValue::Partial { prim, mut applied }) => {
                applied.push(arg);
                if applied.len() == prim.arity() {
                    self.apply_prim(&prim, applied)
                } else {
                    Ok(Value::Fun(FunValue::Partial { prim, applied }))
                }
            }
            Value::Fun(FunValue::BranchFn { witness, m, n }) => {
                match route_branch(&witness, arg)? {
                    Routed::Selected(x) => self.apply(*m, x),
                    Routed::Remainder(r) => self.apply(*n, r),
                }
            }
            Value::Fun(FunValue::DispatchFn { m, n }) => match arg {
                Value::Inl(x) => self.apply(*m, *x),
                Value::Inr(y) => self.apply(*n, *y),
                other => Err(internal(format!(
                    ".?. applied to non-tagged value {:?}",
                    other
                ))),
            },
            Value::Fun(FunValue::CasesFn { cs }) => match arg {
                Value::In(inner) => {
                    let step = self.apply((*cs).clone(), *inner)?;
                    self.apply(step, Value::Fun(FunValue::CasesFn { cs }))
                }
                other => Err(internal(format!(
                    "cases applied to non-recursive value {:?}",
                    other
                ))),
            },
            other => Err(internal(format!("applied non-function {:?}", other))),
        }
    }

    fn apply_prim(&self, prim: &Prim, mut args: Vec<Value>) -> Result<Value, RunError> {
        match prim {
            Prim::Inj(w) => inject_value(w, args.pop().unwrap()),
            Prim::InjFix(w) => Ok(Value::In(Box::new(inject_value(w, args.pop().unwrap())?))),
            Prim::Cases => Ok(Value::Fun(FunValue::CasesFn {
                cs: Box::new(args.pop().unwrap()),
            })),
            Prim::Prj(w) => match route_branch(w, args.pop().unwrap())? {
                Routed::Selected(x) => Ok(Value::MaybeV(Some(Box::new(x)))),
                Routed::Remainder(_) => Ok(Value::MaybeV(None)),
            },
            Prim::FmapAt(t) => {
                let v = args.pop().unwrap();
                let h = args.pop().unwrap();
                fmap_value(&self.decls_by_functor, t, &h, v, self)
            }
            Prim::MkIn => Ok(Value::In(Box::new(args.pop().unwrap()))),
            Prim::MkInl => Ok(Value::Inl(Box::new(args.pop().unwrap()))),
            Prim::MkInr => Ok(Value::Inr(Box::new(args.pop().unwrap()))),
            Prim::Ctor(d) => Ok(Value::Con(d.ctor.clone(), args)),
        }
    }

    fn bind_pattern(&self, p: &Pattern, v: Value, env: Env) -> Result<Env, RunError> {
        match p {
            Pattern::Var(x) => Ok(env.extend(x.clone(), v)),
            Pattern::Wild => Ok(env),
            Pattern::Con { name, binders } => match v {
                Value::Con(cname, args) if cname == *name => {
                    let mut env = env;
                    for (b, a) in binders.iter().zip(args) {
                        if b != "_" {
                            env = env.extend(b.clone(), a);
                        }
                    }
                    Ok(env)
                }
                other => Err(internal(format!(
                    "constructor pattern {} applied to {:?}",
                    name, other
                ))),
            },
            Pattern::In(inner) => match v {
                Value::In(x) => self.bind_pattern(inner, *x, env),
                other => Err(RunError::Pattern(format!(
                    "In pattern applied to {}",
                    render_value(&other)
                ))),
            },
            Pattern::Inl(inner) => match v {
                Value::Inl(x) => self.bind_pattern(inner, *x, env),
                Value::Inr(_) => Err(RunError::Pattern(
                    "Inl pattern matched an Inr value".to_string(),
                )),
                other => Err(RunError::Pattern(format!(
                    "Inl pattern applied to {}",
                    render_value(&other)
                ))),
            },
            Pattern::Inr(inner) => match v {
                Value::Inr(x) => self.bind_pattern(inner, *x, env),
                Value::Inl(_) => Err(RunError::Pattern(
                    "Inr pattern matched an Inl value".to_string(),
                )),
                other => Err(RunError::Pattern(format!(
                    "Inr pattern applied to {}",
                    render_value(&other)
                ))),
            },
        }
    }
}

/// Elaborate and evaluate a checked program's `main`.
pub fn evaluate(checked: &CheckedProgram, solver: &dyn PredSolver) -> Result<Value, RunError> {
    let Some(main) = &checked.main else {
        return Err(RunError::Check(LangError::Type {
            pos: None,
            message: "program has no main".to_string(),
        }));
    };
    let mut elab = Elab {
        prog: checked,
        solver,
        memo: HashMap::new(),
        globals: Vec::new(),
    };
    let mut ctx = ElabCtx {
        subst: ESubst {
            base: checked.subst.clone(),
            inst: Subst::new(),
            skolems: HashMap::new(),
        },
        current: None,
        locals: Vec::new(),
    };
    let main_e = elab.expr(main, &mut ctx)?;
    let globals: Vec<EExpr> = elab
        .globals
        .into_iter()
        .map(|g| g.expect("instance left unfilled"))
        .collect();
    let n = globals.len();
    let machine = Machine {
        globals,
        values: RefCell::new(vec![None; n]),
        in_progress: RefCell::new(vec![false; n]),
        decls_by_functor: checked.data_by_functor.clone(),
    };
    machine.eval(&main_e, &Env::default())
}

/// Literal syntax for printed results.
pub fn render_value(v: &Value) -> String {
    fn atomic(v: &Value) -> bool {
        matches!(
            v,
            Value::Int(_) | Value::Bool(_) | Value::Pair(_, _) | Value::MaybeV(None)
        ) || matches!(v, Value::Con(_, args) if args.is_empty())
    }
    fn wrap(v: &Value) -> String {
        if atomic(v) {
            render_value(v)
        } else {
            format!("({})", render_value(v))
        }
    }
    match v {
        Value::Int(n) => n.to_string(),
        Value::Bool(true) => "True".to_string(),
        Value::Bool(false) => "False".to_string(),
        Value::Pair(a, b) => format!("({}, {})", render_value(a), render_value(b)),
        Value::Con(name, args) => {
            if args.is_empty() {
                name.clone()
            } else {
                let rendered: Vec<String> = args.iter().map(wrap).collect();
                format!("{} {}", name, rendered.join(" "))
            }
        }
        Value::Inl(x) => format!("Inl {}", wrap(x)),
        Value::Inr(x) => format!("Inr {}", wrap(x)),
        Value::In(x) => format!("In {}", wrap(x)),
        Value::MaybeV(Some(x)) => format!("Just {}", wrap(x)),
        Value::MaybeV(None) => "Nothing".to_string(),
        Value::Fun(_) => "<function>".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TypeExpr as T;

    fn a() -> Value {
        Value::Con("A".into(), vec![Value::Int(1)])
    }
    fn b() -> Value {
        Value::Con("B".into(), vec![Value::Int(2)])
    }

    #[test]
    fn injection_follows_the_path() {
        let w = InjWitness::l(InjWitness::Refl);
        assert_eq!(
            inject_value(&w, a()).unwrap(),
            Value::Inl(Box::new(a()))
        );
        let w = InjWitness::r(InjWitness::l(InjWitness::Refl));
        assert_eq!(
            inject_value(&w, a()).unwrap(),
            Value::Inr(Box::new(Value::Inl(Box::new(a()))))
        );
    }

    #[test]
    fn split_dispatches_on_tags() {
        let w = InjWitness::split(
            InjWitness::r(InjWitness::Refl),
            InjWitness::l(InjWitness::Refl),
        );
        assert_eq!(
            inject_value(&w, Value::Inl(Box::new(a()))).unwrap(),
            Value::Inr(Box::new(a()))
        );
        assert_eq!(
            inject_value(&w, Value::Inr(Box::new(b()))).unwrap(),
            Value::Inl(Box::new(b()))
        );
    }

    #[test]
    fn routing_base_cases() {
        let onl = MinusWitness::Onl(T::atom("B"));
        assert_eq!(
            route_branch(&onl, Value::Inl(Box::new(a()))).unwrap(),
            Routed::Selected(a())
        );
        assert_eq!(
            route_branch(&onl, Value::Inr(Box::new(b()))).unwrap(),
            Routed::Remainder(b())
        );
        let onr = MinusWitness::Onr(T::atom("A"));
        assert_eq!(
            route_branch(&onr, Value::Inl(Box::new(a()))).unwrap(),
            Routed::Remainder(a())
        );
        assert_eq!(
            route_branch(&onr, Value::Inr(Box::new(b()))).unwrap(),
            Routed::Selected(b())
        );
    }

    #[test]
    fn routing_le_recursive_case() {
        // subtracting B from (A :+: B) :+: C
        let w = MinusWitness::le(T::atom("C"), MinusWitness::Onr(T::atom("A")));
        // all tag shapes over the original coproduct
        let v_a = Value::Inl(Box::new(Value::Inl(Box::new(a()))));
        let v_b = Value::Inl(Box::new(Value::Inr(Box::new(b()))));
        let v_c = Value::Inr(Box::new(Value::Con("C".into(), vec![])));
        assert_eq!(
            route_branch(&w, v_a).unwrap(),
            Routed::Remainder(Value::Inl(Box::new(a())))
        );
        assert_eq!(route_branch(&w, v_b).unwrap(), Routed::Selected(b()));
        assert_eq!(
            route_branch(&w, v_c).unwrap(),
            Routed::Remainder(Value::Inr(Box::new(Value::Con("C".into(), vec![]))))
        );
    }

    #[test]
    fn routing_dist_three_way() {
        // subtracting (A :+: B) from (A :+: B) viewed in two stages:
        // first remove A (Onl leaves B), then remove B from B? the second
        // stage here is a base case over the leftover summand
        let w = MinusWitness::dist(
            MinusWitness::Onl(T::coprod(T::atom("B"), T::atom("C"))),
            MinusWitness::Onl(T::atom("C")),
        );
        // A-value: selected left
        assert_eq!(
            route_branch(&w, Value::Inl(Box::new(a()))).unwrap(),
            Routed::Selected(Value::Inl(Box::new(a())))
        );
        // B-value: remainder of stage one, selected right in stage two
        let vb = Value::Inr(Box::new(Value::Inl(Box::new(b()))));
        assert_eq!(
            route_branch(&w, vb).unwrap(),
            Routed::Selected(Value::Inr(Box::new(b())))
        );
        // C-value: remainder of both
        let vc = Value::Inr(Box::new(Value::Inr(Box::new(Value::Con("C".into(), vec![])))));
        assert_eq!(
            route_branch(&w, vc).unwrap(),
            Routed::Remainder(Value::Con("C".into(), vec![]))
        );
    }

    #[test]
    fn value_rendering() {
        assert_eq!(render_value(&Value::Int(3)), "3");
        assert_eq!(
            render_value(&Value::Pair(
                Box::new(Value::Int(3)),
                Box::new(Value::Bool(false))
            )),
            "(3, False)"
        );
        let v = Value::In(Box::new(Value::Inl(Box::new(Value::Con(
            "Const".into(),
            vec![Value::Int(1)],
        )))));
        assert_eq!(render_value(&v), "In (Inl (Const 1))");
        assert_eq!(render_value(&Value::MaybeV(None)), "Nothing");
    }
}
