//! Qualified-type inference for the surface language: Hindley-Milner with
//! predicates generated at uses of the injection and branching combinators,
//! context reduction through a pluggable solver, functional-dependency
//! improvement, and generalized defaulting for ambiguous variables.

use super::ast::*;
use crate::defaulting::{apply_defaults, find_ambiguous, DefaultDecl, DefaultError};
use crate::solver::PredSolver;
use crate::types::{Evidence, Kind, Pred, Scheme, Solution, Subst, TypeExpr};
use crate::unify::{mgu, mgu_rigid, UnifyOutcome};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, Default)]
pub struct LangFlags {
    pub generalized: bool,
    pub defaulting: bool,
    pub expose: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LangError {
    Type { pos: Option<Pos>, message: String },
    Ambiguity { message: String },
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LangError::Type { pos: Some(p), message } => {
                write!(f, "type error at {}: {}", p, message)
            }
            LangError::Type { pos: None, message } => write!(f, "type error: {}", message),
            LangError::Ambiguity { message } => write!(f, "ambiguity error: {}", message),
        }
    }
}

fn terr(pos: Pos, message: impl Into<String>) -> LangError {
    LangError::Type {
        pos: Some(pos),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinId {
    Inj,
    InjFix,
    Cases,
    Prj,
    Fmap,
    MkIn,
    MkInl,
    MkInr,
}

#[derive(Debug, Clone)]
pub enum GlobalKind {
    UserLet {
        body: Rc<Expr>,
        /// declared-variable name -> skolem atom name, for annotated lets
        skolem_map: Vec<(Rc<str>, Rc<str>)>,
    },
    Builtin(BuiltinId),
    Ctor(Rc<DataDecl>),
}

#[derive(Debug, Clone)]
pub struct GlobalBinding {
    pub scheme: Scheme,
    pub kind: GlobalKind,
}

/// How a use site instantiated a polymorphic binding.
#[derive(Debug, Clone)]
pub struct UseInst {
    pub name: String,
    pub mapping: Vec<(Rc<str>, TypeExpr)>,
}

/// Everything the evaluator needs after a successful check.
#[derive(Debug)]
pub struct CheckedProgram {
    pub lines: Vec<(String, Scheme)>,
    pub main: Option<Expr>,
    pub bindings: HashMap<String, Rc<GlobalBinding>>,
    pub data_by_ctor: HashMap<String, Rc<DataDecl>>,
    pub data_by_functor: HashMap<String, Rc<DataDecl>>,
    pub node_preds: HashMap<NodeId, Vec<Pred>>,
    pub node_inst: HashMap<NodeId, UseInst>,
    pub subst: Subst,
    pub flags: LangFlags,
}

enum AnnVarMode {
    /// Expression annotations: named variables become fresh unification
    /// variables, shared within the annotation.
    Flexible,
    /// Scheme annotations: named variables stay rigid.
    Rigid,
}

struct Infer<'a> {
    solver: &'a dyn PredSolver,
    flags: LangFlags,
    aliases: HashMap<String, TypeExpr>,
    data_by_ctor: HashMap<String, Rc<DataDecl>>,
    data_by_functor: HashMap<String, Rc<DataDecl>>,
    defaults: Vec<DefaultDecl>,
    globals: HashMap<String, Rc<GlobalBinding>>,
    subst: Subst,
    fresh: u64,
    skolem_counter: u64,
    pending: Vec<Pred>,
    node_preds: HashMap<NodeId, Vec<Pred>>,
    node_inst: HashMap<NodeId, UseInst>,
    locals: Vec<(String, TypeExpr)>,
}

pub fn check_program(
    prog: &Program,
    solver: &dyn PredSolver,
    flags: LangFlags,
) -> Result<CheckedProgram, LangError> {
    let mut ctx = Infer {
        solver,
        flags,
        aliases: HashMap::new(),
        data_by_ctor: HashMap::new(),
        data_by_functor: HashMap::new(),
        defaults: Vec::new(),
        globals: builtin_globals(),
        subst: Subst::new(),
        fresh: 0,
        skolem_counter: 0,
        pending: Vec::new(),
        node_preds: HashMap::new(),
        node_inst: HashMap::new(),
        locals: Vec::new(),
    };
    let mut lines = Vec::new();
    let mut main_expr = None;
    for decl in &prog.decls {
        match &decl.kind {
            DeclKind::Data(d) => ctx.register_data(d, decl.pos)?,
            DeclKind::TypeAlias(name, sty) => ctx.register_alias(name, sty, decl.pos)?,
            DeclKind::Default(form) => ctx.register_default(form, decl.pos)?,
            DeclKind::Let { name, ann, body } => {
                let scheme = ctx.check_let(name, ann.as_ref(), body, decl.pos)?;
                lines.push((name.clone(), scheme));
            }
            DeclKind::Main(e) => {
                if main_expr.is_some() {
                    return Err(terr(decl.pos, "duplicate main"));
                }
                ctx.check_main(e, decl.pos)?;
                main_expr = Some(e.clone());
            }
        }
    }
    Ok(CheckedProgram {
        lines,
        main: main_expr,
        bindings: ctx.globals,
        data_by_ctor: ctx.data_by_ctor,
        data_by_functor: ctx.data_by_functor,
        node_preds: ctx.node_preds,
        node_inst: ctx.node_inst,
        subst: ctx.subst,
        flags,
    })
}

fn builtin_globals() -> HashMap<String, Rc<GlobalBinding>> {
    let fvar = |n: &str| TypeExpr::var(n);
    let svar = |n: &str| TypeExpr::star_var(n);
    let app = TypeExpr::app;
    let fun = TypeExpr::fun;
    let fix = TypeExpr::fix;
    let mut out = HashMap::new();
    let mut add = |name: &str, vars: Vec<(&str, Kind)>, preds: Vec<Pred>, body: TypeExpr, id| {
        out.insert(
            name.to_string(),
            Rc::new(GlobalBinding {
                scheme: Scheme {
                    vars: vars.into_iter().map(|(n, k)| (n.into(), k)).collect(),
                    preds,
                    body,
                },
                kind: GlobalKind::Builtin(id),
            }),
        );
    };
    add(
        "inj",
        vec![("f", Kind::Functor), ("g", Kind::Functor), ("e", Kind::Star)],
        vec![Pred::Leq(fvar("f"), fvar("g"))],
        fun(app(fvar("f"), svar("e")), app(fvar("g"), svar("e"))),
        BuiltinId::Inj,
    );
    add(
        "inj'",
        vec![("f", Kind::Functor), ("g", Kind::Functor)],
        vec![Pred::Leq(fvar("f"), fvar("g"))],
        fun(app(fvar("f"), fix(fvar("g"))), fix(fvar("g"))),
        BuiltinId::InjFix,
    );
    add(
        "cases",
        vec![("g", Kind::Functor), ("a", Kind::Star)],
        vec![],
        fun(
            fun(
                app(fvar("g"), fix(fvar("g"))),
                fun(fun(fix(fvar("g")), svar("a")), svar("a")),
            ),
            fun(fix(fvar("g")), svar("a")),
        ),
        BuiltinId::Cases,
    );
    add(
        "prj",
        vec![
            ("f", Kind::Functor),
            ("g", Kind::Functor),
            ("h", Kind::Functor),
            ("e", Kind::Star),
        ],
        vec![Pred::Minus(fvar("f"), fvar("g"), fvar("h"))],
        fun(
            app(fvar("f"), svar("e")),
            TypeExpr::maybe(app(fvar("g"), svar("e"))),
        ),
        BuiltinId::Prj,
    );
    add(
        "fmap",
        vec![("f", Kind::Functor), ("a", Kind::Star), ("b", Kind::Star)],
        vec![Pred::Functor(fvar("f"))],
        fun(
            fun(svar("a"), svar("b")),
            fun(app(fvar("f"), svar("a")), app(fvar("f"), svar("b"))),
        ),
        BuiltinId::Fmap,
    );
    add(
        "In",
        vec![("g", Kind::Functor)],
        vec![],
        fun(app(fvar("g"), fix(fvar("g"))), fix(fvar("g"))),
        BuiltinId::MkIn,
    );
    add(
        "Inl",
        vec![("f", Kind::Functor), ("g", Kind::Functor), ("e", Kind::Star)],
        vec![],
        fun(
            app(fvar("f"), svar("e")),
            app(TypeExpr::coprod(fvar("f"), fvar("g")), svar("e")),
        ),
        BuiltinId::MkInl,
    );
    add(
        "Inr",
        vec![("f", Kind::Functor), ("g", Kind::Functor), ("e", Kind::Star)],
        vec![],
        fun(
            app(fvar("g"), svar("e")),
            app(TypeExpr::coprod(fvar("f"), fvar("g")), svar("e")),
        ),
        BuiltinId::MkInr,
    );
    out
}

impl Infer<'_> {
    fn fresh_var(&mut self, kind: Kind) -> TypeExpr {
        self.fresh += 1;
        TypeExpr::Var(format!("t{}", self.fresh).into(), kind)
    }

    fn register_data(&mut self, d: &DataDecl, pos: Pos) -> Result<(), LangError> {
        if self.data_by_functor.contains_key(&d.functor) || self.aliases.contains_key(&d.functor) {
            return Err(terr(pos, format!("duplicate type name {}", d.functor)));
        }
        if self.data_by_ctor.contains_key(&d.ctor) {
            return Err(terr(pos, format!("duplicate constructor {}", d.ctor)));
        }
        for reserved in ["Fix", "In", "Inl", "Inr", "Int", "Bool", "True", "False", "Maybe"] {
            if d.functor == reserved || d.ctor == reserved {
                return Err(terr(pos, format!("reserved name {}", reserved)));
            }
        }
        let rc = Rc::new(d.clone());
        self.data_by_functor.insert(d.functor.clone(), rc.clone());
        self.data_by_ctor.insert(d.ctor.clone(), rc.clone());
        // the constructor as a curried function
        let payload = TypeExpr::star_var("e");
        let functor = TypeExpr::atom(&d.functor);
        let mut body = TypeExpr::app(functor, payload.clone());
        for field in d.fields.iter().rev() {
            let arg = match field {
                FieldTy::SelfRef => payload.clone(),
                FieldTy::Int => TypeExpr::Int,
                FieldTy::Bool => TypeExpr::Bool,
            };
            body = TypeExpr::fun(arg, body);
        }
        self.globals.insert(
            d.ctor.clone(),
            Rc::new(GlobalBinding {
                scheme: Scheme {
                    vars: vec![("e".into(), Kind::Star)],
                    preds: vec![],
                    body,
                },
                kind: GlobalKind::Ctor(rc),
            }),
        );
        Ok(())
    }

    fn register_alias(&mut self, name: &str, sty: &SurfaceTy, pos: Pos) -> Result<(), LangError> {
        if self.aliases.contains_key(name) || self.data_by_functor.contains_key(name) {
            return Err(terr(pos, format!("duplicate type name {}", name)));
        }
        let mut vars = HashMap::new();
        let lowered = self.lower_ty(sty, None, &mut vars, &AnnVarMode::Rigid, pos)?;
        if !vars.is_empty() {
            return Err(terr(pos, "type aliases must be closed"));
        }
        self.aliases.insert(name.to_string(), lowered);
        Ok(())
    }

    fn register_default(&mut self, form: &DefaultForm, pos: Pos) -> Result<(), LangError> {
        let decl = DefaultDecl::from_minus_form(
            &form.left,
            &form.right,
            &form.subtrahend,
            &form.output,
        )
        .map_err(|e| terr(pos, e.to_string()))?;
        decl.validate(self.solver)
            .map_err(|e| terr(pos, e.to_string()))?;
        self.defaults.push(decl);
        Ok(())
    }

    /// Lower a surface type. `expected` drives kind assignment; variables are
    /// looked up (or created) in `vars`.
    fn lower_ty(
        &mut self,
        sty: &SurfaceTy,
        expected: Option<Kind>,
        vars: &mut HashMap<String, TypeExpr>,
        mode: &AnnVarMode,
        pos: Pos,
    ) -> Result<TypeExpr, LangError> {
        let check = |k: Kind| -> Result<(), LangError> {
            match expected {
                Some(exp) if exp != k => Err(terr(
                    pos,
                    format!("kind mismatch: expected {}, found {}", exp, k),
                )),
                _ => Ok(()),
            }
        };
        match sty {
            SurfaceTy::Int => {
                check(Kind::Star)?;
                Ok(TypeExpr::Int)
            }
            SurfaceTy::Bool => {
                check(Kind::Star)?;
                Ok(TypeExpr::Bool)
            }
            SurfaceTy::Fun(a, b) => {
                check(Kind::Star)?;
                Ok(TypeExpr::fun(
                    self.lower_ty(a, Some(Kind::Star), vars, mode, pos)?,
                    self.lower_ty(b, Some(Kind::Star), vars, mode, pos)?,
                ))
            }
            SurfaceTy::Coprod(a, b) => {
                check(Kind::Functor)?;
                Ok(TypeExpr::coprod(
                    self.lower_ty(a, Some(Kind::Functor), vars, mode, pos)?,
                    self.lower_ty(b, Some(Kind::Functor), vars, mode, pos)?,
                ))
            }
            SurfaceTy::Fix(a) => {
                check(Kind::Star)?;
                Ok(TypeExpr::fix(self.lower_ty(
                    a,
                    Some(Kind::Functor),
                    vars,
                    mode,
                    pos,
                )?))
            }
            SurfaceTy::App(f, e) => {
                check(Kind::Star)?;
                Ok(TypeExpr::app(
                    self.lower_ty(f, Some(Kind::Functor), vars, mode, pos)?,
                    self.lower_ty(e, Some(Kind::Star), vars, mode, pos)?,
                ))
            }
            SurfaceTy::Maybe(a) => {
                check(Kind::Star)?;
                Ok(TypeExpr::maybe(self.lower_ty(
                    a,
                    Some(Kind::Star),
                    vars,
                    mode,
                    pos,
                )?))
            }
            SurfaceTy::Name(n) => {
                if let Some(t) = self.aliases.get(n) {
                    let t = t.clone();
                    check(t.kind())?;
                    Ok(t)
                } else if self.data_by_functor.contains_key(n) {
                    check(Kind::Functor)?;
                    Ok(TypeExpr::atom(n))
                } else {
                    Err(terr(pos, format!("unknown type name {}", n)))
                }
            }
            SurfaceTy::Var(v) => {
                let kind = expected.unwrap_or(Kind::Functor);
                if let Some(existing) = vars.get(v) {
                    if existing.kind() != kind {
                        return Err(terr(
                            pos,
                            format!("type variable {} used at two kinds", v),
                        ));
                    }
                    Ok(existing.clone())
                } else {
                    let t = match mode {
                        AnnVarMode::Flexible => self.fresh_var(kind),
                        AnnVarMode::Rigid => TypeExpr::Var(v.as_str().into(), kind),
                    };
                    vars.insert(v.clone(), t.clone());
                    Ok(t)
                }
            }
        }
    }

    fn lower_scheme(&mut self, ss: &SurfaceScheme, pos: Pos) -> Result<Scheme, LangError> {
        let mut vars = HashMap::new();
        let mut preds = Vec::new();
        for p in &ss.preds {
            preds.push(match p {
                SurfacePred::Leq(a, b) => Pred::Leq(
                    self.lower_ty(a, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                    self.lower_ty(b, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                ),
                SurfacePred::Minus(a, b, c) => Pred::Minus(
                    self.lower_ty(a, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                    self.lower_ty(b, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                    self.lower_ty(c, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                ),
                SurfacePred::In(a, b) => Pred::In(
                    self.lower_ty(a, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                    self.lower_ty(b, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                ),
                SurfacePred::NotIn(a, b) => Pred::NotIn(
                    self.lower_ty(a, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                    self.lower_ty(b, Some(Kind::Functor), &mut vars, &AnnVarMode::Rigid, pos)?,
                ),
                SurfacePred::Functor(a) => Pred::Functor(self.lower_ty(
                    a,
                    Some(Kind::Functor),
                    &mut vars,
                    &AnnVarMode::Rigid,
                    pos,
                )?),
            });
        }
        let body = self.lower_ty(&ss.ty, Some(Kind::Star), &mut vars, &AnnVarMode::Rigid, pos)?;
        // declared order first, then any implicitly quantified extras
        let mut ordered: Vec<(Rc<str>, Kind)> = Vec::new();
        for v in &ss.vars {
            match vars.get(v) {
                Some(TypeExpr::Var(n, k)) => ordered.push((n.clone(), *k)),
                _ => {
                    return Err(terr(
                        pos,
                        format!("quantified variable {} does not occur in the signature", v),
                    ))
                }
            }
        }
        for (_, t) in vars.iter() {
            if let TypeExpr::Var(n, k) = t {
                if !ordered.iter().any(|(o, _)| o == n) {
                    ordered.push((n.clone(), *k));
                }
            }
        }
        ordered.sort_by(|a, b| {
            let pa = ss.vars.iter().position(|v| v.as_str() == &*a.0);
            let pb = ss.vars.iter().position(|v| v.as_str() == &*b.0);
            match (pa, pb) {
                (Some(x), Some(y)) => x.cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => a.0.cmp(&b.0),
            }
        });
        Ok(Scheme {
            vars: ordered,
            preds,
            body,
        })
    }

    fn unify(&mut self, t1: &TypeExpr, t2: &TypeExpr, pos: Pos) -> Result<(), LangError> {
        let a = self.subst.apply(t1);
        let b = self.subst.apply(t2);
        match mgu(&a, &b) {
            UnifyOutcome::Unifier(s) => {
                self.subst = self.subst.compose(&s);
                Ok(())
            }
            UnifyOutcome::NoUnifier(reason) => Err(terr(
                pos,
                format!("cannot unify {} with {} ({:?})", a, b, reason),
            )),
        }
    }

    /// Unify an inferred type against a skolemized signature: the signature's
    /// variables are rigid, so an over-general signature is rejected.
    fn unify_signature(&mut self, t1: &TypeExpr, t2: &TypeExpr, pos: Pos) -> Result<(), LangError> {
        let a = self.subst.apply(t1);
        let b = self.subst.apply(t2);
        match mgu_rigid(&a, &b, &is_skolem) {
            UnifyOutcome::Unifier(s) => {
                self.subst = self.subst.compose(&s);
                Ok(())
            }
            UnifyOutcome::NoUnifier(reason) => Err(terr(
                pos,
                format!("cannot unify {} with {} ({:?})", a, b, reason),
            )),
        }
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        for (n, t) in self.locals.iter().rev() {
            if n == name {
                return Some(Binding::Mono(t.clone()));
            }
        }
        self.globals.get(name).cloned().map(Binding::Global)
    }

    fn instantiate(&mut self, name: &str, gb: &GlobalBinding, node: NodeId) -> TypeExpr {
        let mut map = Subst::new();
        let mut mapping = Vec::new();
        for (v, k) in &gb.scheme.vars {
            let fresh = self.fresh_var(*k);
            map.bind(v.clone(), fresh.clone());
            mapping.push((v.clone(), fresh));
        }
        let preds: Vec<Pred> = gb.scheme.preds.iter().map(|p| map.apply_pred(p)).collect();
        if !preds.is_empty() {
            self.pending.extend(preds.clone());
            self.node_preds.insert(node, preds);
        }
        self.node_inst.insert(
            node,
            UseInst {
                name: name.to_string(),
                mapping,
            },
        );
        map.apply(&gb.scheme.body)
    }

    fn infer_pattern(
        &mut self,
        pat: &Pattern,
        pos: Pos,
    ) -> Result<(TypeExpr, Vec<(String, TypeExpr)>), LangError> {
        match pat {
            Pattern::Var(x) => {
                let t = self.fresh_var(Kind::Star);
                Ok((t.clone(), vec![(x.clone(), t)]))
            }
            Pattern::Wild => Ok((self.fresh_var(Kind::Star), vec![])),
            Pattern::Con { name, binders } => {
                let Some(decl) = self.data_by_ctor.get(name).cloned() else {
                    return Err(terr(pos, format!("unknown constructor {}", name)));
                };
                if decl.fields.len() != binders.len() {
                    return Err(terr(
                        pos,
                        format!(
                            "constructor {} takes {} fields, pattern has {}",
                            name,
                            decl.fields.len(),
                            binders.len()
                        ),
                    ));
                }
                let payload = self.fresh_var(Kind::Star);
                let mut binds = Vec::new();
                for (b, field) in binders.iter().zip(&decl.fields) {
                    if b == "_" {
                        continue;
                    }
                    let t = match field {
                        FieldTy::SelfRef => payload.clone(),
                        FieldTy::Int => TypeExpr::Int,
                        FieldTy::Bool => TypeExpr::Bool,
                    };
                    binds.push((b.clone(), t));
                }
                Ok((
                    TypeExpr::app(TypeExpr::atom(&decl.functor), payload),
                    binds,
                ))
            }
            Pattern::In(p) => {
                self.require_expose(pos, "In")?;
                let g = self.fresh_var(Kind::Functor);
                let (ti, binds) = self.infer_pattern(p, pos)?;
                self.unify(&ti, &TypeExpr::app(g.clone(), TypeExpr::fix(g.clone())), pos)?;
                Ok((TypeExpr::fix(g), binds))
            }
            Pattern::Inl(p) => {
                self.require_expose(pos, "Inl")?;
                let f = self.fresh_var(Kind::Functor);
                let g = self.fresh_var(Kind::Functor);
                let e = self.fresh_var(Kind::Star);
                let (ti, binds) = self.infer_pattern(p, pos)?;
                self.unify(&ti, &TypeExpr::app(f.clone(), e.clone()), pos)?;
                Ok((TypeExpr::app(TypeExpr::coprod(f, g), e), binds))
            }
            Pattern::Inr(p) => {
                self.require_expose(pos, "Inr")?;
                let f = self.fresh_var(Kind::Functor);
                let g = self.fresh_var(Kind::Functor);
                let e = self.fresh_var(Kind::Star);
                let (ti, binds) = self.infer_pattern(p, pos)?;
                self.unify(&ti, &TypeExpr::app(g.clone(), e.clone()), pos)?;
                Ok((TypeExpr::app(TypeExpr::coprod(f, g), e), binds))
            }
        }
    }

    fn require_expose(&self, pos: Pos, what: &str) -> Result<(), LangError> {
        if self.flags.expose {
            Ok(())
        } else {
            Err(terr(
                pos,
                format!(
                    "{} patterns observe coproduct structure; enable --expose-constructors",
                    what
                ),
            ))
        }
    }

    fn infer_expr(&mut self, e: &Expr) -> Result<TypeExpr, LangError> {
        match &e.kind {
            ExprKind::Int(_) => Ok(TypeExpr::Int),
            ExprKind::Bool(_) => Ok(TypeExpr::Bool),
            ExprKind::Var(name) => match self.lookup(name) {
                Some(Binding::Mono(t)) => Ok(t),
                Some(Binding::Global(gb)) => {
                    if let GlobalKind::Builtin(id) = &gb.kind {
                        if matches!(id, BuiltinId::MkInl | BuiltinId::MkInr) && !self.flags.expose
                        {
                            return Err(terr(
                                e.pos,
                                format!(
                                    "{} builds raw coproduct tags; enable --expose-constructors",
                                    name
                                ),
                            ));
                        }
                    }
                    Ok(self.instantiate(name, &gb, e.id))
                }
                None => Err(terr(e.pos, format!("unknown name {}", name))),
            },
            ExprKind::Lam(pats, body) => {
                let mut param_tys = Vec::new();
                let mut pushed = 0;
                for p in pats {
                    let (t, binds) = self.infer_pattern(p, e.pos)?;
                    param_tys.push(t);
                    for (n, bt) in binds {
                        self.locals.push((n, bt));
                        pushed += 1;
                    }
                }
                let t_body = self.infer_expr(body)?;
                for _ in 0..pushed {
                    self.locals.pop();
                }
                let mut ty = t_body;
                for t in param_tys.into_iter().rev() {
                    ty = TypeExpr::fun(t, ty);
                }
                Ok(ty)
            }
            ExprKind::App(f, x) => {
                let tf = self.infer_expr(f)?;
                let tx = self.infer_expr(x)?;
                let r = self.fresh_var(Kind::Star);
                self.unify(&tf, &TypeExpr::fun(tx, r.clone()), e.pos)?;
                Ok(r)
            }
            ExprKind::Pair(a, b) => {
                let ta = self.infer_expr(a)?;
                let tb = self.infer_expr(b)?;
                Ok(TypeExpr::pair(ta, tb))
            }
            ExprKind::BinOp(op, lhs, rhs) => {
                let tl = self.infer_expr(lhs)?;
                let tr = self.infer_expr(rhs)?;
                match op {
                    BinOp::Add | BinOp::Mul => {
                        self.unify(&tl, &TypeExpr::Int, e.pos)?;
                        self.unify(&tr, &TypeExpr::Int, e.pos)?;
                        Ok(TypeExpr::Int)
                    }
                    BinOp::Branch => {
                        let f = self.fresh_var(Kind::Functor);
                        let g = self.fresh_var(Kind::Functor);
                        let h = self.fresh_var(Kind::Functor);
                        let payload = self.fresh_var(Kind::Star);
                        let result = self.fresh_var(Kind::Star);
                        self.unify(
                            &tl,
                            &TypeExpr::fun(
                                TypeExpr::app(g.clone(), payload.clone()),
                                result.clone(),
                            ),
                            e.pos,
                        )?;
                        self.unify(
                            &tr,
                            &TypeExpr::fun(
                                TypeExpr::app(h.clone(), payload.clone()),
                                result.clone(),
                            ),
                            e.pos,
                        )?;
                        let pred = Pred::Minus(f.clone(), g, h);
                        self.pending.push(pred.clone());
                        self.node_preds.insert(e.id, vec![pred]);
                        Ok(TypeExpr::fun(TypeExpr::app(f, payload), result))
                    }
                    BinOp::Dispatch => {
                        let f = self.fresh_var(Kind::Functor);
                        let g = self.fresh_var(Kind::Functor);
                        let payload = self.fresh_var(Kind::Star);
                        let result = self.fresh_var(Kind::Star);
                        self.unify(
                            &tl,
                            &TypeExpr::fun(
                                TypeExpr::app(f.clone(), payload.clone()),
                                result.clone(),
                            ),
                            e.pos,
                        )?;
                        self.unify(
                            &tr,
                            &TypeExpr::fun(
                                TypeExpr::app(g.clone(), payload.clone()),
                                result.clone(),
                            ),
                            e.pos,
                        )?;
                        Ok(TypeExpr::fun(
                            TypeExpr::app(TypeExpr::coprod(f, g), payload),
                            result,
                        ))
                    }
                }
            }
            ExprKind::Ann(inner, sty) => {
                let t_inner = self.infer_expr(inner)?;
                let mut vars = HashMap::new();
                let t_ann =
                    self.lower_ty(sty, Some(Kind::Star), &mut vars, &AnnVarMode::Flexible, e.pos)?;
                self.unify(&t_inner, &t_ann, e.pos)?;
                Ok(t_ann)
            }
            ExprKind::Let { name, bound, body } => {
                // local lets are monomorphic
                let t_bound = self.infer_expr(bound)?;
                self.locals.push((name.clone(), t_bound));
                let t_body = self.infer_expr(body)?;
                self.locals.pop();
                Ok(t_body)
            }
        }
    }

    /// Solve pending predicates to a fixpoint: proven ones are discharged
    /// (improving subtraction outputs), disproven ones are errors, stuck ones
    /// are retained.
    fn reduce_context(&mut self, givens: &[Pred], pos: Pos) -> Result<(), LangError> {
        loop {
            let mut progress = false;
            let mut still = Vec::new();
            for p in std::mem::take(&mut self.pending) {
                let applied = self.subst.apply_pred(&p);
                let sol = self
                    .solver
                    .solve_pred(&applied, givens)
                    .map_err(|err| terr(pos, err.to_string()))?;
                match sol {
                    Solution::Holds(ev) => {
                        if let (Pred::Minus(_, _, TypeExpr::Var(out, _)), Some(rem)) =
                            (&applied, ev.remainder())
                        {
                            if !matches!(rem, TypeExpr::Var(n, _) if n == out) {
                                let mut s = Subst::new();
                                s.bind(out.clone(), rem.clone());
                                self.subst = self.subst.compose(&s);
                            }
                        }
                        progress = true;
                    }
                    Solution::Fails => {
                        return Err(terr(
                            pos,
                            format!(
                                "cannot solve {}: disproven\n{}",
                                applied,
                                self.render_failure_trace(&applied, givens)
                            ),
                        ));
                    }
                    Solution::Stuck(_) => still.push(p),
                }
            }
            self.pending = still;
            if !progress || self.pending.is_empty() {
                return Ok(());
            }
        }
    }

    fn render_failure_trace(&self, p: &Pred, givens: &[Pred]) -> String {
        let mut lines = Vec::new();
        let mut hook = |ev: crate::chain::TraceEvent| {
            lines.push(format!("  try {}: {}", ev.id, ev.outcome));
        };
        let _ = self.solver.solve_pred_traced(p, givens, &mut hook);
        lines.join("\n")
    }

    fn check_let(
        &mut self,
        name: &str,
        ann: Option<&SurfaceScheme>,
        body: &Expr,
        pos: Pos,
    ) -> Result<Scheme, LangError> {
        if self.globals.contains_key(name) {
            return Err(terr(pos, format!("duplicate binding {}", name)));
        }
        debug_assert!(self.pending.is_empty());
        let self_ty = self.fresh_var(Kind::Star);
        self.locals.push((name.to_string(), self_ty.clone()));
        let t_body = self.infer_expr(body)?;
        self.locals.pop();
        self.unify(&self_ty, &t_body, pos)?;

        match ann {
            Some(ss) => {
                let declared = self.lower_scheme(ss, pos)?;
                // skolemize the declared scheme: rigid variables, so the
                // solvers still see them as open (a family application over
                // them stays stuck) while the signature check cannot
                // instantiate them
                let mut sk = Subst::new();
                let mut skolem_map = Vec::new();
                for (v, k) in &declared.vars {
                    self.skolem_counter += 1;
                    let sk_name: Rc<str> = format!("%sk{}_{}", self.skolem_counter, v).into();
                    sk.bind(v.clone(), TypeExpr::Var(sk_name.clone(), *k));
                    skolem_map.push((v.clone(), sk_name));
                }
                let decl_body = sk.apply(&declared.body);
                let givens: Vec<Pred> =
                    declared.preds.iter().map(|p| sk.apply_pred(p)).collect();
                self.unify_signature(&t_body, &decl_body, pos).map_err(|e| {
                    LangError::Type {
                        pos: Some(pos),
                        message: format!(
                            "body of {} does not match its signature: {}",
                            name, e
                        ),
                    }
                })?;
                self.reduce_context(&givens, pos)?;
                if !self.pending.is_empty() {
                    let leftovers: Vec<String> = self
                        .pending
                        .iter()
                        .map(|p| self.subst.apply_pred(p).to_string())
                        .collect();
                    self.pending.clear();
                    return Err(terr(
                        pos,
                        format!(
                            "could not deduce {} from the signature of {}",
                            leftovers.join(", "),
                            name
                        ),
                    ));
                }
                self.globals.insert(
                    name.to_string(),
                    Rc::new(GlobalBinding {
                        scheme: declared.clone(),
                        kind: GlobalKind::UserLet {
                            body: Rc::new(body.clone()),
                            skolem_map,
                        },
                    }),
                );
                Ok(declared)
            }
            None => {
                self.reduce_context(&[], pos)?;
                let scheme = self.generalize(t_body, pos)?;
                self.globals.insert(
                    name.to_string(),
                    Rc::new(GlobalBinding {
                        scheme: scheme.clone(),
                        kind: GlobalKind::UserLet {
                            body: Rc::new(body.clone()),
                            skolem_map: Vec::new(),
                        },
                    }),
                );
                Ok(scheme)
            }
        }
    }

    /// Quantify, detect ambiguity, and run defaulting if enabled.
    fn generalize(&mut self, t: TypeExpr, _pos: Pos) -> Result<Scheme, LangError> {
        let body = self.subst.apply(&t);
        let mut retained: Vec<Pred> = Vec::new();
        for p in std::mem::take(&mut self.pending) {
            let applied = self.subst.apply_pred(&p);
            if !retained.contains(&applied) {
                retained.push(applied);
            }
        }
        let scheme = self.quantified(body.clone(), retained.clone());
        let ambiguous = find_ambiguous(&scheme);
        if ambiguous.is_empty() {
            return Ok(scheme);
        }
        if self.flags.defaulting && !self.defaults.is_empty() {
            match apply_defaults(&retained, &ambiguous, &self.defaults, self.solver) {
                Ok(report) => {
                    self.subst = self.subst.compose(&report.subst);
                    // all retained constraints hold under the defaulting
                    // substitution, so the scheme sheds them
                    let body = self.subst.apply(&body);
                    return Ok(self.quantified(body, Vec::new()));
                }
                Err(DefaultError::Ambiguity { vars, constraints }) => {
                    return Err(ambiguity_error(&vars, &constraints));
                }
                Err(other) => {
                    return Err(LangError::Ambiguity {
                        message: other.to_string(),
                    })
                }
            }
        }
        let vars: Vec<Rc<str>> = ambiguous.iter().cloned().collect();
        let constraints: Vec<Pred> = retained
            .iter()
            .filter(|p| p.free_vars().iter().any(|v| ambiguous.contains(v)))
            .cloned()
            .collect();
        Err(ambiguity_error(&vars, &constraints))
    }

    fn quantified(&self, body: TypeExpr, preds: Vec<Pred>) -> Scheme {
        // first occurrence in the body, then in the predicates
        let mut order: Vec<(Rc<str>, Kind)> = Vec::new();
        let note = |t: &TypeExpr, order: &mut Vec<(Rc<str>, Kind)>| {
            collect_vars_ordered(t, order);
        };
        note(&body, &mut order);
        for p in &preds {
            match p {
                Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => {
                    note(a, &mut order);
                    note(b, &mut order);
                }
                Pred::Minus(a, b, c) => {
                    note(a, &mut order);
                    note(b, &mut order);
                    note(c, &mut order);
                }
                Pred::Functor(a) => note(a, &mut order),
            }
        }
        Scheme {
            vars: order,
            preds,
            body,
        }
    }

    fn check_main(&mut self, e: &Expr, pos: Pos) -> Result<(), LangError> {
        debug_assert!(self.pending.is_empty());
        let t = self.infer_expr(e)?;
        self.reduce_context(&[], pos)?;
        if self.pending.is_empty() {
            return Ok(());
        }
        let retained: Vec<Pred> = self
            .pending
            .iter()
            .map(|p| self.subst.apply_pred(p))
            .collect();
        let scheme = self.quantified(self.subst.apply(&t), retained.clone());
        let ambiguous = find_ambiguous(&scheme);
        if !ambiguous.is_empty() {
            if self.flags.defaulting && !self.defaults.is_empty() {
                match apply_defaults(&retained, &ambiguous, &self.defaults, self.solver) {
                    Ok(report) => {
                        self.subst = self.subst.compose(&report.subst);
                        self.pending.clear();
                        return Ok(());
                    }
                    Err(DefaultError::Ambiguity { vars, constraints }) => {
                        return Err(ambiguity_error(&vars, &constraints));
                    }
                    Err(other) => {
                        return Err(LangError::Ambiguity {
                            message: other.to_string(),
                        })
                    }
                }
            }
            let vars: Vec<Rc<str>> = ambiguous.iter().cloned().collect();
            return Err(ambiguity_error(&vars, &retained));
        }
        // residual constraints without ambiguity: keep solving once more with
        // everything applied; if still stuck, main is unresolved
        let leftovers: Vec<String> = retained.iter().map(|p| p.to_string()).collect();
        self.pending.clear();
        Err(terr(
            pos,
            format!("main has unresolved constraints: {}", leftovers.join(", ")),
        ))
    }
}

pub(crate) fn is_skolem(name: &str) -> bool {
    name.starts_with("%sk")
}

fn ambiguity_error(vars: &[Rc<str>], constraints: &[Pred]) -> LangError {
    // canonical names so the message is stable
    let mut order: Vec<(Rc<str>, Kind)> = Vec::new();
    for p in constraints {
        match p {
            Pred::In(a, b) | Pred::NotIn(a, b) | Pred::Leq(a, b) => {
                collect_vars_ordered(a, &mut order);
                collect_vars_ordered(b, &mut order);
            }
            Pred::Minus(a, b, c) => {
                collect_vars_ordered(a, &mut order);
                collect_vars_ordered(b, &mut order);
                collect_vars_ordered(c, &mut order);
            }
            Pred::Functor(a) => collect_vars_ordered(a, &mut order),
        }
    }
    let mut renaming = Subst::new();
    let mut fresh = 0usize;
    for (n, k) in &order {
        let letter = (b'a' + (fresh % 26) as u8) as char;
        let name = if fresh < 26 {
            letter.to_string()
        } else {
            format!("{}{}", letter, fresh / 26)
        };
        renaming.bind(n.clone(), TypeExpr::Var(name.into(), *k));
        fresh += 1;
    }
    let names: Vec<String> = vars
        .iter()
        .map(|v| renaming.apply(&TypeExpr::Var(v.clone(), Kind::Functor)).to_string())
        .collect();
    let mut cs: Vec<String> = constraints
        .iter()
        .map(|p| renaming.apply_pred(p).to_string())
        .collect();
    cs.sort();
    LangError::Ambiguity {
        message: format!(
            "ambiguous type variable(s) {} constrained by: {}",
            names.join(", "),
            cs.join(", ")
        ),
    }
}

fn collect_vars_ordered(t: &TypeExpr, order: &mut Vec<(Rc<str>, Kind)>) {
    match t {
        TypeExpr::Var(n, k) => {
            if !order.iter().any(|(o, _)| o == n) {
                order.push((n.clone(), *k));
            }
        }
        TypeExpr::Atom(_, _) | TypeExpr::Int | TypeExpr::Bool => {}
        TypeExpr::Coprod(a, b)
        | TypeExpr::Fun(a, b)
        | TypeExpr::Pair(a, b)
        | TypeExpr::App(a, b) => {
            collect_vars_ordered(a, order);
            collect_vars_ordered(b, order);
        }
        TypeExpr::Fix(a) | TypeExpr::Maybe(a) => collect_vars_ordered(a, order),
        TypeExpr::Fam(_, args) | TypeExpr::Con(_, args) => {
            for a in args {
                collect_vars_ordered(a, order);
            }
        }
    }
}

enum Binding {
    Mono(TypeExpr),
    Global(Rc<GlobalBinding>),
}

/// Used by the evaluator: the evidence assumed by `Holds` results.
pub fn expect_holds(sol: Solution, what: &str) -> Result<Evidence, LangError> {
    match sol {
        Solution::Holds(ev) => Ok(ev),
        other => Err(LangError::Type {
            pos: None,
            message: format!("internal: {} did not hold at elaboration ({:?})", what, other),
        }),
    }
}
