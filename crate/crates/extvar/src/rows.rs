//! A minimal row-typing checker over the benchmark subset of the surface
//! language, used as a comparison baseline: variants are rows of labeled
//! components, injection and branching carry lacks constraints, and rows are
//! compared up to label permutation. Typability needs no annotations and no
//! defaulting.
//!
//! The subset: `inj'`, `?`, `cases`, constructor patterns (a branch's label
//! is read from its pattern), and a built-in `noMatch` closing case chains; a
//! bare trailing branch is implicitly closed with `noMatch`.

use crate::lang::ast::*;
use crate::lang::ProgramError;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub enum RTy {
    Int,
    Bool,
    Var(u32),
    Fun(Rc<RTy>, Rc<RTy>),
    Pair(Rc<RTy>, Rc<RTy>),
    /// The recursive variant type `Fix Σ(row)`.
    FixRow(Row),
    /// Some component of `Σ(row)` with recursive positions at the given type.
    SigmaV(Row, Rc<RTy>),
    /// The payload of one labeled component, recursive positions at the
    /// given type.
    Comp(String, Rc<RTy>),
}

/// A set of labels plus an optional row-variable tail. Component types are
/// determined by the (global) constructor declarations, so rows carry labels
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub labels: BTreeSet<String>,
    pub tail: Option<u32>,
}

impl Row {
    fn closed(labels: BTreeSet<String>) -> Row {
        Row { labels, tail: None }
    }
}

/// `row \ label`: satisfiable only if the row lacks the label.
#[derive(Debug, Clone, PartialEq)]
pub struct LacksPred {
    pub row: u32,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct RowScheme {
    pub tvars: Vec<u32>,
    pub rowvars: Vec<u32>,
    pub lacks: Vec<(u32, String)>,
    pub body: RTy,
}

#[derive(Debug)]
pub struct RowChecked {
    pub lines: Vec<(String, String)>,
    pub main_type: Option<String>,
    program: Program,
}

struct RowInfer {
    decls_by_ctor: HashMap<String, Rc<DataDecl>>,
    tsubst: HashMap<u32, RTy>,
    rsubst: HashMap<u32, Row>,
    lacks: HashMap<u32, BTreeSet<String>>,
    fresh: u32,
    globals: HashMap<String, RowScheme>,
    locals: Vec<(String, RTy)>,
}

fn rerr(pos: Pos, m: impl Into<String>) -> ProgramError {
    ProgramError::Type(format!("row type error at {}: {}", pos, m.into()))
}

pub fn check_rows(prog: &Program) -> Result<RowChecked, ProgramError> {
    let mut ctx = RowInfer {
        decls_by_ctor: HashMap::new(),
        tsubst: HashMap::new(),
        rsubst: HashMap::new(),
        lacks: HashMap::new(),
        fresh: 0,
        globals: HashMap::new(),
        locals: Vec::new(),
    };
    let mut lines = Vec::new();
    let mut main_type = None;
    for decl in &prog.decls {
        match &decl.kind {
            DeclKind::Data(d) => {
                ctx.decls_by_ctor.insert(d.ctor.clone(), Rc::new(d.clone()));
            }
            // aliases and defaults are meaningless here: rows need neither
            DeclKind::TypeAlias(_, _) | DeclKind::Default(_) => {}
            DeclKind::Let { name, ann, body } => {
                if ann.is_some() {
                    return Err(rerr(decl.pos, "row checking takes no signatures"));
                }
                let t = ctx.infer(body)?;
                let scheme = ctx.generalize(t);
                lines.push((name.clone(), ctx.render_scheme(&scheme)));
                ctx.globals.insert(name.clone(), scheme);
            }
            DeclKind::Main(e) => {
                let t = ctx.infer(e)?;
                let t = ctx.apply_ty(&t);
                main_type = Some(ctx.render_ty_canonical(&t));
            }
        }
    }
    Ok(RowChecked {
        lines,
        main_type,
        program: prog.clone(),
    })
}

impl RowInfer {
    fn fresh_tvar(&mut self) -> RTy {
        self.fresh += 1;
        RTy::Var(self.fresh)
    }

    fn fresh_rowvar(&mut self) -> u32 {
        self.fresh += 1;
        self.fresh
    }

    // -- substitution -------------------------------------------------------

    fn apply_ty(&mut self, t: &RTy) -> RTy {
        match t {
            RTy::Var(v) => match self.tsubst.get(v).cloned() {
                Some(bound) => self.apply_ty(&bound),
                None => t.clone(),
            },
            RTy::Int | RTy::Bool => t.clone(),
            RTy::Fun(a, b) => RTy::Fun(Rc::new(self.apply_ty(a)), Rc::new(self.apply_ty(b))),
            RTy::Pair(a, b) => RTy::Pair(Rc::new(self.apply_ty(a)), Rc::new(self.apply_ty(b))),
            RTy::FixRow(r) => RTy::FixRow(self.apply_row(r)),
            RTy::SigmaV(r, fx) => RTy::SigmaV(self.apply_row(r), Rc::new(self.apply_ty(fx))),
            RTy::Comp(l, fx) => RTy::Comp(l.clone(), Rc::new(self.apply_ty(fx))),
        }
    }

    fn apply_row(&mut self, r: &Row) -> Row {
        let mut labels = r.labels.clone();
        let mut tail = r.tail;
        while let Some(v) = tail {
            match self.rsubst.get(&v).cloned() {
                Some(bound) => {
                    labels.extend(bound.labels.iter().cloned());
                    tail = bound.tail;
                }
                None => break,
            }
        }
        Row { labels, tail }
    }

    // -- unification --------------------------------------------------------

    fn unify(&mut self, a: &RTy, b: &RTy, pos: Pos) -> Result<(), ProgramError> {
        let a = self.apply_ty(a);
        let b = self.apply_ty(b);
        match (&a, &b) {
            (RTy::Var(v1), RTy::Var(v2)) if v1 == v2 => Ok(()),
            (RTy::Var(v), other) | (other, RTy::Var(v)) => {
                if occurs_ty(*v, other) {
                    return Err(rerr(pos, "infinite type in row unification"));
                }
                self.tsubst.insert(*v, other.clone());
                Ok(())
            }
            (RTy::Int, RTy::Int) | (RTy::Bool, RTy::Bool) => Ok(()),
            (RTy::Fun(a1, b1), RTy::Fun(a2, b2)) | (RTy::Pair(a1, b1), RTy::Pair(a2, b2)) => {
                self.unify(a1, a2, pos)?;
                self.unify(b1, b2, pos)
            }
            (RTy::FixRow(r1), RTy::FixRow(r2)) => self.unify_row(r1, r2, pos),
            (RTy::SigmaV(r1, f1), RTy::SigmaV(r2, f2)) => {
                self.unify_row(r1, r2, pos)?;
                self.unify(f1, f2, pos)
            }
            (RTy::Comp(l1, f1), RTy::Comp(l2, f2)) => {
                if l1 != l2 {
                    return Err(rerr(
                        pos,
                        format!("component labels disagree: {} vs {}", l1, l2),
                    ));
                }
                self.unify(f1, f2, pos)
            }
            (x, y) => Err(rerr(pos, format!("cannot unify {:?} with {:?}", x, y))),
        }
    }

    /// Most general row unification with inserters: labels missing on one
    /// side are pushed into the other side's tail.
    fn unify_row(&mut self, r1: &Row, r2: &Row, pos: Pos) -> Result<(), ProgramError> {
        let r1 = self.apply_row(r1);
        let r2 = self.apply_row(r2);
        let only1: BTreeSet<String> = r1.labels.difference(&r2.labels).cloned().collect();
        let only2: BTreeSet<String> = r2.labels.difference(&r1.labels).cloned().collect();
        match (r1.tail, r2.tail) {
            (None, None) => {
                if only1.is_empty() && only2.is_empty() {
                    Ok(())
                } else {
                    Err(rerr(
                        pos,
                        format!("closed rows disagree: missing {:?} / {:?}", only2, only1),
                    ))
                }
            }
            (Some(t1), None) => {
                if !only1.is_empty() {
                    return Err(rerr(pos, format!("labels {:?} not in closed row", only1)));
                }
                self.bind_row(t1, Row::closed(only2), pos)
            }
            (None, Some(t2)) => {
                if !only2.is_empty() {
                    return Err(rerr(pos, format!("labels {:?} not in closed row", only2)));
                }
                self.bind_row(t2, Row::closed(only1), pos)
            }
            (Some(t1), Some(t2)) => {
                if t1 == t2 {
                    return if only1.is_empty() && only2.is_empty() {
                        Ok(())
                    } else {
                        Err(rerr(pos, "row occurs check: a tail cannot absorb itself"))
                    };
                }
                let shared = self.fresh_rowvar();
                // the common tail inherits both lacks sets plus every label
                // already fixed on either side
                let mut inherited: BTreeSet<String> = BTreeSet::new();
                inherited.extend(self.lacks.get(&t1).cloned().unwrap_or_default());
                inherited.extend(self.lacks.get(&t2).cloned().unwrap_or_default());
                inherited.extend(r1.labels.iter().cloned());
                inherited.extend(r2.labels.iter().cloned());
                self.lacks.insert(shared, inherited);
                self.bind_row(
                    t1,
                    Row {
                        labels: only2,
                        tail: Some(shared),
                    },
                    pos,
                )?;
                self.bind_row(
                    t2,
                    Row {
                        labels: only1,
                        tail: Some(shared),
                    },
                    pos,
                )
            }
        }
    }

    fn bind_row(&mut self, var: u32, row: Row, pos: Pos) -> Result<(), ProgramError> {
        if row.tail == Some(var) {
            return Err(rerr(pos, "row occurs check failed"));
        }
        if let Some(need) = self.lacks.get(&var).cloned() {
            let clash: Vec<&String> = row.labels.intersection(&need).collect();
            if !clash.is_empty() {
                return Err(rerr(
                    pos,
                    format!("lacks constraint violated for labels {:?}", clash),
                ));
            }
            if let Some(t) = row.tail {
                self.lacks.entry(t).or_default().extend(need);
            }
        }
        self.rsubst.insert(var, row);
        Ok(())
    }

    fn add_lacks(&mut self, row: &Row, label: &str, pos: Pos) -> Result<(), ProgramError> {
        if row.labels.contains(label) {
            return Err(rerr(
                pos,
                format!("duplicate label {}: the row already contains it", label),
            ));
        }
        if let Some(t) = row.tail {
            self.lacks.entry(t).or_default().insert(label.to_string());
        }
        Ok(())
    }

    // -- inference ------------------------------------------------------------

    fn lookup(&mut self, name: &str) -> Option<RTy> {
        for (n, t) in self.locals.iter().rev() {
            if n == name {
                return Some(t.clone());
            }
        }
        let scheme = self.globals.get(name)?.clone();
        Some(self.instantiate(&scheme))
    }

    fn instantiate(&mut self, s: &RowScheme) -> RTy {
        let mut tmap = HashMap::new();
        for v in &s.tvars {
            let RTy::Var(fresh) = self.fresh_tvar() else {
                unreachable!()
            };
            tmap.insert(*v, fresh);
        }
        let mut rmap = HashMap::new();
        for v in &s.rowvars {
            rmap.insert(*v, self.fresh_rowvar());
        }
        for (rv, label) in &s.lacks {
            let target = rmap.get(rv).copied().unwrap_or(*rv);
            self.lacks.entry(target).or_default().insert(label.clone());
        }
        rename_ty(&s.body, &tmap, &rmap)
    }

    fn generalize(&mut self, t: RTy) -> RowScheme {
        let body = self.apply_ty(&t);
        let mut tvars = Vec::new();
        let mut rowvars = Vec::new();
        collect_vars(&body, &mut tvars, &mut rowvars);
        let mut lacks = Vec::new();
        for rv in &rowvars {
            if let Some(ls) = self.lacks.get(rv) {
                for l in ls {
                    lacks.push((*rv, l.clone()));
                }
            }
        }
        RowScheme {
            tvars,
            rowvars,
            lacks,
            body,
        }
    }

    fn infer(&mut self, e: &Expr) -> Result<RTy, ProgramError> {
        match &e.kind {
            ExprKind::Int(_) => Ok(RTy::Int),
            ExprKind::Bool(_) => Ok(RTy::Bool),
            ExprKind::Var(name) => match name.as_str() {
                "inj'" | "cases" | "prj" | "inj" | "fmap" | "In" | "Inl" | "Inr" | "noMatch" => {
                    Err(rerr(
                        e.pos,
                        format!("{} must be applied directly in row checking", name),
                    ))
                }
                _ => self
                    .lookup(name)
                    .ok_or_else(|| rerr(e.pos, format!("unknown name {}", name))),
            },
            ExprKind::App(f, x) => {
                if let ExprKind::Var(name) = &f.kind {
                    match name.as_str() {
                        "inj'" => return self.infer_inject(x, e.pos),
                        "cases" => return self.infer_cases(x, e.pos),
                        "prj" => {
                            return Err(rerr(
                                e.pos,
                                "prj carries no label and is not part of the row subset",
                            ))
                        }
                        "inj" | "fmap" | "In" | "Inl" | "Inr" => {
                            return Err(rerr(
                                e.pos,
                                format!("{} is not part of the row subset", name),
                            ))
                        }
                        _ => {}
                    }
                }
                if let Some((decl, args)) = self.ctor_application(e) {
                    let fix = self.fresh_tvar();
                    if args.len() != decl.fields.len() {
                        return Err(rerr(
                            e.pos,
                            format!(
                                "constructor {} applied to {} arguments",
                                decl.ctor,
                                args.len()
                            ),
                        ));
                    }
                    for (arg, field) in args.iter().zip(&decl.fields) {
                        let want = match field {
                            FieldTy::SelfRef => fix.clone(),
                            FieldTy::Int => RTy::Int,
                            FieldTy::Bool => RTy::Bool,
                        };
                        let got = self.infer(arg)?;
                        self.unify(&got, &want, arg.pos)?;
                    }
                    return Ok(RTy::Comp(decl.ctor.clone(), Rc::new(fix)));
                }
                let tf = self.infer(f)?;
                let tx = self.infer(x)?;
                let r = self.fresh_tvar();
                self.unify(&tf, &RTy::Fun(Rc::new(tx), Rc::new(r.clone())), e.pos)?;
                Ok(r)
            }
            ExprKind::Lam(pats, body) => {
                let mut tys = Vec::new();
                let mut pushed = 0;
                for p in pats {
                    let (t, binds) = self.infer_pattern(p, e.pos)?;
                    tys.push(t);
                    for b in binds {
                        self.locals.push(b);
                        pushed += 1;
                    }
                }
                let tb = self.infer(body)?;
                for _ in 0..pushed {
                    self.locals.pop();
                }
                let mut ty = tb;
                for t in tys.into_iter().rev() {
                    ty = RTy::Fun(Rc::new(t), Rc::new(ty));
                }
                Ok(ty)
            }
            ExprKind::Pair(a, b) => Ok(RTy::Pair(
                Rc::new(self.infer(a)?),
                Rc::new(self.infer(b)?),
            )),
            ExprKind::BinOp(BinOp::Add, a, b) | ExprKind::BinOp(BinOp::Mul, a, b) => {
                let ta = self.infer(a)?;
                let tb = self.infer(b)?;
                self.unify(&ta, &RTy::Int, e.pos)?;
                self.unify(&tb, &RTy::Int, e.pos)?;
                Ok(RTy::Int)
            }
            ExprKind::BinOp(BinOp::Branch, _, _) => {
                let (row, fix, rec, res) = self.branch_chain(e)?;
                Ok(RTy::Fun(
                    Rc::new(RTy::SigmaV(row, Rc::new(fix))),
                    Rc::new(RTy::Fun(Rc::new(rec), Rc::new(res))),
                ))
            }
            ExprKind::BinOp(BinOp::Dispatch, _, _) => Err(rerr(
                e.pos,
                ".?. dispatches on raw tags and is not part of the row subset",
            )),
            ExprKind::Ann(_, _) => Err(rerr(
                e.pos,
                "row checking needs no annotations and does not accept them",
            )),
            ExprKind::Let { name, bound, body } => {
                let tb = self.infer(bound)?;
                self.locals.push((name.clone(), tb));
                let t = self.infer(body)?;
                self.locals.pop();
                Ok(t)
            }
        }
    }

    fn ctor_application<'e>(&self, e: &'e Expr) -> Option<(Rc<DataDecl>, Vec<&'e Expr>)> {
        let mut args = Vec::new();
        let mut cur = e;
        loop {
            match &cur.kind {
                ExprKind::App(f, x) => {
                    args.push(&**x);
                    cur = f;
                }
                ExprKind::Var(name) => {
                    let decl = self.decls_by_ctor.get(name)?;
                    args.reverse();
                    return Some((decl.clone(), args));
                }
                _ => return None,
            }
        }
    }

    /// `inj' (C a1 .. an)`: the label is read from the constructor; the
    /// result is a variant row containing it with a lacks constraint on the
    /// tail, and recursive positions are tied to the result.
    fn infer_inject(&mut self, arg: &Expr, pos: Pos) -> Result<RTy, ProgramError> {
        let t_arg = self.infer(arg)?;
        let t_arg = self.apply_ty(&t_arg);
        let RTy::Comp(label, fix) = &t_arg else {
            return Err(rerr(
                pos,
                "injection needs a constructor application to read its label from",
            ));
        };
        let tail = self.fresh_rowvar();
        self.lacks.entry(tail).or_default().insert(label.clone());
        let mut labels = BTreeSet::new();
        labels.insert(label.clone());
        let result = RTy::FixRow(Row {
            labels,
            tail: Some(tail),
        });
        self.unify(fix, &result, pos)?;
        Ok(self.apply_ty(&result))
    }

    fn infer_cases(&mut self, cs: &Expr, pos: Pos) -> Result<RTy, ProgramError> {
        let (row, fix, rec, res) = self.branch_chain(cs)?;
        let fix_t = RTy::FixRow(row);
        self.unify(&fix, &fix_t, pos)?;
        self.unify(
            &rec,
            &RTy::Fun(Rc::new(fix_t.clone()), Rc::new(res.clone())),
            pos,
        )?;
        Ok(RTy::Fun(Rc::new(fix_t), Rc::new(res)))
    }

    /// Type a `?`-chain: each left operand is a labeled branch, the chain is
    /// closed by `noMatch` (explicitly, or implicitly after a bare trailing
    /// branch). Returns the accumulated row plus the shared fix,
    /// recursion-argument, and result types.
    fn branch_chain(&mut self, e: &Expr) -> Result<(Row, RTy, RTy, RTy), ProgramError> {
        match &e.kind {
            ExprKind::BinOp(BinOp::Branch, m, n) => {
                let (label, fix, rec, res) = self.branch_of(m)?;
                let (row, fix2, rec2, res2) = self.branch_chain(n)?;
                self.unify(&fix, &fix2, e.pos)?;
                self.unify(&rec, &rec2, e.pos)?;
                self.unify(&res, &res2, e.pos)?;
                let row = self.apply_row(&row);
                self.add_lacks(&row, &label, e.pos)?;
                let mut labels = row.labels.clone();
                labels.insert(label);
                Ok((
                    Row {
                        labels,
                        tail: row.tail,
                    },
                    fix,
                    rec,
                    res,
                ))
            }
            ExprKind::Var(name) if name == "noMatch" => {
                let fix = self.fresh_tvar();
                let rec = self.fresh_tvar();
                let res = self.fresh_tvar();
                Ok((Row::closed(BTreeSet::new()), fix, rec, res))
            }
            _ => {
                let (label, fix, rec, res) = self.branch_of(e)?;
                let mut labels = BTreeSet::new();
                labels.insert(label);
                Ok((Row::closed(labels), fix, rec, res))
            }
        }
    }

    /// A single branch: a function from one labeled component (label read
    /// from its constructor pattern) and a recursion argument to a result.
    fn branch_of(&mut self, e: &Expr) -> Result<(String, RTy, RTy, RTy), ProgramError> {
        let t = self.infer(e)?;
        let t = self.apply_ty(&t);
        if let RTy::Fun(arg, rest) = &t {
            if let RTy::Comp(label, fix) = &**arg {
                if let RTy::Fun(rec, res) = &**rest {
                    return Ok((
                        label.clone(),
                        (**fix).clone(),
                        (**rec).clone(),
                        (**res).clone(),
                    ));
                }
            }
        }
        Err(rerr(
            e.pos,
            "branch must be a two-argument function whose pattern names a constructor",
        ))
    }

    fn infer_pattern(
        &mut self,
        p: &Pattern,
        pos: Pos,
    ) -> Result<(RTy, Vec<(String, RTy)>), ProgramError> {
        match p {
            Pattern::Var(x) => {
                let t = self.fresh_tvar();
                Ok((t.clone(), vec![(x.clone(), t)]))
            }
            Pattern::Wild => Ok((self.fresh_tvar(), vec![])),
            Pattern::Con { name, binders } => {
                let Some(decl) = self.decls_by_ctor.get(name).cloned() else {
                    return Err(rerr(pos, format!("unknown constructor {}", name)));
                };
                if binders.len() != decl.fields.len() {
                    return Err(rerr(pos, format!("constructor {} arity mismatch", name)));
                }
                let fix = self.fresh_tvar();
                let mut binds = Vec::new();
                for (b, field) in binders.iter().zip(&decl.fields) {
                    if b == "_" {
                        continue;
                    }
                    let t = match field {
                        FieldTy::SelfRef => fix.clone(),
                        FieldTy::Int => RTy::Int,
                        FieldTy::Bool => RTy::Bool,
                    };
                    binds.push((b.clone(), t));
                }
                Ok((RTy::Comp(name.clone(), Rc::new(fix)), binds))
            }
            Pattern::In(_) | Pattern::Inl(_) | Pattern::Inr(_) => Err(rerr(
                pos,
                "structure patterns are not part of the row subset",
            )),
        }
    }

    // -- rendering ------------------------------------------------------------

    fn render_scheme(&mut self, s: &RowScheme) -> String {
        let body = self.apply_ty(&s.body);
        let mut names: HashMap<u32, String> = HashMap::new();
        let mut order: Vec<u32> = Vec::new();
        collect_order(&body, &mut order);
        for rv in &s.rowvars {
            if !order.contains(rv) {
                order.push(*rv);
            }
        }
        for (i, v) in order.iter().enumerate() {
            names.insert(*v, canonical(i));
        }
        let mut out = String::new();
        if !order.is_empty() {
            out.push_str("forall ");
            let ns: Vec<String> = order.iter().map(|v| names[v].clone()).collect();
            out.push_str(&ns.join(" "));
            out.push_str(". ");
        }
        let mut lacks: Vec<String> = s
            .lacks
            .iter()
            .filter(|(rv, _)| names.contains_key(rv))
            .map(|(rv, l)| format!("{}\\{}", names[rv], l))
            .collect();
        lacks.sort();
        lacks.dedup();
        if !lacks.is_empty() {
            out.push('(');
            out.push_str(&lacks.join(", "));
            out.push_str(") => ");
        }
        out.push_str(&self.render_ty(&body, &names));
        out
    }

    fn render_ty_canonical(&mut self, t: &RTy) -> String {
        let t = self.apply_ty(t);
        let mut order = Vec::new();
        collect_order(&t, &mut order);
        let mut names = HashMap::new();
        for (i, v) in order.iter().enumerate() {
            names.insert(*v, canonical(i));
        }
        self.render_ty(&t, &names)
    }

    fn render_ty(&self, t: &RTy, names: &HashMap<u32, String>) -> String {
        match t {
            RTy::Int => "Int".to_string(),
            RTy::Bool => "Bool".to_string(),
            RTy::Var(v) => names.get(v).cloned().unwrap_or_else(|| format!("t{}", v)),
            RTy::Fun(a, b) => {
                let left = match **a {
                    RTy::Fun(_, _) => format!("({})", self.render_ty(a, names)),
                    _ => self.render_ty(a, names),
                };
                format!("{} -> {}", left, self.render_ty(b, names))
            }
            RTy::Pair(a, b) => format!(
                "({}, {})",
                self.render_ty(a, names),
                self.render_ty(b, names)
            ),
            RTy::FixRow(r) => format!("Fix {}", self.render_row(r, names)),
            RTy::SigmaV(r, fx) => format!(
                "{}@{}",
                self.render_row(r, names),
                self.render_ty(fx, names)
            ),
            RTy::Comp(l, fx) => format!("{}#{}", l, self.render_ty(fx, names)),
        }
    }

    fn render_row(&self, r: &Row, names: &HashMap<u32, String>) -> String {
        let mut parts = Vec::new();
        for l in &r.labels {
            let shape = match self.decls_by_ctor.get(l) {
                Some(d) => {
                    let fs: Vec<&str> = d
                        .fields
                        .iter()
                        .map(|f| match f {
                            FieldTy::SelfRef => "self",
                            FieldTy::Int => "Int",
                            FieldTy::Bool => "Bool",
                        })
                        .collect();
                    format!("({})", fs.join(", "))
                }
                None => "(?)".to_string(),
            };
            parts.push(format!("{}: {}", l, shape));
        }
        let inner = parts.join(", ");
        match r.tail {
            Some(v) => {
                let name = names.get(&v).cloned().unwrap_or_else(|| format!("r{}", v));
                if inner.is_empty() {
                    format!("Σ({})", name)
                } else {
                    format!("Σ({}; {})", inner, name)
                }
            }
            None => format!("Σ({})", inner),
        }
    }
}

fn canonical(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    if i < 26 {
        letter.to_string()
    } else {
        format!("{}{}", letter, i / 26)
    }
}

fn occurs_ty(v: u32, t: &RTy) -> bool {
    match t {
        RTy::Var(x) => *x == v,
        RTy::Int | RTy::Bool => false,
        RTy::Fun(a, b) | RTy::Pair(a, b) => occurs_ty(v, a) || occurs_ty(v, b),
        RTy::FixRow(_) => false,
        RTy::SigmaV(_, fx) | RTy::Comp(_, fx) => occurs_ty(v, fx),
    }
}

fn collect_vars(t: &RTy, tvars: &mut Vec<u32>, rowvars: &mut Vec<u32>) {
    match t {
        RTy::Var(v) => {
            if !tvars.contains(v) {
                tvars.push(*v);
            }
        }
        RTy::Int | RTy::Bool => {}
        RTy::Fun(a, b) | RTy::Pair(a, b) => {
            collect_vars(a, tvars, rowvars);
            collect_vars(b, tvars, rowvars);
        }
        RTy::FixRow(r) => {
            if let Some(tail) = r.tail {
                if !rowvars.contains(&tail) {
                    rowvars.push(tail);
                }
            }
        }
        RTy::SigmaV(r, fx) => {
            if let Some(tail) = r.tail {
                if !rowvars.contains(&tail) {
                    rowvars.push(tail);
                }
            }
            collect_vars(fx, tvars, rowvars);
        }
        RTy::Comp(_, fx) => collect_vars(fx, tvars, rowvars),
    }
}

fn collect_order(t: &RTy, order: &mut Vec<u32>) {
    match t {
        RTy::Var(v) => {
            if !order.contains(v) {
                order.push(*v);
            }
        }
        RTy::Int | RTy::Bool => {}
        RTy::Fun(a, b) | RTy::Pair(a, b) => {
            collect_order(a, order);
            collect_order(b, order);
        }
        RTy::FixRow(r) => {
            if let Some(tail) = r.tail {
                if !order.contains(&tail) {
                    order.push(tail);
                }
            }
        }
        RTy::SigmaV(r, fx) => {
            if let Some(tail) = r.tail {
                if !order.contains(&tail) {
                    order.push(tail);
                }
            }
            collect_order(fx, order);
        }
        RTy::Comp(_, fx) => collect_order(fx, order),
    }
}

fn rename_ty(t: &RTy, tmap: &HashMap<u32, u32>, rmap: &HashMap<u32, u32>) -> RTy {
    match t {
        RTy::Var(v) => RTy::Var(tmap.get(v).copied().unwrap_or(*v)),
        RTy::Int | RTy::Bool => t.clone(),
        RTy::Fun(a, b) => RTy::Fun(
            Rc::new(rename_ty(a, tmap, rmap)),
            Rc::new(rename_ty(b, tmap, rmap)),
        ),
        RTy::Pair(a, b) => RTy::Pair(
            Rc::new(rename_ty(a, tmap, rmap)),
            Rc::new(rename_ty(b, tmap, rmap)),
        ),
        RTy::FixRow(r) => RTy::FixRow(rename_row(r, rmap)),
        RTy::SigmaV(r, fx) => RTy::SigmaV(rename_row(r, rmap), Rc::new(rename_ty(fx, tmap, rmap))),
        RTy::Comp(l, fx) => RTy::Comp(l.clone(), Rc::new(rename_ty(fx, tmap, rmap))),
    }
}

fn rename_row(r: &Row, rmap: &HashMap<u32, u32>) -> Row {
    Row {
        labels: r.labels.clone(),
        tail: r.tail.map(|t| rmap.get(&t).copied().unwrap_or(t)),
    }
}

// ---------------------------------------------------------------------------
// Row evaluation: labels dispatch directly, no tag paths involved.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum RValue {
    Int(i64),
    Bool(bool),
    Pair(Box<RValue>, Box<RValue>),
    Tagged(String, Vec<RValue>),
    Wrap(Box<RValue>),
    Closure {
        params: Vec<Pattern>,
        applied: Vec<RValue>,
        body: Rc<Expr>,
        env: REnv,
    },
    CasesFn(Box<RValue>),
    BranchFn(Box<RValue>, Box<RValue>),
    InjectFn,
    NoMatchFn,
}

type REnv = Rc<Vec<(String, RValue)>>;

pub fn render_rvalue(v: &RValue) -> String {
    match v {
        RValue::Int(n) => n.to_string(),
        RValue::Bool(true) => "True".to_string(),
        RValue::Bool(false) => "False".to_string(),
        RValue::Pair(a, b) => format!("({}, {})", render_rvalue(a), render_rvalue(b)),
        RValue::Tagged(l, args) => {
            if args.is_empty() {
                l.clone()
            } else {
                let rendered: Vec<String> = args
                    .iter()
                    .map(|a| {
                        let s = render_rvalue(a);
                        if s.contains(' ') {
                            format!("({})", s)
                        } else {
                            s
                        }
                    })
                    .collect();
                format!("{} {}", l, rendered.join(" "))
            }
        }
        RValue::Wrap(x) => {
            let s = render_rvalue(x);
            if s.contains(' ') {
                format!("In ({})", s)
            } else {
                format!("In {}", s)
            }
        }
        _ => "<function>".to_string(),
    }
}

struct RowEval {
    globals: HashMap<String, RValue>,
}

/// Evaluate a row-checked program's `main` by direct label dispatch.
pub fn run_rows(checked: &RowChecked) -> Result<RValue, ProgramError> {
    let mut ev = RowEval {
        globals: HashMap::new(),
    };
    let mut main_v = None;
    for decl in &checked.program.decls {
        match &decl.kind {
            DeclKind::Let { name, body, .. } => {
                let v = ev.eval(body, &Rc::new(Vec::new()))?;
                ev.globals.insert(name.clone(), v);
            }
            DeclKind::Main(e) => {
                main_v = Some(ev.eval(e, &Rc::new(Vec::new()))?);
            }
            _ => {}
        }
    }
    main_v.ok_or_else(|| ProgramError::Type("program has no main".to_string()))
}

impl RowEval {
    fn eval(&self, e: &Expr, env: &REnv) -> Result<RValue, ProgramError> {
        let ierr = |m: String| ProgramError::Internal(format!("row evaluation: {}", m));
        match &e.kind {
            ExprKind::Int(n) => Ok(RValue::Int(*n)),
            ExprKind::Bool(b) => Ok(RValue::Bool(*b)),
            ExprKind::Var(name) => {
                for (n, v) in env.iter().rev() {
                    if n == name {
                        return Ok(v.clone());
                    }
                }
                if name == "inj'" {
                    return Ok(RValue::InjectFn);
                }
                if name == "noMatch" {
                    return Ok(RValue::NoMatchFn);
                }
                if let Some(v) = self.globals.get(name) {
                    return Ok(v.clone());
                }
                Err(ierr(format!("unknown name {}", name)))
            }
            ExprKind::App(f, x) => {
                if let ExprKind::Var(name) = &f.kind {
                    match name.as_str() {
                        "inj'" => {
                            let v = self.eval(x, env)?;
                            return Ok(RValue::Wrap(Box::new(v)));
                        }
                        "cases" => {
                            let cs = self.eval(x, env)?;
                            return Ok(RValue::CasesFn(Box::new(cs)));
                        }
                        _ => {}
                    }
                }
                if let Some((ctor, args)) = self.ctor_app(e) {
                    let mut vs = Vec::new();
                    for a in args {
                        vs.push(self.eval(a, env)?);
                    }
                    return Ok(RValue::Tagged(ctor, vs));
                }
                let vf = self.eval(f, env)?;
                let vx = self.eval(x, env)?;
                self.apply(vf, vx)
            }
            ExprKind::Lam(pats, body) => Ok(RValue::Closure {
                params: pats.clone(),
                applied: Vec::new(),
                body: Rc::new((**body).clone()),
                env: env.clone(),
            }),
            ExprKind::Pair(a, b) => Ok(RValue::Pair(
                Box::new(self.eval(a, env)?),
                Box::new(self.eval(b, env)?),
            )),
            ExprKind::BinOp(BinOp::Add, a, b) => match (self.eval(a, env)?, self.eval(b, env)?) {
                (RValue::Int(x), RValue::Int(y)) => Ok(RValue::Int(x + y)),
                _ => Err(ierr("+ on non-integers".to_string())),
            },
            ExprKind::BinOp(BinOp::Mul, a, b) => match (self.eval(a, env)?, self.eval(b, env)?) {
                (RValue::Int(x), RValue::Int(y)) => Ok(RValue::Int(x * y)),
                _ => Err(ierr("* on non-integers".to_string())),
            },
            ExprKind::BinOp(BinOp::Branch, m, n) => Ok(RValue::BranchFn(
                Box::new(self.eval(m, env)?),
                Box::new(self.eval(n, env)?),
            )),
            ExprKind::BinOp(BinOp::Dispatch, _, _) => Err(ierr(".?. unsupported".to_string())),
            ExprKind::Ann(inner, _) => self.eval(inner, env),
            ExprKind::Let { name, bound, body } => {
                let vb = self.eval(bound, env)?;
                let mut next = (**env).clone();
                next.push((name.clone(), vb));
                self.eval(body, &Rc::new(next))
            }
        }
    }

    fn ctor_app<'e>(&self, e: &'e Expr) -> Option<(String, Vec<&'e Expr>)> {
        let mut args = Vec::new();
        let mut cur = e;
        loop {
            match &cur.kind {
                ExprKind::App(f, x) => {
                    args.push(&**x);
                    cur = f;
                }
                ExprKind::Var(name)
                    if name
                        .chars()
                        .next()
                        .map(|c| c.is_ascii_uppercase())
                        .unwrap_or(false) =>
                {
                    args.reverse();
                    return Some((name.clone(), args));
                }
                _ => return None,
            }
        }
    }

    /// The label a branch handles, read from its first constructor pattern.
    fn branch_label(&self, v: &RValue) -> Option<String> {
        match v {
            RValue::Closure { params, .. } => match params.first() {
                Some(Pattern::Con { name, .. }) => Some(name.clone()),
                _ => None,
            },
            _ => None,
        }
    }

    fn apply(&self, f: RValue, arg: RValue) -> Result<RValue, ProgramError> {
        let ierr = |m: String| ProgramError::Internal(format!("row evaluation: {}", m));
        match f {
            RValue::Closure {
                params,
                mut applied,
                body,
                env,
            } => {
                applied.push(arg);
                if applied.len() == params.len() {
                    let mut scope = (*env).clone();
                    for (p, v) in params.iter().zip(applied) {
                        match (p, v) {
                            (Pattern::Var(x), v) => scope.push((x.clone(), v)),
                            (Pattern::Wild, _) => {}
                            (Pattern::Con { name, binders }, RValue::Tagged(l, args))
                                if *name == l =>
                            {
                                for (b, a) in binders.iter().zip(args) {
                                    if b != "_" {
                                        scope.push((b.clone(), a));
                                    }
                                }
                            }
                            (p, v) => {
                                return Err(ierr(format!(
                                    "pattern {:?} does not match {}",
                                    p,
                                    render_rvalue(&v)
                                )))
                            }
                        }
                    }
                    self.eval(&body, &Rc::new(scope))
                } else {
                    Ok(RValue::Closure {
                        params,
                        applied,
                        body,
                        env,
                    })
                }
            }
            RValue::CasesFn(cs) => match arg {
                RValue::Wrap(inner) => {
                    let step = self.apply((*cs).clone(), *inner)?;
                    self.apply(step, RValue::CasesFn(cs))
                }
                other => Err(ierr(format!(
                    "cases applied to non-variant {}",
                    render_rvalue(&other)
                ))),
            },
            RValue::BranchFn(m, n) => {
                let label = self
                    .branch_label(&m)
                    .ok_or_else(|| ierr("branch without a labeled pattern".to_string()))?;
                match &arg {
                    RValue::Tagged(l, _) if *l == label => self.apply(*m, arg),
                    RValue::Tagged(_, _) => self.apply(*n, arg),
                    other => Err(ierr(format!(
                        "branch applied to non-variant {}",
                        render_rvalue(other)
                    ))),
                }
            }
            RValue::InjectFn => Ok(RValue::Wrap(Box::new(arg))),
            RValue::NoMatchFn => Err(ierr(format!(
                "no branch matched {}",
                render_rvalue(&arg)
            ))),
            other => Err(ierr(format!(
                "applied non-function {}",
                render_rvalue(&other)
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_program;

    const ROW_PRELUDE: &str = "\
data Const = Const Int
data Sum = Plus self self
data Product = Times self self

let x = inj' (Plus (inj' (Const 1)) (inj' (Const 2)))
let y = inj' (Times (inj' (Const 3)) x)

let evalConst = \\(Const n) r -> n
let evalSum = \\(Plus a b) r -> r a + r b
let evalProduct = \\(Times a b) r -> r a * r b

let eval1 = cases (evalConst ? evalSum)
let eval2 = cases (evalProduct ? (evalSum ? evalConst))
";

    fn check(src: &str) -> RowChecked {
        check_rows(&parse_program(src).unwrap()).unwrap()
    }

    #[test]
    fn benchmark_programs_are_row_typable_without_annotations() {
        let src = format!("{}main = eval1 x\n", ROW_PRELUDE);
        let checked = check(&src);
        assert_eq!(checked.main_type.as_deref(), Some("Int"));
    }

    #[test]
    fn injection_scheme_carries_lacks_constraints() {
        let checked = check(ROW_PRELUDE);
        let (_, x_scheme) = checked.lines.iter().find(|(n, _)| n == "x").unwrap();
        assert_eq!(
            x_scheme,
            "forall a. (a\\Const, a\\Plus) => Fix Σ(Const: (Int), Plus: (self, self); a)"
        );
        let (_, e1) = checked.lines.iter().find(|(n, _)| n == "eval1").unwrap();
        assert_eq!(e1, "Fix Σ(Const: (Int), Plus: (self, self)) -> Int");
        let (_, e2) = checked.lines.iter().find(|(n, _)| n == "eval2").unwrap();
        assert_eq!(
            e2,
            "Fix Σ(Const: (Int), Plus: (self, self), Times: (self, self)) -> Int"
        );
    }

    #[test]
    fn duplicate_labels_in_a_chain_are_rejected() {
        let src = "\
data Const = Const Int
let bad = cases ((\\(Const a) r -> a) ? (\\(Const b) r -> b))
";
        let err = check_rows(&parse_program(src).unwrap()).unwrap_err();
        match err {
            ProgramError::Type(m) => assert!(m.contains("duplicate label"), "{}", m),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn schemes_are_invariant_under_declaration_order() {
        let reordered = "\
data Product = Times self self
data Sum = Plus self self
data Const = Const Int

let x = inj' (Plus (inj' (Const 1)) (inj' (Const 2)))
let evalConst = \\(Const n) r -> n
let evalSum = \\(Plus a b) r -> r a + r b
let eval1 = cases (evalConst ? evalSum)
main = eval1 x
";
        let a = check(&format!("{}main = eval1 x\n", ROW_PRELUDE));
        let b = check(reordered);
        let find = |c: &RowChecked, n: &str| {
            c.lines
                .iter()
                .find(|(m, _)| m == n)
                .map(|(_, s)| s.clone())
                .unwrap()
        };
        assert_eq!(find(&a, "x"), find(&b, "x"));
        assert_eq!(find(&a, "eval1"), find(&b, "eval1"));
        assert_eq!(a.main_type, b.main_type);
    }

    #[test]
    fn explicit_no_match_closes_a_chain() {
        let src = "\
data Const = Const Int
let evalConst = \\(Const n) r -> n
let e = cases (evalConst ? noMatch)
main = e (inj' (Const 7))
";
        let checked = check(src);
        assert_eq!(checked.main_type.as_deref(), Some("Int"));
        let v = run_rows(&checked).unwrap();
        assert_eq!(render_rvalue(&v), "7");
    }

    #[test]
    fn row_evaluation_dispatches_by_label() {
        let src = format!("{}main = eval1 x\n", ROW_PRELUDE);
        let checked = check(&src);
        let v = run_rows(&checked).unwrap();
        assert_eq!(render_rvalue(&v), "3");
        let src = format!("{}main = eval2 y\n", ROW_PRELUDE);
        let checked = check(&src);
        let v = run_rows(&checked).unwrap();
        assert_eq!(render_rvalue(&v), "9");
    }

    #[test]
    fn prj_and_dispatch_are_rejected() {
        let src = "data Const = Const Int\nlet p = \\v -> prj v\n";
        assert!(check_rows(&parse_program(src).unwrap()).is_err());
        let src = "let d = (\\a -> 1) .?. (\\b -> 2)\n";
        assert!(check_rows(&parse_program(src).unwrap()).is_err());
    }

    #[test]
    fn order_of_branches_is_irrelevant_to_typing_and_results() {
        for order in ["evalConst ? evalSum", "evalSum ? evalConst"] {
            let src = format!("{}let e = cases ({})\nmain = e x\n", ROW_PRELUDE, order);
            let checked = check(&src);
            assert_eq!(checked.main_type.as_deref(), Some("Int"));
            assert_eq!(render_rvalue(&run_rows(&checked).unwrap()), "3");
        }
    }
}
