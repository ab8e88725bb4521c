//! Surface syntax for the mini language.

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Constructor field shapes: recursive position, or an integer/boolean
/// payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldTy {
    SelfRef,
    Int,
    Bool,
}

/// `data Sum = Plus self self` declares functor `Sum` with single
/// constructor `Plus`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDecl {
    pub functor: String,
    pub ctor: String,
    pub fields: Vec<FieldTy>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceTy {
    Name(String),
    Var(String),
    Coprod(Box<SurfaceTy>, Box<SurfaceTy>),
    Fix(Box<SurfaceTy>),
    Fun(Box<SurfaceTy>, Box<SurfaceTy>),
    /// Functor application by juxtaposition, as in `f e`.
    App(Box<SurfaceTy>, Box<SurfaceTy>),
    Maybe(Box<SurfaceTy>),
    Int,
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfacePred {
    Leq(SurfaceTy, SurfaceTy),
    Minus(SurfaceTy, SurfaceTy, SurfaceTy),
    In(SurfaceTy, SurfaceTy),
    NotIn(SurfaceTy, SurfaceTy),
    Functor(SurfaceTy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceScheme {
    pub vars: Vec<String>,
    pub preds: Vec<SurfacePred>,
    pub ty: SurfaceTy,
}

/// `default ((g :+: h) :-: g = h)` carried as its four variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultForm {
    pub left: String,
    pub right: String,
    pub subtrahend: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    Data(DataDecl),
    TypeAlias(String, SurfaceTy),
    Default(DefaultForm),
    Let {
        name: String,
        ann: Option<SurfaceScheme>,
        body: Expr,
    },
    Main(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub kind: DeclKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Mul,
    /// The overloaded branching combinator `?`.
    Branch,
    /// The primitive tag dispatch `.?.`.
    Dispatch,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Var(String),
    Wild,
    /// One-level constructor pattern: `(Plus a b)`.
    Con { name: String, binders: Vec<String> },
    /// Constructor-exposure patterns.
    In(Box<Pattern>),
    Inl(Box<Pattern>),
    Inr(Box<Pattern>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Lam(Vec<Pattern>, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Ann(Box<Expr>, SurfaceTy),
    Let {
        name: String,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub id: NodeId,
    pub pos: Pos,
}
