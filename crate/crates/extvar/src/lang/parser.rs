//! Lexer and recursive-descent parser for the surface language.
//!
//! Precedence, tightest first: application, `*`, `+`, `.?.`, `?`, `::`.
//! Comments run from `--` to end of line.

use super::ast::*;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LIdent(String),
    UIdent(String),
    Int(i64),
    Lambda,
    Arrow,      // ->
    LParen,
    RParen,
    Comma,
    Plus,
    Star,
    Question,   // ?
    DotQuestion, // .?.
    DoubleColon, // ::
    Colon,
    CoprodOp,   // :+:
    MinusOp,    // :-:
    LeqOp,      // :<:
    Equals,
    FatArrow,   // =>
    Underscore,
    Dot,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LIdent(s) | Tok::UIdent(s) => write!(f, "{}", s),
            Tok::Int(n) => write!(f, "{}", n),
            Tok::Lambda => write!(f, "\\"),
            Tok::Arrow => write!(f, "->"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Plus => write!(f, "+"),
            Tok::Star => write!(f, "*"),
            Tok::Question => write!(f, "?"),
            Tok::DotQuestion => write!(f, ".?."),
            Tok::DoubleColon => write!(f, "::"),
            Tok::Colon => write!(f, ":"),
            Tok::CoprodOp => write!(f, ":+:"),
            Tok::MinusOp => write!(f, ":-:"),
            Tok::LeqOp => write!(f, ":<:"),
            Tok::Equals => write!(f, "="),
            Tok::FatArrow => write!(f, "=>"),
            Tok::Underscore => write!(f, "_"),
            Tok::Dot => write!(f, "."),
            Tok::Eof => write!(f, "<end of input>"),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "let" | "in" | "data" | "type" | "default" | "main" | "self" | "fails" | "forall"
    )
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut out = Vec::new();
        loop {
            // whitespace and comments
            loop {
                match self.peek() {
                    Some(c) if c.is_ascii_whitespace() => {
                        self.bump();
                    }
                    Some(b'-') if self.peek2() == Some(b'-') => {
                        while let Some(c) = self.peek() {
                            if c == b'\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let pos = self.here();
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, pos));
                return Ok(out);
            };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'?' => {
                    self.bump();
                    Tok::Question
                }
                b'\\' => {
                    self.bump();
                    Tok::Lambda
                }
                b'_' => {
                    self.bump();
                    Tok::Underscore
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::FatArrow
                    } else {
                        Tok::Equals
                    }
                }
                b'-' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        return Err(ParseError {
                            pos,
                            message: "unexpected '-'".to_string(),
                        });
                    }
                }
                b'.' => {
                    self.bump();
                    if self.peek() == Some(b'?') && self.src.get(self.pos + 1) == Some(&b'.') {
                        self.bump();
                        self.bump();
                        Tok::DotQuestion
                    } else {
                        Tok::Dot
                    }
                }
                b':' => {
                    self.bump();
                    match self.peek() {
                        Some(b':') => {
                            self.bump();
                            Tok::DoubleColon
                        }
                        Some(b'+') if self.peek2() == Some(b':') => {
                            self.bump();
                            self.bump();
                            Tok::CoprodOp
                        }
                        Some(b'-') if self.peek2() == Some(b':') => {
                            self.bump();
                            self.bump();
                            Tok::MinusOp
                        }
                        Some(b'<') if self.peek2() == Some(b':') => {
                            self.bump();
                            self.bump();
                            Tok::LeqOp
                        }
                        _ => Tok::Colon,
                    }
                }
                b'0'..=b'9' => {
                    let mut n: i64 = 0;
                    while let Some(d) = self.peek() {
                        if d.is_ascii_digit() {
                            n = n * 10 + i64::from(d - b'0');
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Int(n)
                }
                c if c.is_ascii_alphabetic() => {
                    let start = self.pos;
                    while let Some(d) = self.peek() {
                        if d.is_ascii_alphanumeric() || d == b'_' || d == b'\'' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .to_string();
                    if c.is_ascii_uppercase() {
                        Tok::UIdent(word)
                    } else {
                        Tok::LIdent(word)
                    }
                }
                other => {
                    return Err(ParseError {
                        pos,
                        message: format!("unexpected character {:?}", other as char),
                    })
                }
            };
            out.push((tok, pos));
        }
    }
}

pub struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    next_node: NodeId,
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        at: 0,
        next_node: 0,
    };
    let mut decls = Vec::new();
    while p.peek() != &Tok::Eof {
        decls.push(p.decl()?);
    }
    Ok(Program { decls })
}

/// Parse a standalone type (used by the solve front end).
pub fn parse_type(src: &str) -> Result<SurfaceTy, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        at: 0,
        next_node: 0,
    };
    let t = p.ty()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

/// Predicate forms accepted by the solve front end.
#[derive(Debug, Clone, PartialEq)]
pub enum SolvePred {
    /// `In f g`, with `fails` negating it.
    In(SurfaceTy, SurfaceTy, bool),
    /// `f :<: g`, also spelled `Into f g`.
    Leq(SurfaceTy, SurfaceTy),
    /// `f :-: g [= h]`, also spelled `Minus f g`.
    Minus(SurfaceTy, SurfaceTy, Option<SurfaceTy>),
}

/// Parse a solve-mode predicate: `In f g [fails]`, `f :<: g`, `Into f g`,
/// `f :-: g [= h]`, or `Minus f g`.
pub fn parse_solve_pred(src: &str) -> Result<SolvePred, ParseError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser {
        toks,
        at: 0,
        next_node: 0,
    };
    let pred = p.solve_pred()?;
    p.expect(Tok::Eof)?;
    Ok(pred)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        self.toks
            .get(self.at + n)
            .map(|(t, _)| t)
            .unwrap_or(&Tok::Eof)
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected '{}', found '{}'", t, self.peek())))
        }
    }

    fn err(&self, message: String) -> ParseError {
        ParseError {
            pos: self.pos(),
            message,
        }
    }

    fn node(&mut self) -> NodeId {
        let id = self.next_node;
        self.next_node += 1;
        id
    }

    fn lident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::LIdent(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected {}, found '{}'", what, other))),
        }
    }

    fn uident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::UIdent(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected {}, found '{}'", what, other))),
        }
    }

    fn decl(&mut self) -> Result<Decl, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LIdent(kw) if kw == "data" => {
                self.bump();
                let functor = self.uident("functor name")?;
                self.expect(Tok::Equals)?;
                let ctor = self.uident("constructor name")?;
                let mut fields = Vec::new();
                loop {
                    match self.peek().clone() {
                        Tok::LIdent(s) if s == "self" => {
                            self.bump();
                            fields.push(FieldTy::SelfRef);
                        }
                        Tok::UIdent(s) if s == "Int" => {
                            self.bump();
                            fields.push(FieldTy::Int);
                        }
                        Tok::UIdent(s) if s == "Bool" => {
                            self.bump();
                            fields.push(FieldTy::Bool);
                        }
                        _ => break,
                    }
                }
                Ok(Decl {
                    kind: DeclKind::Data(DataDecl {
                        functor,
                        ctor,
                        fields,
                    }),
                    pos,
                })
            }
            Tok::LIdent(kw) if kw == "type" => {
                self.bump();
                let name = self.uident("type alias name")?;
                self.expect(Tok::Equals)?;
                let ty = self.ty()?;
                Ok(Decl {
                    kind: DeclKind::TypeAlias(name, ty),
                    pos,
                })
            }
            Tok::LIdent(kw) if kw == "default" => {
                self.bump();
                self.expect(Tok::LParen)?;
                self.expect(Tok::LParen)?;
                let left = self.lident("type variable")?;
                self.expect(Tok::CoprodOp)?;
                let right = self.lident("type variable")?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::MinusOp)?;
                let subtrahend = self.lident("type variable")?;
                self.expect(Tok::Equals)?;
                let output = self.lident("type variable")?;
                self.expect(Tok::RParen)?;
                Ok(Decl {
                    kind: DeclKind::Default(DefaultForm {
                        left,
                        right,
                        subtrahend,
                        output,
                    }),
                    pos,
                })
            }
            Tok::LIdent(kw) if kw == "let" => {
                self.bump();
                let name = self.lident("binding name")?;
                let ann = if *self.peek() == Tok::Colon {
                    self.bump();
                    Some(self.scheme()?)
                } else {
                    None
                };
                self.expect(Tok::Equals)?;
                let body = self.expr()?;
                Ok(Decl {
                    kind: DeclKind::Let { name, ann, body },
                    pos,
                })
            }
            Tok::LIdent(kw) if kw == "main" => {
                self.bump();
                self.expect(Tok::Equals)?;
                let body = self.expr()?;
                Ok(Decl {
                    kind: DeclKind::Main(body),
                    pos,
                })
            }
            other => Err(self.err(format!(
                "expected a declaration (data/type/default/let/main), found '{}'",
                other
            ))),
        }
    }

    // -- types ------------------------------------------------------------

    fn ty(&mut self) -> Result<SurfaceTy, ParseError> {
        let lhs = self.ty_sum()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.ty()?;
            Ok(SurfaceTy::Fun(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn ty_sum(&mut self) -> Result<SurfaceTy, ParseError> {
        let lhs = self.ty_app()?;
        if *self.peek() == Tok::CoprodOp {
            self.bump();
            let rhs = self.ty_sum()?;
            Ok(SurfaceTy::Coprod(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn ty_app(&mut self) -> Result<SurfaceTy, ParseError> {
        let mut t = if matches!(self.peek(), Tok::UIdent(s) if s == "Fix") {
            self.bump();
            SurfaceTy::Fix(Box::new(self.ty_atom()?))
        } else if matches!(self.peek(), Tok::UIdent(s) if s == "Maybe") {
            self.bump();
            SurfaceTy::Maybe(Box::new(self.ty_atom()?))
        } else {
            self.ty_atom()?
        };
        // functor application by juxtaposition, as in `f e`
        loop {
            let applies = match self.peek() {
                Tok::UIdent(_) | Tok::LParen => true,
                Tok::LIdent(s) => !is_keyword(s),
                _ => false,
            };
            if !applies {
                return Ok(t);
            }
            let arg = self.ty_atom()?;
            t = SurfaceTy::App(Box::new(t), Box::new(arg));
        }
    }

    fn ty_atom(&mut self) -> Result<SurfaceTy, ParseError> {
        match self.peek().clone() {
            Tok::UIdent(s) => {
                self.bump();
                match s.as_str() {
                    "Int" => Ok(SurfaceTy::Int),
                    "Bool" => Ok(SurfaceTy::Bool),
                    _ => Ok(SurfaceTy::Name(s)),
                }
            }
            Tok::LIdent(s) => {
                self.bump();
                Ok(SurfaceTy::Var(s))
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => Err(self.err(format!("expected a type, found '{}'", other))),
        }
    }

    fn solve_pred(&mut self) -> Result<SolvePred, ParseError> {
        if let Tok::UIdent(s) = self.peek().clone() {
            match s.as_str() {
                "In" => {
                    self.bump();
                    let a = self.ty_atom()?;
                    let b = self.ty_atom()?;
                    let fails = matches!(self.peek(), Tok::LIdent(w) if w == "fails");
                    if fails {
                        self.bump();
                    }
                    return Ok(SolvePred::In(a, b, fails));
                }
                "Into" => {
                    self.bump();
                    let a = self.ty_atom()?;
                    let b = self.ty_atom()?;
                    return Ok(SolvePred::Leq(a, b));
                }
                "Minus" => {
                    self.bump();
                    let a = self.ty_atom()?;
                    let b = self.ty_atom()?;
                    return Ok(SolvePred::Minus(a, b, None));
                }
                _ => {}
            }
        }
        let lhs = self.ty_sum()?;
        match self.bump() {
            Tok::LeqOp => Ok(SolvePred::Leq(lhs, self.ty_sum()?)),
            Tok::MinusOp => {
                let mid = self.ty_sum()?;
                let out = if *self.peek() == Tok::Equals {
                    self.bump();
                    Some(self.ty_sum()?)
                } else {
                    None
                };
                Ok(SolvePred::Minus(lhs, mid, out))
            }
            other => Err(self.err(format!("expected ':<:' or ':-:', found '{}'", other))),
        }
    }

    // -- schemes ----------------------------------------------------------

    fn scheme(&mut self) -> Result<SurfaceScheme, ParseError> {
        let mut vars = Vec::new();
        if let Tok::LIdent(s) = self.peek() {
            if s == "forall" {
                self.bump();
                loop {
                    match self.peek().clone() {
                        Tok::LIdent(v) => {
                            self.bump();
                            vars.push(v);
                        }
                        Tok::Dot => {
                            self.bump();
                            break;
                        }
                        other => {
                            return Err(
                                self.err(format!("expected type variable or '.', found '{}'", other))
                            )
                        }
                    }
                }
            }
        }
        // a parenthesized group followed by => is a constraint list
        let mut preds = Vec::new();
        if *self.peek() == Tok::LParen && self.group_is_constraints() {
            self.bump();
            loop {
                preds.push(self.pred()?);
                match self.bump() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(self.err(format!("expected ',' or ')', found '{}'", other)))
                    }
                }
            }
            self.expect(Tok::FatArrow)?;
        }
        let ty = self.ty()?;
        Ok(SurfaceScheme { vars, preds, ty })
    }

    /// Look ahead past a balanced parenthesized group for `=>`.
    fn group_is_constraints(&self) -> bool {
        let mut depth = 0usize;
        let mut i = 0usize;
        loop {
            match self.peek_at(i) {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        return *self.peek_at(i + 1) == Tok::FatArrow;
                    }
                }
                Tok::Eof => return false,
                _ => {}
            }
            i += 1;
        }
    }

    fn pred(&mut self) -> Result<SurfacePred, ParseError> {
        if let Tok::UIdent(s) = self.peek().clone() {
            if s == "Functor" {
                self.bump();
                let t = self.ty_atom()?;
                return Ok(SurfacePred::Functor(t));
            }
            if s == "In" {
                self.bump();
                let a = self.ty_atom()?;
                let b = self.ty_atom()?;
                if matches!(self.peek(), Tok::LIdent(w) if w == "fails") {
                    self.bump();
                    return Ok(SurfacePred::NotIn(a, b));
                }
                return Ok(SurfacePred::In(a, b));
            }
        }
        let lhs = self.ty_sum()?;
        match self.bump() {
            Tok::LeqOp => {
                let rhs = self.ty_sum()?;
                Ok(SurfacePred::Leq(lhs, rhs))
            }
            Tok::MinusOp => {
                let mid = self.ty_sum()?;
                self.expect(Tok::Equals)?;
                let rhs = self.ty_sum()?;
                Ok(SurfacePred::Minus(lhs, mid, rhs))
            }
            other => Err(self.err(format!("expected ':<:' or ':-:', found '{}'", other))),
        }
    }

    // -- expressions --------------------------------------------------------

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Lambda => {
                let pos = self.pos();
                self.bump();
                let mut params = vec![self.pattern()?];
                while *self.peek() != Tok::Arrow {
                    params.push(self.pattern()?);
                }
                self.expect(Tok::Arrow)?;
                let body = self.expr()?;
                Ok(Expr {
                    kind: ExprKind::Lam(params, Box::new(body)),
                    id: self.node(),
                    pos,
                })
            }
            Tok::LIdent(kw) if kw == "let" => {
                let pos = self.pos();
                self.bump();
                let name = self.lident("binding name")?;
                self.expect(Tok::Equals)?;
                let bound = self.expr()?;
                match self.bump() {
                    Tok::LIdent(w) if w == "in" => {}
                    other => return Err(self.err(format!("expected 'in', found '{}'", other))),
                }
                let body = self.expr()?;
                Ok(Expr {
                    kind: ExprKind::Let {
                        name,
                        bound: Box::new(bound),
                        body: Box::new(body),
                    },
                    id: self.node(),
                    pos,
                })
            }
            _ => self.annot(),
        }
    }

    fn annot(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let e = self.branch()?;
        if *self.peek() == Tok::DoubleColon {
            self.bump();
            let t = self.ty()?;
            Ok(Expr {
                kind: ExprKind::Ann(Box::new(e), t),
                id: self.node(),
                pos,
            })
        } else {
            Ok(e)
        }
    }

    fn branch(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let lhs = self.dispatch()?;
        if *self.peek() == Tok::Question {
            self.bump();
            let rhs = self.branch()?;
            Ok(Expr {
                kind: ExprKind::BinOp(BinOp::Branch, Box::new(lhs), Box::new(rhs)),
                id: self.node(),
                pos,
            })
        } else {
            Ok(lhs)
        }
    }

    fn dispatch(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let lhs = self.additive()?;
        if *self.peek() == Tok::DotQuestion {
            self.bump();
            let rhs = self.dispatch()?;
            Ok(Expr {
                kind: ExprKind::BinOp(BinOp::Dispatch, Box::new(lhs), Box::new(rhs)),
                id: self.node(),
                pos,
            })
        } else {
            Ok(lhs)
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.multiplicative()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr {
                kind: ExprKind::BinOp(BinOp::Add, Box::new(lhs), Box::new(rhs)),
                id: self.node(),
                pos,
            };
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut lhs = self.application()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.application()?;
            lhs = Expr {
                kind: ExprKind::BinOp(BinOp::Mul, Box::new(lhs), Box::new(rhs)),
                id: self.node(),
                pos,
            };
        }
        Ok(lhs)
    }

    fn application(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let mut e = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            e = Expr {
                kind: ExprKind::App(Box::new(e), Box::new(arg)),
                id: self.node(),
                pos,
            };
        }
        Ok(e)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Int(_) | Tok::UIdent(_) | Tok::LParen | Tok::Lambda
        ) || matches!(self.peek(), Tok::LIdent(s)
            if s != "let" && s != "in" && s != "data" && s != "type" && s != "default" && s != "main")
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Int(n),
                    id: self.node(),
                    pos,
                })
            }
            Tok::UIdent(s) => {
                self.bump();
                match s.as_str() {
                    "True" => Ok(Expr {
                        kind: ExprKind::Bool(true),
                        id: self.node(),
                        pos,
                    }),
                    "False" => Ok(Expr {
                        kind: ExprKind::Bool(false),
                        id: self.node(),
                        pos,
                    }),
                    _ => Ok(Expr {
                        kind: ExprKind::Var(s),
                        id: self.node(),
                        pos,
                    }),
                }
            }
            Tok::LIdent(s)
                if s != "let" && s != "in" && s != "data" && s != "type" && s != "default"
                    && s != "main" =>
            {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Var(s),
                    id: self.node(),
                    pos,
                })
            }
            Tok::Lambda => self.expr(),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                match self.bump() {
                    Tok::RParen => Ok(e),
                    Tok::Comma => {
                        let snd = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr {
                            kind: ExprKind::Pair(Box::new(e), Box::new(snd)),
                            id: self.node(),
                            pos,
                        })
                    }
                    other => Err(self.err(format!("expected ')' or ',', found '{}'", other))),
                }
            }
            other => Err(self.err(format!("expected an expression, found '{}'", other))),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        match self.peek().clone() {
            Tok::Underscore => {
                self.bump();
                Ok(Pattern::Wild)
            }
            Tok::LIdent(s) => {
                self.bump();
                Ok(Pattern::Var(s))
            }
            Tok::LParen => {
                self.bump();
                let name = self.uident("constructor name in pattern")?;
                let pat = match name.as_str() {
                    "In" => Pattern::In(Box::new(self.pattern()?)),
                    "Inl" => Pattern::Inl(Box::new(self.pattern()?)),
                    "Inr" => Pattern::Inr(Box::new(self.pattern()?)),
                    _ => {
                        let mut binders = Vec::new();
                        loop {
                            match self.peek().clone() {
                                Tok::LIdent(b) => {
                                    self.bump();
                                    binders.push(b);
                                }
                                Tok::Underscore => {
                                    self.bump();
                                    binders.push("_".to_string());
                                }
                                _ => break,
                            }
                        }
                        Pattern::Con { name, binders }
                    }
                };
                self.expect(Tok::RParen)?;
                Ok(pat)
            }
            other => Err(self.err(format!("expected a pattern, found '{}'", other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_data_and_alias() {
        let p = parse_program("data Const = Const Int\ntype E1 = Fix (Const :+: Sum)").unwrap();
        assert_eq!(p.decls.len(), 2);
        match &p.decls[0].kind {
            DeclKind::Data(d) => {
                assert_eq!(d.functor, "Const");
                assert_eq!(d.ctor, "Const");
                assert_eq!(d.fields, vec![FieldTy::Int]);
            }
            other => panic!("unexpected {:?}", other),
        }
        match &p.decls[1].kind {
            DeclKind::TypeAlias(n, t) => {
                assert_eq!(n, "E1");
                assert_eq!(
                    *t,
                    SurfaceTy::Fix(Box::new(SurfaceTy::Coprod(
                        Box::new(SurfaceTy::Name("Const".into())),
                        Box::new(SurfaceTy::Name("Sum".into()))
                    )))
                );
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn parses_default_form() {
        let p = parse_program("default ((g :+: h) :-: g = h)").unwrap();
        match &p.decls[0].kind {
            DeclKind::Default(d) => {
                assert_eq!((d.left.as_str(), d.right.as_str()), ("g", "h"));
                assert_eq!((d.subtrahend.as_str(), d.output.as_str()), ("g", "h"));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn parses_main_application() {
        let p = parse_program("main = eval1 x").unwrap();
        match &p.decls[0].kind {
            DeclKind::Main(e) => match &e.kind {
                ExprKind::App(f, x) => {
                    assert!(matches!(&f.kind, ExprKind::Var(n) if n == "eval1"));
                    assert!(matches!(&x.kind, ExprKind::Var(n) if n == "x"));
                }
                other => panic!("unexpected {:?}", other),
            },
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn operator_precedence() {
        // application > * > + > .?. > ? > ::
        let p = parse_program("let z = f a + g b * 2").unwrap();
        let DeclKind::Let { body, .. } = &p.decls[0].kind else {
            panic!()
        };
        let ExprKind::BinOp(BinOp::Add, l, r) = &body.kind else {
            panic!("expected + at top, got {:?}", body.kind)
        };
        assert!(matches!(&l.kind, ExprKind::App(_, _)));
        assert!(matches!(&r.kind, ExprKind::BinOp(BinOp::Mul, _, _)));
    }

    #[test]
    fn branch_is_looser_than_dispatch() {
        let p = parse_program("let z = a .?. b ? c").unwrap();
        let DeclKind::Let { body, .. } = &p.decls[0].kind else {
            panic!()
        };
        let ExprKind::BinOp(BinOp::Branch, l, _) = &body.kind else {
            panic!("expected ? at top, got {:?}", body.kind)
        };
        assert!(matches!(&l.kind, ExprKind::BinOp(BinOp::Dispatch, _, _)));
    }

    #[test]
    fn annotation_binds_loosest() {
        let p = parse_program("let z = (x :: E1')").unwrap();
        let DeclKind::Let { body, .. } = &p.decls[0].kind else {
            panic!()
        };
        let ExprKind::Ann(_, t) = &body.kind else {
            panic!("expected annotation, got {:?}", body.kind)
        };
        assert_eq!(*t, SurfaceTy::Name("E1'".into()));
    }

    #[test]
    fn lambda_with_constructor_and_exposure_patterns() {
        let p = parse_program("let f = \\(Plus a b) r -> r a + r b\nlet g = \\(In (Inl _)) -> True").unwrap();
        let DeclKind::Let { body, .. } = &p.decls[0].kind else {
            panic!()
        };
        let ExprKind::Lam(ps, _) = &body.kind else { panic!() };
        assert_eq!(
            ps[0],
            Pattern::Con {
                name: "Plus".into(),
                binders: vec!["a".into(), "b".into()]
            }
        );
        let DeclKind::Let { body, .. } = &p.decls[1].kind else {
            panic!()
        };
        let ExprKind::Lam(ps, _) = &body.kind else { panic!() };
        assert_eq!(ps[0], Pattern::In(Box::new(Pattern::Inl(Box::new(Pattern::Wild)))));
    }

    #[test]
    fn scheme_annotation_on_let() {
        let p =
            parse_program("let eval1 : forall a. (a :-: Const = Sum) => Fix a -> Int = cases e")
                .unwrap();
        let DeclKind::Let { ann: Some(s), .. } = &p.decls[0].kind else {
            panic!()
        };
        assert_eq!(s.vars, vec!["a".to_string()]);
        assert_eq!(s.preds.len(), 1);
    }

    #[test]
    fn reports_position() {
        let e = parse_program("let x = (1").unwrap_err();
        assert_eq!(e.pos.line, 1);
        assert!(e.message.contains("expected"));
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse_program("-- a file\nmain = 1 -- trailing\n").unwrap();
        assert_eq!(p.decls.len(), 1);
    }
}
