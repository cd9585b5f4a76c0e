//! A small expression language for closed-form scalar fields.
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;
//! primary = number | ident | func , "(" , expr , { "," , expr } , ")" | "(" , expr , ")" ;
//! func    = "ln" | "exp" | "sqrt" | "sin" | "cos" | "tan" | "abs" | "pow" ;
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-1` is `2^(-1)`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::jets::{Jet, JetError, UniFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Abs,
    Pow,
}

impl Func {
    pub const ALL: [Func; 8] = [Func::Ln, Func::Exp, Func::Sqrt, Func::Sin, Func::Cos, Func::Tan, Func::Abs, Func::Pow];

    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parsed expression. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Binary(o1, l1, r1), Node::Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Node::Call(f1, a1), Node::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared identifier '{name}' at byte {offset}")]
    Undeclared { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Syntax { offset, .. } | ParseError::Undeclared { offset, .. } => Some(*offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in '{subexpr}': {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("identifier '{0}' is neither a coordinate nor a bound parameter")]
    Unbound(String),
    #[error("point has {got} coordinates, expected {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, Span)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (t, s) = lx.next()?;
            let end = t == Tok::End;
            out.push((t, s));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, Span), ParseError> {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, Span { start, end: start }));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), Span { start, end: self.pos }));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), Span { start, end: self.pos }));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax { offset: start, message: format!("unexpected character '{ch}'") })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, Span), ParseError> {
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; let the identifier lexer complain
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("malformed number '{text}'") })?;
        Ok((Tok::Num(v), Span { start, end: self.pos }))
    }
}

// ---------------------------------------------------------------- parser

struct Parser<'a> {
    toks: Vec<(Tok, Span)>,
    at: usize,
    declared: &'a [&'a str],
}

impl Parser<'_> {
    fn tok(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn span(&self) -> Span {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { offset: self.span().start, message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<Span, ParseError> {
        if *self.tok() == Tok::Sym(c) {
            Ok(self.bump().1)
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = join(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = join(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.tok() == Tok::Sym('-') {
            let s = self.bump().1;
            let e = self.unary()?;
            let span = Span { start: s.start, end: e.span.end };
            return Ok(Expr { node: Node::Neg(Box::new(e)), span });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.tok() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(join(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (t, s) = self.bump();
        match t {
            Tok::Num(v) => Ok(Expr { node: Node::Num(v), span: s }),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                let e = self.expect(')')?;
                Ok(Expr { node: inner.node, span: Span { start: s.start, end: e.end } })
            }
            Tok::Ident(name) => {
                let is_call = *self.tok() == Tok::Sym('(');
                match (Func::from_name(&name), is_call) {
                    (Some(f), true) => {
                        self.bump();
                        let mut args = vec![self.expr()?];
                        while *self.tok() == Tok::Sym(',') {
                            self.bump();
                            args.push(self.expr()?);
                        }
                        let e = self.expect(')')?;
                        if args.len() != f.arity() {
                            return Err(ParseError::Syntax {
                                offset: s.start,
                                message: format!("{} takes {} argument(s), got {}", f.name(), f.arity(), args.len()),
                            });
                        }
                        Ok(Expr { node: Node::Call(f, args), span: Span { start: s.start, end: e.end } })
                    }
                    (Some(f), false) => Err(ParseError::Syntax {
                        offset: s.start,
                        message: format!("function '{}' needs an argument list", f.name()),
                    }),
                    (None, true) => Err(ParseError::Syntax { offset: s.start, message: format!("unknown function '{name}'") }),
                    (None, false) => {
                        if self.declared.contains(&name.as_str()) {
                            Ok(Expr { node: Node::Var(name), span: s })
                        } else {
                            Err(ParseError::Undeclared { name, offset: s.start })
                        }
                    }
                }
            }
            Tok::End => Err(ParseError::Syntax { offset: s.start, message: "unexpected end of input".into() }),
            Tok::Sym(c) => Err(ParseError::Syntax { offset: s.start, message: format!("unexpected '{c}'") }),
        }
    }
}

fn join(op: BinaryOp, l: Expr, r: Expr) -> Expr {
    let span = Span { start: l.span.start, end: r.span.end };
    Expr { node: Node::Binary(op, Box::new(l), Box::new(r)), span }
}

/// Parses `source`; every identifier must be a function name or appear in `declared`.
pub fn parse(source: &str, declared: &[&str]) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = Lexer::tokens(source)?;
    let mut p = Parser { toks, at: 0, declared };
    let e = p.expr()?;
    if *p.tok() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------- building and printing

impl Expr {
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            return Expr::neg(Expr::num(-v));
        }
        Expr { node: Node::Num(v), span: Span::default() }
    }

    pub fn var(name: &str) -> Expr {
        Expr { node: Node::Var(name.to_string()), span: Span::default() }
    }

    pub fn neg(e: Expr) -> Expr {
        Expr { node: Node::Neg(Box::new(e)), span: Span::default() }
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr { node: Node::Binary(op, Box::new(l), Box::new(r)), span: Span::default() }
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        assert_eq!(args.len(), f.arity(), "arity of {}", f.name());
        Expr { node: Node::Call(f, args), span: Span::default() }
    }

    /// Identifiers used, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match &self.node {
            Node::Num(_) => {}
            Node::Var(v) => out.push(v.clone()),
            Node::Neg(e) => e.collect_vars(out),
            Node::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn prec(&self) -> u8 {
        match &self.node {
            Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
            Node::Neg(_) => 3,
            Node::Binary(op, ..) => op.prec(),
        }
    }

    fn write_min(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.write_plain(f)?;
            write!(f, ")")
        } else {
            self.write_plain(f)
        }
    }

    fn write_plain(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(e) => {
                write!(f, "-")?;
                e.write_min(f, 3)
            }
            Node::Binary(op, l, r) => {
                let (lmin, rmin) = match op {
                    BinaryOp::Add | BinaryOp::Sub => (1, 2),
                    BinaryOp::Mul | BinaryOp::Div => (2, 3),
                    BinaryOp::Pow => (5, 3),
                };
                l.write_min(f, lmin)?;
                write!(f, "{}", op.symbol())?;
                r.write_min(f, rmin)
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    a.write_plain(f)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_plain(f)
    }
}

// ---------------------------------------------------------------- evaluation

#[derive(Debug, Clone)]
enum Code {
    Const(f64),
    Coord(usize),
    Neg(Box<Code>),
    Add(Box<Code>, Box<Code>),
    Sub(Box<Code>, Box<Code>),
    Mul(Box<Code>, Box<Code>),
    Div(Box<Code>, Box<Code>, String),
    PowInt(Box<Code>, i32, String),
    PowConst(Box<Code>, f64, String),
    PowGeneral(Box<Code>, Box<Code>, String),
    Uni(UniFn, Box<Code>, String),
    Abs(Box<Code>, String),
}

/// An expression with identifiers resolved against a coordinate list and parameter values.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    code: Code,
    dim: usize,
}

impl Code {
    fn depends_on_coords(&self) -> bool {
        match self {
            Code::Const(_) => false,
            Code::Coord(_) => true,
            Code::Neg(a) | Code::PowInt(a, ..) | Code::PowConst(a, ..) | Code::Uni(_, a, _) | Code::Abs(a, _) => {
                a.depends_on_coords()
            }
            Code::Add(a, b) | Code::Sub(a, b) | Code::Mul(a, b) | Code::Div(a, b, _) | Code::PowGeneral(a, b, _) => {
                a.depends_on_coords() || b.depends_on_coords()
            }
        }
    }

    fn eval(&self, seeds: &[Jet], proto: &Jet) -> Result<Jet, EvalError> {
        let dom = |text: &str, reason: String| EvalError::Domain { subexpr: text.to_string(), reason };
        Ok(match self {
            Code::Const(v) => proto.constant_like(*v),
            Code::Coord(i) => seeds[*i],
            Code::Neg(a) => -a.eval(seeds, proto)?,
            Code::Add(a, b) => a.eval(seeds, proto)? + b.eval(seeds, proto)?,
            Code::Sub(a, b) => a.eval(seeds, proto)? - b.eval(seeds, proto)?,
            Code::Mul(a, b) => a.eval(seeds, proto)? * b.eval(seeds, proto)?,
            Code::Div(a, b, text) => {
                let d = b.eval(seeds, proto)?;
                if d.value() == 0.0 {
                    return Err(dom(text, "division by zero".into()));
                }
                a.eval(seeds, proto)? / d
            }
            Code::PowInt(a, e, text) => {
                let b = a.eval(seeds, proto)?;
                b.powi(*e).map_err(|_| dom(text, "zero base with negative exponent".into()))?
            }
            Code::PowConst(a, e, text) => {
                let b = a.eval(seeds, proto)?;
                if b.value() <= 0.0 {
                    return Err(dom(text, format!("non-positive base {} with non-integer exponent", b.value())));
                }
                b.apply(UniFn::PowReal(*e))?
            }
            Code::PowGeneral(a, e, text) => {
                let b = a.eval(seeds, proto)?;
                if b.value() <= 0.0 {
                    return Err(dom(text, format!("non-positive base {} with variable exponent", b.value())));
                }
                let l = b.apply(UniFn::Ln)?;
                (e.eval(seeds, proto)? * l).apply(UniFn::Exp)?
            }
            Code::Uni(f, a, text) => {
                let v = a.eval(seeds, proto)?;
                v.apply(*f).map_err(|e| match e {
                    JetError::Domain { func, value } => dom(text, format!("{func} undefined at {value}")),
                    other => EvalError::Jet(other),
                })?
            }
            Code::Abs(a, text) => {
                let v = a.eval(seeds, proto)?;
                if v.value() == 0.0 {
                    return Err(dom(text, "abs evaluated at zero".into()));
                }
                if v.value() < 0.0 {
                    -v
                } else {
                    v
                }
            }
        })
    }
}

fn lower(e: &Expr, coords: &[String], params: &BTreeMap<String, f64>) -> Result<Code, EvalError> {
    let text = || e.to_string();
    Ok(match &e.node {
        Node::Num(v) => Code::Const(*v),
        Node::Var(name) => {
            if let Some(i) = coords.iter().position(|c| c == name) {
                Code::Coord(i)
            } else if let Some(v) = params.get(name) {
                Code::Const(*v)
            } else {
                return Err(EvalError::Unbound(name.clone()));
            }
        }
        Node::Neg(a) => Code::Neg(Box::new(lower(a, coords, params)?)),
        Node::Binary(op, l, r) => {
            let a = Box::new(lower(l, coords, params)?);
            let b = lower(r, coords, params)?;
            match op {
                BinaryOp::Add => Code::Add(a, Box::new(b)),
                BinaryOp::Sub => Code::Sub(a, Box::new(b)),
                BinaryOp::Mul => Code::Mul(a, Box::new(b)),
                BinaryOp::Div => Code::Div(a, Box::new(b), text()),
                BinaryOp::Pow => pow_code(a, b, text())?,
            }
        }
        Node::Call(f, args) => {
            let a = Box::new(lower(&args[0], coords, params)?);
            match f {
                Func::Ln => Code::Uni(UniFn::Ln, a, text()),
                Func::Exp => Code::Uni(UniFn::Exp, a, text()),
                Func::Sqrt => Code::Uni(UniFn::Sqrt, a, text()),
                Func::Sin => Code::Uni(UniFn::Sin, a, text()),
                Func::Cos => Code::Uni(UniFn::Cos, a, text()),
                Func::Tan => Code::Uni(UniFn::Tan, a, text()),
                Func::Abs => Code::Abs(a, text()),
                Func::Pow => pow_code(a, lower(&args[1], coords, params)?, text())?,
            }
        }
    })
}

fn pow_code(base: Box<Code>, exp: Code, text: String) -> Result<Code, EvalError> {
    if exp.depends_on_coords() {
        return Ok(Code::PowGeneral(base, Box::new(exp), text));
    }
    let proto = Jet::zero(1, 0);
    let e = exp.eval(&[], &proto)?.value();
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        Ok(Code::PowInt(base, e as i32, text))
    } else {
        Ok(Code::PowConst(base, e, text))
    }
}

impl Expr {
    /// Resolves identifiers: names in `coords` become seeded coordinates,
    /// names in `params` become constants.
    pub fn compile(&self, coords: &[String], params: &BTreeMap<String, f64>) -> Result<CompiledExpr, EvalError> {
        Ok(CompiledExpr { code: lower(self, coords, params)?, dim: coords.len() })
    }
}

impl CompiledExpr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All partials up to `order` at `point`.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet, EvalError> {
        if point.len() != self.dim {
            return Err(EvalError::PointDimension { expected: self.dim, got: point.len() });
        }
        let proto = Jet::constant(0.0, self.dim, order);
        let seeds = point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::seed_variable(i, v, self.dim, order))
            .collect::<Result<Vec<_>, _>>()?;
        self.code.eval(&seeds, &proto)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(self.eval_jet(point, 0)?.value())
    }
}

/// One-shot evaluation of `expr` at `point`, with `coords` naming the point's components.
pub fn eval_jet(
    expr: &Expr,
    coords: &[String],
    point: &[f64],
    bindings: &BTreeMap<String, f64>,
    order: usize,
) -> Result<Jet, EvalError> {
    expr.compile(coords, bindings)?.eval_jet(point, order)
}
