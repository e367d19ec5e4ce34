//! Expressions `f(x_1, …, x_{d-1}, z)`: parsing, printing, symbolic
//! differentiation, interval evaluation and branch-and-bound bounding.
//!
//! Variables are positional. The last variable plays the role of `z`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::interval::{Interval, IntervalError, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("exponent at {pos} must be a nonnegative integer literal")]
    NegativeOrFractionalExponent { pos: usize },
    #[error("division by a constant zero at {pos}")]
    ZeroDenominator { pos: usize },
    #[error("arity must be at least 2 and match the variable names")]
    BadArity,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Rational),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_integer(n))
    }

    fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_value(&self, v: i64) -> bool {
        self.as_const().is_some_and(|c| *c == Rational::from_integer(v))
    }

    /// Largest variable index plus one.
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.min_arity().max(b.min_arity())
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.min_arity(),
        }
    }

    pub fn contains_division(&self) -> bool {
        match self {
            Expr::Div(..) => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.contains_division() || b.contains_division()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.contains_division(),
        }
    }
}

// Smart constructors: constant folding plus 0/1 identities.

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        _ if a.is_value(0) => b,
        _ if b.is_value(0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        _ if b.is_value(0) => a,
        _ if a.is_value(0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        _ if a.is_value(0) || b.is_value(0) => Expr::int(0),
        _ if a.is_value(1) => b,
        _ if b.is_value(1) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

/// `a / b`; `b` must not be the constant zero.
pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(y)) if y.is_zero() => panic!("division by constant zero"),
        (Some(x), Some(y)) => Expr::Const(x / y),
        _ if a.is_value(0) => Expr::int(0),
        _ if b.is_value(1) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn pow(a: Expr, n: u32) -> Expr {
    match (&a, n) {
        (_, 0) => Expr::int(1),
        (_, 1) => a,
        (Expr::Const(c), _) => Expr::Const(c.pow(n)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

/// Folds every constant-only subtree. Parsing already yields folded trees.
pub fn fold_constants(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Add(a, b) => fold_binary(Expr::Add, fold_constants(a), fold_constants(b), |x, y| Some(x + y)),
        Expr::Sub(a, b) => fold_binary(Expr::Sub, fold_constants(a), fold_constants(b), |x, y| Some(x - y)),
        Expr::Mul(a, b) => fold_binary(Expr::Mul, fold_constants(a), fold_constants(b), |x, y| Some(x * y)),
        Expr::Div(a, b) => fold_binary(Expr::Div, fold_constants(a), fold_constants(b), |x, y| {
            (!y.is_zero()).then(|| x / y)
        }),
        Expr::Neg(a) => match fold_constants(a) {
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other)),
        },
        Expr::Pow(a, n) => match fold_constants(a) {
            Expr::Const(c) => Expr::Const(c.pow(*n)),
            other => Expr::Pow(Box::new(other), *n),
        },
    }
}

fn fold_binary(
    build: fn(Box<Expr>, Box<Expr>) -> Expr,
    a: Expr,
    b: Expr,
    op: impl Fn(&Rational, &Rational) -> Option<Rational>,
) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(v) = op(x, y) {
            return Expr::Const(v);
        }
    }
    build(Box::new(a), Box::new(b))
}

/// Symbolic partial derivative with respect to variable `var`.
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Const(_) => Expr::int(0),
        Expr::Var(i) => Expr::int((*i == var) as i64),
        Expr::Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        Expr::Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a, var), (**b).clone()),
            mul((**a).clone(), differentiate(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            if db.is_value(0) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Pow(a, n) => {
            if *n == 0 {
                return Expr::int(0);
            }
            mul(
                mul(Expr::int(*n as i64), pow((**a).clone(), n - 1)),
                differentiate(a, var),
            )
        }
    }
}

/// Substitutes `x_i ↦ a_i·x_i + b_i` for every variable.
pub fn compose_affine(e: &Expr, maps: &[(Rational, Rational)]) -> Expr {
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var(i) => {
            let (a, b) = &maps[*i];
            add(mul(Expr::Const(a.clone()), Expr::Var(*i)), Expr::Const(b.clone()))
        }
        Expr::Add(x, y) => add(compose_affine(x, maps), compose_affine(y, maps)),
        Expr::Sub(x, y) => sub(compose_affine(x, maps), compose_affine(y, maps)),
        Expr::Mul(x, y) => mul(compose_affine(x, maps), compose_affine(y, maps)),
        Expr::Div(x, y) => div(compose_affine(x, maps), compose_affine(y, maps)),
        Expr::Neg(x) => neg(compose_affine(x, maps)),
        Expr::Pow(x, n) => pow(compose_affine(x, maps), *n),
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational, bool),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lit = &text[start..i];
            if lit.matches('.').count() > 1 {
                return Err(ParseError::Syntax { pos: start, msg: format!("malformed number `{lit}`") });
            }
            let value: Rational = lit
                .parse()
                .map_err(|_| ParseError::Syntax { pos: start, msg: format!("malformed number `{lit}`") })?;
            out.push((Tok::Num(value, lit.contains('.')), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, i));
            i += 1;
        } else {
            return Err(ParseError::Syntax { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    names: &'a [String],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.at += 1;
            let rhs = self.term()?;
            lhs = fold_binary(
                if c == '+' { Expr::Add } else { Expr::Sub },
                lhs,
                rhs,
                |x, y| Some(if c == '+' { x + y } else { x - y }),
            );
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.unary()?;
            if c == '/' && rhs.is_value(0) {
                return Err(ParseError::ZeroDenominator { pos });
            }
            lhs = fold_binary(
                if c == '*' { Expr::Mul } else { Expr::Div },
                lhs,
                rhs,
                |x, y| Some(if c == '*' { x * y } else { x / y }),
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.at += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while let Some(Tok::Op('^')) = self.peek() {
            self.at += 1;
            let n = self.exponent()?;
            base = match base {
                Expr::Const(c) => Expr::Const(c.pow(n)),
                other => Expr::Pow(Box::new(other), n),
            };
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        let pos = self.pos();
        let parens = matches!(self.peek(), Some(Tok::LParen));
        if parens {
            self.at += 1;
        }
        let n = match self.peek().cloned() {
            Some(Tok::Num(v, is_decimal)) => {
                self.at += 1;
                if is_decimal && !v.is_integer() {
                    return Err(ParseError::NegativeOrFractionalExponent { pos });
                }
                if matches!(self.peek(), Some(Tok::Op('/'))) && parens {
                    return Err(ParseError::NegativeOrFractionalExponent { pos });
                }
                v.numer()
                    .to_u32()
                    .ok_or(ParseError::NegativeOrFractionalExponent { pos })?
            }
            Some(Tok::Op('-')) => return Err(ParseError::NegativeOrFractionalExponent { pos }),
            _ => return Err(ParseError::NegativeOrFractionalExponent { pos }),
        };
        if parens {
            match self.peek() {
                Some(Tok::RParen) => self.at += 1,
                Some(Tok::Op(_)) => return Err(ParseError::NegativeOrFractionalExponent { pos }),
                _ => return Err(ParseError::Syntax { pos: self.pos(), msg: "expected `)`".into() }),
            }
        }
        Ok(n)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.at += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match self.names.iter().position(|n| *n == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::UnknownVariable { name, pos }),
                }
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(e)
                    }
                    _ => Err(ParseError::Syntax { pos: self.pos(), msg: "expected `)`".into() }),
                }
            }
            Some(t) => Err(ParseError::Syntax { pos, msg: format!("unexpected token {t:?}") }),
            None => Err(ParseError::Syntax { pos, msg: "unexpected end of input".into() }),
        }
    }
}

/// Parsed function of a fixed arity with named positional variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub expr: Expr,
    pub names: Vec<String>,
}

/// Default variable names for arity `d`: `x, y` / `x, y, z` / `x1..x{d-1}, z`.
pub fn default_names(d: usize) -> Vec<String> {
    match d {
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..d).map(|i| format!("x{i}")).chain(std::iter::once("z".to_string())).collect(),
    }
}

impl Function {
    pub fn parse(text: &str, names: &[String]) -> Result<Function, ParseError> {
        if names.len() < 2 {
            return Err(ParseError::BadArity);
        }
        let toks = tokenize(text)?;
        let mut p = Parser { toks, at: 0, names, end: text.len() };
        let expr = p.expr()?;
        if p.at != p.toks.len() {
            return Err(ParseError::Syntax { pos: p.pos(), msg: "trailing input".into() });
        }
        Ok(Function { expr, names: names.to_vec() })
    }

    /// Parses with the default names for arity `d`.
    pub fn parse_arity(text: &str, d: usize) -> Result<Function, ParseError> {
        Function::parse(text, &default_names(d))
    }

    pub fn from_expr(expr: Expr, names: Vec<String>) -> Function {
        assert!(expr.min_arity() <= names.len());
        Function { expr, names }
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn z_index(&self) -> usize {
        self.arity() - 1
    }

    pub fn partial(&self, var: usize) -> Expr {
        differentiate(&self.expr, var)
    }

    pub fn compose_affine(&self, maps: &[(Rational, Rational)]) -> Function {
        Function { expr: compose_affine(&self.expr, maps), names: self.names.clone() }
    }

    pub fn eval_interval(&self, bx: &[Interval]) -> Result<Interval, IntervalError> {
        eval_interval(&self.expr, bx)
    }

    /// Naive enclosure of `∂_j f` over a box.
    pub fn eval_partial(&self, j: usize, bx: &[Interval]) -> Result<Interval, IntervalError> {
        eval_interval(&self.partial(j), bx)
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, &self.expr, &self.names, 0)
    }
}

/// Renders `e` with the given variable names; re-parses to the same tree.
pub fn to_text(e: &Expr, names: &[String]) -> String {
    struct D<'a>(&'a Expr, &'a [String]);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_expr(f, self.0, self.1, 0)
        }
    }
    D(e, names).to_string()
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(_) | Expr::Var(_) => 5,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[String], min: u8) -> fmt::Result {
    let paren = prec(e) < min;
    if paren {
        write!(f, "(")?;
    }
    match e {
        Expr::Const(c) => {
            if c.is_integer() && !c.is_negative() {
                write!(f, "{c}")?;
            } else if min == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})")?;
            }
        }
        Expr::Var(i) => write!(f, "{}", names[*i])?,
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(f, a, names, 1)?;
            write!(f, " {} ", if matches!(e, Expr::Add(..)) { '+' } else { '-' })?;
            write_expr(f, b, names, 2)?;
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_expr(f, a, names, 2)?;
            write!(f, "{}", if matches!(e, Expr::Mul(..)) { '*' } else { '/' })?;
            write_expr(f, b, names, 3)?;
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_expr(f, a, names, 3)?;
        }
        Expr::Pow(a, n) => {
            write_expr(f, a, names, 5)?;
            write!(f, "^{n}")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone)]
enum Op {
    Const(Interval),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow(u32),
}

/// Postfix form of an expression with constants pre-converted to the
/// evaluation mode, for hot loops.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
}

impl Compiled {
    pub fn new(e: &Expr, float_mode: bool) -> Compiled {
        let mut ops = Vec::new();
        fn walk(e: &Expr, float_mode: bool, ops: &mut Vec<Op>) {
            match e {
                Expr::Const(c) => {
                    let iv = Interval::point(c.clone());
                    ops.push(Op::Const(if float_mode { iv.to_float() } else { iv }));
                }
                Expr::Var(i) => ops.push(Op::Var(*i)),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    walk(a, float_mode, ops);
                    walk(b, float_mode, ops);
                    ops.push(match e {
                        Expr::Add(..) => Op::Add,
                        Expr::Sub(..) => Op::Sub,
                        Expr::Mul(..) => Op::Mul,
                        _ => Op::Div,
                    });
                }
                Expr::Neg(a) => {
                    walk(a, float_mode, ops);
                    ops.push(Op::Neg);
                }
                Expr::Pow(a, n) => {
                    walk(a, float_mode, ops);
                    ops.push(Op::Pow(*n));
                }
            }
        }
        walk(e, float_mode, &mut ops);
        Compiled { ops }
    }

    pub fn eval(&self, bx: &[Interval]) -> Result<Interval, IntervalError> {
        let mut stack: Vec<Interval> = Vec::with_capacity(8);
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => c.clone(),
                Op::Var(i) => bx[*i].clone(),
                Op::Neg => stack.pop().expect("stack").neg(),
                Op::Pow(n) => stack.pop().expect("stack").pow(*n),
                bin => {
                    let b = stack.pop().expect("stack");
                    let a = stack.pop().expect("stack");
                    match bin {
                        Op::Add => a.add(&b),
                        Op::Sub => a.sub(&b),
                        Op::Mul => a.mul(&b),
                        _ => a.div(&b)?,
                    }
                }
            };
            stack.push(v);
        }
        Ok(stack.pop().expect("nonempty program"))
    }
}

/// Naive interval extension of `e` over a box.
pub fn eval_interval(e: &Expr, bx: &[Interval]) -> Result<Interval, IntervalError> {
    let float_mode = bx.iter().any(|iv| !iv.is_exact());
    Compiled::new(e, float_mode).eval(bx)
}

/// Plain double evaluation (not rigorous).
pub fn eval_f64(e: &Expr, p: &[f64]) -> f64 {
    match e {
        Expr::Const(c) => c.to_f64(),
        Expr::Var(i) => p[*i],
        Expr::Add(a, b) => eval_f64(a, p) + eval_f64(b, p),
        Expr::Sub(a, b) => eval_f64(a, p) - eval_f64(b, p),
        Expr::Mul(a, b) => eval_f64(a, p) * eval_f64(b, p),
        Expr::Div(a, b) => eval_f64(a, p) / eval_f64(b, p),
        Expr::Neg(a) => -eval_f64(a, p),
        Expr::Pow(a, n) => eval_f64(a, p).powi(*n as i32),
    }
}

/// Exact evaluation at a rational point; `None` on division by zero.
pub fn eval_rational(e: &Expr, p: &[Rational]) -> Option<Rational> {
    Some(match e {
        Expr::Const(c) => c.clone(),
        Expr::Var(i) => p[*i].clone(),
        Expr::Add(a, b) => eval_rational(a, p)? + eval_rational(b, p)?,
        Expr::Sub(a, b) => eval_rational(a, p)? - eval_rational(b, p)?,
        Expr::Mul(a, b) => eval_rational(a, p)? * eval_rational(b, p)?,
        Expr::Div(a, b) => {
            let d = eval_rational(b, p)?;
            if d.is_zero() {
                return None;
            }
            eval_rational(a, p)? / d
        }
        Expr::Neg(a) => -eval_rational(a, p)?,
        Expr::Pow(a, n) => eval_rational(a, p)?.pow(*n),
    })
}

// ---------------------------------------------------------------------------
// Branch and bound

/// Limits for the branch-and-bound searches.
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    /// Stop once both extremes are known to within this absolute gap.
    pub tol: f64,
    /// Maximum number of bisections along any path from the root box.
    pub max_depth: u32,
    /// Hard cap on boxes evaluated.
    pub max_boxes: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { tol: 1e-6, max_depth: 40, max_boxes: 200_000 }
    }
}

#[derive(Debug, Clone)]
struct Leaf {
    bx: Vec<Interval>,
    enc: Interval,
    depth: u32,
}

/// Sound global enclosure of a function over a box, with the leaf boxes
/// attaining the lower and upper ends.
#[derive(Debug, Clone)]
pub struct Extremes {
    pub bound: Interval,
    pub lo_box: Vec<Interval>,
    pub hi_box: Vec<Interval>,
    /// Best sampled values: a true minimum is at most `sampled.0`, a true
    /// maximum at least `sampled.1`.
    pub sampled: (f64, f64),
    pub boxes: usize,
    pub converged: bool,
}

/// Outcome of [`extremes`]: either an enclosure or a box at maximum depth
/// where the evaluator could not produce one.
#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Bounded(Extremes),
    Undetermined { witness: Vec<Interval>, boxes: usize },
}

/// Splits the widest dimension at its midpoint; ties go to the lowest index.
pub fn split_box(bx: &[Interval]) -> (Vec<Interval>, Vec<Interval>) {
    let mut k = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, iv) in bx.iter().enumerate() {
        let w = iv.width_f64();
        if w > best {
            best = w;
            k = i;
        }
    }
    let (a, b) = bx[k].bisect();
    let mut left = bx.to_vec();
    let mut right = bx.to_vec();
    left[k] = a;
    right[k] = b;
    (left, right)
}

struct Keyed {
    key: f64,
    id: usize,
}

impl PartialEq for Keyed {
    fn eq(&self, o: &Self) -> bool {
        self.key.total_cmp(&o.key) == Ordering::Equal && self.id == o.id
    }
}
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Keyed {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.total_cmp(&o.key).then_with(|| o.id.cmp(&self.id))
    }
}

fn sample_points(bx: &[Interval]) -> Vec<Vec<f64>> {
    let d = bx.len();
    let mut pts = vec![bx.iter().map(Interval::mid_f64).collect::<Vec<_>>()];
    if d <= 4 {
        for mask in 0..(1u32 << d) {
            pts.push(
                (0..d)
                    .map(|i| {
                        let iv = &bx[i];
                        let v = if mask >> i & 1 == 0 { iv.lo_f64() } else { iv.hi_f64() };
                        // Stay inside the box even after outward rounding.
                        v.clamp(iv.lo_f64().next_up().min(iv.mid_f64()), iv.hi_f64().next_down().max(iv.mid_f64()))
                    })
                    .collect(),
            );
        }
    }
    pts
}

/// Best-first branch and bound for the range of a function over `dom`.
///
/// `eval` returns `Ok(Some(enclosure))`, or `Ok(None)` when the box must be
/// split before an enclosure is available (e.g. a denominator straddles
/// zero). `point` samples the function at a point and may return NaN.
pub fn extremes(
    dom: &[Interval],
    limits: SearchLimits,
    eval: impl Fn(&[Interval]) -> Option<Interval>,
    point: impl Fn(&[f64]) -> f64,
) -> SearchOutcome {
    let mut leaves: Vec<Option<Leaf>> = Vec::new();
    let mut lo_heap: BinaryHeap<Keyed> = BinaryHeap::new();
    let mut hi_heap: BinaryHeap<Keyed> = BinaryHeap::new();
    let mut pending: Vec<(Vec<Interval>, u32)> = vec![(dom.to_vec(), 0)];
    let mut boxes = 0usize;
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    let mut frozen_lo: Vec<usize> = Vec::new();
    let mut frozen_hi: Vec<usize> = Vec::new();
    let mut converged = false;

    loop {
        while let Some((bx, depth)) = pending.pop() {
            boxes += 1;
            for p in sample_points(&bx) {
                let v = point(&p);
                if v.is_finite() {
                    smin = smin.min(v);
                    smax = smax.max(v);
                }
            }
            match eval(&bx) {
                Some(enc) => {
                    let id = leaves.len();
                    lo_heap.push(Keyed { key: -enc.lo_f64(), id });
                    hi_heap.push(Keyed { key: enc.hi_f64(), id });
                    leaves.push(Some(Leaf { bx, enc, depth }));
                }
                None => {
                    if depth >= limits.max_depth {
                        return SearchOutcome::Undetermined { witness: bx, boxes };
                    }
                    let (a, b) = split_box(&bx);
                    pending.push((b, depth + 1));
                    pending.push((a, depth + 1));
                }
            }
        }
        let top = |heap: &mut BinaryHeap<Keyed>, leaves: &Vec<Option<Leaf>>| -> Option<usize> {
            while let Some(k) = heap.peek() {
                if leaves[k.id].is_some() {
                    return Some(k.id);
                }
                heap.pop();
            }
            None
        };
        let lo_id = top(&mut lo_heap, &leaves);
        let hi_id = top(&mut hi_heap, &leaves);
        let (Some(lo_id), Some(hi_id)) = (lo_id, hi_id) else { break };
        let lo_gap = smin - leaves[lo_id].as_ref().expect("live").enc.lo_f64();
        let hi_gap = leaves[hi_id].as_ref().expect("live").enc.hi_f64() - smax;
        let target = if lo_gap > limits.tol {
            Some((lo_id, true))
        } else if hi_gap > limits.tol {
            Some((hi_id, false))
        } else {
            None
        };
        let Some((id, is_lo)) = target else {
            converged = true;
            break;
        };
        if boxes >= limits.max_boxes {
            break;
        }
        let leaf = leaves[id].as_ref().expect("live");
        if leaf.depth >= limits.max_depth {
            // Cannot refine further: park it so the other end can progress.
            if is_lo {
                lo_heap.pop();
                frozen_lo.push(id);
            } else {
                hi_heap.pop();
                frozen_hi.push(id);
            }
            if lo_heap.is_empty() || hi_heap.is_empty() {
                break;
            }
            continue;
        }
        let leaf = leaves[id].take().expect("live");
        let (a, b) = split_box(&leaf.bx);
        pending.push((b, leaf.depth + 1));
        pending.push((a, leaf.depth + 1));
    }

    let live: Vec<&Leaf> = leaves.iter().flatten().collect();
    let mut bound = live[0].enc.clone();
    let mut lo_leaf = live[0];
    let mut hi_leaf = live[0];
    for l in &live[1..] {
        bound = bound.hull(&l.enc);
        if l.enc.lo_f64() < lo_leaf.enc.lo_f64() {
            lo_leaf = l;
        }
        if l.enc.hi_f64() > hi_leaf.enc.hi_f64() {
            hi_leaf = l;
        }
    }
    let _ = (frozen_lo, frozen_hi);
    SearchOutcome::Bounded(Extremes {
        bound,
        lo_box: lo_leaf.bx.clone(),
        hi_box: hi_leaf.bx.clone(),
        sampled: (smin, smax),
        boxes,
        converged,
    })
}

/// Result of bounding `|∂_i f / ∂_z f|` over a box.
#[derive(Debug, Clone)]
pub enum RatioBound {
    /// `bound.lo <= |∂_i f/∂_z f|(p) <= bound.hi` for every `p` in the box.
    Bounded(Extremes),
    /// Some box at maximum depth still has a `∂_z f` enclosure containing 0.
    DerivativeSignAmbiguous { witness: Vec<Interval>, boxes: usize },
}

/// Branch-and-bound enclosure of `|∂_i f / ∂_z f|` over `bx`.
pub fn bound_abs_ratio(f: &Function, i: usize, bx: &[Interval], limits: SearchLimits) -> RatioBound {
    assert_eq!(bx.len(), f.arity(), "box arity mismatch");
    assert!(i < f.z_index(), "ratio index must precede z");
    let num = f.partial(i);
    let den = f.partial(f.z_index());
    bound_abs_quotient(&num, &den, bx, limits)
}

/// Enclosure of `|num/den|` over `bx`.
pub fn bound_abs_quotient(num: &Expr, den: &Expr, bx: &[Interval], limits: SearchLimits) -> RatioBound {
    let float_mode = bx.iter().any(|iv| !iv.is_exact());
    let num_c = Compiled::new(num, float_mode);
    let den_c = Compiled::new(den, float_mode);
    let outcome = extremes(
        bx,
        limits,
        |b| {
            let d = den_c.eval(b).ok()?;
            if d.contains_zero() {
                return None;
            }
            let n = num_c.eval(b).ok()?;
            n.abs().div(&d.abs()).ok()
        },
        |p| (eval_f64(num, p) / eval_f64(den, p)).abs(),
    );
    match outcome {
        SearchOutcome::Bounded(e) => RatioBound::Bounded(e),
        SearchOutcome::Undetermined { witness, boxes } => RatioBound::DerivativeSignAmbiguous { witness, boxes },
    }
}

/// Branch-and-bound enclosure of the range of `f` over `bx`.
pub fn bound_range(e: &Expr, bx: &[Interval], limits: SearchLimits) -> SearchOutcome {
    let float_mode = bx.iter().any(|iv| !iv.is_exact());
    let c = Compiled::new(e, float_mode);
    extremes(bx, limits, |b| c.eval(b).ok(), |p| eval_f64(e, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        default_names(2)
    }

    fn parse2(s: &str) -> Expr {
        Function::parse(s, &xy()).unwrap().expr
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse2("x + y"), Expr::Add(Box::new(Expr::Var(0)), Box::new(Expr::Var(1))));
        let f = Function::parse_arity("0.1*x + x*y + z", 3).unwrap();
        match &f.expr {
            Expr::Add(lhs, _) => match &**lhs {
                Expr::Add(a, _) => assert_eq!(
                    **a,
                    Expr::Mul(Box::new(Expr::Const(Rational::new(1, 10))), Box::new(Expr::Var(0)))
                ),
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            parse2("x^3 + y"),
            Expr::Add(Box::new(Expr::Pow(Box::new(Expr::Var(0)), 3)), Box::new(Expr::Var(1)))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus.
        assert_eq!(parse2("-x^2"), Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2))));
        assert_eq!(
            parse2("x - y - x"),
            Expr::Sub(
                Box::new(Expr::Sub(Box::new(Expr::Var(0)), Box::new(Expr::Var(1)))),
                Box::new(Expr::Var(0))
            )
        );
        assert_eq!(parse2("1/3"), Expr::Const(Rational::new(1, 3)));
        assert_eq!(parse2("3/4^2"), Expr::Const(Rational::new(3, 16)));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Function::parse("x + w", &xy()), Err(ParseError::UnknownVariable { .. })));
        assert!(matches!(
            Function::parse("x^-1", &xy()),
            Err(ParseError::NegativeOrFractionalExponent { .. })
        ));
        assert!(matches!(
            Function::parse("x^0.5", &xy()),
            Err(ParseError::NegativeOrFractionalExponent { .. })
        ));
        assert!(matches!(
            Function::parse("x^(1/2)", &xy()),
            Err(ParseError::NegativeOrFractionalExponent { .. })
        ));
        assert!(matches!(Function::parse("x/(1-1)", &xy()), Err(ParseError::ZeroDenominator { .. })));
        assert!(matches!(Function::parse("x +", &xy()), Err(ParseError::Syntax { pos: 3, .. })));
        assert!(matches!(Function::parse("(x", &xy()), Err(ParseError::Syntax { .. })));
        assert!(matches!(Function::parse("x", &["x".to_string()]), Err(ParseError::BadArity)));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(differentiate(&parse2("x + y"), 0), Expr::int(1));
        let f = Function::parse_arity("0.1*x + x*y + z", 3).unwrap();
        assert_eq!(
            f.partial(0),
            Expr::Add(Box::new(Expr::Const(Rational::new(1, 10))), Box::new(Expr::Var(1)))
        );
        assert_eq!(
            differentiate(&parse2("x^3 + y"), 0),
            Expr::Mul(Box::new(Expr::int(3)), Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2)))
        );
    }

    #[test]
    fn eval_examples() {
        let unit = vec![Interval::unit(), Interval::unit()];
        assert_eq!(eval_interval(&parse2("x + y"), &unit).unwrap(), Interval::rat(0, 1, 2, 1));
        let r = vec![Interval::rat(2, 3, 1, 1), Interval::rat(2, 3, 1, 1)];
        assert_eq!(eval_interval(&parse2("x*y"), &r).unwrap(), Interval::rat(4, 9, 1, 1));
    }

    #[test]
    fn ratio_examples() {
        let limits = SearchLimits::default();
        let unit = vec![Interval::unit(), Interval::unit()];
        let f = Function::parse("x + y", &xy()).unwrap();
        match bound_abs_ratio(&f, 0, &unit, limits) {
            RatioBound::Bounded(e) => assert_eq!(e.bound, Interval::rat(1, 1, 1, 1)),
            other => panic!("{other:?}"),
        }
        let g = Function::parse("x*y", &xy()).unwrap();
        let right = vec![Interval::rat(3, 5, 1, 1), Interval::rat(3, 5, 1, 1)];
        match bound_abs_ratio(&g, 0, &right, limits) {
            RatioBound::Bounded(e) => assert_eq!(e.bound, Interval::rat(3, 5, 5, 3)),
            other => panic!("{other:?}"),
        }
        let small = SearchLimits { max_depth: 12, ..limits };
        assert!(matches!(bound_abs_ratio(&g, 0, &unit, small), RatioBound::DerivativeSignAmbiguous { .. }));
    }

    #[test]
    fn compose_affine_substitutes() {
        let f = Function::parse("x*y", &xy()).unwrap();
        let m = (Rational::new(2, 5), Rational::new(3, 5));
        let g = f.compose_affine(&[m.clone(), m]);
        let v = eval_rational(&g.expr, &[Rational::zero(), Rational::one()]).unwrap();
        assert_eq!(v, Rational::new(3, 5));
        let back = Function::parse(&g.to_string(), &xy()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn print_examples() {
        let f = Function::parse("x*(2/3) - -y + (x - y)", &xy()).unwrap();
        assert_eq!(f.to_string(), "x*(2/3) - -y + (x - y)");
        let g = Function::parse("(-x)^2 + (x^2)^3", &xy()).unwrap();
        assert_eq!(g.to_string(), "(-x)^2 + (x^2)^3");
    }
}
