//! Expression language for graphing functions and entire test functions.
//!
//! Expressions are built from constants, coordinate variables, `+`, `-`,
//! `*`, non-negative integer powers, `sin`, `cos` and (for test functions
//! only) `exp`. Every node is an entire function of its arguments, so the
//! same tree can be evaluated on real inputs (graphing functions) or on
//! complex inputs (test functions).

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use smallvec::SmallVec;
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// Coordinate variables. Indices are zero based; the text form is one based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    U(usize),
    V(usize),
    Zeta(usize),
    Eta(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(k) => write!(f, "x{}", k + 1),
            Var::U(k) => write!(f, "u{}", k + 1),
            Var::V(k) => write!(f, "v{}", k + 1),
            Var::Zeta(k) => write!(f, "zeta{}", k + 1),
            Var::Eta(k) => write!(f, "eta{}", k + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Rational),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {pos}: {msg}")]
pub struct SyntaxError {
    pub pos: usize,
    pub msg: String,
}

impl SyntaxError {
    fn new(pos: usize, msg: impl Into<String>) -> Self {
        SyntaxError {
            pos,
            msg: msg.into(),
        }
    }
}

impl Expr {
    pub fn constant(value: i64) -> Expr {
        Expr::Const(Rational::from_integer(value))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == Rational::from_integer(0))
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == Rational::from_integer(1))
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.collect_vars(out),
        }
    }

    pub fn contains_exp(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Exp(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.contains_exp() || b.contains_exp()
            }
            Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) => a.contains_exp(),
        }
    }

    /// Exact symbolic partial derivative. Only trivial constant folding is
    /// applied (multiplication by 0 or 1, addition of 0).
    pub fn derivative(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::constant(0),
            Expr::Var(v) => Expr::constant(i64::from(*v == var)),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Pow(a, k) => match k {
                0 => Expr::constant(0),
                1 => a.derivative(var),
                _ => mul(
                    mul(Expr::constant(i64::from(*k)), pow((**a).clone(), k - 1)),
                    a.derivative(var),
                ),
            },
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.derivative(var)),
            Expr::Cos(a) => mul(
                sub(Expr::constant(0), Expr::Sin(a.clone())),
                a.derivative(var),
            ),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.derivative(var)),
        }
    }

    /// Compile to a postfix program with variables resolved through `slot`.
    pub fn compile<F>(&self, slot: F) -> Program
    where
        F: Fn(Var) -> usize,
    {
        let mut ops = Vec::new();
        self.emit(&slot, &mut ops);
        Program::new(ops)
    }

    fn emit<F: Fn(Var) -> usize>(&self, slot: &F, ops: &mut Vec<Op>) {
        match self {
            Expr::Const(c) => ops.push(Op::Const(rational_to_f64(c))),
            Expr::Var(v) => ops.push(Op::Load(slot(*v))),
            Expr::Add(a, b) => {
                a.emit(slot, ops);
                b.emit(slot, ops);
                ops.push(Op::Add);
            }
            Expr::Sub(a, b) => {
                a.emit(slot, ops);
                b.emit(slot, ops);
                ops.push(Op::Sub);
            }
            Expr::Mul(a, b) => {
                a.emit(slot, ops);
                b.emit(slot, ops);
                ops.push(Op::Mul);
            }
            Expr::Pow(a, k) => {
                a.emit(slot, ops);
                ops.push(Op::Pow(*k));
            }
            Expr::Sin(a) => {
                a.emit(slot, ops);
                ops.push(Op::Sin);
            }
            Expr::Cos(a) => {
                a.emit(slot, ops);
                ops.push(Op::Cos);
            }
            Expr::Exp(a) => {
                a.emit(slot, ops);
                ops.push(Op::Exp);
            }
        }
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        a
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        Expr::constant(0)
    } else if a.is_one() {
        b
    } else if b.is_one() {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, k: u32) -> Expr {
    match k {
        0 => Expr::constant(1),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

pub fn rational_to_f64(c: &Rational) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

/// Printed form re-parses to an identical tree (modulo the `0 - c` encoding
/// of negative constants), so evaluation round-trips exactly.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                let mag = if *c.numer() < 0 { -*c } else { *c };
                let body = if *mag.denom() == 1 {
                    format!("{}", mag.numer())
                } else {
                    format!("{}/{}", mag.numer(), mag.denom())
                };
                if *c.numer() < 0 {
                    write!(f, "(0 - {body})")
                } else {
                    write!(f, "{body}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

/// Numeric types an expression can be evaluated over.
pub trait Scalar: Copy {
    fn from_f64(v: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn powu(self, k: u32) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn powu(self, k: u32) -> Self {
        self.powi(k as i32)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

impl Scalar for Complex64 {
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn powu(self, k: u32) -> Self {
        Complex64::powu(&self, k)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Const(f64),
    Load(usize),
    Add,
    Sub,
    Mul,
    Pow(u32),
    Sin,
    Cos,
    Exp,
}

/// Postfix form of an [`Expr`]; cheap to evaluate in inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    constant: Option<f64>,
}

impl Program {
    fn new(ops: Vec<Op>) -> Self {
        let constant = match ops.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        };
        Program { ops, constant }
    }

    pub fn eval<T: Scalar>(&self, slots: &[T]) -> T {
        if let Some(c) = self.constant {
            return T::from_f64(c);
        }
        let mut stack: SmallVec<[T; 24]> = SmallVec::new();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(T::from_f64(c)),
                Op::Load(i) => stack.push(slots[i]),
                Op::Add | Op::Sub | Op::Mul => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    stack.push(match op {
                        Op::Add => a.add(b),
                        Op::Sub => a.sub(b),
                        _ => a.mul(b),
                    });
                }
                Op::Pow(k) => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(a.powu(k));
                }
                Op::Sin | Op::Cos | Op::Exp => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(match op {
                        Op::Sin => a.sin(),
                        Op::Cos => a.cos(),
                        _ => a.exp(),
                    });
                }
            }
        }
        stack.pop().expect("empty program")
    }

    pub fn is_constant_zero(&self) -> bool {
        self.constant == Some(0.0)
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Int(u64),
    Decimal(String),
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Decimal(src[start..i].to_string()),
                    pos: start,
                });
            } else {
                let v = src[start..i]
                    .parse::<u64>()
                    .map_err(|_| SyntaxError::new(start, "integer literal too large"))?;
                out.push(Token {
                    tok: Tok::Int(v),
                    pos: start,
                });
            }
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                pos: start,
            });
        } else if "+-*^()=;/".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                pos: i,
            });
            i += 1;
        } else {
            return Err(SyntaxError::new(i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

fn decimal_to_rational(text: &str, pos: usize) -> Result<Rational, SyntaxError> {
    let (int_part, frac_part) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int_part}{frac_part}");
    let numer = digits
        .parse::<i64>()
        .map_err(|_| SyntaxError::new(pos, "decimal literal has too many digits"))?;
    let denom = 10i64
        .checked_pow(frac_part.len() as u32)
        .ok_or_else(|| SyntaxError::new(pos, "decimal literal has too many digits"))?;
    Ok(Rational::new(numer, denom))
}

/// Which variables an expression may reference and whether `exp` is allowed.
pub trait VarPolicy {
    fn resolve(&self, name: &str, index: usize) -> Result<Var, String>;
    fn allow_exp(&self) -> bool;
}

pub(crate) struct Parser<'a, P: VarPolicy> {
    toks: &'a [Token],
    pos: usize,
    end: usize,
    policy: &'a P,
}

impl<'a, P: VarPolicy> Parser<'a, P> {
    pub(crate) fn new(toks: &'a [Token], end: usize, policy: &'a P) -> Self {
        Parser {
            toks,
            pos: 0,
            end,
            policy,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(SyntaxError::new(self.here(), format!("expected '{c}'"))),
        }
    }

    pub(crate) fn parse_all(mut self) -> Result<Expr, SyntaxError> {
        let e = self.expr()?;
        if self.pos != self.toks.len() {
            return Err(SyntaxError::new(self.here(), "unexpected trailing input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Sym('+')) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Sym('-')) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Sym('*')) = self.peek() {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.base()?;
        if let Some(Tok::Sym('^')) = self.peek() {
            self.pos += 1;
            let at = self.here();
            match self.peek() {
                Some(Tok::Int(k)) => {
                    let k = u32::try_from(*k)
                        .map_err(|_| SyntaxError::new(at, "exponent too large"))?;
                    self.pos += 1;
                    return Ok(Expr::Pow(Box::new(base), k));
                }
                _ => return Err(SyntaxError::new(at, "expected non-negative integer exponent")),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, SyntaxError> {
        let at = self.here();
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| SyntaxError::new(at, "unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Int(p) => {
                let p = i64::try_from(p).map_err(|_| SyntaxError::new(at, "integer too large"))?;
                if let Some(Tok::Sym('/')) = self.peek() {
                    self.pos += 1;
                    let qat = self.here();
                    match self.peek() {
                        Some(Tok::Int(q)) if *q > 0 => {
                            let q = i64::try_from(*q)
                                .map_err(|_| SyntaxError::new(qat, "integer too large"))?;
                            self.pos += 1;
                            Ok(Expr::Const(Rational::new(p, q)))
                        }
                        _ => Err(SyntaxError::new(qat, "expected positive denominator")),
                    }
                } else {
                    Ok(Expr::Const(Rational::from_integer(p)))
                }
            }
            Tok::Decimal(text) => Ok(Expr::Const(decimal_to_rational(&text, at)?)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "sin" | "cos" | "exp" => {
                    if name == "exp" && !self.policy.allow_exp() {
                        return Err(SyntaxError::new(
                            at,
                            "exp is not allowed in graphing functions",
                        ));
                    }
                    self.expect_sym('(')?;
                    let arg = Box::new(self.expr()?);
                    self.expect_sym(')')?;
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        _ => Expr::Exp(arg),
                    })
                }
                _ => {
                    let idx_at = self.here();
                    let index = match self.peek() {
                        Some(Tok::Int(k)) if *k >= 1 => *k as usize,
                        _ => {
                            return Err(SyntaxError::new(
                                idx_at,
                                format!("expected variable index after '{name}'"),
                            ))
                        }
                    };
                    self.pos += 1;
                    self.policy
                        .resolve(&name, index)
                        .map(Expr::Var)
                        .map_err(|msg| SyntaxError::new(at, msg))
                }
            },
            Tok::Sym(c) => Err(SyntaxError::new(at, format!("unexpected '{c}'"))),
        }
    }
}

/// Policy for entire test functions in `zeta1..zetad`, `eta1..eta(n-d)`.
pub struct EntirePolicy {
    pub d: usize,
    pub m: usize,
}

impl VarPolicy for EntirePolicy {
    fn resolve(&self, name: &str, index: usize) -> Result<Var, String> {
        match name {
            "zeta" if index <= self.d => Ok(Var::Zeta(index - 1)),
            "eta" if index <= self.m => Ok(Var::Eta(index - 1)),
            "zeta" | "eta" => Err(format!("{name}{index} is out of range")),
            _ => Err(format!(
                "unknown variable '{name}{index}' (test functions use zeta/eta)"
            )),
        }
    }

    fn allow_exp(&self) -> bool {
        true
    }
}

/// Parse a standalone expression under `policy`.
pub fn parse_expr<P: VarPolicy>(src: &str, policy: &P) -> Result<Expr, SyntaxError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(SyntaxError::new(0, "empty expression"));
    }
    Parser::new(&toks, src.len(), policy).parse_all()
}
