//! Scalar integrand expressions in the variables `t`, `x<i>`, `xd<i>`,
//! `xdd<i>`, with exact forward-mode first derivatives.
//!
//! Grammar (EBNF, whitespace insignificant):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | 't' | 'x'i | 'xd'i | 'xdd'i
//!         | func '(' expr ')' | '(' expr ')' | '-' atom
//! func   := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```
//!
//! `i` is a 0-based state index, so `x0`, `xd0`, `xdd1` etc. Exponents are
//! integers (possibly negative); fractional powers go through `sqrt`. Note
//! that `-x0^2` parses as `(-x0)^2` because unary minus is part of the
//! atom — use parentheses when the other reading is intended.
//!
//! Derivatives are computed by dual-number semantics: arithmetic is
//! carried out on (value, gradient) pairs where the gradient spans all of
//! `x`, `xd`, `xdd`, so the partials returned by [`partials`] are exact up
//! to rounding rather than finite-difference approximations.

use crate::{Error, Result};
use std::fmt;

/// Variable family an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    X,
    Xd,
    Xdd,
}

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

/// Abstract syntax tree of an integrand expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Var(VarKind, usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Apply(Func, Box<Expr>),
}

/// Evaluation point (t, x, ẋ, ẍ); slices must share the state dimension.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub xd: &'a [f64],
    pub xdd: &'a [f64],
}

impl<'a> EvalPoint<'a> {
    pub fn new(t: f64, x: &'a [f64], xd: &'a [f64], xdd: &'a [f64]) -> Self {
        debug_assert_eq!(x.len(), xd.len());
        debug_assert_eq!(x.len(), xdd.len());
        EvalPoint { t, x, xd, xdd }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

// ---------------------------------------------------------------------------
// Lexing + parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    tokens: Vec<(usize, Token)>,
}

impl<'a> Lexer<'a> {
    fn run(text: &'a str) -> Result<Vec<(usize, Token)>> {
        let mut lx = Lexer { src: text.as_bytes(), pos: 0, tokens: Vec::new() };
        while lx.pos < lx.src.len() {
            let c = lx.src[lx.pos];
            let start = lx.pos;
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    lx.pos += 1;
                }
                b'+' => lx.push1(Token::Plus),
                b'-' => lx.push1(Token::Minus),
                b'*' => lx.push1(Token::Star),
                b'/' => lx.push1(Token::Slash),
                b'^' => lx.push1(Token::Caret),
                b'(' => lx.push1(Token::LParen),
                b')' => lx.push1(Token::RParen),
                b'0'..=b'9' | b'.' => {
                    let mut end = lx.pos;
                    let mut seen_e = false;
                    while end < lx.src.len() {
                        let d = lx.src[end];
                        let is_num = d.is_ascii_digit() || d == b'.';
                        let is_exp = (d == b'e' || d == b'E') && !seen_e;
                        if is_num {
                            end += 1;
                        } else if is_exp {
                            seen_e = true;
                            end += 1;
                            if end < lx.src.len() && (lx.src[end] == b'+' || lx.src[end] == b'-') {
                                end += 1;
                            }
                        } else {
                            break;
                        }
                    }
                    let lit = std::str::from_utf8(&lx.src[lx.pos..end]).unwrap();
                    let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                        pos: start,
                        msg: format!("bad number literal `{lit}`"),
                    })?;
                    lx.tokens.push((start, Token::Num(v)));
                    lx.pos = end;
                }
                b'a'..=b'z' | b'A'..=b'Z' => {
                    let mut end = lx.pos;
                    while end < lx.src.len()
                        && (lx.src[end].is_ascii_alphanumeric() || lx.src[end] == b'_')
                    {
                        end += 1;
                    }
                    let id = std::str::from_utf8(&lx.src[lx.pos..end]).unwrap().to_string();
                    lx.tokens.push((start, Token::Ident(id)));
                    lx.pos = end;
                }
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{}`", c as char),
                    })
                }
            }
        }
        Ok(lx.tokens)
    }

    fn push1(&mut self, t: Token) {
        self.tokens.push((self.pos, t));
        self.pos += 1;
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    n: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.cursor).map_or(self.end_pos, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        self.cursor += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Syntax { pos, msg: format!("expected {what}") }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.bump();
            let k = self.integer_exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32> {
        let pos = self.pos();
        let neg = if let Some(Token::Minus) = self.peek() {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Some(Token::Num(v)) => {
                if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    Err(Error::Syntax {
                        pos,
                        msg: format!("exponent must be an integer, got {v}"),
                    })
                } else {
                    let k = v as i32;
                    Ok(if neg { -k } else { k })
                }
            }
            _ => Err(Error::Syntax { pos, msg: "expected integer exponent after ^".into() }),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Minus) => Ok(Expr::Neg(Box::new(self.atom()?))),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some(Token::Ident(id)) => self.ident_atom(&id, pos),
            _ => Err(Error::Syntax { pos, msg: "expected an atom".into() }),
        }
    }

    fn ident_atom(&mut self, id: &str, pos: usize) -> Result<Expr> {
        if id == "t" {
            return Ok(Expr::Time);
        }
        let func = match id {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(f) = func {
            self.expect(Token::LParen, &format!("`(` after {id}"))?;
            let arg = self.expr()?;
            self.expect(Token::RParen, "closing `)`")?;
            return Ok(Expr::Apply(f, Box::new(arg)));
        }
        // x<i>, xd<i>, xdd<i>
        for (prefix, kind) in [("xdd", VarKind::Xdd), ("xd", VarKind::Xd), ("x", VarKind::X)] {
            if let Some(rest) = id.strip_prefix(prefix) {
                if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                    let idx: usize = rest.parse().map_err(|_| Error::Syntax {
                        pos,
                        msg: format!("bad variable index in `{id}`"),
                    })?;
                    if idx >= self.n {
                        return Err(Error::IndexOutOfRange { idx, n: self.n });
                    }
                    return Ok(Expr::Var(kind, idx));
                }
            }
        }
        Err(Error::UnknownIdentifier(id.to_string()))
    }
}

/// Parse an expression over a state of dimension `n`.
pub fn parse(text: &str, n: usize) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax { pos: 0, msg: "empty expression".into() });
    }
    let tokens = Lexer::run(text)?;
    let mut p = Parser { tokens, cursor: 0, n, end_pos: text.len() };
    let e = p.expr()?;
    if p.cursor != p.tokens.len() {
        return Err(Error::Syntax { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluate an expression at a point.
pub fn evaluate(e: &Expr, p: &EvalPoint) -> Result<f64> {
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Time => p.t,
        Expr::Var(kind, i) => {
            let slice = match kind {
                VarKind::X => p.x,
                VarKind::Xd => p.xd,
                VarKind::Xdd => p.xdd,
            };
            *slice
                .get(*i)
                .ok_or(Error::IndexOutOfRange { idx: *i, n: slice.len() })?
        }
        Expr::Add(a, b) => evaluate(a, p)? + evaluate(b, p)?,
        Expr::Sub(a, b) => evaluate(a, p)? - evaluate(b, p)?,
        Expr::Mul(a, b) => evaluate(a, p)? * evaluate(b, p)?,
        Expr::Div(a, b) => {
            let den = evaluate(b, p)?;
            if den == 0.0 {
                return Err(Error::Eval("division by zero".into()));
            }
            evaluate(a, p)? / den
        }
        Expr::Pow(a, k) => {
            let base = evaluate(a, p)?;
            if *k < 0 && base == 0.0 {
                return Err(Error::Eval("zero raised to a negative power".into()));
            }
            base.powi(*k)
        }
        Expr::Neg(a) => -evaluate(a, p)?,
        Expr::Apply(f, a) => {
            let v = evaluate(a, p)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(Error::Eval(format!("sqrt of negative value {v}")));
                    }
                    v.sqrt()
                }
            }
        }
    })
}

/// Value plus gradient over the 3n variables (x, xd, xdd), in that order.
#[derive(Debug, Clone)]
struct Diff {
    v: f64,
    g: Vec<f64>,
}

impl Diff {
    fn constant(v: f64, n3: usize) -> Self {
        Diff { v, g: vec![0.0; n3] }
    }

    fn seed(v: f64, slot: usize, n3: usize) -> Self {
        let mut g = vec![0.0; n3];
        g[slot] = 1.0;
        Diff { v, g }
    }

    fn add(mut self, o: &Diff) -> Diff {
        self.v += o.v;
        for (a, b) in self.g.iter_mut().zip(&o.g) {
            *a += b;
        }
        self
    }

    fn sub(mut self, o: &Diff) -> Diff {
        self.v -= o.v;
        for (a, b) in self.g.iter_mut().zip(&o.g) {
            *a -= b;
        }
        self
    }

    fn mul(mut self, o: &Diff) -> Diff {
        for (a, b) in self.g.iter_mut().zip(&o.g) {
            *a = *a * o.v + self.v * b;
        }
        self.v *= o.v;
        self
    }

    fn div(mut self, o: &Diff) -> Result<Diff> {
        if o.v == 0.0 {
            return Err(Error::Eval("division by zero".into()));
        }
        for (a, b) in self.g.iter_mut().zip(&o.g) {
            *a = (*a * o.v - self.v * b) / (o.v * o.v);
        }
        self.v /= o.v;
        Ok(self)
    }

    fn neg(mut self) -> Diff {
        self.v = -self.v;
        self.g.iter_mut().for_each(|a| *a = -*a);
        self
    }

    fn powi(mut self, k: i32) -> Result<Diff> {
        if k == 0 {
            return Ok(Diff::constant(1.0, self.g.len()));
        }
        if self.v == 0.0 && k < 0 {
            return Err(Error::Eval("zero raised to a negative power".into()));
        }
        // d(v^k) = k v^(k-1) dv; v = 0 with k >= 2 gives zero slope, k = 1 passes
        // the gradient through unchanged.
        let slope = if self.v == 0.0 {
            if k == 1 {
                1.0
            } else {
                0.0
            }
        } else {
            k as f64 * self.v.powi(k - 1)
        };
        self.g.iter_mut().for_each(|a| *a *= slope);
        self.v = self.v.powi(k);
        Ok(self)
    }

    fn apply(mut self, f: Func) -> Result<Diff> {
        let (v, slope) = match f {
            Func::Sin => (self.v.sin(), self.v.cos()),
            Func::Cos => (self.v.cos(), -self.v.sin()),
            Func::Exp => {
                let e = self.v.exp();
                (e, e)
            }
            Func::Sqrt => {
                if self.v < 0.0 {
                    return Err(Error::Eval(format!("sqrt of negative value {}", self.v)));
                }
                if self.v == 0.0 {
                    if self.g.iter().any(|x| *x != 0.0) {
                        return Err(Error::Eval("sqrt derivative at zero argument".into()));
                    }
                    (0.0, 0.0)
                } else {
                    let s = self.v.sqrt();
                    (s, 0.5 / s)
                }
            }
        };
        self.g.iter_mut().for_each(|a| *a *= slope);
        self.v = v;
        Ok(self)
    }
}

fn eval_diff(e: &Expr, p: &EvalPoint, n: usize) -> Result<Diff> {
    let n3 = 3 * n;
    Ok(match e {
        Expr::Const(v) => Diff::constant(*v, n3),
        Expr::Time => Diff::constant(p.t, n3),
        Expr::Var(kind, i) => {
            let (slice, off) = match kind {
                VarKind::X => (p.x, 0),
                VarKind::Xd => (p.xd, n),
                VarKind::Xdd => (p.xdd, 2 * n),
            };
            let v = *slice
                .get(*i)
                .ok_or(Error::IndexOutOfRange { idx: *i, n: slice.len() })?;
            Diff::seed(v, off + i, n3)
        }
        Expr::Add(a, b) => eval_diff(a, p, n)?.add(&eval_diff(b, p, n)?),
        Expr::Sub(a, b) => eval_diff(a, p, n)?.sub(&eval_diff(b, p, n)?),
        Expr::Mul(a, b) => eval_diff(a, p, n)?.mul(&eval_diff(b, p, n)?),
        Expr::Div(a, b) => eval_diff(a, p, n)?.div(&eval_diff(b, p, n)?)?,
        Expr::Pow(a, k) => eval_diff(a, p, n)?.powi(*k)?,
        Expr::Neg(a) => eval_diff(a, p, n)?.neg(),
        Expr::Apply(f, a) => eval_diff(a, p, n)?.apply(*f)?,
    })
}

/// Exact partial derivatives (∂f/∂x, ∂f/∂ẋ, ∂f/∂ẍ) at a point.
pub fn partials(e: &Expr, p: &EvalPoint) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let d = eval_diff(e, p, n)?;
    Ok((
        d.g[0..n].to_vec(),
        d.g[n..2 * n].to_vec(),
        d.g[2 * n..3 * n].to_vec(),
    ))
}

/// Value and all partials in one pass; the shape the assemblers want.
pub fn value_and_partials(
    e: &Expr,
    p: &EvalPoint,
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let d = eval_diff(e, p, n)?;
    Ok((
        d.v,
        d.g[0..n].to_vec(),
        d.g[n..2 * n].to_vec(),
        d.g[2 * n..3 * n].to_vec(),
    ))
}

/// Which variable families an expression mentions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VarUsage {
    pub uses_t: bool,
    pub uses_x: bool,
    pub uses_xd: bool,
    pub uses_xdd: bool,
}

pub fn var_usage(e: &Expr) -> VarUsage {
    let mut u = VarUsage::default();
    collect_usage(e, &mut u);
    u
}

fn collect_usage(e: &Expr, u: &mut VarUsage) {
    match e {
        Expr::Const(_) => {}
        Expr::Time => u.uses_t = true,
        Expr::Var(VarKind::X, _) => u.uses_x = true,
        Expr::Var(VarKind::Xd, _) => u.uses_xd = true,
        Expr::Var(VarKind::Xdd, _) => u.uses_xdd = true,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            collect_usage(a, u);
            collect_usage(b, u);
        }
        Expr::Pow(a, _) | Expr::Neg(a) | Expr::Apply(_, a) => collect_usage(a, u),
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; parsing the output reproduces the tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(0 - {})", crate::report::fmt_f64(-v))
                } else {
                    write!(f, "{}", crate::report::fmt_f64(*v))
                }
            }
            Expr::Time => write!(f, "t"),
            Expr::Var(VarKind::X, i) => write!(f, "x{i}"),
            Expr::Var(VarKind::Xd, i) => write!(f, "xd{i}"),
            Expr::Var(VarKind::Xdd, i) => write!(f, "xdd{i}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Apply(Func::Sin, a) => write!(f, "sin({a})"),
            Expr::Apply(Func::Cos, a) => write!(f, "cos({a})"),
            Expr::Apply(Func::Exp, a) => write!(f, "exp({a})"),
            Expr::Apply(Func::Sqrt, a) => write!(f, "sqrt({a})"),
        }
    }
}
