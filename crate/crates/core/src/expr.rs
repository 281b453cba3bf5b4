//! Expression kernel for closed-form smooth functions `R^m -> R`.
//!
//! Expressions are immutable trees over the variables `x1..xm`, exact rational
//! literals, the four arithmetic operations, integer powers and the unary
//! primitives `exp`, `log`, `sin`, `cos` and `flatexp`. The last one is the flat
//! germ `u -> e^{-1/|u|}` (with value `0` at `u = 0`); it is a first-class node so
//! that evaluation and differentiation at the zero set are exact.
//!
//! Derivatives of `flatexp` produce the internal family
//! `flatexp_p_q(u) = e^{-1/|u|} * |u|^{-p} * sign(u)^q`, which also vanishes at
//! `u = 0` for every `p`, `q`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{DomainKind, Error, Result};

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    /// `e^{-1/|u|} |u|^{-order} sign(u)^{odd}`; `order = 0, odd = false` is `flatexp`.
    Flat { order: u32, odd: bool },
}

impl Func {
    pub const FLATEXP: Func = Func::Flat {
        order: 0,
        odd: false,
    };

    fn name(self) -> String {
        match self {
            Func::Exp => "exp".into(),
            Func::Log => "log".into(),
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Flat {
                order: 0,
                odd: false,
            } => "flatexp".into(),
            Func::Flat { order, odd } => format!("flatexp_{}_{}", order, odd as u8),
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "flatexp" => Some(Func::FLATEXP),
            _ => {
                let rest = name.strip_prefix("flatexp_")?;
                let (p, q) = rest.split_once('_')?;
                let order = p.parse().ok()?;
                let odd = match q {
                    "0" => false,
                    "1" => true,
                    _ => return None,
                };
                Some(Func::Flat { order, odd })
            }
        }
    }

    fn apply(self, u: f64) -> std::result::Result<f64, DomainKind> {
        match self {
            Func::Exp => Ok(u.exp()),
            Func::Log => {
                if u > 0.0 {
                    Ok(u.ln())
                } else {
                    Err(DomainKind::LogNonPositive)
                }
            }
            Func::Sin => Ok(u.sin()),
            Func::Cos => Ok(u.cos()),
            Func::Flat { order, odd } => Ok(flat(order, odd, u)),
        }
    }
}

/// `e^{-1/|u|} |u|^{-order} sign(u)^{odd}`, evaluated in log space so that the
/// exponential factor wins against the power near `u = 0`.
pub fn flat(order: u32, odd: bool, u: f64) -> f64 {
    if u == 0.0 || u.is_nan() {
        return if u.is_nan() { f64::NAN } else { 0.0 };
    }
    let a = u.abs();
    let log_value = -1.0 / a - f64::from(order) * a.ln();
    if log_value < -745.2 {
        return 0.0;
    }
    let v = log_value.exp();
    if odd && u < 0.0 {
        -v
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Exact literal with its cached double value.
    Num(Rational, f64),
    /// Zero-based variable index.
    Var(usize),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Neg(Arc<Node>),
    Pow(Arc<Node>, i32),
    Call(Func, Arc<Node>),
}

fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn num(r: Rational) -> Arc<Node> {
    let v = rat_to_f64(&r);
    Arc::new(Node::Num(r, v))
}

fn int(i: i64) -> Arc<Node> {
    num(Rational::from_integer(BigInt::from(i)))
}

impl Node {
    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Node::Num(r, _) => Some(r),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    fn has_vars(&self) -> bool {
        match self {
            Node::Num(..) => false,
            Node::Var(_) => true,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.has_vars() || b.has_vars()
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.has_vars(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(..) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_var(),
        }
    }
}

pub(crate) fn add(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => num(x + y),
        (Some(x), _) if x.is_zero() => b,
        (_, Some(y)) if y.is_zero() => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

pub(crate) fn sub(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => num(x - y),
        (Some(x), _) if x.is_zero() => neg(b),
        (_, Some(y)) if y.is_zero() => a,
        _ => Arc::new(Node::Sub(a, b)),
    }
}

pub(crate) fn mul(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => num(x * y),
        _ if a.is_zero() || b.is_zero() => int(0),
        _ if a.is_one() => b,
        _ if b.is_one() => a,
        // Constants gather on the left: c1 * (c2 * e) = (c1 c2) * e.
        (Some(x), None) => match &*b {
            Node::Mul(c, rest) if c.as_num().is_some() => {
                mul(num(x * c.as_num().expect("checked")), rest.clone())
            }
            _ => Arc::new(Node::Mul(a, b)),
        },
        (None, Some(_)) => mul(b, a),
        _ => Arc::new(Node::Mul(a, b)),
    }
}

pub(crate) fn div(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) if !y.is_zero() => num(x / y),
        (_, Some(y)) if !y.is_zero() => mul(num(y.recip()), a),
        _ if a.is_zero() && !b.is_zero() => int(0),
        _ => Arc::new(Node::Div(a, b)),
    }
}

pub(crate) fn neg(a: Arc<Node>) -> Arc<Node> {
    match &*a {
        Node::Num(x, _) => num(-x),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

pub(crate) fn powi(a: Arc<Node>, k: i32) -> Arc<Node> {
    if k == 0 {
        return int(1);
    }
    if k == 1 {
        return a;
    }
    if let Node::Pow(base, j) = &*a {
        if let Some(jk) = j.checked_mul(k) {
            return powi(base.clone(), jk);
        }
    }
    if let Some(x) = a.as_num() {
        if k > 0 {
            return num(num_traits::pow(x.clone(), k as usize));
        }
        if !x.is_zero() {
            return num(num_traits::pow(x.recip(), k.unsigned_abs() as usize));
        }
    }
    Arc::new(Node::Pow(a, k))
}

pub(crate) fn call(f: Func, a: Arc<Node>) -> Arc<Node> {
    if a.is_zero() {
        match f {
            Func::Exp | Func::Cos => return int(1),
            Func::Sin | Func::Flat { .. } => return int(0),
            Func::Log => {}
        }
    }
    if f == Func::Log && a.is_one() {
        return int(0);
    }
    Arc::new(Node::Call(f, a))
}

fn derive_node(node: &Arc<Node>, i: usize) -> Arc<Node> {
    match &**node {
        Node::Num(..) => int(0),
        Node::Var(j) => int(if *j == i { 1 } else { 0 }),
        Node::Add(a, b) => add(derive_node(a, i), derive_node(b, i)),
        Node::Sub(a, b) => sub(derive_node(a, i), derive_node(b, i)),
        Node::Mul(a, b) => add(
            mul(derive_node(a, i), b.clone()),
            mul(a.clone(), derive_node(b, i)),
        ),
        Node::Div(a, b) => {
            if !b.has_vars() {
                return div(derive_node(a, i), b.clone());
            }
            let numer = sub(
                mul(derive_node(a, i), b.clone()),
                mul(a.clone(), derive_node(b, i)),
            );
            div(numer, powi(b.clone(), 2))
        }
        Node::Neg(a) => neg(derive_node(a, i)),
        Node::Pow(a, k) => {
            let da = derive_node(a, i);
            if da.is_zero() {
                return int(0);
            }
            mul(mul(int(i64::from(*k)), powi(a.clone(), k - 1)), da)
        }
        Node::Call(f, u) => {
            let du = derive_node(u, i);
            if du.is_zero() {
                return int(0);
            }
            let outer = match *f {
                Func::Exp => call(Func::Exp, u.clone()),
                Func::Log => div(int(1), u.clone()),
                Func::Sin => call(Func::Cos, u.clone()),
                Func::Cos => neg(call(Func::Sin, u.clone())),
                Func::Flat { order, odd } => {
                    let first = call(
                        Func::Flat {
                            order: order + 2,
                            odd: !odd,
                        },
                        u.clone(),
                    );
                    if order == 0 {
                        first
                    } else {
                        let second = call(
                            Func::Flat {
                                order: order + 1,
                                odd: !odd,
                            },
                            u.clone(),
                        );
                        sub(first, mul(int(i64::from(order)), second))
                    }
                }
            };
            mul(outer, du)
        }
    }
}

fn substitute_node(node: &Arc<Node>, subs: &[Arc<Node>]) -> Arc<Node> {
    match &**node {
        Node::Num(..) => node.clone(),
        Node::Var(j) => subs[*j].clone(),
        Node::Add(a, b) => add(substitute_node(a, subs), substitute_node(b, subs)),
        Node::Sub(a, b) => sub(substitute_node(a, subs), substitute_node(b, subs)),
        Node::Mul(a, b) => mul(substitute_node(a, subs), substitute_node(b, subs)),
        Node::Div(a, b) => div(substitute_node(a, subs), substitute_node(b, subs)),
        Node::Neg(a) => neg(substitute_node(a, subs)),
        Node::Pow(a, k) => powi(substitute_node(a, subs), *k),
        Node::Call(f, a) => call(*f, substitute_node(a, subs)),
    }
}

// ---------------------------------------------------------------------------
// Printing

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn var_name(i: usize) -> String {
    format!("x{}", i + 1)
}

fn write_node(node: &Node, min_prec: u8, out: &mut String) {
    let (prec, text) = match node {
        Node::Num(r, _) => {
            if r.is_integer() && !r.is_negative() {
                (PREC_ATOM, r.numer().to_string())
            } else if r.is_integer() {
                (PREC_UNARY, format!("-{}", -r.numer()))
            } else if r.is_negative() {
                (PREC_UNARY, format!("-{}/{}", -r.numer(), r.denom()))
            } else {
                (PREC_PRODUCT, format!("{}/{}", r.numer(), r.denom()))
            }
        }
        Node::Var(i) => (PREC_ATOM, var_name(*i)),
        Node::Add(a, b) | Node::Sub(a, b) => {
            let mut s = String::new();
            write_node(a, PREC_SUM, &mut s);
            s.push_str(if matches!(node, Node::Add(..)) {
                " + "
            } else {
                " - "
            });
            write_node(b, PREC_PRODUCT, &mut s);
            (PREC_SUM, s)
        }
        Node::Mul(a, b) | Node::Div(a, b) => {
            let mut s = String::new();
            write_node(a, PREC_PRODUCT, &mut s);
            s.push_str(if matches!(node, Node::Mul(..)) { "*" } else { "/" });
            write_node(b, PREC_UNARY, &mut s);
            (PREC_PRODUCT, s)
        }
        Node::Neg(a) => {
            let mut s = String::from("-");
            write_node(a, PREC_POWER, &mut s);
            (PREC_UNARY, s)
        }
        Node::Pow(a, k) => {
            let mut s = String::new();
            write_node(a, PREC_ATOM, &mut s);
            s.push('^');
            s.push_str(&k.to_string());
            (PREC_POWER, s)
        }
        Node::Call(f, a) => {
            let mut s = f.name();
            s.push('(');
            write_node(a, 0, &mut s);
            s.push(')');
            (PREC_ATOM, s)
        }
    };
    if prec < min_prec {
        out.push('(');
        out.push_str(&text);
        out.push(')');
    } else {
        out.push_str(&text);
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_node(self, 0, &mut s);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    arity: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn syntax<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(self.pos, format!("expected `{}`", c as char))
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = mul(lhs, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let rhs = self.unary()?;
                    if rhs.is_zero() {
                        return self.syntax(at, "division by the literal zero");
                    }
                    lhs = div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Arc<Node>> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.unary()?));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Arc<Node>> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let negative = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.syntax(start, "expected an integer exponent");
            }
            let k: i32 = match self.text[start..self.pos].parse() {
                Ok(k) => k,
                Err(_) => return self.syntax(start, "exponent too large"),
            };
            return Ok(powi(base, if negative { -k } else { k }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Arc<Node>> {
        let start = match self.peek() {
            None => return self.syntax(self.pos, "unexpected end of input"),
            Some(_) => self.pos,
        };
        let c = self.bytes[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = &self.text[start..self.pos];
            if let Some(f) = Func::from_name(name) {
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(call(f, arg));
            }
            let index = match name {
                "x" => Some(0),
                "y" => Some(1),
                "z" => Some(2),
                _ => name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|d| (1..=9).contains(d))
                    .map(|d| d - 1),
            };
            return match index {
                Some(i) if i < self.arity => Ok(Arc::new(Node::Var(i))),
                Some(i) => Err(Error::ArityMismatch(format!(
                    "variable `{}` (index {}) used in an expression of arity {}",
                    name,
                    i + 1,
                    self.arity
                ))),
                None => Err(Error::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start,
                }),
            };
        }
        self.syntax(start, format!("unexpected character `{}`", c as char))
    }

    fn number(&mut self) -> Result<Arc<Node>> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len = 0usize;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            digits.push(self.bytes[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                digits.push(self.bytes[self.pos] as char);
                frac_len += 1;
                self.pos += 1;
            }
        }
        if digits.is_empty() {
            return self.syntax(start, "malformed number");
        }
        let mut exponent: i64 = 0;
        if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
        {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
            {
                if self.bytes[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let es = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
                return self.syntax(save, "malformed exponent");
            }
            exponent = sign * self.text[es..self.pos].parse::<i64>().unwrap_or(0);
        }
        let mantissa: BigInt = digits.parse().expect("ascii digits");
        let shift = exponent - frac_len as i64;
        if shift.unsigned_abs() > 4000 {
            return self.syntax(start, "literal exponent out of range");
        }
        let ten = BigInt::from(10);
        let value = if shift >= 0 {
            Rational::from_integer(mantissa * num_traits::pow(ten, shift as usize))
        } else {
            Rational::new(mantissa, num_traits::pow(ten, shift.unsigned_abs() as usize))
        };
        Ok(num(value))
    }
}

// ---------------------------------------------------------------------------
// Compiled evaluation

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Powi(i32),
    Call(Func),
}

#[derive(Debug, Clone)]
struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    fn compile(root: &Node) -> Program {
        fn walk(n: &Node, ops: &mut Vec<Op>, depth: usize, max: &mut usize) {
            *max = (*max).max(depth + 1);
            match n {
                Node::Num(_, v) => ops.push(Op::Const(*v)),
                Node::Var(i) => ops.push(Op::Var(*i)),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, ops, depth, max);
                    walk(b, ops, depth + 1, max);
                    ops.push(match n {
                        Node::Add(..) => Op::Add,
                        Node::Sub(..) => Op::Sub,
                        Node::Mul(..) => Op::Mul,
                        _ => Op::Div,
                    });
                }
                Node::Neg(a) => {
                    walk(a, ops, depth, max);
                    ops.push(Op::Neg);
                }
                Node::Pow(a, k) => {
                    walk(a, ops, depth, max);
                    ops.push(Op::Powi(*k));
                }
                Node::Call(f, a) => {
                    walk(a, ops, depth, max);
                    ops.push(Op::Call(*f));
                }
            }
        }
        let mut ops = Vec::new();
        let mut depth = 0;
        walk(root, &mut ops, 0, &mut depth);
        Program { ops, depth }
    }

    #[inline]
    fn run(&self, p: &[f64], stack: &mut [f64]) -> std::result::Result<f64, DomainKind> {
        let mut top = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[top] = v;
                    top += 1;
                }
                Op::Var(i) => {
                    stack[top] = p[i];
                    top += 1;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    top -= 1;
                    let b = stack[top];
                    let a = stack[top - 1];
                    stack[top - 1] = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => {
                            if b == 0.0 {
                                return Err(DomainKind::DivisionByZero);
                            }
                            a / b
                        }
                    };
                }
                Op::Neg => stack[top - 1] = -stack[top - 1],
                Op::Powi(k) => {
                    let a = stack[top - 1];
                    if k < 0 && a == 0.0 {
                        return Err(DomainKind::DivisionByZero);
                    }
                    stack[top - 1] = a.powi(k);
                }
                Op::Call(f) => stack[top - 1] = f.apply(stack[top - 1])?,
            }
        }
        let v = stack[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainKind::NonFinite)
        }
    }

    fn eval(&self, p: &[f64]) -> std::result::Result<f64, DomainKind> {
        if self.depth <= 32 {
            let mut stack = [0.0f64; 32];
            self.run(p, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            self.run(p, &mut stack)
        }
    }
}

fn locate_failure(node: &Node, p: &[f64]) -> std::result::Result<f64, (DomainKind, String)> {
    let here = |k: DomainKind| Err((k, node.to_string()));
    match node {
        Node::Num(_, v) => Ok(*v),
        Node::Var(i) => Ok(p[*i]),
        Node::Add(a, b) => Ok(locate_failure(a, p)? + locate_failure(b, p)?),
        Node::Sub(a, b) => Ok(locate_failure(a, p)? - locate_failure(b, p)?),
        Node::Mul(a, b) => Ok(locate_failure(a, p)? * locate_failure(b, p)?),
        Node::Div(a, b) => {
            let x = locate_failure(a, p)?;
            let y = locate_failure(b, p)?;
            if y == 0.0 {
                return here(DomainKind::DivisionByZero);
            }
            Ok(x / y)
        }
        Node::Neg(a) => Ok(-locate_failure(a, p)?),
        Node::Pow(a, k) => {
            let x = locate_failure(a, p)?;
            if *k < 0 && x == 0.0 {
                return here(DomainKind::DivisionByZero);
            }
            Ok(x.powi(*k))
        }
        Node::Call(f, a) => {
            let x = locate_failure(a, p)?;
            match f.apply(x) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => here(DomainKind::NonFinite),
                Err(k) => here(k),
            }
        }
    }
}

fn exact_node(node: &Node, p: &[Rational]) -> Result<Rational> {
    match node {
        Node::Num(r, _) => Ok(r.clone()),
        Node::Var(i) => Ok(p[*i].clone()),
        Node::Add(a, b) => Ok(exact_node(a, p)? + exact_node(b, p)?),
        Node::Sub(a, b) => Ok(exact_node(a, p)? - exact_node(b, p)?),
        Node::Mul(a, b) => Ok(exact_node(a, p)? * exact_node(b, p)?),
        Node::Div(a, b) => {
            let d = exact_node(b, p)?;
            if d.is_zero() {
                return Err(Error::Domain {
                    expr: node.to_string(),
                    kind: DomainKind::DivisionByZero,
                });
            }
            Ok(exact_node(a, p)? / d)
        }
        Node::Neg(a) => Ok(-exact_node(a, p)?),
        Node::Pow(a, k) => {
            let x = exact_node(a, p)?;
            if *k >= 0 {
                Ok(num_traits::pow(x, *k as usize))
            } else if x.is_zero() {
                Err(Error::Domain {
                    expr: node.to_string(),
                    kind: DomainKind::DivisionByZero,
                })
            } else {
                Ok(num_traits::pow(x.recip(), k.unsigned_abs() as usize))
            }
        }
        Node::Call(..) => Err(Error::NonPolynomial(node.to_string())),
    }
}

fn poly_degree(node: &Node) -> Option<u32> {
    match node {
        Node::Num(..) => Some(0),
        Node::Var(_) => Some(1),
        Node::Add(a, b) | Node::Sub(a, b) => Some(poly_degree(a)?.max(poly_degree(b)?)),
        Node::Mul(a, b) => Some(poly_degree(a)? + poly_degree(b)?),
        Node::Div(a, b) => {
            if b.has_vars() {
                None
            } else {
                poly_degree(a)
            }
        }
        Node::Neg(a) => poly_degree(a),
        Node::Pow(a, k) => {
            let d = poly_degree(a)?;
            if *k >= 0 {
                Some(d * (*k as u32))
            } else if d == 0 {
                Some(0)
            } else {
                None
            }
        }
        Node::Call(..) => None,
    }
}

// ---------------------------------------------------------------------------
// Public expression type

/// A closed-form smooth function of `arity` variables.
#[derive(Clone)]
pub struct SmoothExpr {
    arity: usize,
    root: Arc<Node>,
    program: Arc<Program>,
}

impl fmt::Debug for SmoothExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothExpr[{}]({})", self.arity, self.root)
    }
}

impl fmt::Display for SmoothExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl PartialEq for SmoothExpr {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.root == other.root
    }
}

impl SmoothExpr {
    pub(crate) fn from_node(arity: usize, root: Arc<Node>) -> SmoothExpr {
        let program = Arc::new(Program::compile(&root));
        SmoothExpr {
            arity,
            root,
            program,
        }
    }

    /// Parses `text` as an expression in `arity` variables.
    pub fn parse(text: &str, arity: usize) -> Result<SmoothExpr> {
        if arity == 0 {
            return Err(Error::ArityMismatch("arity must be positive".into()));
        }
        let mut p = Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            arity,
        };
        let root = p.expr()?;
        if let Some(c) = p.peek() {
            return Err(Error::Syntax {
                offset: p.pos,
                message: format!("unexpected `{}`", c as char),
            });
        }
        Ok(SmoothExpr::from_node(arity, root))
    }

    pub fn constant(arity: usize, value: Rational) -> SmoothExpr {
        SmoothExpr::from_node(arity, num(value))
    }

    /// Exact conversion of a finite double to a constant expression.
    pub fn from_f64(arity: usize, value: f64) -> SmoothExpr {
        let r = Rational::from_float(value).unwrap_or_else(Rational::zero);
        SmoothExpr::constant(arity, r)
    }

    pub fn integer(arity: usize, value: i64) -> SmoothExpr {
        SmoothExpr::from_node(arity, int(value))
    }

    /// The coordinate function `x_{index+1}` (zero-based index).
    pub fn variable(arity: usize, index: usize) -> Result<SmoothExpr> {
        if index >= arity {
            return Err(Error::IndexOutOfRange { index, arity });
        }
        Ok(SmoothExpr::from_node(arity, Arc::new(Node::Var(index))))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn node(&self) -> &Arc<Node> {
        &self.root
    }

    pub fn is_zero(&self) -> bool {
        self.root.is_zero()
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        self.root.as_num()
    }

    /// Exact partial derivative in the zero-based variable `index`.
    pub fn derive(&self, index: usize) -> Result<SmoothExpr> {
        if index >= self.arity {
            return Err(Error::IndexOutOfRange {
                index,
                arity: self.arity,
            });
        }
        Ok(SmoothExpr::from_node(self.arity, derive_node(&self.root, index)))
    }

    pub fn gradient(&self) -> Vec<SmoothExpr> {
        (0..self.arity)
            .map(|i| self.derive(i).expect("index in range"))
            .collect()
    }

    /// Double-precision evaluation. Domain failures name the offending sub-expression.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.arity {
            return Err(Error::ArityMismatch(format!(
                "point of length {} for an expression of arity {}",
                p.len(),
                self.arity
            )));
        }
        match self.program.eval(p) {
            Ok(v) => Ok(v),
            Err(kind) => Err(match locate_failure(&self.root, p) {
                Err((kind, expr)) => Error::Domain { expr, kind },
                Ok(_) => Error::Domain {
                    expr: self.root.to_string(),
                    kind,
                },
            }),
        }
    }

    /// Evaluation without the arity check or error localisation; `None` on a domain failure.
    #[inline]
    pub fn eval_fast(&self, p: &[f64]) -> Option<f64> {
        self.program.eval(p).ok()
    }

    pub fn eval1(&self, s: f64) -> Result<f64> {
        self.eval(&[s])
    }

    /// Exact evaluation, available for the polynomial (rational function) sub-language.
    pub fn eval_exact(&self, p: &[Rational]) -> Result<Rational> {
        if p.len() != self.arity {
            return Err(Error::ArityMismatch(format!(
                "point of length {} for an expression of arity {}",
                p.len(),
                self.arity
            )));
        }
        exact_node(&self.root, p)
    }

    pub fn eval_grid(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.eval(p)).collect()
    }

    /// Total degree when the expression is a polynomial with rational coefficients.
    pub fn polynomial_degree(&self) -> Option<u32> {
        poly_degree(&self.root)
    }

    pub fn is_polynomial(&self) -> bool {
        self.polynomial_degree().is_some()
    }

    /// Composition `self(subs_1(y), ..., subs_m(y))`; the result has the arity of `subs`.
    pub fn substitute(&self, subs: &[SmoothExpr]) -> Result<SmoothExpr> {
        if subs.len() != self.arity {
            return Err(Error::ArityMismatch(format!(
                "{} substitutions for an expression of arity {}",
                subs.len(),
                self.arity
            )));
        }
        let arity = subs[0].arity;
        if subs.iter().any(|s| s.arity != arity) {
            return Err(Error::ArityMismatch(
                "substituted expressions differ in arity".into(),
            ));
        }
        let nodes: Vec<_> = subs.iter().map(|s| s.root.clone()).collect();
        Ok(SmoothExpr::from_node(arity, substitute_node(&self.root, &nodes)))
    }

    /// Re-embeds the expression into `arity` variables, renaming `x_i` to `x_{offset+i}`.
    pub fn embed(&self, arity: usize, offset: usize) -> Result<SmoothExpr> {
        if offset + self.arity > arity {
            return Err(Error::ArityMismatch(format!(
                "cannot embed arity {} at offset {} into arity {}",
                self.arity, offset, arity
            )));
        }
        let subs: Vec<_> = (0..self.arity)
            .map(|i| SmoothExpr::variable(arity, offset + i).expect("in range"))
            .collect();
        self.substitute(&subs)
    }

    pub fn apply(&self, f: Func) -> SmoothExpr {
        SmoothExpr::from_node(self.arity, call(f, self.root.clone()))
    }

    pub fn powi(&self, k: i32) -> SmoothExpr {
        SmoothExpr::from_node(self.arity, powi(self.root.clone(), k))
    }

    pub fn scale(&self, factor: &Rational) -> SmoothExpr {
        SmoothExpr::from_node(self.arity, mul(num(factor.clone()), self.root.clone()))
    }

    /// Highest variable index actually used, plus one.
    pub fn used_arity(&self) -> usize {
        self.root.max_var().map_or(0, |i| i + 1)
    }

    fn binary(
        &self,
        other: &SmoothExpr,
        op: fn(Arc<Node>, Arc<Node>) -> Arc<Node>,
    ) -> SmoothExpr {
        assert_eq!(
            self.arity, other.arity,
            "arithmetic on expressions of different arity"
        );
        SmoothExpr::from_node(self.arity, op(self.root.clone(), other.root.clone()))
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $fn:ident) => {
        impl std::ops::$trait<&SmoothExpr> for &SmoothExpr {
            type Output = SmoothExpr;
            fn $method(self, rhs: &SmoothExpr) -> SmoothExpr {
                self.binary(rhs, $fn)
            }
        }
        impl std::ops::$trait<SmoothExpr> for SmoothExpr {
            type Output = SmoothExpr;
            fn $method(self, rhs: SmoothExpr) -> SmoothExpr {
                self.binary(&rhs, $fn)
            }
        }
    };
}

expr_binop!(Add, add, add);
expr_binop!(Sub, sub, sub);
expr_binop!(Mul, mul, mul);
expr_binop!(Div, div, div);

impl std::ops::Neg for &SmoothExpr {
    type Output = SmoothExpr;
    fn neg(self) -> SmoothExpr {
        SmoothExpr::from_node(self.arity, neg(self.root.clone()))
    }
}

impl std::ops::Neg for SmoothExpr {
    type Output = SmoothExpr;
    fn neg(self) -> SmoothExpr {
        -&self
    }
}

/// A vector field `F = (F_1, ..., F_m)` on `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr {
    components: Vec<SmoothExpr>,
}

impl VectorFieldExpr {
    pub fn new(components: Vec<SmoothExpr>) -> Result<VectorFieldExpr> {
        let m = components.len();
        if m == 0 {
            return Err(Error::ArityMismatch("empty vector field".into()));
        }
        if let Some(bad) = components.iter().find(|c| c.arity() != m) {
            return Err(Error::ArityMismatch(format!(
                "field with {} components has a component of arity {}",
                m,
                bad.arity()
            )));
        }
        Ok(VectorFieldExpr { components })
    }

    /// Parses `F1;F2;...` with one component per variable.
    pub fn parse(text: &str) -> Result<VectorFieldExpr> {
        let parts: Vec<&str> = text.split(';').collect();
        let m = parts.len();
        let components = parts
            .iter()
            .map(|p| SmoothExpr::parse(p, m))
            .collect::<Result<Vec<_>>>()?;
        VectorFieldExpr::new(components)
    }

    pub fn zero(arity: usize) -> VectorFieldExpr {
        VectorFieldExpr {
            components: vec![SmoothExpr::integer(arity, 0); arity],
        }
    }

    /// `scale * (x_1, ..., x_m)`.
    pub fn euler(arity: usize, scale: &Rational) -> VectorFieldExpr {
        VectorFieldExpr {
            components: (0..arity)
                .map(|i| SmoothExpr::variable(arity, i).expect("in range").scale(scale))
                .collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SmoothExpr] {
        &self.components
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    #[inline]
    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) -> Option<()> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval_fast(p)?;
        }
        Some(())
    }

    pub fn scale(&self, factor: &Rational) -> VectorFieldExpr {
        VectorFieldExpr {
            components: self.components.iter().map(|c| c.scale(factor)).collect(),
        }
    }

    /// Componentwise product with a scalar function.
    pub fn times(&self, g: &SmoothExpr) -> VectorFieldExpr {
        VectorFieldExpr {
            components: self.components.iter().map(|c| g * c).collect(),
        }
    }

    pub fn linear_combination(
        a: &Rational,
        f: &VectorFieldExpr,
        b: &Rational,
        g: &VectorFieldExpr,
    ) -> Result<VectorFieldExpr> {
        if f.arity() != g.arity() {
            return Err(Error::ArityMismatch("fields of different arity".into()));
        }
        VectorFieldExpr::new(
            f.components
                .iter()
                .zip(&g.components)
                .map(|(x, y)| &x.scale(a) + &y.scale(b))
                .collect(),
        )
    }
}

impl fmt::Display for VectorFieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// The derivative of `f` along `field`: `sum_i F_i * df/dx_i`.
pub fn directional_derivative(f: &SmoothExpr, field: &VectorFieldExpr) -> Result<SmoothExpr> {
    if f.arity() != field.arity() {
        return Err(Error::ArityMismatch(format!(
            "function of arity {} and field of arity {}",
            f.arity(),
            field.arity()
        )));
    }
    let mut acc = SmoothExpr::integer(f.arity(), 0);
    for (i, fi) in field.components().iter().enumerate() {
        let term = fi * &f.derive(i)?;
        acc = &acc + &term;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(text: &str, m: usize) -> SmoothExpr {
        SmoothExpr::parse(text, m).unwrap()
    }

    #[test]
    fn parses_sum_of_squares() {
        let f = e("x1^2 + x2^2", 2);
        assert_eq!(f.eval(&[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(e("x^2 + y^2", 2), f);
    }

    #[test]
    fn parses_flat_germ() {
        let f = e("flatexp(x1)", 1);
        assert_eq!(f.eval1(0.0).unwrap(), 0.0);
        assert!((f.eval1(0.5).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!((f.eval1(-0.5).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_reports_offset() {
        match SmoothExpr::parse("x1 +", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            SmoothExpr::parse("w + 1", 1),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            SmoothExpr::parse("x2", 1),
            Err(Error::ArityMismatch(_))
        ));
        assert!(matches!(SmoothExpr::parse("x", 0), Err(Error::ArityMismatch(_))));
    }

    #[test]
    fn decimal_literals_are_exact() {
        let f = e("0.25*x", 1);
        let r = f.eval_exact(&[Rational::from_integer(4.into())]).unwrap();
        assert!(r.is_one());
        let g = e("1.5e-1", 1);
        assert_eq!(
            g.as_constant().unwrap(),
            &Rational::new(3.into(), 20.into())
        );
    }

    #[test]
    fn polynomial_derivatives() {
        let d = e("x^2 + y^2", 2).derive(0).unwrap();
        assert_eq!(d.eval(&[3.0, 7.0]).unwrap(), 6.0);
        let d = e("x^3 - 3*x", 1).derive(0).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
            assert!((d.eval1(x).unwrap() - (3.0 * x * x - 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_derivatives_vanish_at_zero() {
        let mut f = e("flatexp(x)", 1);
        for _ in 0..5 {
            f = f.derive(0).unwrap();
            assert_eq!(f.eval1(0.0).unwrap(), 0.0);
            assert!(f.eval1(1e-3).unwrap().is_finite());
            assert!(f.eval1(-1e-200).unwrap() == 0.0);
        }
    }

    #[test]
    fn eval_domain_error_names_subexpression() {
        match e("1 + 1/x", 1).eval1(0.0) {
            Err(Error::Domain { expr, kind }) => {
                assert_eq!(kind, DomainKind::DivisionByZero);
                assert_eq!(expr, "1/x1");
            }
            other => panic!("unexpected {:?}", other),
        }
        assert!(matches!(
            e("log(x)", 1).eval1(-1.0),
            Err(Error::Domain {
                kind: DomainKind::LogNonPositive,
                ..
            })
        ));
    }

    #[test]
    fn derive_index_out_of_range() {
        assert!(matches!(
            e("x", 1).derive(1),
            Err(Error::IndexOutOfRange { index: 1, arity: 1 })
        ));
    }

    #[test]
    fn directional_derivative_euler_identity() {
        let f = e("x^2 + y^2", 2);
        let field = VectorFieldExpr::parse("x/2; y/2").unwrap();
        let dd = directional_derivative(&f, &field).unwrap();
        for &(x, y) in &[(0.3, -0.7), (1.0, 2.0), (-1.5, 0.25)] {
            let lhs = dd.eval(&[x, y]).unwrap();
            assert!((lhs - f.eval(&[x, y]).unwrap()).abs() < 1e-14);
        }
        let c = e("7", 2);
        assert!(directional_derivative(&c, &field).unwrap().is_zero());
    }

    #[test]
    fn directional_derivative_cubic_matches_hand_expansion() {
        // dd(x^2 y + y^3, (x/3, y/3)) = (x/3)(2xy) + (y/3)(x^2 + 3y^2) = x^2 y + y^3
        let f = e("x^2*y + y^3", 2);
        let field = VectorFieldExpr::parse("x/3; y/3").unwrap();
        let dd = directional_derivative(&f, &field).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let p = [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64];
                let hand = p[0] * p[0] * p[1] + p[1].powi(3);
                assert!((dd.eval(&p).unwrap() - hand).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn print_parse_roundtrip_is_pointwise_identity() {
        let samples = [
            "x1^2 + x2^2",
            "-(x - y)^3/7 + 0.5*x*y",
            "exp(sin(x)) - log(2 + cos(y))",
            "flatexp(x*y) - x^-2*0",
            "x - (y - (x - y))",
            "x/(y/(x + 3))",
        ];
        for s in samples {
            let f = e(s, 2);
            let g = e(&f.to_string(), 2);
            for i in 0..5 {
                for j in 0..5 {
                    let p = [0.3 + 0.37 * i as f64, -0.9 + 0.41 * j as f64];
                    let (a, b) = (f.eval(&p), g.eval(&p));
                    match (a, b) {
                        (Ok(a), Ok(b)) => assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}", s),
                        (Err(_), Err(_)) => {}
                        other => panic!("{}: {:?}", s, other),
                    }
                }
            }
        }
    }

    #[test]
    fn derived_flat_expressions_reparse() {
        let f = e("flatexp(x^2 - y)", 2).derive(0).unwrap().derive(1).unwrap();
        let g = e(&f.to_string(), 2);
        let p = [0.4, -0.3];
        assert!((f.eval(&p).unwrap() - g.eval(&p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn substitute_composes() {
        let f = e("x^2 + y", 2);
        let subs = [e("x + 1", 1), e("3*x", 1)];
        let g = f.substitute(&subs).unwrap();
        assert_eq!(g.arity(), 1);
        assert_eq!(g.eval1(2.0).unwrap(), 15.0);
        let h = e("x*y", 2).embed(4, 2).unwrap();
        assert_eq!(h.eval(&[9.0, 9.0, 2.0, 5.0]).unwrap(), 10.0);
    }

    #[test]
    fn polynomial_degree_detection() {
        assert_eq!(e("x^2*y + y^3/4", 2).polynomial_degree(), Some(3));
        assert_eq!(e("x/y", 2).polynomial_degree(), None);
        assert_eq!(e("exp(x)", 1).polynomial_degree(), None);
        assert_eq!(e("x*exp(0)", 1).polynomial_degree(), Some(1));
    }
}
