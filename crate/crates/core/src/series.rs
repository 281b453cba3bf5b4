//! Truncated multivariate power series with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{Node, Rational, SmoothExpr};

/// Exponent tuple, ordered graded-lexicographically: lower total degree first,
/// then larger exponent of `x1`, then of `x2`, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(arity: usize) -> Monomial {
        Monomial(vec![0; arity])
    }

    pub fn var(arity: usize, i: usize) -> Monomial {
        let mut e = vec![0; arity];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn times(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Every monomial in `arity` variables of total degree `<= max_degree`, in graded-lex order.
    pub fn enumerate(arity: usize, max_degree: u32) -> Vec<Monomial> {
        fn fill(rest: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if rest == 1 {
                prefix.push(left);
                out.push(Monomial(prefix.clone()));
                prefix.pop();
                return;
            }
            for e in (0..=left).rev() {
                prefix.push(e);
                fill(rest - 1, left - e, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        for d in 0..=max_degree {
            fill(arity, d, &mut Vec::with_capacity(arity), &mut out);
        }
        out
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncSeries {
    arity: usize,
    degree: u32,
    coeffs: BTreeMap<Monomial, Rational>,
}

impl TruncSeries {
    pub fn zero(arity: usize, degree: u32) -> TruncSeries {
        TruncSeries {
            arity,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, degree: u32, c: Rational) -> TruncSeries {
        TruncSeries::monomial(arity, degree, Monomial::one(arity), c)
    }

    pub fn var(arity: usize, degree: u32, i: usize) -> TruncSeries {
        TruncSeries::monomial(arity, degree, Monomial::var(arity, i), Rational::one())
    }

    pub fn monomial(arity: usize, degree: u32, m: Monomial, c: Rational) -> TruncSeries {
        let mut s = TruncSeries::zero(arity, degree);
        s.add_term(m, c);
        s
    }

    /// Builds a series from `(exponents, coefficient)` pairs; out-of-degree terms are dropped.
    pub fn from_terms(
        arity: usize,
        degree: u32,
        terms: impl IntoIterator<Item = (Vec<u32>, Rational)>,
    ) -> Result<TruncSeries> {
        let mut s = TruncSeries::zero(arity, degree);
        for (e, c) in terms {
            if e.len() != arity {
                return Err(Error::ShapeMismatch(format!(
                    "exponent tuple of length {} in a series of arity {}",
                    e.len(),
                    arity
                )));
            }
            s.add_term(Monomial(e), c);
        }
        Ok(s)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> Rational {
        self.coeffs
            .get(&Monomial(e.to_vec()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.arity])
    }

    /// Lowest total degree carrying a nonzero coefficient.
    pub fn order(&self) -> Option<u32> {
        self.coeffs.keys().next().map(Monomial::degree)
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn top_degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().map(Monomial::degree)
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if m.degree() > self.degree || c.is_zero() {
            return;
        }
        match self.coeffs.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_shape(&self, other: &TruncSeries) -> Result<()> {
        if self.arity != other.arity || self.degree != other.degree {
            return Err(Error::ShapeMismatch(format!(
                "(vars={}, degree={}) vs (vars={}, degree={})",
                self.arity, self.degree, other.arity, other.degree
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> TruncSeries {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, k: &Rational) -> TruncSeries {
        let mut out = TruncSeries::zero(self.arity, self.degree);
        if k.is_zero() {
            return out;
        }
        for (m, c) in &self.coeffs {
            out.coeffs.insert(m.clone(), c * k);
        }
        out
    }

    /// Product truncated at the common degree.
    pub fn mul(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.check_shape(other)?;
        let mut out = TruncSeries::zero(self.arity, self.degree);
        for (ma, ca) in &self.coeffs {
            let da = ma.degree();
            for (mb, cb) in &other.coeffs {
                if da + mb.degree() > self.degree {
                    // Terms are in graded order, so the rest only gets higher.
                    break;
                }
                out.add_term(ma.times(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> TruncSeries {
        let mut acc = TruncSeries::constant(self.arity, self.degree, Rational::one());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base).expect("same shape");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same shape");
            }
        }
        acc
    }

    pub fn partial(&self, i: usize) -> Result<TruncSeries> {
        if i >= self.arity {
            return Err(Error::IndexOutOfRange {
                index: i,
                arity: self.arity,
            });
        }
        let mut out = TruncSeries::zero(self.arity, self.degree);
        for (m, c) in &self.coeffs {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut n = m.0.clone();
            n[i] -= 1;
            out.add_term(Monomial(n), c * Rational::from_integer(BigInt::from(e)));
        }
        Ok(out)
    }

    /// Same coefficients under a different truncation degree.
    pub fn retruncate(&self, degree: u32) -> TruncSeries {
        let mut out = TruncSeries::zero(self.arity, degree);
        for (m, c) in &self.coeffs {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    /// Exact coefficient extraction from the polynomial sub-language.
    pub fn from_expr(e: &SmoothExpr, degree: u32) -> Result<TruncSeries> {
        fn walk(n: &Node, m: usize, d: u32) -> Result<TruncSeries> {
            Ok(match n {
                Node::Num(r, _) => TruncSeries::constant(m, d, r.clone()),
                Node::Var(i) => TruncSeries::var(m, d, *i),
                Node::Add(a, b) => walk(a, m, d)?.add(&walk(b, m, d)?)?,
                Node::Sub(a, b) => walk(a, m, d)?.sub(&walk(b, m, d)?)?,
                Node::Mul(a, b) => walk(a, m, d)?.mul(&walk(b, m, d)?)?,
                Node::Div(a, b) => {
                    let denom = walk(b, m, d)?;
                    let only_constant = denom.coeffs.keys().all(|k| k.degree() == 0);
                    let c = denom.constant_term();
                    if !only_constant || c.is_zero() {
                        return Err(Error::NonPolynomial(n.to_string()));
                    }
                    walk(a, m, d)?.scale(&c.recip())
                }
                Node::Neg(a) => walk(a, m, d)?.neg(),
                Node::Pow(a, k) => {
                    let base = walk(a, m, d)?;
                    if *k >= 0 {
                        base.pow(*k as u32)
                    } else {
                        let only_constant = base.coeffs.keys().all(|k| k.degree() == 0);
                        let c = base.constant_term();
                        if !only_constant || c.is_zero() {
                            return Err(Error::NonPolynomial(n.to_string()));
                        }
                        TruncSeries::constant(m, d, c.recip()).pow(k.unsigned_abs())
                    }
                }
                Node::Call(..) => return Err(Error::NonPolynomial(n.to_string())),
            })
        }
        walk(e.node(), e.arity(), degree)
    }

    pub fn to_expr(&self) -> SmoothExpr {
        let mut acc = SmoothExpr::integer(self.arity, 0);
        for (m, c) in &self.coeffs {
            let mut term = SmoothExpr::constant(self.arity, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    let v = SmoothExpr::variable(self.arity, i).expect("in range");
                    term = &term * &v.powi(e as i32);
                }
            }
            acc = &acc + &term;
        }
        acc
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, c)| {
                let mono: f64 = m
                    .0
                    .iter()
                    .zip(p)
                    .map(|(&e, &x)| x.powi(e as i32))
                    .product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum()
    }

    /// Text form: a `vars=<m> degree=<N>` header, then one `<e1> ... <em> : <p>/<q>` line per term.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<TruncSeries> {
        let bad = |msg: &str| Error::ShapeMismatch(format!("series text: {}", msg));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let mut arity = None;
        let mut degree = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("vars=") {
                arity = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("degree=") {
                degree = v.parse::<u32>().ok();
            }
        }
        let (arity, degree) = match (arity, degree) {
            (Some(a), Some(d)) if a > 0 => (a, d),
            _ => return Err(bad("malformed header")),
        };
        let mut s = TruncSeries::zero(arity, degree);
        for line in lines {
            let (lhs, rhs) = line.split_once(':').ok_or_else(|| bad("missing `:`"))?;
            let exps = lhs
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("malformed exponent"))?;
            if exps.len() != arity {
                return Err(bad("wrong number of exponents"));
            }
            let c: Rational = rhs.trim().parse().map_err(|_| bad("malformed coefficient"))?;
            let m = Monomial(exps);
            if m.degree() > degree {
                return Err(bad("term above the truncation degree"));
            }
            s.add_term(m, c);
        }
        Ok(s)
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars={} degree={}", self.arity, self.degree)?;
        for (m, c) in &self.coeffs {
            let exps: Vec<String> = m.0.iter().map(u32::to_string).collect();
            writeln!(f, "{} : {}/{}", exps.join(" "), c.numer(), c.denom())?;
        }
        Ok(())
    }
}

/// Compact human-readable polynomial, e.g. `1/2*x1^2 - x2`.
pub fn pretty(s: &TruncSeries) -> String {
    if s.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, (m, c)) in s.terms().enumerate() {
        let negative = c.is_negative();
        let a = c.abs();
        if k == 0 {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        let mut factors = Vec::new();
        if !a.is_one() || m.degree() == 0 {
            factors.push(a.to_string());
        }
        for (i, &e) in m.0.iter().enumerate() {
            match e {
                0 => {}
                1 => factors.push(format!("x{}", i + 1)),
                _ => factors.push(format!("x{}^{}", i + 1, e)),
            }
        }
        out.push_str(&factors.join("*"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn series(text: &str, m: usize, n: u32) -> TruncSeries {
        TruncSeries::from_expr(&SmoothExpr::parse(text, m).unwrap(), n).unwrap()
    }

    #[test]
    fn graded_lex_order() {
        let ms = Monomial::enumerate(2, 2);
        let tuples: Vec<Vec<u32>> = ms.iter().map(|m| m.0.clone()).collect();
        assert_eq!(
            tuples,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        let mut sorted = ms.clone();
        sorted.sort();
        assert_eq!(sorted, ms);
    }

    #[test]
    fn coefficients_of_sum_of_squares() {
        let s = series("x^2 + y^2", 2, 5);
        assert_eq!(s.len(), 2);
        assert_eq!(s.coeff(&[2, 0]), r(1, 1));
        assert_eq!(s.coeff(&[0, 2]), r(1, 1));
    }

    #[test]
    fn truncation_drops_high_terms() {
        assert!(series("(x + y)^2", 2, 1).is_zero());
        let e6 = series("x^3 + y^4", 2, 4);
        assert_eq!(e6.len(), 2);
        assert_eq!(e6.coeff(&[3, 0]), r(1, 1));
        assert_eq!(e6.coeff(&[0, 4]), r(1, 1));
    }

    #[test]
    fn arithmetic_examples() {
        let x = TruncSeries::var(1, 2, 0);
        assert_eq!(x.mul(&x).unwrap(), series("x^2", 1, 2));
        assert_eq!(
            series("x^2*y", 2, 5).partial(0).unwrap(),
            series("2*x*y", 2, 5)
        );
        let a = series("x + y", 2, 2);
        let b = series("x - y", 2, 2);
        assert_eq!(a.mul(&b).unwrap(), series("x^2 - y^2", 2, 2));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = TruncSeries::var(2, 3, 0);
        let b = TruncSeries::var(2, 4, 0);
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(a.mul(&TruncSeries::var(1, 3, 0)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn non_polynomial_input_is_rejected() {
        let e = SmoothExpr::parse("exp(x)", 1).unwrap();
        assert!(matches!(
            TruncSeries::from_expr(&e, 4),
            Err(Error::NonPolynomial(_))
        ));
        let e = SmoothExpr::parse("1/x", 1).unwrap();
        assert!(TruncSeries::from_expr(&e, 4).is_err());
        let e = SmoothExpr::parse("x/4 + 2^-2", 1).unwrap();
        let s = TruncSeries::from_expr(&e, 4).unwrap();
        assert_eq!(s.coeff(&[1]), r(1, 4));
        assert_eq!(s.constant_term(), r(1, 4));
    }

    #[test]
    fn text_roundtrip() {
        let s = series("x^2*y/3 - 5*y^3 + 7/2*x", 2, 6);
        let t = s.to_text();
        assert!(t.starts_with("vars=2 degree=6\n"));
        assert!(t.contains("1 0 : 7/2"));
        assert_eq!(TruncSeries::from_text(&t).unwrap(), s);
        assert!(TruncSeries::from_text("vars=1 degree=2\n3 : 1/1").is_err());
    }

    #[test]
    fn to_expr_roundtrip() {
        let s = series("x^2*y/3 - 5*y^3 + 7/2*x", 2, 6);
        assert_eq!(TruncSeries::from_expr(&s.to_expr(), 6).unwrap(), s);
        assert_eq!(pretty(&s), "7/2*x1 + 1/3*x1^2*x2 - 5*x2^3");
    }
}
