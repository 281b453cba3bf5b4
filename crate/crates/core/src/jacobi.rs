//! Membership of a germ in its own Jacobi ideal, with explicit witness fields.
//!
//! For a truncated series `f` the solver looks for series `F_1..F_m` with
//! `f = sum_i F_i * df/dx_i` modulo terms of degree `> N`. The unknowns are the
//! coefficients of `F_i`; the columns of the linear system are the products
//! `x^e * df/dx_i`, and the system is put in echelon form exactly over the
//! rationals with pivots on the lowest (graded-lex) monomial of each column.
//! Columns that become dependent are free and receive coefficient zero.

use std::collections::HashMap;

use num_traits::{One, ToPrimitive, Zero};

use crate::critical::{sign_change_roots, zero_factors};
use crate::error::{Error, Result};
use crate::expr::{directional_derivative, Func, Rational, SmoothExpr, VectorFieldExpr};
use crate::numeric::{integrate, QuadOptions};
use crate::series::{Monomial, TruncSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipStatus {
    Member,
    /// No witness exists through degree `N`; a bounded verdict, not a proof.
    NonMemberUpToN,
    /// A certificate of non-membership for every smooth field (see [`accumulation_obstruction`]).
    Obstructed,
}

impl MembershipStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MembershipStatus::Member => "member",
            MembershipStatus::NonMemberUpToN => "non_member_up_to_N",
            MembershipStatus::Obstructed => "obstructed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MembershipResult {
    pub status: MembershipStatus,
    pub witness: Option<Vec<TruncSeries>>,
    /// `target - sum_i F_i * df/dx_i` truncated at `N`; zero when a member.
    pub residual: TruncSeries,
    pub certificate: Option<ObstructionReport>,
}

impl MembershipResult {
    /// Wraps an obstruction report found for a one-variable germ.
    pub fn obstructed(report: ObstructionReport, degree: u32) -> MembershipResult {
        MembershipResult {
            status: MembershipStatus::Obstructed,
            witness: None,
            residual: TruncSeries::zero(1, degree),
            certificate: Some(report),
        }
    }
}

type SparseVec = Vec<(u32, Rational)>;

/// `a - c * b` on index-sorted sparse vectors.
fn axpy(a: &SparseVec, c: &Rational, b: &SparseVec) -> SparseVec {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, -(c * &b[j].1)));
            j += 1;
        } else {
            let v = &a[i].1 - c * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

struct Echelon {
    /// Basis vector (leading coefficient 1) and its combination of generators, keyed by pivot.
    rows: HashMap<u32, (SparseVec, SparseVec)>,
}

impl Echelon {
    /// Lead-reduces `v`; `combo` tracks `v` as a combination of generators.
    fn reduce(&self, mut v: SparseVec, mut combo: SparseVec) -> (SparseVec, SparseVec) {
        while let Some((lead, c)) = v.first().cloned() {
            match self.rows.get(&lead) {
                Some((row, row_combo)) => {
                    v = axpy(&v, &c, row);
                    combo = axpy(&combo, &c, row_combo);
                }
                None => break,
            }
        }
        (v, combo)
    }

    fn insert(&mut self, v: SparseVec, combo: SparseVec) {
        let (lead, c) = v[0].clone();
        let inv = c.recip();
        let scale = |w: SparseVec| -> SparseVec { w.into_iter().map(|(k, x)| (k, x * &inv)).collect() };
        self.rows.insert(lead, (scale(v), scale(combo)));
    }
}

/// Decides whether `target` lies in the span of `x^e * df/dx_i` through degree `N`.
fn solve_against_gradient(f: &TruncSeries, target: &TruncSeries) -> Result<MembershipResult> {
    let m = f.arity();
    let n = f.degree();
    let monomials = Monomial::enumerate(m, n);
    let index: HashMap<&Monomial, u32> = monomials
        .iter()
        .enumerate()
        .map(|(k, mono)| (mono, k as u32))
        .collect();
    let to_sparse = |s: &TruncSeries, shift: &Monomial| -> SparseVec {
        let mut v: SparseVec = s
            .terms()
            .filter_map(|(mono, c)| {
                let prod = mono.times(shift);
                (prod.degree() <= n).then(|| (index[&prod], c.clone()))
            })
            .collect();
        v.sort_by_key(|(k, _)| *k);
        v
    };
    let partials = (0..m).map(|i| f.partial(i)).collect::<Result<Vec<_>>>()?;

    let mut generators: Vec<(usize, usize)> = Vec::new();
    let mut echelon = Echelon {
        rows: HashMap::new(),
    };
    for (e_idx, e) in monomials.iter().enumerate() {
        for (i, p) in partials.iter().enumerate() {
            let v = to_sparse(p, e);
            if v.is_empty() {
                continue;
            }
            let g = generators.len();
            generators.push((e_idx, i));
            let (v, combo) = echelon.reduce(v, vec![(g as u32, Rational::one())]);
            if !v.is_empty() {
                echelon.insert(v, combo);
            }
        }
    }

    let one = Monomial::one(m);
    let (rest, combo) = echelon.reduce(to_sparse(target, &one), Vec::new());
    if !rest.is_empty() {
        let residual = {
            let terms = rest
                .iter()
                .map(|(k, c)| (monomials[*k as usize].0.clone(), c.clone()));
            TruncSeries::from_terms(m, n, terms)?
        };
        return Ok(MembershipResult {
            status: MembershipStatus::NonMemberUpToN,
            witness: None,
            residual,
            certificate: None,
        });
    }
    let mut witness = vec![TruncSeries::zero(m, n); m];
    for (g, c) in combo {
        let (e_idx, i) = generators[g as usize];
        witness[i].add_term(monomials[e_idx].clone(), -c);
    }
    let residual = gradient_residual(f, target, &witness)?;
    let status = if residual.is_zero() {
        MembershipStatus::Member
    } else {
        MembershipStatus::NonMemberUpToN
    };
    Ok(MembershipResult {
        status,
        witness: Some(witness),
        residual,
        certificate: None,
    })
}

/// `target - sum_i F_i * df/dx_i`, truncated.
pub fn gradient_residual(
    f: &TruncSeries,
    target: &TruncSeries,
    field: &[TruncSeries],
) -> Result<TruncSeries> {
    if field.len() != f.arity() {
        return Err(Error::ShapeMismatch(format!(
            "{} field components for {} variables",
            field.len(),
            f.arity()
        )));
    }
    let mut acc = target.clone();
    for (i, fi) in field.iter().enumerate() {
        acc = acc.sub(&fi.mul(&f.partial(i)?)?)?;
    }
    Ok(acc)
}

fn require_no_constant(f: &TruncSeries) -> Result<()> {
    let c = f.constant_term();
    if !c.is_zero() {
        return Err(Error::NonzeroConstant(c.to_string()));
    }
    Ok(())
}

/// Is `f` in its own Jacobi ideal modulo degree `> N` (the truncation degree of `f`)?
pub fn solve_membership(f: &TruncSeries) -> Result<MembershipResult> {
    require_no_constant(f)?;
    solve_against_gradient(f, f)
}

/// Is `f^k` in the Jacobi ideal of `f` modulo degree `> N`?
pub fn solve_power_membership(f: &TruncSeries, k: u32) -> Result<MembershipResult> {
    require_no_constant(f)?;
    if k == 0 {
        return Err(Error::InvalidArgument("power must be positive".into()));
    }
    if let Some(order) = f.order() {
        if u64::from(k) * u64::from(order) > u64::from(f.degree()) {
            return Err(Error::InvalidArgument(format!(
                "k * order = {} exceeds the truncation degree {}",
                u64::from(k) * u64::from(order),
                f.degree()
            )));
        }
    }
    solve_against_gradient(f, &f.pow(k))
}

// ---------------------------------------------------------------------------
// Closed-form fields

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `f = c * x1`.
    Regular,
    /// Homogeneous polynomial of the given degree.
    Homogeneous(u32),
    /// `sum_i s_i * x_i^{a_i}` over the first `a.len()` variables.
    Brieskorn { exponents: Vec<u32>, signs: Vec<i8> },
    /// `x1^{a1} + x1^{b1} x2^{a2} + ... + x_{k-1}^{b_{k-1}} x_k^{a_k}`.
    Chain { a: Vec<u32>, b: Vec<u32> },
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn mono_series(m: usize, degree: u32, exps: &[(usize, u32)], c: Rational) -> TruncSeries {
    let mut e = vec![0u32; m];
    for &(i, k) in exps {
        e[i] += k;
    }
    TruncSeries::monomial(m, degree, Monomial(e), c)
}

fn shape_error(f: &SmoothExpr, family: &Family) -> Error {
    Error::FamilyShape(format!("`{}` is not of the form {:?}", f, family))
}

/// Chain-family weights: `r_1 = 1/a_1`, `r_i = (1 - b_{i-1} r_{i-1}) / a_i`.
pub fn chain_weights(a: &[u32], b: &[u32]) -> Vec<Rational> {
    let mut r: Vec<Rational> = Vec::with_capacity(a.len());
    for (i, &ai) in a.iter().enumerate() {
        let ai = Rational::from_integer(ai.into());
        let w = if i == 0 {
            ai.recip()
        } else {
            (Rational::one() - Rational::from_integer(b[i - 1].into()) * &r[i - 1]) / ai
        };
        r.push(w);
    }
    r
}

/// The explicit field `F` with `dd(f, F) = f` for a declared family; shape and
/// identity are both checked (exactly on coefficients, and on a grid).
pub fn closed_form_field(f: &SmoothExpr, family: &Family) -> Result<VectorFieldExpr> {
    let m = f.arity();
    let degree = f
        .polynomial_degree()
        .ok_or_else(|| shape_error(f, family))?;
    let fs = TruncSeries::from_expr(f, degree)?;
    let x = |i: usize| SmoothExpr::variable(m, i).expect("in range");
    let zero = SmoothExpr::integer(m, 0);
    let (expected, weights): (Option<TruncSeries>, Vec<Rational>) = match family {
        Family::Regular => {
            let c = fs.coeff(&Monomial::var(m, 0).0);
            let ok = !c.is_zero() && fs.len() == 1;
            let mut w = vec![Rational::zero(); m];
            w[0] = Rational::one();
            (ok.then(|| fs.clone()), w)
        }
        Family::Homogeneous(n) => {
            let ok = *n >= 1 && fs.terms().all(|(mono, _)| mono.degree() == *n) && !fs.is_zero();
            (
                ok.then(|| fs.clone()),
                vec![Rational::from_integer((*n).into()).recip(); m],
            )
        }
        Family::Brieskorn { exponents, signs } => {
            if exponents.len() != signs.len()
                || exponents.is_empty()
                || exponents.len() > m
                || exponents.contains(&0)
                || signs.iter().any(|s| s.abs() != 1)
            {
                return Err(shape_error(f, family));
            }
            let mut target = TruncSeries::zero(m, degree);
            let mut w = vec![Rational::zero(); m];
            for (i, (&a, &s)) in exponents.iter().zip(signs).enumerate() {
                target = target.add(&mono_series(m, degree, &[(i, a)], rat(s.into(), 1)))?;
                w[i] = rat(1, a.into());
            }
            (Some(target), w)
        }
        Family::Chain { a, b } => {
            if a.is_empty() || a.len() > m || b.len() + 1 != a.len() || a.contains(&0) {
                return Err(shape_error(f, family));
            }
            let mut target = mono_series(m, degree, &[(0, a[0])], Rational::one());
            for i in 1..a.len() {
                target = target.add(&mono_series(
                    m,
                    degree,
                    &[(i - 1, b[i - 1]), (i, a[i])],
                    Rational::one(),
                ))?;
            }
            let mut w = chain_weights(a, b);
            w.resize(m, Rational::zero());
            (Some(target), w)
        }
    };
    match expected {
        Some(t) if t == fs => {}
        _ => return Err(shape_error(f, family)),
    }
    let components = weights
        .iter()
        .enumerate()
        .map(|(i, w)| if w.is_zero() { zero.clone() } else { x(i).scale(w) })
        .collect();
    let field = VectorFieldExpr::new(components)?;

    // Exact check on coefficients, then the pointwise check.
    let dd = directional_derivative(f, &field)?;
    let exact = TruncSeries::from_expr(&(&dd - f), degree)?;
    if !exact.is_zero() {
        return Err(Error::Validation {
            what: format!("dd(f, F) = f for family {:?}", family),
            residual: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    let r = identity_residual(f, &field, &unit_box(m), 5)?;
    if r > 1e-10 {
        return Err(Error::Validation {
            what: "dd(f, F) = f on grid".into(),
            residual: r,
            tolerance: 1e-10,
        });
    }
    Ok(field)
}

/// `[-1, 1]^m`.
pub fn unit_box(m: usize) -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0); m]
}

/// Lattice with `per_axis` points per side of the box (capped to keep the size near 10^4).
pub fn grid(bounds: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let m = bounds.len();
    let mut k = per_axis.max(2);
    while m > 1 && k.pow(m as u32) > 20_000 {
        k -= 1;
    }
    lattice(bounds, k)
}

/// Full lattice with `k` points per side, no cap.
pub fn lattice(bounds: &[(f64, f64)], k: usize) -> Vec<Vec<f64>> {
    let k = k.max(2);
    let mut points = vec![Vec::with_capacity(bounds.len())];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(points.len() * k);
        for p in &points {
            for j in 0..k {
                let mut q = p.clone();
                q.push(lo + (hi - lo) * j as f64 / (k - 1) as f64);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// `max |dd(f, F)(p) - f(p)| / max(1, |f(p)|)` over the lattice; points where either side is
/// undefined are skipped.
pub fn identity_residual(
    f: &SmoothExpr,
    field: &VectorFieldExpr,
    bounds: &[(f64, f64)],
    per_axis: usize,
) -> Result<f64> {
    let dd = directional_derivative(f, field)?;
    let mut worst = 0.0f64;
    for p in grid(bounds, per_axis) {
        if let (Some(a), Some(b)) = (dd.eval_fast(&p), f.eval_fast(&p)) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn require_identity(f: &SmoothExpr, field: &VectorFieldExpr, what: &str) -> Result<()> {
    let r = identity_residual(f, field, &unit_box(f.arity()), 9)?;
    if r > 1e-10 {
        return Err(Error::Validation {
            what: format!("dd({what}) = {what} on grid"),
            residual: r,
            tolerance: 1e-10,
        });
    }
    Ok(())
}

/// `H(x, y) = f(x) + g(y)` with the block field `(F(x), G(y))`.
pub fn combine_sum_field(
    f: &SmoothExpr,
    field_f: &VectorFieldExpr,
    g: &SmoothExpr,
    field_g: &VectorFieldExpr,
) -> Result<(SmoothExpr, VectorFieldExpr)> {
    if f.arity() != field_f.arity() || g.arity() != field_g.arity() {
        return Err(Error::ArityMismatch("function and field differ in arity".into()));
    }
    require_identity(f, field_f, "f")?;
    require_identity(g, field_g, "g")?;
    let (m, n) = (f.arity(), g.arity());
    let h = &f.embed(m + n, 0)? + &g.embed(m + n, m)?;
    let mut components = Vec::with_capacity(m + n);
    for c in field_f.components() {
        components.push(c.embed(m + n, 0)?);
    }
    for c in field_g.components() {
        components.push(c.embed(m + n, m)?);
    }
    Ok((h, VectorFieldExpr::new(components)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivedMode {
    /// `f = g^a` with field `G / a`.
    Power(i32),
    /// `f = flatexp(g)` with field `g * G`.
    Flat,
}

#[derive(Debug, Clone)]
pub struct DerivedField {
    pub f: SmoothExpr,
    pub field: VectorFieldExpr,
    /// Worst relative residual of `dd(f, F) = f` where `g > 0` (or everywhere, in power mode).
    pub residual: f64,
    /// Flat mode only: worst residual where `g < 0`. There `dd(f, g G) = -f`, so the
    /// identity fails whenever `g` takes negative values on the box.
    pub negative_side_residual: Option<f64>,
}

/// Builds a field for a function derived from `g` with `dd(g, G) = g`.
pub fn derived_field(
    g: &SmoothExpr,
    field_g: &VectorFieldExpr,
    mode: DerivedMode,
    bounds: &[(f64, f64)],
) -> Result<DerivedField> {
    if g.arity() != field_g.arity() || bounds.len() != g.arity() {
        return Err(Error::ArityMismatch("g, G and the box differ in arity".into()));
    }
    let r = identity_residual(g, field_g, bounds, 9)?;
    if r > 1e-10 {
        return Err(Error::Validation {
            what: "dd(g, G) = g on grid".into(),
            residual: r,
            tolerance: 1e-10,
        });
    }
    let points = grid(bounds, 41);
    match mode {
        DerivedMode::Power(a) => {
            if a == 0 {
                return Err(Error::InvalidArgument("power must be nonzero".into()));
            }
            let f = g.powi(a);
            let field = field_g.scale(&rat(1, a.into()));
            let dd = directional_derivative(&f, &field)?;
            let mut worst = 0.0f64;
            for p in &points {
                let (fv, dv) = (f.eval(p)?, dd.eval(p)?);
                worst = worst.max((dv - fv).abs() / fv.abs().max(1.0));
            }
            if worst > 1e-8 {
                return Err(Error::Validation {
                    what: "dd(g^a, G/a) = g^a".into(),
                    residual: worst,
                    tolerance: 1e-8,
                });
            }
            Ok(DerivedField {
                f,
                field,
                residual: worst,
                negative_side_residual: None,
            })
        }
        DerivedMode::Flat => {
            let f = g.apply(Func::FLATEXP);
            let field = field_g.times(g);
            let dd = directional_derivative(&f, &field)?;
            let (mut pos, mut neg) = (0.0f64, None::<f64>);
            for p in &points {
                let gv = g.eval(p)?;
                let (fv, dv) = (f.eval(p)?, dd.eval(p)?);
                let r = (dv - fv).abs() / fv.abs().max(1.0);
                if gv > 0.0 {
                    pos = pos.max(r);
                } else if gv < 0.0 {
                    neg = Some(neg.unwrap_or(0.0).max(r));
                } else if dv != 0.0 || fv != 0.0 {
                    pos = f64::INFINITY;
                }
            }
            if pos > 1e-8 {
                return Err(Error::Validation {
                    what: "dd(flatexp(g), g G) = flatexp(g) where g > 0".into(),
                    residual: pos,
                    tolerance: 1e-8,
                });
            }
            Ok(DerivedField {
                f,
                field,
                residual: pos,
                negative_side_residual: neg,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Obstruction by accumulating critical points

/// A one-variable function given by its value and a closed-form derivative.
pub trait Profile1D {
    fn value(&self, x: f64) -> Result<f64>;
    fn derivative(&self) -> &SmoothExpr;
}

pub struct ExprProfile {
    f: SmoothExpr,
    df: SmoothExpr,
}

impl ExprProfile {
    pub fn new(f: SmoothExpr) -> Result<ExprProfile> {
        if f.arity() != 1 {
            return Err(Error::ArityMismatch("profile must have one variable".into()));
        }
        let df = f.derive(0)?;
        Ok(ExprProfile { f, df })
    }
}

impl Profile1D for ExprProfile {
    fn value(&self, x: f64) -> Result<f64> {
        self.f.eval1(x)
    }
    fn derivative(&self) -> &SmoothExpr {
        &self.df
    }
}

/// `f(x) = int_0^x flatexp(sin(1/t)^2) dt`, smooth and with critical points `1/(pi n)`
/// accumulating at `0`.
pub struct FlatOscillation {
    integrand: SmoothExpr,
    period_opts: QuadOptions,
}

impl Default for FlatOscillation {
    fn default() -> Self {
        FlatOscillation::new()
    }
}

/// Trigamma `psi_1(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + inv2 / 2.0
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

impl FlatOscillation {
    pub fn new() -> FlatOscillation {
        FlatOscillation {
            integrand: SmoothExpr::parse("flatexp(sin(1/x)^2)", 1).expect("valid"),
            period_opts: QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-13,
                max_intervals: 4000,
            },
        }
    }

    fn w(v: f64) -> f64 {
        crate::expr::flat(0, false, v.sin().powi(2))
    }

    /// With `u = 1/t` the value is `int_{1/x}^inf w(u)/u^2 du` for the pi-periodic `w`.
    /// Whole periods past `pi * n0` sum to `(1/pi^2) int_0^pi w(v) psi_1(n0 + v/pi) dv`.
    fn positive_value(&self, x: f64) -> Result<f64> {
        let pi = std::f64::consts::PI;
        let u0 = 1.0 / x;
        let n0 = (u0 / pi).ceil().max(1.0);
        let head = integrate(|u| Self::w(u) / (u * u), u0, pi * n0, self.period_opts)?.value;
        let tail = integrate(|v| Self::w(v) * trigamma(n0 + v / pi), 0.0, pi, self.period_opts)?.value
            / (pi * pi);
        Ok(head + tail)
    }
}

impl Profile1D for FlatOscillation {
    fn value(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let v = self.positive_value(x.abs())?;
        Ok(if x < 0.0 { -v } else { v })
    }
    fn derivative(&self) -> &SmoothExpr {
        &self.integrand
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstructionStatus {
    Obstructed,
    NoObstructionFound,
}

impl ObstructionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ObstructionStatus::Obstructed => "obstructed",
            ObstructionStatus::NoObstructionFound => "no_obstruction_found",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalSample {
    pub point: f64,
    pub value: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub status: ObstructionStatus,
    /// Critical points with nonzero value, at most one per dyadic shell, ordered by `|p|` decreasing.
    pub points: Vec<CriticalSample>,
    pub shells_searched: usize,
}

/// Deepest dyadic shell `[2^{-j-1}, 2^{-j}]` examined.
pub const OBSTRUCTION_DEPTH: i32 = 40;

/// Looks for critical points `p` with `f(p) != 0` accumulating at `0`, one per dyadic
/// shell on each side inside `[lo, hi]`. At such points `dd(f, F)(p) = 0 != f(p)` for every
/// smooth `F`, so three or more of them shrinking geometrically certify non-membership.
/// `tolerance` is relative: `|f(p)| > tolerance * |p|` counts as nonzero.
pub fn accumulation_obstruction(
    f: &dyn Profile1D,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<ObstructionReport> {
    if f.value(0.0)?.abs() > 0.0 {
        return Err(Error::InvalidArgument("f(0) must vanish".into()));
    }
    let df = f.derivative();
    let factors = zero_factors(df);
    let mut points = Vec::new();
    let mut shells = 0;
    for j in 0..=OBSTRUCTION_DEPTH {
        let outer = 2f64.powi(-j);
        let inner = outer / 2.0;
        for sign in [1.0, -1.0] {
            let (a, b) = if sign > 0.0 { (inner, outer) } else { (-outer, -inner) };
            if a < lo || b > hi {
                continue;
            }
            shells += 1;
            let mut found = None;
            for factor in &factors {
                let roots = sign_change_roots(factor, a, b, 64)?;
                if let Some(&p) = roots.first() {
                    found = Some(p);
                    break;
                }
            }
            let Some(p) = found else { continue };
            let dv = df.eval1(p).unwrap_or(f64::NAN);
            if dv.abs() > 1e-12 {
                continue;
            }
            let v = f.value(p)?;
            if v.abs() > tolerance * p.abs() {
                points.push(CriticalSample {
                    point: p,
                    value: v,
                    derivative: dv,
                });
            }
        }
    }
    let positive = points.iter().filter(|s| s.point > 0.0).count();
    let negative = points.len() - positive;
    let status = if positive >= 3 || negative >= 3 {
        ObstructionStatus::Obstructed
    } else {
        ObstructionStatus::NoObstructionFound
    };
    Ok(ObstructionReport {
        status,
        points,
        shells_searched: shells,
    })
}

/// Distance of `p` from the nearest `1/(pi n)`.
pub fn distance_to_harmonic(p: f64) -> (i64, f64) {
    let pi = std::f64::consts::PI;
    let n = (1.0 / (pi * p.abs())).round().max(1.0);
    let target = (1.0 / (pi * n)).copysign(p);
    (n.to_i64().unwrap_or(i64::MAX), (p - target).abs())
}

/// Witness series pretty-printed per component.
pub fn witness_strings(witness: &[TruncSeries]) -> Vec<String> {
    witness.iter().map(crate::series::pretty).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str, m: usize, n: u32) -> TruncSeries {
        TruncSeries::from_expr(&SmoothExpr::parse(text, m).unwrap(), n).unwrap()
    }

    fn e(text: &str, m: usize) -> SmoothExpr {
        SmoothExpr::parse(text, m).unwrap()
    }

    #[test]
    fn square_is_member_with_half_x() {
        let r = solve_membership(&s("x^2", 1, 8)).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        assert!(r.residual.is_zero());
        assert_eq!(r.witness.unwrap()[0], s("x/2", 1, 8));
    }

    #[test]
    fn zero_germ_is_member() {
        let r = solve_membership(&TruncSeries::zero(2, 6)).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        assert!(r.witness.unwrap().iter().all(TruncSeries::is_zero));
    }

    #[test]
    fn homogeneous_cubic_matches_euler_oracle() {
        let f = s("x^2*y + y^3", 2, 8);
        let r = solve_membership(&f).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        let euler = vec![s("x/3", 2, 8), s("y/3", 2, 8)];
        assert!(gradient_residual(&f, &f, &euler).unwrap().is_zero());
        assert!(gradient_residual(&f, &f, &r.witness.unwrap()).unwrap().is_zero());
    }

    #[test]
    fn constant_term_rejected() {
        assert!(matches!(
            solve_membership(&s("1 + x", 1, 4)),
            Err(Error::NonzeroConstant(_))
        ));
    }

    #[test]
    fn non_quasihomogeneous_germ_is_not_member() {
        // x^4 + y^5 + x^2 y^3 has Tjurina number below its Milnor number.
        let f = s("x^4 + y^5 + x^2*y^3", 2, 12);
        let r = solve_membership(&f).unwrap();
        assert_eq!(r.status, MembershipStatus::NonMemberUpToN);
        assert!(!r.residual.is_zero());
        assert!(r.witness.is_none());
    }

    #[test]
    fn witnesses_are_deterministic() {
        let f = s("x^2 + y^3", 2, 7);
        assert_eq!(
            solve_membership(&f).unwrap().witness,
            solve_membership(&f).unwrap().witness
        );
    }

    #[test]
    fn power_membership_examples() {
        let r = solve_power_membership(&s("x", 1, 6), 3).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        assert_eq!(r.witness.unwrap()[0], s("x^3", 1, 6));
        let r = solve_power_membership(&s("x^2", 1, 8), 2).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        assert_eq!(r.witness.unwrap()[0], s("x^3/2", 1, 8));
        let r = solve_power_membership(&TruncSeries::zero(1, 4), 1).unwrap();
        assert_eq!(r.status, MembershipStatus::Member);
        assert!(solve_power_membership(&s("x^3", 1, 8), 3).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let h = closed_form_field(&e("x^2 + y^2", 2), &Family::Homogeneous(2)).unwrap();
        assert_eq!(h, VectorFieldExpr::parse("x/2; y/2").unwrap());
        let r = closed_form_field(&e("x", 2), &Family::Regular).unwrap();
        assert_eq!(r.to_string(), "x1; 0");
        let c = closed_form_field(
            &e("x^3 + x*y^3", 2),
            &Family::Chain {
                a: vec![3, 3],
                b: vec![1],
            },
        )
        .unwrap();
        let p = [0.7, -0.4];
        let v = c.eval(&p).unwrap();
        assert!((v[0] - 0.7 / 3.0).abs() < 1e-15);
        assert!((v[1] - 2.0 * -0.4 / 9.0).abs() < 1e-15);
        let b = closed_form_field(
            &e("x^3 - y^4", 2),
            &Family::Brieskorn {
                exponents: vec![3, 4],
                signs: vec![1, -1],
            },
        )
        .unwrap();
        assert_eq!(b, VectorFieldExpr::parse("x/3; y/4").unwrap());
    }

    #[test]
    fn closed_form_shape_is_validated() {
        assert!(matches!(
            closed_form_field(&e("x^2 + y^3", 2), &Family::Homogeneous(2)),
            Err(Error::FamilyShape(_))
        ));
        assert!(matches!(
            closed_form_field(&e("x^2", 1), &Family::Regular),
            Err(Error::FamilyShape(_))
        ));
        assert!(closed_form_field(&e("exp(x)", 1), &Family::Homogeneous(1)).is_err());
    }

    #[test]
    fn combine_examples() {
        let (h, field) = combine_sum_field(
            &e("x^2", 1),
            &VectorFieldExpr::parse("x/2").unwrap(),
            &e("x^2", 1),
            &VectorFieldExpr::parse("x/2").unwrap(),
        )
        .unwrap();
        assert_eq!(h, e("x^2 + y^2", 2));
        assert_eq!(field, VectorFieldExpr::parse("x/2; y/2").unwrap());

        let (h, field) = combine_sum_field(
            &e("0", 1),
            &VectorFieldExpr::parse("0").unwrap(),
            &e("x^2", 1),
            &VectorFieldExpr::parse("x/2").unwrap(),
        )
        .unwrap();
        assert_eq!(h, e("y^2", 2));
        assert_eq!(field.to_string(), "0; 1/2*x2");

        let (h, field) = combine_sum_field(
            &e("x^3", 1),
            &VectorFieldExpr::parse("x/3").unwrap(),
            &e("x^4", 1),
            &VectorFieldExpr::parse("x/4").unwrap(),
        )
        .unwrap();
        assert!(identity_residual(&h, &field, &unit_box(2), 21).unwrap() <= 1e-10);

        assert!(combine_sum_field(
            &e("x^2", 1),
            &VectorFieldExpr::parse("x").unwrap(),
            &e("x^2", 1),
            &VectorFieldExpr::parse("x/2").unwrap(),
        )
        .is_err());
    }

    #[test]
    fn derived_power_examples() {
        let g = e("x^2", 1);
        let field = VectorFieldExpr::parse("x/2").unwrap();
        let d = derived_field(&g, &field, DerivedMode::Power(2), &unit_box(1)).unwrap();
        assert_eq!(d.f, e("x^4", 1));
        assert_eq!(d.field, VectorFieldExpr::parse("x/4").unwrap());
        let d = derived_field(&g, &field, DerivedMode::Power(1), &unit_box(1)).unwrap();
        assert_eq!(d.f, g);
        assert_eq!(d.field, field);
        assert!(matches!(
            derived_field(&g, &field, DerivedMode::Power(-1), &unit_box(1)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn derived_flat_holds_where_g_positive_and_flips_sign_elsewhere() {
        let g = e("x", 1);
        let field = VectorFieldExpr::parse("x").unwrap();
        let d = derived_field(&g, &field, DerivedMode::Flat, &unit_box(1)).unwrap();
        assert_eq!(d.f, e("flatexp(x)", 1));
        assert_eq!(d.field, VectorFieldExpr::parse("x*x").unwrap());
        assert!(d.residual <= 1e-8);
        // On the negative half-line dd(f, gG) = -f, so the residual is 2|f| there.
        let neg = d.negative_side_residual.unwrap();
        assert!(neg > 0.5, "{neg}");
        let dd = directional_derivative(&d.f, &d.field).unwrap();
        for &x in &[-0.9, -0.5, -0.2] {
            let (a, b) = (dd.eval1(x).unwrap(), d.f.eval1(x).unwrap());
            assert!((a + b).abs() < 1e-14);
        }
        // Even g keeps the identity everywhere.
        let d = derived_field(
            &e("x^2", 1),
            &VectorFieldExpr::parse("x/2").unwrap(),
            DerivedMode::Flat,
            &unit_box(1),
        )
        .unwrap();
        assert!(d.negative_side_residual.is_none());
    }

    #[test]
    fn flat_oscillation_values_match_direct_quadrature() {
        let f = FlatOscillation::new();
        for &(a, b) in &[(0.05, 0.2), (0.01, 0.02), (0.3, 1.0)] {
            let direct = integrate(
                |t| f.derivative().eval1(t).unwrap(),
                a,
                b,
                QuadOptions {
                    abs_tol: 1e-14,
                    rel_tol: 1e-12,
                    max_intervals: 100_000,
                },
            )
            .unwrap()
            .value;
            let diff = f.value(b).unwrap() - f.value(a).unwrap();
            assert!((direct - diff).abs() < 1e-11, "{a} {b}: {direct} vs {diff}");
        }
        assert!((f.value(-0.1).unwrap() + f.value(0.1).unwrap()).abs() < 1e-18);
    }

    #[test]
    fn trigamma_reference_values() {
        // psi_1(1) = pi^2/6, psi_1(1/2) = pi^2/2.
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-13);
    }

    #[test]
    fn obstruction_on_flat_oscillation() {
        let f = FlatOscillation::new();
        let rep = accumulation_obstruction(&f, -1.0, 1.0, 1e-6).unwrap();
        assert_eq!(rep.status, ObstructionStatus::Obstructed);
        assert!(rep.points.len() >= 6);
        for p in &rep.points {
            assert!(distance_to_harmonic(p.point).1 < 1e-6);
            assert!(p.value * p.point.signum() > 0.0);
        }
    }

    #[test]
    fn no_obstruction_for_polynomials() {
        for text in ["x^2", "x^3 - 3*x"] {
            let p = ExprProfile::new(e(text, 1)).unwrap();
            let rep = accumulation_obstruction(&p, -2.0, 2.0, 1e-6).unwrap();
            assert_eq!(rep.status, ObstructionStatus::NoObstructionFound, "{text}");
        }
    }
}
