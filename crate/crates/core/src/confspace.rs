//! Configurations of `n` distinct points on the circle `R / nZ`.
//!
//! Coordinates may be `f64` or exact rationals; with rationals the split/unsplit
//! round trip is exact.

use std::cmp::Ordering;
use std::fmt;

use num_traits::ToPrimitive;

use crate::critical::critical_points;
use crate::diffeo::{Diffeo1D, Domain1D};
use crate::error::{Error, Result};
use crate::expr::{Rational, SmoothExpr};

/// Scalar usable as a circle coordinate.
pub trait CircleCoord: Clone + PartialOrd + fmt::Debug + fmt::Display {
    fn from_usize(v: usize) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    /// Representative in `[0, n)`.
    fn modulo(&self, n: usize) -> Self;
    fn to_f64(&self) -> f64;
}

impl CircleCoord for f64 {
    fn from_usize(v: usize) -> f64 {
        v as f64
    }
    fn plus(&self, other: &f64) -> f64 {
        self + other
    }
    fn minus(&self, other: &f64) -> f64 {
        self - other
    }
    fn modulo(&self, n: usize) -> f64 {
        let r = self.rem_euclid(n as f64);
        // rem_euclid can round up to exactly n for tiny negative inputs.
        if r >= n as f64 {
            0.0
        } else {
            r
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl CircleCoord for Rational {
    fn from_usize(v: usize) -> Rational {
        Rational::from_integer(v.into())
    }
    fn plus(&self, other: &Rational) -> Rational {
        self + other
    }
    fn minus(&self, other: &Rational) -> Rational {
        self - other
    }
    fn modulo(&self, n: usize) -> Rational {
        let m = Rational::from_usize(n);
        let q = (self / &m).floor();
        self - q * m
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A point of `F_n(S^1)`: `n` pairwise distinct values in `[0, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint<T: CircleCoord> {
    coords: Vec<T>,
}

/// `(x_1 - x_n, ..., x_{n-1} - x_n) mod n` together with the base `[x_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPoint<T: CircleCoord> {
    pub deltas: Vec<T>,
    pub base: T,
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl<T: CircleCoord> fmt::Display for ConfigPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", join(&self.coords))
    }
}

impl<T: CircleCoord> ConfigPoint<T> {
    /// Reduces every coordinate mod `n = coords.len()` and rejects coincident points.
    pub fn new(coords: Vec<T>) -> Result<ConfigPoint<T>> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a configuration needs n >= 1 points".into()));
        }
        let coords: Vec<T> = coords.iter().map(|c| c.modulo(n)).collect();
        for i in 0..n {
            for j in i + 1..n {
                if coords[i].partial_cmp(&coords[j]) != Some(Ordering::Less)
                    && coords[i].partial_cmp(&coords[j]) != Some(Ordering::Greater)
                {
                    return Err(Error::InvalidArgument(format!(
                        "x{} and x{} coincide mod {n}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(ConfigPoint { coords })
    }

    /// `(1, ..., n)` reduced mod `n`.
    pub fn reference(n: usize) -> Result<ConfigPoint<T>> {
        ConfigPoint::new((1..=n).map(T::from_usize).collect())
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    fn offsets_from(&self, k: usize) -> Vec<T> {
        let n = self.n();
        let base = &self.coords[k];
        self.coords.iter().map(|c| c.minus(base).modulo(n)).collect()
    }

    pub fn to_f64(&self) -> ConfigPoint<f64> {
        ConfigPoint {
            coords: self.coords.iter().map(|c| c.to_f64()).collect(),
        }
    }
}

impl<T: CircleCoord> SplitPoint<T> {
    pub fn new(deltas: Vec<T>, base: T) -> Result<SplitPoint<T>> {
        let n = deltas.len() + 1;
        let zero = T::from_usize(0);
        let top = T::from_usize(n);
        let mut prev = zero;
        for (i, d) in deltas.iter().enumerate() {
            if !(*d > prev) {
                return Err(Error::InvalidArgument(format!(
                    "deltas must increase strictly in (0, {n}); d{} = {d}",
                    i + 1
                )));
            }
            prev = d.clone();
        }
        if !(prev < top) {
            return Err(Error::InvalidArgument(format!("last delta {prev} >= {n}")));
        }
        Ok(SplitPoint {
            deltas,
            base: base.modulo(n),
        })
    }
}

impl<T: CircleCoord> fmt::Display for SplitPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; [{}])", join(&self.deltas), self.base)
    }
}

/// Is the cyclic order of the coordinates that of the indices?  Walking the circle from
/// `x_1` in the positive direction must meet `x_2, ..., x_n` in this order.
pub fn component_check<T: CircleCoord>(p: &ConfigPoint<T>) -> bool {
    let offs = p.offsets_from(0);
    offs.windows(2).skip(1).all(|w| w[0] < w[1])
}

pub fn split<T: CircleCoord>(p: &ConfigPoint<T>) -> Result<SplitPoint<T>> {
    if !component_check(p) {
        return Err(Error::NotInComponent);
    }
    let n = p.n();
    let offs = p.offsets_from(n - 1);
    Ok(SplitPoint {
        deltas: offs[..n - 1].to_vec(),
        base: p.coords[n - 1].clone(),
    })
}

pub fn unsplit<T: CircleCoord>(s: &SplitPoint<T>) -> Result<ConfigPoint<T>> {
    let n = s.deltas.len() + 1;
    let mut coords: Vec<T> = s.deltas.iter().map(|d| d.plus(&s.base).modulo(n)).collect();
    coords.push(s.base.modulo(n));
    ConfigPoint::new(coords)
}

/// `tau^d (x_1, ..., x_n)` with `tau(x_1, ..., x_n) = (x_2, ..., x_n, x_1)`; `d` may be negative.
pub fn cyclic_shift<T: CircleCoord>(p: &ConfigPoint<T>, d: i64) -> ConfigPoint<T> {
    let n = p.n() as i64;
    let coords = (0..n)
        .map(|i| p.coords[(i + d).rem_euclid(n) as usize].clone())
        .collect();
    ConfigPoint { coords }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Preserves,
    Reverses,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Preserves => "preserves",
            Parity::Reverses => "reverses",
        }
    }
}

/// Orientation behaviour of `tau^d` on `n` letters: it reverses iff `n` is even and `d` odd.
pub fn shift_parity(n: usize, d: i64) -> Parity {
    if n % 2 == 0 && d.rem_euclid(2) == 1 {
        Parity::Reverses
    } else {
        Parity::Preserves
    }
}

/// Sign of `tau^d` by an explicit inversion count (the reference for [`shift_parity`]).
pub fn brute_force_parity(n: usize, d: i64) -> Parity {
    if n == 0 {
        return Parity::Preserves;
    }
    let perm: Vec<usize> = (0..n as i64)
        .map(|i| (i + d).rem_euclid(n as i64) as usize)
        .collect();
    let mut inversions = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        Parity::Preserves
    } else {
        Parity::Reverses
    }
}

/// Representative of the `Z_n` orbit: the lexicographically smallest rotation.
pub fn canonical_rotation<T: CircleCoord>(p: &ConfigPoint<T>) -> ConfigPoint<T> {
    let mut best = p.clone();
    for d in 1..p.n() as i64 {
        let q = cyclic_shift(p, d);
        let less = q
            .coords
            .iter()
            .zip(&best.coords)
            .find_map(|(a, b)| match a.partial_cmp(b) {
                Some(Ordering::Equal) | None => None,
                o => o,
            })
            == Some(Ordering::Less);
        if less {
            best = q;
        }
    }
    best
}

/// `(phi(1), ..., phi(n)) mod n` for a lift `phi` of a circle diffeomorphism.
pub fn evaluation_map(phi: &Diffeo1D, n: usize) -> Result<ConfigPoint<f64>> {
    let coords = (1..=n)
        .map(|k| phi.value(k as f64))
        .collect::<Result<Vec<_>>>()?;
    ConfigPoint::new(coords)
}

/// Grid cells used to isolate critical points.
pub const EXCEPTIONAL_SAMPLES: usize = 4000;

/// Sorted boundary and critical values of `f` (arity 1) on an interval, or critical values
/// of a `period`-periodic `f` on the circle.
pub fn exceptional_values(f: &SmoothExpr, domain: Domain1D) -> Result<Vec<f64>> {
    if f.arity() != 1 {
        return Err(Error::ArityMismatch(format!(
            "exceptional values need a function of one variable, got arity {}",
            f.arity()
        )));
    }
    let mut values = Vec::new();
    let (a, b) = match domain {
        Domain1D::Interval(a, b) => {
            if !(a < b) {
                return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
            }
            values.push(f.eval1(a)?);
            values.push(f.eval1(b)?);
            (a, b)
        }
        Domain1D::Circle(period) => {
            let (fa, fb) = (f.eval1(0.0)?, f.eval1(period)?);
            if (fa - fb).abs() > 1e-9 * (1.0 + fa.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "f is not {period}-periodic: f(0) = {fa}, f({period}) = {fb}"
                )));
            }
            (0.0, period)
        }
        Domain1D::Line => {
            return Err(Error::InvalidArgument(
                "exceptional values need a compact domain".into(),
            ))
        }
    };
    if !f.derive(0)?.is_zero() {
        for c in critical_points(f, a, b, EXCEPTIONAL_SAMPLES)? {
            values.push(f.eval1(c)?);
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + y.abs()));
    Ok(values)
}

/// Comma-separated exact coordinates such as `1/2, 3, 0.25`.
pub fn parse_rational_coords(text: &str) -> Result<Vec<Rational>> {
    text.split(',')
        .map(|t| {
            let e = SmoothExpr::parse(t.trim(), 1)?;
            e.as_constant().cloned().ok_or_else(|| {
                Error::InvalidArgument(format!("`{}` is not a rational constant", t.trim()))
            })
        })
        .collect()
}

/// Is `p` the reference configuration `(1, ..., n)`?
pub fn is_reference<T: CircleCoord>(p: &ConfigPoint<T>) -> bool {
    ConfigPoint::<T>::reference(p.n())
        .map(|r| r.coords.iter().zip(&p.coords).all(|(a, b)| a.partial_cmp(b) == Some(Ordering::Equal)))
        .unwrap_or(false)
}
