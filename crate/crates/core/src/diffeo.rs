//! Orientation-preserving diffeomorphisms of the line, an interval or a circle.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::SmoothExpr;
use crate::numeric::brent;

/// A real map with a derivative.
pub trait Map1D: Send + Sync {
    fn value(&self, s: f64) -> Result<f64>;
    fn derivative(&self, s: f64) -> Result<f64>;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain1D {
    Line,
    Interval(f64, f64),
    /// Circle `R / period Z`; the map is a lift `R -> R` with `phi(s + period) = phi(s) + period`.
    Circle(f64),
}

#[derive(Clone)]
pub struct Diffeo1D {
    map: Arc<dyn Map1D>,
    domain: Domain1D,
}

impl fmt::Debug for Diffeo1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Diffeo1D({}, {:?})", self.map.describe(), self.domain)
    }
}

struct ExprMap {
    f: SmoothExpr,
    df: SmoothExpr,
}

impl Map1D for ExprMap {
    fn value(&self, s: f64) -> Result<f64> {
        self.f.eval1(s)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        self.df.eval1(s)
    }
    fn describe(&self) -> String {
        self.f.to_string()
    }
}

struct Composite {
    outer: Diffeo1D,
    inner: Diffeo1D,
}

impl Map1D for Composite {
    fn value(&self, s: f64) -> Result<f64> {
        self.outer.value(self.inner.value(s)?)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        Ok(self.outer.derivative(self.inner.value(s)?)? * self.inner.derivative(s)?)
    }
    fn describe(&self) -> String {
        format!("({}) o ({})", self.outer.describe(), self.inner.describe())
    }
}

struct Inverse {
    of: Diffeo1D,
}

impl Inverse {
    fn solve(&self, y: f64) -> Result<f64> {
        // Fixed points come back exactly; the zeros of a generating field depend on it.
        if self.of.value(y).ok() == Some(y) {
            return Ok(y);
        }
        let g = |x: f64| -> Result<f64> { Ok(self.of.value(x)? - y) };
        let (mut lo, mut hi) = match self.of.domain {
            Domain1D::Interval(a, b) => (a, b),
            _ => (y - 1.0, y + 1.0),
        };
        if !matches!(self.of.domain, Domain1D::Interval(..)) {
            let mut step = 1.0;
            while g(lo)? > 0.0 {
                step *= 2.0;
                lo = y - step;
                if step > 1e12 {
                    return Err(Error::Bracket(format!("cannot bracket the preimage of {y}")));
                }
            }
            step = 1.0;
            while g(hi)? < 0.0 {
                step *= 2.0;
                hi = y + step;
                if step > 1e12 {
                    return Err(Error::Bracket(format!("cannot bracket the preimage of {y}")));
                }
            }
        }
        brent(g, lo, hi, 1e-15 * y.abs() + f64::MIN_POSITIVE)
    }
}

impl Map1D for Inverse {
    fn value(&self, s: f64) -> Result<f64> {
        self.solve(s)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        Ok(1.0 / self.of.derivative(self.solve(s)?)?)
    }
    fn describe(&self) -> String {
        format!("({})^-1", self.of.describe())
    }
}

struct Contraction {
    phi: Diffeo1D,
    t: f64,
}

impl Map1D for Contraction {
    fn value(&self, s: f64) -> Result<f64> {
        Ok((1.0 - self.t) * s + self.t * self.phi.value(s)?)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        Ok((1.0 - self.t) + self.t * self.phi.derivative(s)?)
    }
    fn describe(&self) -> String {
        format!("(1 - {t})*s + {t}*({})", self.phi.describe(), t = self.t)
    }
}

/// A map given by closures (used for constructed interpolants).
pub struct FnMap<F, D>
where
    F: Fn(f64) -> Result<f64> + Send + Sync,
    D: Fn(f64) -> Result<f64> + Send + Sync,
{
    pub value: F,
    pub derivative: D,
    pub name: String,
}

impl<F, D> Map1D for FnMap<F, D>
where
    F: Fn(f64) -> Result<f64> + Send + Sync,
    D: Fn(f64) -> Result<f64> + Send + Sync,
{
    fn value(&self, s: f64) -> Result<f64> {
        (self.value)(s)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        (self.derivative)(s)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

impl Diffeo1D {
    pub fn new(map: Arc<dyn Map1D>, domain: Domain1D) -> Diffeo1D {
        Diffeo1D { map, domain }
    }

    pub fn from_expr(f: SmoothExpr, domain: Domain1D) -> Result<Diffeo1D> {
        if f.arity() != 1 {
            return Err(Error::ArityMismatch(format!(
                "a diffeomorphism of R needs arity 1, got {}",
                f.arity()
            )));
        }
        let df = f.derive(0)?;
        Ok(Diffeo1D::new(Arc::new(ExprMap { f, df }), domain))
    }

    pub fn parse(text: &str) -> Result<Diffeo1D> {
        Diffeo1D::from_expr(SmoothExpr::parse(text, 1)?, Domain1D::Line)
    }

    pub fn identity() -> Diffeo1D {
        Diffeo1D::parse("x").expect("valid")
    }

    pub fn with_domain(mut self, domain: Domain1D) -> Diffeo1D {
        self.domain = domain;
        self
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        self.map.value(s)
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        self.map.derivative(s)
    }

    pub fn describe(&self) -> String {
        self.map.describe()
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &Diffeo1D) -> Diffeo1D {
        Diffeo1D::new(
            Arc::new(Composite {
                outer: self.clone(),
                inner: inner.clone(),
            }),
            inner.domain,
        )
    }

    /// Numerical inverse by Brent's method (bracketed by the interval, or grown geometrically).
    pub fn inverse(&self) -> Diffeo1D {
        let domain = match self.domain {
            Domain1D::Interval(a, b) => match (self.value(a), self.value(b)) {
                (Ok(fa), Ok(fb)) => Domain1D::Interval(fa, fb),
                _ => self.domain,
            },
            d => d,
        };
        Diffeo1D::new(Arc::new(Inverse { of: self.clone() }), domain)
    }

    /// Checks `phi' > 0` on `samples + 1` equally spaced points of `[a, b]`.
    pub fn check_orientation(&self, a: f64, b: f64, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let s = a + (b - a) * k as f64 / samples as f64;
            let d = self.derivative(s)?;
            if !(d > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "derivative {d:e} <= 0 at {s}: not orientation preserving"
                )));
            }
        }
        Ok(())
    }
}

/// `x -> (1 - t) x + t phi(x)`, checked to stay orientation preserving on `[a, b]`.
pub fn contract_to_identity(phi: &Diffeo1D, t: f64, a: f64, b: f64) -> Result<Diffeo1D> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    phi.check_orientation(a, b, 200)?;
    let h = Diffeo1D::new(
        Arc::new(Contraction {
            phi: phi.clone(),
            t,
        }),
        phi.domain,
    );
    h.check_orientation(a, b, 200)?;
    Ok(h)
}
