//! Smooth orientation-preserving diffeomorphisms of the line and circle that take
//! prescribed values at the integers.
//!
//! On each `[k, k+1]` the derivative is `delta = e^{c_k alpha_k(t)}`, where `alpha_k` is the
//! flat bump `e^{-1/((t-k)(k+1-t))}` and `c_k` is chosen so that `delta` integrates to
//! `x_{k+1} - x_k`. Outside `[0, n+1]` the map is the identity.

use std::sync::Arc;

use crate::diffeo::{Diffeo1D, Domain1D, Map1D};
use crate::error::{Error, Result};
use crate::numeric::{brent, integrate, QuadOptions};

/// Quadrature tolerance for bump integrals.
pub const BUMP_QUAD_TOL: f64 = 1e-10;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: BUMP_QUAD_TOL,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

/// `int_lo^hi g` for `g` supported in `[a, b]` whose mass may concentrate in thin layers at
/// the ends (strongly compressed cells): panels shrink geometrically toward both ends.
fn bump_integral<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, lo: f64, hi: f64) -> Result<f64> {
    let (lo, hi, sign) = if lo <= hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    let (lo, hi) = (lo.max(a), hi.min(b));
    if !(lo < hi) {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let mut cuts = vec![a, b, a + half];
    for j in 1..=48 {
        let d = half * 0.5f64.powi(j);
        cuts.push(a + d);
        cuts.push(b - d);
    }
    cuts.retain(|c| *c > lo && *c < hi);
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let opts = QuadOptions {
        abs_tol: BUMP_QUAD_TOL / cuts.len() as f64,
        ..quad_opts()
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(&mut g, w[0], w[1], opts)?.value;
    }
    Ok(sign * total)
}

/// `ln alpha(t)` with `alpha(t) = e^{-1/((t-a)(b-t))} / (b - a)`; `None` outside `(a, b)`.
fn log_alpha(a: f64, b: f64, t: f64) -> Option<f64> {
    if t <= a || t >= b {
        return None;
    }
    Some(-1.0 / ((t - a) * (b - t)) - (b - a).ln())
}

/// `c` is stored as `sign * e^{log_abs}` so that `|c|` far beyond `f64` range stays usable.
#[derive(Debug, Clone, Copy)]
struct Coef {
    sign: f64,
    log_abs: f64,
}

impl Coef {
    /// `c = sign(kappa) (e^{|kappa|} - 1)`.
    fn from_kappa(kappa: f64) -> Coef {
        if kappa == 0.0 {
            return Coef {
                sign: 0.0,
                log_abs: f64::NEG_INFINITY,
            };
        }
        let k = kappa.abs();
        Coef {
            sign: kappa.signum(),
            log_abs: k + (-(-k).exp_m1()).ln(),
        }
    }

    /// `c * alpha(t)` (zero outside the bump).
    fn times_alpha(&self, a: f64, b: f64, t: f64) -> f64 {
        match log_alpha(a, b, t) {
            Some(la) if self.sign != 0.0 => self.sign * (self.log_abs + la).exp(),
            _ => 0.0,
        }
    }

    fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

/// `gamma(c) = int_a^b (e^{c alpha(t)} - 1) dt` for `c = c(kappa)`.
fn gamma_kappa(a: f64, b: f64, kappa: f64) -> Result<f64> {
    let c = Coef::from_kappa(kappa);
    bump_integral(|t| c.times_alpha(a, b, t).exp_m1(), a, b, a, b)
}

/// `gamma(c)` for a finite `c`.
pub fn gamma(a: f64, b: f64, c: f64) -> Result<f64> {
    bump_integral(|t| (c * log_alpha(a, b, t).map_or(0.0, f64::exp)).exp_m1(), a, b, a, b)
}

/// Solution of `gamma(c(kappa)) = y` for `y > -(b - a)`, by bracket growth and Brent.
fn solve_kappa(a: f64, b: f64, y: f64) -> Result<f64> {
    if !(y > -(b - a)) || !y.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gamma^-1 needs a value in (-(b - a), inf); got {y}"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let g = |k: f64| -> Result<f64> { Ok(gamma_kappa(a, b, k)? - y) };
    let mut k = 1.0f64;
    let (lo, hi) = loop {
        if y < 0.0 {
            if g(-k)? < 0.0 {
                break (-k, 0.0);
            }
        } else if g(k)? > 0.0 {
            break (0.0, k);
        }
        k *= 2.0;
        if k > 1e7 {
            return Err(Error::Bracket(format!("gamma^-1({y}) on [{a}, {b}]: no bracket")));
        }
    };
    brent(g, lo, hi, 1e-13 * (1.0 + lo.abs().max(hi.abs())))
}

/// `gamma^{-1}(y)`; may overflow to `+-inf` for `y` extremely close to `-(b - a)`.
pub fn gamma_inverse(a: f64, b: f64, y: f64) -> Result<f64> {
    Ok(Coef::from_kappa(solve_kappa(a, b, y)?).value())
}

/// One bump of the construction with its solved coefficient.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    /// Prescribed integral of `1 + q` over `[a, b]`.
    pub s: f64,
    coef: Coef,
    /// `int_a^b q` as computed at the solved coefficient.
    pub integral: f64,
}

impl Bump {
    pub fn new(a: f64, b: f64, s: f64) -> Result<Bump> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("bump needs a < b, got [{a}, {b}]")));
        }
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("bump needs s > 0, got {s}")));
        }
        let kappa = solve_kappa(a, b, s - (b - a))?;
        Ok(Bump {
            a,
            b,
            s,
            coef: Coef::from_kappa(kappa),
            integral: if kappa == 0.0 { 0.0 } else { gamma_kappa(a, b, kappa)? },
        })
    }

    /// `q_{a,b}(t, s) = e^{c alpha(t)} - 1`.
    pub fn q(&self, t: f64) -> f64 {
        self.coef.times_alpha(self.a, self.b, t).exp_m1()
    }

    /// `ln(1 + q(t)) = c alpha(t)`; may be `-inf` where even the logarithm overflows.
    pub fn log_one_plus_q(&self, t: f64) -> f64 {
        self.coef.times_alpha(self.a, self.b, t)
    }

    /// `(sign, l)` with `ln(1 + q(t)) = sign * e^l`; `l` stays finite for every `t` in `(a, b)`,
    /// which certifies `1 + q > 0` even where it underflows. `sign = 0` means `q(t) = 0`.
    pub fn exponent(&self, t: f64) -> (f64, f64) {
        match log_alpha(self.a, self.b, t) {
            Some(la) if self.coef.sign != 0.0 => (self.coef.sign, self.coef.log_abs + la),
            _ => (0.0, f64::NEG_INFINITY),
        }
    }

    pub fn c(&self) -> f64 {
        self.coef.value()
    }
}

/// `q_{a,b}(t, s)`.
pub fn bump_q(a: f64, b: f64, t: f64, s: f64) -> Result<f64> {
    Ok(Bump::new(a, b, s)?.q(t))
}

/// `phi_n(x, .)` for `x` in `0 < x_1 < ... < x_n < n + 1`.
#[derive(Debug, Clone)]
pub struct InterpolatingDiffeo {
    /// `x_0 = 0, x_1, ..., x_n, x_{n+1} = n + 1`.
    x: Vec<f64>,
    bumps: Vec<Bump>,
    /// `phi(k)` as accumulated from the bump integrals.
    base: Vec<f64>,
}

impl InterpolatingDiffeo {
    pub fn new(values: &[f64]) -> Result<InterpolatingDiffeo> {
        let n = values.len();
        let mut x = Vec::with_capacity(n + 2);
        x.push(0.0);
        x.extend_from_slice(values);
        x.push((n + 1) as f64);
        for k in 0..=n {
            if !(x[k] < x[k + 1]) || !x[k + 1].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "data must satisfy 0 < x_1 < ... < x_n < {}; violated at x_{}",
                    n + 1,
                    k + 1
                )));
            }
        }
        let bumps = (0..=n)
            .map(|k| Bump::new(k as f64, (k + 1) as f64, x[k + 1] - x[k]))
            .collect::<Result<Vec<_>>>()?;
        let mut base = vec![0.0];
        for (k, bump) in bumps.iter().enumerate() {
            base.push(base[k] + 1.0 + bump.integral);
        }
        Ok(InterpolatingDiffeo { x, bumps, base })
    }

    pub fn n(&self) -> usize {
        self.x.len() - 2
    }

    /// `(x_1, ..., x_n)`.
    pub fn data(&self) -> &[f64] {
        &self.x[1..self.x.len() - 1]
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    fn cell(&self, t: f64) -> Option<usize> {
        let top = (self.n() + 1) as f64;
        if t <= 0.0 || t >= top {
            return None;
        }
        Some((t.floor() as usize).min(self.n()))
    }

    /// `ln delta(t)`; `delta` itself can underflow inside a strongly compressed cell.
    pub fn log_delta(&self, t: f64) -> f64 {
        self.cell(t)
            .map_or(0.0, |k| self.bumps[k].log_one_plus_q(t))
    }

    /// `(sign, l)` with `ln delta(t) = sign * e^l`; see [`Bump::exponent`].
    pub fn delta_exponent(&self, t: f64) -> (f64, f64) {
        self.cell(t)
            .map_or((0.0, f64::NEG_INFINITY), |k| self.bumps[k].exponent(t))
    }

    pub fn delta(&self, t: f64) -> f64 {
        self.log_delta(t).exp()
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let Some(k) = self.cell(t) else {
            return Ok(t);
        };
        let kf = k as f64;
        if t == kf {
            return Ok(self.base[k]);
        }
        let bump = self.bumps[k];
        if bump.coef.sign == 0.0 {
            return Ok(self.base[k] + (t - kf));
        }
        let delta = |u: f64| bump.log_one_plus_q(u).exp();
        let (a, b) = (kf, kf + 1.0);
        if t - kf <= 0.5 {
            Ok(self.base[k] + bump_integral(delta, a, b, a, t)?)
        } else {
            Ok(self.base[k + 1] - bump_integral(delta, a, b, t, b)?)
        }
    }

    /// `|phi(n+1) - (n+1)|` as accumulated: the jump at the right end of the support.
    pub fn closure_defect(&self) -> f64 {
        (self.base[self.n() + 1] - (self.n() + 1) as f64).abs()
    }

    pub fn into_diffeo(self) -> Diffeo1D {
        Diffeo1D::new(Arc::new(LineMap(self)), Domain1D::Line)
    }
}

struct LineMap(InterpolatingDiffeo);

impl Map1D for LineMap {
    fn value(&self, s: f64) -> Result<f64> {
        self.0.value(s)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        Ok(self.0.delta(s))
    }
    fn describe(&self) -> String {
        let xs: Vec<String> = self.0.data().iter().map(|v| v.to_string()).collect();
        format!("phi_{}({})", self.0.n(), xs.join(", "))
    }
}

/// `phi_n(x, .)` as a diffeomorphism of the line.
pub fn build_phi_n(values: &[f64]) -> Result<InterpolatingDiffeo> {
    InterpolatingDiffeo::new(values)
}

/// The section over `1 < x_2 < ... < x_{n-1} < n`: fixes `1` and `n`, sends `k` to `x_k`.
pub fn section_line(n: usize, inner: &[f64]) -> Result<Diffeo1D> {
    if n < 2 || inner.len() != n - 2 {
        return Err(Error::InvalidArgument(format!(
            "section over n = {n} needs n >= 2 and {} inner values, got {}",
            n.saturating_sub(2),
            inner.len()
        )));
    }
    let mut values = vec![1.0];
    values.extend_from_slice(inner);
    values.push(n as f64);
    for w in values.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!(
                "inner values must satisfy 1 < x_2 < ... < x_{} < {n}",
                n - 1
            )));
        }
    }
    Ok(InterpolatingDiffeo::new(&values)?.into_diffeo())
}

struct CircleMap {
    inner: InterpolatingDiffeo,
    period: f64,
    shift: f64,
}

impl Map1D for CircleMap {
    fn value(&self, s: f64) -> Result<f64> {
        let turns = (s / self.period).floor();
        let r = s - turns * self.period;
        Ok(self.inner.value(r)? + turns * self.period + self.shift)
    }
    fn derivative(&self, s: f64) -> Result<f64> {
        Ok(self.inner.delta(s.rem_euclid(self.period)))
    }
    fn describe(&self) -> String {
        let xs: Vec<String> = self.inner.data().iter().map(|v| v.to_string()).collect();
        format!("section_circle({}; {})", xs.join(", "), self.shift)
    }
}

/// Circle diffeomorphism `tau -> phi_{n-1}(x_2, ..., x_n, tau) + shift (mod n)`, lifted to `R`.
///
/// With `x_1 = 0`, the lift sends `k - 1` to `x_k + shift`; equivalently the values at
/// `1, ..., n` are `(x_2, ..., x_n, n) + shift`, the configuration whose split is `(x; [shift])`.
pub fn section_circle(n: usize, x: &[f64], shift: f64) -> Result<Diffeo1D> {
    if n < 1 || x.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "circle section over n = {n} needs {} values 0 < x_2 < ... < x_n < n",
            n.saturating_sub(1)
        )));
    }
    if !shift.is_finite() {
        return Err(Error::InvalidArgument("shift must be finite".into()));
    }
    let inner = InterpolatingDiffeo::new(x)?;
    Ok(Diffeo1D::new(
        Arc::new(CircleMap {
            inner,
            period: n as f64,
            shift,
        }),
        Domain1D::Circle(n as f64),
    ))
}

/// Rows `(t, phi(t), phi'(t))` on `points + 1` equally spaced samples of `[lo, hi]`.
pub fn table(phi: &Diffeo1D, lo: f64, hi: f64, points: usize) -> Result<Vec<[f64; 3]>> {
    let points = points.max(1);
    (0..=points)
        .map(|j| {
            let t = lo + (hi - lo) * j as f64 / points as f64;
            Ok([t, phi.value(t)?, phi.derivative(t)?])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_examples() {
        for t in [-0.5, 0.0, 0.3, 0.5, 0.9, 1.0, 2.0] {
            assert_eq!(bump_q(0.0, 1.0, t, 1.0).unwrap(), 0.0);
        }
        assert_eq!(bump_q(0.0, 1.0, -0.5, 1.7).unwrap(), 0.0);
        let b = Bump::new(0.0, 1.0, 2.0).unwrap();
        let total = integrate(|t| b.q(t), 0.0, 1.0, QuadOptions::abs(1e-12)).unwrap().value;
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gamma_inverse_round_trip() {
        for y in [-0.9, -0.3, 0.25, 3.0] {
            let c = gamma_inverse(0.0, 1.0, y).unwrap();
            assert!((gamma(0.0, 1.0, c).unwrap() - y).abs() < 1e-9);
        }
        assert_eq!(gamma_inverse(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(gamma_inverse(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn compressed_cell_keeps_positive_log_derivative() {
        let b = Bump::new(0.0, 1.0, 1e-3).unwrap();
        assert!(b.log_one_plus_q(0.5) < -700.0);
        let (sign, l) = b.exponent(0.5);
        assert!(sign == -1.0 && l.is_finite() && l > 700.0);
        let total = bump_integral(|t| b.log_one_plus_q(t).exp(), 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((total - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn phi_n_examples() {
        let id = build_phi_n(&[1.0, 2.0, 3.0]).unwrap();
        for t in [-1.0, 0.0, 0.4, 1.0, 2.7, 4.0, 5.5] {
            assert_eq!(id.value(t).unwrap(), t);
            assert_eq!(id.delta(t), 1.0);
        }
        let phi = build_phi_n(&[1.0, 2.5, 3.0]).unwrap();
        assert!((phi.value(2.0).unwrap() - 2.5).abs() < 1e-6);
        assert_eq!(phi.value(-1.0).unwrap(), -1.0);
        assert_eq!(phi.value(4.5).unwrap(), 4.5);
        assert!(phi.closure_defect() < 1e-8);
    }

    #[test]
    fn line_sections() {
        let id = section_line(4, &[2.0, 3.0]).unwrap();
        assert_eq!(id.value(2.5).unwrap(), 2.5);
        let phi = section_line(4, &[2.5, 3.0]).unwrap();
        assert!((phi.value(2.0).unwrap() - 2.5).abs() < 1e-6);
        assert!((phi.value(3.0).unwrap() - 3.0).abs() < 1e-6);
        assert!((phi.value(1.0).unwrap() - 1.0).abs() < 1e-6);
        let fixed = section_line(3, &[2.0]).unwrap();
        for t in [0.5, 1.5, 2.0, 3.3] {
            assert!((fixed.value(t).unwrap() - t).abs() < 1e-6);
        }
        assert!(section_line(4, &[3.0, 2.5]).is_err());
    }

    #[test]
    fn circle_sections() {
        let id = section_circle(3, &[1.0, 2.0], 0.0).unwrap();
        for t in [0.0, 0.7, 2.2, 3.5, -1.0] {
            assert_eq!(id.value(t).unwrap(), t);
        }
        let phi = section_circle(3, &[0.8, 2.1], 1.25).unwrap();
        let left = phi.value(3.0 - 1e-12).unwrap();
        let right = phi.value(0.0).unwrap();
        assert!(((left - right).rem_euclid(3.0)).min(3.0 - (left - right).rem_euclid(3.0)) < 1e-8);
        assert!((phi.derivative(1e-9).unwrap() - 1.0).abs() < 1e-12);
        assert!((phi.derivative(3.0 - 1e-9).unwrap() - 1.0).abs() < 1e-12);
        assert!((phi.value(1.0).unwrap() - (0.8 + 1.25)).abs() < 1e-6);
        assert!((phi.value(2.0).unwrap() - (2.1 + 1.25)).abs() < 1e-6);
    }
}
