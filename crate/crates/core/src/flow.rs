//! Flows of `alpha(s) d/ds` on the line and of vector fields on `R^m`; shift functions.

use std::sync::Arc;

use crate::critical::{sign_change_roots, zero_factors};
use crate::diffeo::{Diffeo1D, Domain1D};
use crate::error::{Error, Result};
use crate::expr::{directional_derivative, SmoothExpr, VectorFieldExpr};
use crate::numeric::extrap::{dyadic, neville_at_zero, two_sided_limit};
use crate::numeric::ode::{self, OdeOptions};
use crate::numeric::{integrate_with, QuadOptions};

/// Vector field plus integration settings.
#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub field: VectorFieldExpr,
    pub tol: f64,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl FlowSpec {
    pub fn new(field: VectorFieldExpr) -> FlowSpec {
        FlowSpec {
            field,
            tol: 1e-10,
            bounds: None,
        }
    }

    /// The one-dimensional field `alpha(s) d/ds`.
    pub fn scalar(alpha: &SmoothExpr) -> Result<FlowSpec> {
        Ok(FlowSpec::new(VectorFieldExpr::new(vec![alpha.clone()])?))
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> FlowSpec {
        self.bounds = Some(bounds);
        self
    }
}

/// `Phi(x0, t)` by RK4 with step doubling until the Richardson estimate is below `spec.tol`.
pub fn integrate_flow(spec: &FlowSpec, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if x0.len() != spec.field.arity() {
        return Err(Error::ArityMismatch(format!(
            "point of length {} for a field on R^{}",
            x0.len(),
            spec.field.arity()
        )));
    }
    let opts = OdeOptions {
        tol: spec.tol,
        bounds: spec.bounds.clone(),
        ..OdeOptions::default()
    };
    let field = &spec.field;
    Ok(ode::integrate(|y, d| field.eval_into(y, d).is_some(), x0, t, &opts)?.state)
}

/// `c(s, t)` from `Phi(s, t) = s + t alpha(s) c(s, t)` where `alpha(s) != 0`, `t != 0`.
///
/// Integrates `z' = alpha(s + t alpha(s) z) / (t alpha(s))`, `z(0) = 0` over `[0, t]`,
/// so that `c = z(t)` is computed with relative accuracy even for tiny `alpha(s)`.
fn flow_factor_direct(alpha: &SmoothExpr, s: f64, t: f64, tol: f64) -> Result<f64> {
    let a = alpha.eval1(s)?;
    let k = t * a;
    let opts = OdeOptions {
        tol,
        ..OdeOptions::default()
    };
    let sol = ode::integrate(
        |z, d| match alpha.eval_fast(&[s + k * z[0]]) {
            Some(v) => {
                d[0] = v / k;
                true
            }
            None => false,
        },
        &[0.0],
        t,
        &opts,
    )?;
    Ok(sol.state[0])
}

/// `Phi(s, t)` for the field `alpha d/ds`, accurate relative to `|t alpha(s)|`.
pub fn flow_1d(alpha: &SmoothExpr, s: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(s);
    }
    let a = alpha.eval1(s)?;
    if a == 0.0 {
        return Ok(s);
    }
    Ok(s + t * a * flow_factor_direct(alpha, s, t, 1e-12)?)
}

/// `c(s, t) = (Phi(s, t) - s) / (t alpha(s))`; where `t = 0` or `alpha(s) = 0` the
/// value is the two-sided limit extrapolated from dyadic samples.
pub fn flow_factor_c(alpha: &SmoothExpr, s: f64, t: f64) -> Result<f64> {
    let a = alpha.eval1(s)?;
    if t == 0.0 {
        if a == 0.0 {
            return two_sided_limit(|u| flow_factor_c(alpha, s, u), 0.0, 1.0, 1e-6).map(|l| l.value);
        }
        return two_sided_limit(|u| flow_factor_direct(alpha, s, u, 1e-12), 0.0, 1.0, 1e-6)
            .map(|l| l.value);
    }
    if a == 0.0 {
        return two_sided_limit(
            |x| flow_factor_direct(alpha, x, t, 1e-12),
            s,
            (1.0f64).min(1.0 / (1.0 + t.abs())),
            1e-6,
        )
        .map(|l| l.value);
    }
    flow_factor_direct(alpha, s, t, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissibleCase {
    /// `alpha'(0) = 1`.
    A,
    /// `alpha'(0) = 0`.
    B,
}

/// `alpha(0) = 0`, `alpha'(0)` in `{0, 1}`, and no zeros on the punctured grid `+-2^{-j}`.
pub fn check_admissible(alpha: &SmoothExpr) -> Result<AdmissibleCase> {
    if alpha.arity() != 1 {
        return Err(Error::ArityMismatch("alpha must have one variable".into()));
    }
    if alpha.eval1(0.0)? != 0.0 {
        return Err(Error::InvalidArgument(format!("alpha(0) != 0 for `{alpha}`")));
    }
    let d = alpha.derive(0)?.eval1(0.0)?;
    let case = if d == 1.0 {
        AdmissibleCase::A
    } else if d == 0.0 {
        AdmissibleCase::B
    } else {
        return Err(Error::InvalidArgument(format!(
            "alpha'(0) = {d} is neither 0 nor 1"
        )));
    };
    for j in 1..=30 {
        let h = 2f64.powi(-j);
        for s in [h, -h] {
            if alpha.eval1(s)? == 0.0 {
                return Err(Error::InvalidArgument(format!("alpha vanishes at {s}")));
            }
        }
    }
    Ok(case)
}

/// Zeros of `alpha` on `[a, b]` (sign changes of its factors and exact zeros on a grid).
pub fn alpha_zeros(alpha: &SmoothExpr, a: f64, b: f64) -> Result<Vec<f64>> {
    let mut zs = Vec::new();
    for factor in zero_factors(alpha) {
        zs.extend(sign_change_roots(&factor, a, b, 512)?);
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    Ok(zs)
}

#[derive(Clone)]
enum SigmaRule {
    /// `sigma(s) = int_s^{phi(s)} dz / alpha(z)`.
    Integral,
    /// `sigma_{psi o phi}(s) = sigma_phi(s) + sigma_psi(phi(s))`.
    Compose(Arc<ShiftFunction>, Arc<ShiftFunction>),
    /// `sigma_{psi^{-1}}(s) = -sigma_psi(psi^{-1}(s))`.
    Invert(Arc<ShiftFunction>),
}

/// The shift function `sigma` of `phi` along `alpha d/ds`: `phi(s) = Phi(s, sigma(s))`.
#[derive(Clone)]
pub struct ShiftFunction {
    alpha: SmoothExpr,
    phi: Diffeo1D,
    interval: (f64, f64),
    rule: SigmaRule,
    zeros: Vec<f64>,
    pub sigma_at_zero: f64,
    /// `g` with `phi = id + alpha g`, when it is available in closed form.
    pub g_repr: Option<SmoothExpr>,
}

impl std::fmt::Debug for ShiftFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ShiftFunction(alpha = {}, phi = {}, sigma(0) = {})",
            self.alpha,
            self.phi.describe(),
            self.sigma_at_zero
        )
    }
}

/// Tolerance for `Phi(s, sigma(s)) = phi(s)`.
pub const SHIFT_VERIFY_TOL: f64 = 1e-8;

impl ShiftFunction {
    pub fn alpha(&self) -> &SmoothExpr {
        &self.alpha
    }

    pub fn phi(&self) -> &Diffeo1D {
        &self.phi
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    fn is_zero_of_alpha(&self, s: f64) -> Result<bool> {
        Ok(self.alpha.eval1(s)? == 0.0 || self.zeros.iter().any(|z| (z - s).abs() < 1e-14))
    }

    fn integral(&self, s: f64) -> Result<f64> {
        let target = self.phi.value(s)?;
        if target == s {
            return Ok(0.0);
        }
        let (lo, hi) = if s < target { (s, target) } else { (target, s) };
        if self.zeros.iter().any(|&z| z >= lo && z <= hi) {
            return Err(Error::RestPointCrossing { from: s, to: target });
        }
        let alpha = &self.alpha;
        let q = integrate_with(
            |z| {
                let a = alpha.eval1(z)?;
                if a == 0.0 {
                    return Err(Error::RestPointCrossing { from: s, to: target });
                }
                Ok(1.0 / a)
            },
            s,
            target,
            QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_intervals: 2000,
            },
        )?;
        Ok(q.value)
    }

    fn raw_sigma(&self, s: f64) -> Result<f64> {
        match &self.rule {
            SigmaRule::Integral => self.integral(s),
            SigmaRule::Compose(first, second) => {
                Ok(first.sigma(s)? + second.sigma(first.phi.value(s)?)?)
            }
            SigmaRule::Invert(of) => Ok(-of.sigma(self.phi.value(s)?)?),
        }
    }

    /// `sigma(s)`; at zeros of `alpha` the removable value is extrapolated from both sides.
    pub fn sigma(&self, s: f64) -> Result<f64> {
        // Composite rules fix the zeros of alpha and inherit their values there from the parts.
        if !matches!(self.rule, SigmaRule::Integral) || !self.is_zero_of_alpha(s)? {
            return self.raw_sigma(s);
        }
        if self.phi.value(s)? != s {
            return Err(Error::NotInV(format!(
                "phi({s}) != {s} although alpha vanishes there"
            )));
        }
        let (a, b) = self.interval;
        // Samples stay well inside the interval: inverses and composites are often analytic
        // only on a disc about as wide as the interval they were built on.
        let reach = 0.25 * (s - a).min(b - s).max(0.0);
        let mut scale = 1.0f64;
        while scale * 0.125 > reach && scale > 1e-6 {
            scale *= 0.5;
        }
        let mut nearest = f64::INFINITY;
        for &z in &self.zeros {
            if (z - s).abs() > 1e-14 {
                nearest = nearest.min((z - s).abs());
            }
        }
        while scale * 0.125 >= nearest && scale > 1e-6 {
            scale *= 0.5;
        }
        two_sided_limit(|x| self.raw_sigma(x), s, scale, 1e-6).map(|l| l.value)
    }

    /// `|Phi(s, sigma(s)) - phi(s)|`.
    pub fn verify_at(&self, s: f64) -> Result<f64> {
        if self.is_zero_of_alpha(s)? {
            return Ok((self.phi.value(s)? - s).abs());
        }
        let sigma = self.sigma(s)?;
        Ok((flow_1d(&self.alpha, s, sigma)? - self.phi.value(s)?).abs())
    }

    /// Grid of `points + 1` equally spaced samples of the interval.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        let (a, b) = self.interval;
        (0..=points)
            .map(|k| a + (b - a) * k as f64 / points as f64)
            .collect()
    }

    /// `(s, sigma(s))` on the grid, verifying the flow identity at each point.
    pub fn table(&self, points: usize) -> Result<Vec<(f64, f64)>> {
        let mut rows = Vec::with_capacity(points + 1);
        for s in self.grid(points) {
            let r = self.verify_at(s)?;
            if r > SHIFT_VERIFY_TOL * (1.0 + s.abs()) {
                return Err(Error::Validation {
                    what: format!("Phi(s, sigma(s)) = phi(s) at s = {s}"),
                    residual: r,
                    tolerance: SHIFT_VERIFY_TOL,
                });
            }
            rows.push((s, self.sigma(s)?));
        }
        Ok(rows)
    }

    /// Largest flow-identity residual on the grid.
    pub fn max_residual(&self, points: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for s in self.grid(points) {
            worst = worst.max(self.verify_at(s)?);
        }
        Ok(worst)
    }
}

/// Number of grid cells used when a shift function is verified at construction.
pub const SHIFT_VERIFY_POINTS: usize = 40;

/// Builds and verifies the shift function of `phi` (with `phi(0) = 0`) on `[a, b]`.
pub fn shift_function(
    phi: &Diffeo1D,
    alpha: &SmoothExpr,
    interval: (f64, f64),
) -> Result<ShiftFunction> {
    check_admissible(alpha)?;
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    if phi.value(0.0)?.abs() > 1e-14 && a <= 0.0 && 0.0 <= b {
        return Err(Error::NotInV("phi(0) != 0".into()));
    }
    phi.check_orientation(a, b, 200)?;
    let zeros = alpha_zeros(alpha, a, b)?;
    for &z in &zeros {
        let moved = (phi.value(z)? - z).abs();
        if moved > 1e-12 {
            return Err(Error::NotInV(format!(
                "phi moves the zero {z} of alpha by {moved:e}"
            )));
        }
    }
    let g_repr = None;
    let mut sf = ShiftFunction {
        alpha: alpha.clone(),
        phi: phi.clone(),
        interval,
        rule: SigmaRule::Integral,
        zeros,
        sigma_at_zero: f64::NAN,
        g_repr,
    };
    finish(&mut sf)?;
    Ok(sf)
}

fn finish(sf: &mut ShiftFunction) -> Result<()> {
    let (a, b) = sf.interval;
    if a <= 0.0 && 0.0 <= b {
        sf.sigma_at_zero = sf.sigma(0.0)?;
    }
    let worst = sf.max_residual(SHIFT_VERIFY_POINTS)?;
    if worst > SHIFT_VERIFY_TOL {
        return Err(Error::Validation {
            what: "Phi(s, sigma(s)) = phi(s)".into(),
            residual: worst,
            tolerance: SHIFT_VERIFY_TOL,
        });
    }
    Ok(())
}

impl ShiftFunction {
    /// Records `g = (phi - id) / alpha` when `phi` is known as an expression.
    pub fn with_g_repr(mut self, phi_expr: &SmoothExpr) -> ShiftFunction {
        let s = SmoothExpr::variable(1, 0).expect("arity 1");
        self.g_repr = Some(&(phi_expr - &s) / &self.alpha);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftOp {
    Compose,
    Invert,
}

/// Shift function of `psi o phi` (compose) or of `phi^{-1}` (invert), re-verified against the flow.
pub fn shift_algebra(op: ShiftOp, phi: &ShiftFunction, psi: Option<&ShiftFunction>) -> Result<ShiftFunction> {
    let mut sf = match op {
        ShiftOp::Compose => {
            let psi = psi.ok_or_else(|| Error::InvalidArgument("compose needs two shifts".into()))?;
            if phi.alpha != psi.alpha {
                return Err(Error::InvalidArgument("shifts along different fields".into()));
            }
            ShiftFunction {
                alpha: phi.alpha.clone(),
                phi: psi.phi.compose(&phi.phi),
                interval: phi.interval,
                rule: SigmaRule::Compose(Arc::new(phi.clone()), Arc::new(psi.clone())),
                zeros: phi.zeros.clone(),
                sigma_at_zero: f64::NAN,
                g_repr: None,
            }
        }
        ShiftOp::Invert => {
            let (a, b) = phi.interval;
            // Bracketing inside [a, b] picks the local branch even when phi folds outside it.
            let inv = phi.phi.clone().with_domain(Domain1D::Interval(a, b)).inverse();
            // sigma_phi is needed at phi^{-1}(s), so s must lie in phi([a, b]).
            let interval = (a.max(phi.phi.value(a)?), b.min(phi.phi.value(b)?));
            ShiftFunction {
                alpha: phi.alpha.clone(),
                phi: inv,
                interval,
                rule: SigmaRule::Invert(Arc::new(phi.clone())),
                zeros: phi.zeros.clone(),
                sigma_at_zero: f64::NAN,
                g_repr: None,
            }
        }
    };
    finish(&mut sf)?;
    Ok(sf)
}

/// `max_s |sigma_{psi o phi}(s) - sigma_phi(s) - sigma_psi(phi(s))|`, where the left side is
/// the direct integral for the composite diffeomorphism.
pub fn group_law_residual(phi: &ShiftFunction, psi: &ShiftFunction, points: usize) -> Result<f64> {
    let direct = shift_function(&psi.phi.compose(&phi.phi), &phi.alpha, phi.interval)?;
    let mut worst = 0.0f64;
    for s in phi.grid(points) {
        let rhs = phi.sigma(s)? + psi.sigma(phi.phi.value(s)?)?;
        worst = worst.max((direct.sigma(s)? - rhs).abs());
    }
    Ok(worst)
}

/// `max_s |sigma_{phi^{-1}}(s) + sigma_phi(phi^{-1}(s))|` with the left side computed directly.
pub fn inverse_law_residual(phi: &ShiftFunction, points: usize) -> Result<f64> {
    let formal = shift_algebra(ShiftOp::Invert, phi, None)?;
    let direct = shift_function(&formal.phi, &phi.alpha, formal.interval)?;
    let mut worst = 0.0f64;
    for s in formal.grid(points) {
        worst = worst.max((direct.sigma(s)? - formal.sigma(s)?).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Indeterminate,
}

impl Tri {
    pub fn as_str(self) -> &'static str {
        match self {
            Tri::True => "true",
            Tri::False => "false",
            Tri::Indeterminate => "indeterminate",
        }
    }
}

fn classify_tail(rs: &[f64]) -> Tri {
    if rs.len() < 4 {
        return Tri::Indeterminate;
    }
    let tail = &rs[rs.len() - 4..];
    let mags: Vec<f64> = tail.iter().map(|r| r.abs()).collect();
    if mags.iter().any(|m| !m.is_finite()) || mags[3] > 1e6 {
        return Tri::False;
    }
    if mags.windows(2).all(|w| w[1] >= 1.5 * w[0]) && mags[3] > 1.0 {
        return Tri::False;
    }
    let diffs: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let settled = diffs
        .windows(2)
        .all(|w| w[1] <= 0.75 * w[0] || w[1] <= 1e-9 * (1.0 + tail[3].abs()));
    if settled {
        Tri::True
    } else {
        Tri::Indeterminate
    }
}

/// Is `(phi(s) - s) / alpha(s)` (divided by `mu(s)` when given) bounded and convergent on
/// `s = +-2^{-j}`, `j <= 30`? Sampling stops once the quotient is dominated by the rounding
/// of `phi(s) - s`.
pub fn v_membership(phi: &Diffeo1D, alpha: &SmoothExpr, mu: Option<&SmoothExpr>) -> Result<Tri> {
    if phi.value(0.0)?.abs() > 1e-14 {
        return Err(Error::NotInV("phi(0) != 0".into()));
    }
    let mut sides = Vec::new();
    for sign in [1.0, -1.0] {
        let mut rs = Vec::new();
        for j in 1..=30 {
            let s = sign * 2f64.powi(-j);
            let mut den = alpha.eval1(s)?;
            if let Some(mu) = mu {
                den *= mu.eval1(s)?;
            }
            if den.abs() < 1e-9 * s.abs() {
                continue;
            }
            // Samples outside the domain of phi are skipped; only the tail matters.
            if let Ok(v) = phi.value(s) {
                let r = (v - s) / den;
                // Past this point the quotient is rounding noise of `phi(s) - s`.
                let noise = 4.0 * f64::EPSILON * v.abs().max(s.abs()) / den.abs();
                if noise > 1e-8 * r.abs().max(1.0) {
                    break;
                }
                rs.push(r);
            }
        }
        sides.push((classify_tail(&rs), rs));
    }
    Ok(match (sides[0].0, sides[1].0) {
        (Tri::False, _) | (_, Tri::False) => Tri::False,
        (Tri::True, Tri::True) => {
            let (l, r) = (sides[0].1.last().copied(), sides[1].1.last().copied());
            match (l, r) {
                (Some(l), Some(r)) if (l - r).abs() <= 1e-3 * (1.0 + l.abs()) => Tri::True,
                _ => Tri::Indeterminate,
            }
        }
        _ => Tri::Indeterminate,
    })
}

/// The homomorphism `V(alpha) -> R`, `phi -> sigma(0)`; `interval` must contain `0`.
pub fn h_v(phi: &Diffeo1D, alpha: &SmoothExpr, interval: (f64, f64)) -> Result<f64> {
    match v_membership(phi, alpha, None)? {
        Tri::True => {}
        other => {
            return Err(Error::NotInV(format!(
                "membership test returned {}",
                other.as_str()
            )))
        }
    }
    let sf = shift_function(phi, alpha, interval)?;
    Ok(sf.sigma_at_zero)
}

#[derive(Debug, Clone, Copy)]
pub struct EmbeddingReport {
    pub ok: bool,
    /// `min (dLambda(F) + 1)` over the grid; must be `> 0`.
    pub margin: f64,
}

/// Checks `dLambda(F) > -1` on a lattice of the box, i.e. that `x -> Phi(x, Lambda(x))`
/// stays a local diffeomorphism along trajectories.
pub fn embedding_criterion(
    lambda: &SmoothExpr,
    field: &VectorFieldExpr,
    bounds: &[(f64, f64)],
    per_axis: usize,
) -> Result<EmbeddingReport> {
    let d = directional_derivative(lambda, field)?;
    let mut margin = f64::INFINITY;
    for p in crate::jacobi::grid(bounds, per_axis) {
        margin = margin.min(d.eval(&p)? + 1.0);
    }
    Ok(EmbeddingReport {
        ok: margin > 0.0,
        margin,
    })
}

/// Same criterion for sampled `Lambda`: `Lambda(Phi(x, h)) - Lambda(x)` over `h` approximates
/// `dLambda(F)`; used when `Lambda = sigma o f` is only known numerically.
pub fn embedding_margin_sampled<L>(
    mut lambda: L,
    spec: &FlowSpec,
    points: &[Vec<f64>],
) -> Result<f64>
where
    L: FnMut(&[f64]) -> Result<f64>,
{
    let hs = dyadic(4, 4);
    let mut margin = f64::INFINITY;
    for p in points {
        let base = lambda(p)?;
        let mut quotients = Vec::with_capacity(hs.len());
        for &h in &hs {
            let q = integrate_flow(spec, p, h)?;
            quotients.push((lambda(&q)? - base) / h);
        }
        let d = neville_at_zero(&hs, &quotients)?.value;
        margin = margin.min(d + 1.0);
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn e(t: &str) -> SmoothExpr {
        SmoothExpr::parse(t, 1).unwrap()
    }

    fn d(t: &str) -> Diffeo1D {
        Diffeo1D::parse(t).unwrap()
    }

    #[test]
    fn linear_flow_closed_form() {
        let spec = FlowSpec::scalar(&e("x")).unwrap();
        let y = integrate_flow(&spec, &[1.0], LN_2).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-9);
        let spec = FlowSpec::new(VectorFieldExpr::parse("x/2; y/2").unwrap());
        assert_eq!(integrate_flow(&spec, &[0.3, -0.2], 0.0).unwrap(), vec![0.3, -0.2]);
        let y = integrate_flow(&spec, &[1.0, 1.0], 2.0).unwrap();
        let e1 = std::f64::consts::E;
        assert!((y[0] - e1).abs() < 1e-8 && (y[1] - e1).abs() < 1e-8);
    }

    #[test]
    fn flow_property() {
        let spec = FlowSpec::scalar(&e("x^2 + x^3")).unwrap();
        for &x in &[-0.4, 0.1, 0.3] {
            let a = integrate_flow(&spec, &[x], 0.7).unwrap();
            let b = integrate_flow(&spec, &a, -0.3).unwrap();
            let c = integrate_flow(&spec, &[x], 0.4).unwrap();
            assert!((b[0] - c[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn flow_factor_examples() {
        let c = flow_factor_c(&e("x^2"), 0.0, 0.5).unwrap();
        assert!((c - 1.0).abs() < 1e-6, "{c}");
        let c = flow_factor_c(&e("x"), 0.0, 1.0).unwrap();
        assert!((c - (std::f64::consts::E - 1.0)).abs() < 1e-6, "{c}");
        let c = flow_factor_c(&e("x^2 + x^3"), 0.3, 0.0).unwrap();
        assert!((c - 1.0).abs() < 1e-6, "{c}");
        // Away from the limit cases: alpha = s^2 gives c = 1/(1 - s t).
        let c = flow_factor_c(&e("x^2"), 0.2, 0.5).unwrap();
        assert!((c - 1.0 / 0.9).abs() < 1e-10);
    }

    #[test]
    fn shift_examples() {
        let sf = shift_function(&d("2*x"), &e("x"), (-1.0, 1.0)).unwrap();
        assert!((sf.sigma_at_zero - LN_2).abs() < 1e-8);
        for (s, v) in sf.table(10).unwrap() {
            assert!((v - LN_2).abs() < 1e-8, "{s}: {v}");
        }
        let id = shift_function(&d("x"), &e("x^2"), (-1.0, 1.0)).unwrap();
        assert!(id.table(10).unwrap().iter().all(|(_, v)| *v == 0.0));
        let sf = shift_function(&d("x/(1 - x)"), &e("x^2"), (-0.5, 0.5)).unwrap();
        for (_, v) in sf.table(20).unwrap() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn shift_rejects_phi_not_fixing_zeros() {
        assert!(matches!(
            shift_function(&d("x + 0.1"), &e("x"), (-1.0, 1.0)),
            Err(Error::NotInV(_))
        ));
        assert!(shift_function(&d("2*x"), &e("2*x"), (-1.0, 1.0)).is_err());
    }

    #[test]
    fn rest_point_crossing_is_reported() {
        // alpha = x^2 + x^3 vanishes at -1; phi = 2x carries -0.6 to -1.2 across it.
        let sf = ShiftFunction {
            alpha: e("x^2 + x^3"),
            phi: d("2*x"),
            interval: (-0.9, 0.9),
            rule: SigmaRule::Integral,
            zeros: vec![-1.0, 0.0],
            sigma_at_zero: f64::NAN,
            g_repr: None,
        };
        assert!(matches!(sf.sigma(-0.6), Err(Error::RestPointCrossing { .. })));
    }

    #[test]
    fn algebra_examples() {
        let alpha = e("x");
        let phi = shift_function(&d("2*x"), &alpha, (-1.0, 1.0)).unwrap();
        let psi = shift_function(&d("3*x"), &alpha, (-1.0, 1.0)).unwrap();
        let c = shift_algebra(ShiftOp::Compose, &phi, Some(&psi)).unwrap();
        assert!((c.sigma(0.4).unwrap() - 6f64.ln()).abs() < 1e-8);
        assert!((c.sigma_at_zero - 6f64.ln()).abs() < 1e-8);
        let inv = shift_algebra(ShiftOp::Invert, &phi, None).unwrap();
        assert!((inv.sigma(0.3).unwrap() + LN_2).abs() < 1e-8);
        let id = shift_function(&d("x"), &alpha, (-1.0, 1.0)).unwrap();
        let c = shift_algebra(ShiftOp::Compose, &phi, Some(&id)).unwrap();
        assert!((c.sigma(0.7).unwrap() - phi.sigma(0.7).unwrap()).abs() < 1e-14);
        assert!(group_law_residual(&phi, &psi, 20).unwrap() < 1e-7);
        assert!(inverse_law_residual(&phi, 20).unwrap() < 1e-7);
    }

    #[test]
    fn v_membership_examples() {
        assert_eq!(v_membership(&d("x + x^3"), &e("x^2"), None).unwrap(), Tri::True);
        assert_eq!(v_membership(&d("x + x^2"), &e("x^3"), None).unwrap(), Tri::False);
        assert_eq!(v_membership(&d("x"), &e("x^3 + x^2"), None).unwrap(), Tri::True);
        assert_eq!(
            v_membership(&d("x + x^3"), &e("x"), Some(&e("x"))).unwrap(),
            Tri::True
        );
        assert_eq!(
            v_membership(&d("x + x^2"), &e("x"), Some(&e("x^2"))).unwrap(),
            Tri::False
        );
    }

    #[test]
    fn h_v_examples() {
        const I: (f64, f64) = (-0.25, 0.25);
        assert_eq!(h_v(&d("x"), &e("x^2"), I).unwrap(), 0.0);
        assert!((h_v(&d("x/(1 - x)"), &e("x^2"), I).unwrap() - 1.0).abs() < 1e-8);
        let phi = d("x/(1 - x)");
        let psi = d("x/(1 - 2*x)");
        let both = psi.compose(&phi);
        let sum = h_v(&phi, &e("x^2"), I).unwrap() + h_v(&psi, &e("x^2"), I).unwrap();
        assert!((h_v(&both, &e("x^2"), I).unwrap() - sum).abs() < 1e-8);
        assert!(matches!(h_v(&d("x + x^2"), &e("x^3"), I), Err(Error::NotInV(_))));
    }

    #[test]
    fn embedding_examples() {
        let field = VectorFieldExpr::parse("1").unwrap();
        let b = [(-1.0, 1.0)];
        let r = embedding_criterion(&e("5"), &field, &b, 21).unwrap();
        assert!(r.ok && r.margin == 1.0);
        let r = embedding_criterion(&e("-2*x"), &field, &b, 21).unwrap();
        assert!(!r.ok && r.margin == -1.0);
        let r = embedding_criterion(&e("-x"), &field, &b, 21).unwrap();
        assert!(!r.ok && r.margin == 0.0);
    }
}
