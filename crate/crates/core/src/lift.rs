//! Conjugating lifts: given `dd(f, F) = alpha o f` and `phi` in `V(alpha)`, the map
//! `h(x) = Phi_F(x, sigma(f(x)))` satisfies `phi o f = f o h`.
//!
//! The second half glues such lifts on a one-dimensional model with finitely many
//! exceptional levels: level-wise inversion of `f` on regular segments, flow-based
//! lifts near each level, and a coherency check where the two overlap.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Deserialize;

use crate::confspace::exceptional_values;
use crate::critical::critical_points;
use crate::diffeo::{Diffeo1D, Domain1D};
use crate::error::{Error, Result};
use crate::expr::{directional_derivative, SmoothExpr, VectorFieldExpr};
use crate::flow::{embedding_margin_sampled, flow_1d, integrate_flow, shift_function, FlowSpec, ShiftFunction};
use crate::jacobi::{grid, lattice};
use crate::numeric::ode::{self, OdeOptions};
use crate::numeric::{brent, integrate_with, QuadOptions};

/// Default lattice resolution per axis.
pub const LIFT_GRID: usize = 201;
/// Bound on `|dd(f, F) - alpha o f|` accepted by [`LiftProblem::validate`].
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LiftProblem {
    pub f: SmoothExpr,
    pub field: VectorFieldExpr,
    /// Function of one variable.
    pub alpha: SmoothExpr,
    pub bounds: Vec<(f64, f64)>,
    pub per_axis: usize,
}

impl LiftProblem {
    pub fn new(
        f: SmoothExpr,
        field: VectorFieldExpr,
        alpha: SmoothExpr,
        bounds: Vec<(f64, f64)>,
    ) -> Result<LiftProblem> {
        if field.arity() != f.arity() || bounds.len() != f.arity() {
            return Err(Error::ArityMismatch(format!(
                "f on R^{}, field on R^{}, box of dimension {}",
                f.arity(),
                field.arity(),
                bounds.len()
            )));
        }
        if alpha.arity() != 1 {
            return Err(Error::ArityMismatch("alpha must be a function of one variable".into()));
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("empty box".into()));
        }
        Ok(LiftProblem {
            f,
            field,
            alpha,
            bounds,
            per_axis: LIFT_GRID,
        })
    }

    pub fn with_grid(mut self, per_axis: usize) -> LiftProblem {
        self.per_axis = per_axis.max(2);
        self
    }

    /// The full lattice (`per_axis^m` points).
    pub fn points(&self) -> Vec<Vec<f64>> {
        lattice(&self.bounds, self.per_axis)
    }

    fn spec(&self) -> FlowSpec {
        FlowSpec::new(self.field.clone())
    }

    /// `max |dd(f, F) - alpha o f|` on a lattice of the box.
    pub fn identity_residual(&self) -> Result<f64> {
        let lhs = directional_derivative(&self.f, &self.field)?;
        let rhs = self.alpha.substitute(std::slice::from_ref(&self.f))?;
        let mut worst = 0.0f64;
        for p in grid(&self.bounds, self.per_axis) {
            worst = worst.max((lhs.eval(&p)? - rhs.eval(&p)?).abs());
        }
        Ok(worst)
    }

    pub fn validate(&self) -> Result<f64> {
        let r = self.identity_residual()?;
        if r > VALIDATION_TOL {
            return Err(Error::Validation {
                what: "dd(f, F) = alpha o f".into(),
                residual: r,
                tolerance: VALIDATION_TOL,
            });
        }
        Ok(r)
    }

    /// Range of `f` over the lattice.
    pub fn value_range(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self.points() {
            let v = self.f.eval(&p)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }
}

/// `max |Phi_alpha(f(x), t) - f(Phi_F(x, t))|` over the lattice.
pub fn semiconjugacy_residual(p: &LiftProblem, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let spec = p.spec();
    let residuals: Vec<f64> = p
        .points()
        .par_iter()
        .map(|x| -> Result<f64> {
            let fx = p.f.eval(x)?;
            let left = flow_1d(&p.alpha, fx, t)?;
            let right = p.f.eval(&integrate_flow(&spec, x, t)?)?;
            Ok((left - right).abs())
        })
        .collect::<Result<_>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

/// A lift `h_phi` built from a shift function on an interval of values of `f`.
#[derive(Debug, Clone)]
pub struct Lift {
    problem: LiftProblem,
    shift: ShiftFunction,
}

#[derive(Debug, Clone)]
pub struct LiftReport {
    pub identity_residual: f64,
    /// `max |phi(f(x)) - f(h(x))|` on the lattice.
    pub residual: f64,
    /// `min (d Lambda(F) + 1)` for `Lambda = sigma o f`, on a sub-lattice.
    pub embedding_margin: f64,
    pub points: usize,
    pub sigma_at_zero: Option<f64>,
}

/// Tolerance on `max |phi o f - f o h|`.
pub const LIFT_TOL: f64 = 1e-7;
const EMBEDDING_PER_AXIS: usize = 11;

impl Lift {
    /// Builds `h_phi` with the shift function defined on `values` (padded by 1/16 of its width).
    pub fn build(p: &LiftProblem, phi: &Diffeo1D, values: (f64, f64)) -> Result<Lift> {
        let (lo, hi) = values;
        let pad = ((hi - lo) / 16.0).max(1e-3);
        let shift = shift_function(phi, &p.alpha, (lo - pad, hi + pad))?;
        Ok(Lift {
            problem: p.clone(),
            shift,
        })
    }

    pub fn shift(&self) -> &ShiftFunction {
        &self.shift
    }

    /// `Lambda(x) = sigma(f(x))`.
    pub fn lambda(&self, x: &[f64]) -> Result<f64> {
        self.shift.sigma(self.problem.f.eval(x)?)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        integrate_flow(&self.problem.spec(), x, self.lambda(x)?)
    }

    /// `h` on many points; `sigma` is computed once per distinct value of `f`.
    pub fn apply_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let values: Vec<f64> = xs
            .iter()
            .map(|x| self.problem.f.eval(x))
            .collect::<Result<_>>()?;
        let mut distinct: Vec<f64> = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let sigmas: Vec<f64> = distinct
            .par_iter()
            .map(|&v| self.shift.sigma(v))
            .collect::<Result<_>>()?;
        let table: HashMap<u64, f64> = distinct
            .iter()
            .zip(sigmas)
            .map(|(v, s)| (v.to_bits(), s))
            .collect();
        let spec = self.problem.spec();
        xs.par_iter()
            .zip(values.par_iter())
            .map(|(x, v)| integrate_flow(&spec, x, table[&v.to_bits()]))
            .collect()
    }
}

/// Builds `h_phi` on the lattice and reports `max |phi(f) - f(h)|` and the embedding margin.
pub fn lift_diffeo(p: &LiftProblem, phi: &Diffeo1D) -> Result<(Lift, LiftReport)> {
    let identity_residual = p.validate()?;
    let lift = Lift::build(p, phi, p.value_range()?)?;
    let points = p.points();
    let images = lift.apply_all(&points)?;
    let mut residual = 0.0f64;
    for (x, hx) in points.iter().zip(&images) {
        let target = phi.value(p.f.eval(x)?)?;
        residual = residual.max((target - p.f.eval(hx)?).abs());
    }
    let coarse = lattice(&p.bounds, EMBEDDING_PER_AXIS);
    let embedding_margin = embedding_margin_sampled(|x| lift.lambda(x), &p.spec(), &coarse)?;
    if !(embedding_margin > 0.0) {
        return Err(Error::EmbeddingViolated {
            margin: embedding_margin,
        });
    }
    let sigma_at_zero = lift.shift.sigma_at_zero;
    let report = LiftReport {
        identity_residual,
        residual,
        embedding_margin,
        points: points.len(),
        sigma_at_zero: sigma_at_zero.is_finite().then_some(sigma_at_zero),
    };
    if residual > LIFT_TOL {
        return Err(Error::Validation {
            what: "phi o f = f o h on the lattice".into(),
            residual,
            tolerance: LIFT_TOL,
        });
    }
    Ok((lift, report))
}

/// `max |h_{phi2 o phi1}(x) - h_{phi2}(h_{phi1}(x))|` over the lattice (max-norm).
pub fn lift_homomorphism_residual(p: &LiftProblem, phi1: &Diffeo1D, phi2: &Diffeo1D) -> Result<f64> {
    p.validate()?;
    let (lo, hi) = p.value_range()?;
    let (a, b) = (phi1.value(lo)?, phi1.value(hi)?);
    let h1 = Lift::build(p, phi1, (lo, hi))?;
    let h2 = Lift::build(p, phi2, (lo.min(a), hi.max(b)))?;
    let h21 = Lift::build(p, &phi2.compose(phi1), (lo, hi))?;
    let points = p.points();
    let direct = h21.apply_all(&points)?;
    let composed = h2.apply_all(&h1.apply_all(&points)?)?;
    Ok(direct
        .iter()
        .zip(&composed)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Gluing on a one-dimensional model.

#[derive(Debug, Deserialize)]
struct ModelFile {
    expr: String,
    domain: [f64; 2],
    levels: Vec<f64>,
    #[serde(default)]
    eps: Option<Vec<f64>>,
}

/// Maximal interval on which `f` is strictly monotone.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub increasing: bool,
    /// `f(lo)`, `f(hi)`.
    pub values: (f64, f64),
}

impl Segment {
    fn value_range(&self) -> (f64, f64) {
        let (a, b) = self.values;
        (a.min(b), a.max(b))
    }

    fn contains(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }
}

/// `f : [a, b] -> R` whose exceptional values are exactly `levels`, each with a constant `eps`
/// for the model field `xi = eps (f - level) / f'` used near that level.
#[derive(Debug, Clone)]
pub struct ModelFunction1D {
    pub f: SmoothExpr,
    df: SmoothExpr,
    pub domain: (f64, f64),
    pub levels: Vec<f64>,
    pub eps: Vec<f64>,
    pub segments: Vec<Segment>,
}

/// The shipped model: one interior maximum (level 3) and one interior minimum (level 2).
pub const ONE_MINIMUM_MODEL: &str = include_str!("../models/one_minimum.toml");

impl ModelFunction1D {
    /// Endpoints within `1e-6` of a level in value are polished onto it by Newton steps.
    pub fn new(f: SmoothExpr, domain: (f64, f64), levels: Vec<f64>, eps: Vec<f64>) -> Result<ModelFunction1D> {
        if f.arity() != 1 {
            return Err(Error::Model("the model function must have one variable".into()));
        }
        if eps.len() != levels.len() || eps.iter().any(|e| *e == 0.0 || !e.is_finite()) {
            return Err(Error::Model("need one nonzero eps per level".into()));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Model("levels must increase strictly".into()));
        }
        let df = f.derive(0)?;
        let polish = |mut u: f64| -> Result<f64> {
            let v = f.eval1(u)?;
            if let Some(&level) = levels.iter().find(|l| (v - **l).abs() < 1e-6) {
                for _ in 0..8 {
                    let d = df.eval1(u)?;
                    if d == 0.0 {
                        break;
                    }
                    u -= (f.eval1(u)? - level) / d;
                }
            }
            Ok(u)
        };
        let domain = (polish(domain.0)?, polish(domain.1)?);
        let (a, b) = domain;
        if !(a < b) {
            return Err(Error::Model(format!("empty domain [{a}, {b}]")));
        }
        let found = exceptional_values(&f, Domain1D::Interval(a, b))?;
        let matches = found.len() == levels.len()
            && found
                .iter()
                .zip(&levels)
                .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        if !matches {
            return Err(Error::Model(format!(
                "declared levels {levels:?} differ from the exceptional values {found:?}"
            )));
        }
        let mut cuts = vec![a];
        cuts.extend(
            critical_points(&f, a, b, 4000)?
                .into_iter()
                .filter(|c| *c > a && *c < b),
        );
        cuts.push(b);
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut sign = 0.0;
            for k in 1..200 {
                let u = lo + (hi - lo) * k as f64 / 200.0;
                let d = df.eval1(u)?;
                if d == 0.0 || (sign != 0.0 && d.signum() != sign) {
                    return Err(Error::NonMonotone(format!("f' changes sign inside [{lo}, {hi}]")));
                }
                sign = d.signum();
            }
            segments.push(Segment {
                lo,
                hi,
                increasing: sign > 0.0,
                values: (f.eval1(lo)?, f.eval1(hi)?),
            });
        }
        Ok(ModelFunction1D {
            f,
            df,
            domain,
            levels,
            eps,
            segments,
        })
    }

    pub fn from_toml(text: &str) -> Result<ModelFunction1D> {
        let m: ModelFile = toml::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        let f = SmoothExpr::parse(&m.expr, 1)?;
        let eps = m.eps.unwrap_or_else(|| vec![1.0; m.levels.len()]);
        ModelFunction1D::new(f, (m.domain[0], m.domain[1]), m.levels, eps)
    }

    pub fn one_minimum() -> ModelFunction1D {
        ModelFunction1D::from_toml(ONE_MINIMUM_MODEL).expect("shipped model is valid")
    }

    fn segment_of(&self, u: f64) -> Result<&Segment> {
        self.segments
            .iter()
            .find(|s| s.contains(u))
            .ok_or_else(|| Error::InvalidArgument(format!("{u} outside the model domain")))
    }

    /// Half-width of the overlap windows around each level.
    pub fn window(&self) -> f64 {
        let gap = self
            .levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        (gap / 3.0).min(1.0 / 3.0)
    }

    /// Preimage of the value `y` on segment `s` (bracketing, tolerance `1e-12`).
    fn invert(&self, s: &Segment, y: f64) -> Result<f64> {
        let (f_lo, f_hi) = s.values;
        if y == f_lo {
            return Ok(s.lo);
        }
        if y == f_hi {
            return Ok(s.hi);
        }
        brent(|u| Ok(self.f.eval1(u)? - y), s.lo, s.hi, 1e-12)
    }
}

/// `phi(s) = level + s * beta(s - level)`: `beta(s) = int_0^1 phi'(level + tau s) dtau`.
fn hadamard_quotient(phi: &Diffeo1D, level: f64, s: f64) -> Result<f64> {
    if s.abs() > 1e-3 {
        return Ok((phi.value(level + s)? - level) / s);
    }
    Ok(integrate_with(|tau| phi.derivative(level + tau * s), 0.0, 1.0, QuadOptions::abs(1e-14))?.value)
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    pub level: f64,
    /// `"below"` for `(i - w, i)`, `"above"` for `(i, i + w)`.
    pub side: &'static str,
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct GlobalLiftReport {
    /// `max |phi(f(u)) - f(h(u))|` on the grid.
    pub residual: f64,
    /// `max |f(h(u)) - level|` over points of exceptional level sets.
    pub level_fixity: f64,
    pub windows: Vec<WindowReport>,
    pub points: usize,
}

impl GlobalLiftReport {
    pub fn coherency(&self) -> f64 {
        self.windows.iter().map(|w| w.residual).fold(0.0, f64::max)
    }
}

/// Tolerances of the glued lift.
pub const GLOBAL_TOL: f64 = 1e-6;
pub const LEVEL_FIXITY_TOL: f64 = 1e-8;

/// The glued lift of `phi` (which must fix every level) on a model.
#[derive(Debug, Clone)]
pub struct GlobalLift {
    model: ModelFunction1D,
    phi: Diffeo1D,
}

impl GlobalLift {
    /// Inversion-based lift on the segment of `u`.
    pub fn by_inversion(&self, u: f64) -> Result<f64> {
        let s = self.model.segment_of(u)?;
        let y = self.phi.value(self.model.f.eval1(u)?)?;
        self.model.invert(s, y)
    }

    /// Flow-based lift near level `k`: `u -> Xi_k(u, e_k(u))` with `e_k = ln(beta(f - i)) / eps`.
    pub fn by_flow(&self, k: usize, u: f64) -> Result<f64> {
        let m = &self.model;
        let (level, eps) = (m.levels[k], m.eps[k]);
        let s = m.f.eval1(u)? - level;
        if s == 0.0 {
            return Ok(u);
        }
        let time = hadamard_quotient(&self.phi, level, s)?.ln() / eps;
        let seg = *m.segment_of(u)?;
        let opts = OdeOptions {
            tol: 1e-12,
            bounds: Some(vec![(seg.lo, seg.hi)]),
            ..OdeOptions::default()
        };
        let sol = ode::integrate(
            |v, d| match (m.f.eval_fast(v), m.df.eval_fast(v)) {
                (Some(fv), Some(dv)) if dv != 0.0 => {
                    d[0] = eps * (fv - level) / dv;
                    true
                }
                _ => false,
            },
            &[u],
            time,
            &opts,
        )?;
        Ok(sol.state[0])
    }

    /// Flow-based near a level of the segment of `u` (within half a window), inversion elsewhere.
    pub fn apply(&self, u: f64) -> Result<f64> {
        let m = &self.model;
        let v = m.f.eval1(u)?;
        let (lo, hi) = m.segment_of(u)?.value_range();
        let half = m.window() / 2.0;
        for (k, &level) in m.levels.iter().enumerate() {
            if level >= lo && level <= hi && (v - level).abs() < half {
                return self.by_flow(k, u);
            }
        }
        self.by_inversion(u)
    }

    pub fn model(&self) -> &ModelFunction1D {
        &self.model
    }
}

/// Glues the lift of `phi` over a model and checks coherency on every overlap window.
pub fn lift_global_1d(model: &ModelFunction1D, phi: &Diffeo1D, grid_points: usize) -> Result<(GlobalLift, GlobalLiftReport)> {
    let lo = model.levels[0];
    let hi = *model.levels.last().expect("at least one level");
    for &level in &model.levels {
        let image = phi.value(level)?;
        if (image - level).abs() > 1e-10 {
            return Err(Error::ExceptionalValueMoved { level, image });
        }
    }
    phi.check_orientation(lo, hi, 400)?;
    let lift = GlobalLift {
        model: model.clone(),
        phi: phi.clone(),
    };
    let w = model.window();
    const WINDOW_SAMPLES: usize = 40;
    let mut windows = Vec::new();
    for (k, &level) in model.levels.iter().enumerate() {
        for (side, sign) in [("below", -1.0), ("above", 1.0)] {
            let mut residual = 0.0f64;
            let mut samples = 0;
            for seg in &model.segments {
                let (a, b) = seg.value_range();
                let slack = 1e-9 * (1.0 + level.abs());
                let covered = if sign < 0.0 {
                    a <= level - w + slack && level <= b + slack
                } else {
                    a <= level + slack && level + w <= b + slack
                };
                if !covered {
                    continue;
                }
                for j in 1..=WINDOW_SAMPLES {
                    let y = level + sign * w * j as f64 / (WINDOW_SAMPLES + 1) as f64;
                    let u = model.invert(seg, y)?;
                    let d = (lift.by_inversion(u)? - lift.by_flow(k, u)?).abs();
                    residual = residual.max(d);
                    samples += 1;
                }
            }
            if samples > 0 {
                if residual > GLOBAL_TOL {
                    return Err(Error::Coherency { level: k + 1, residual });
                }
                windows.push(WindowReport {
                    level,
                    side,
                    residual,
                    samples,
                });
            }
        }
    }
    let (a, b) = model.domain;
    let n = grid_points.max(2);
    let us: Vec<f64> = (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect();
    let rows: Vec<(f64, f64)> = us
        .par_iter()
        .map(|&u| -> Result<(f64, f64)> {
            let h = lift.apply(u)?;
            let target = phi.value(model.f.eval1(u)?)?;
            Ok((h, (target - model.f.eval1(h)?).abs()))
        })
        .collect::<Result<_>>()?;
    let residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut level_points: Vec<f64> = model.segments.iter().flat_map(|s| [s.lo, s.hi]).collect();
    for seg in &model.segments {
        let (va, vb) = seg.value_range();
        for &level in &model.levels {
            if level > va && level < vb {
                level_points.push(model.invert(seg, level)?);
            }
        }
    }
    let mut level_fixity = 0.0f64;
    for u in level_points {
        let v = model.f.eval1(u)?;
        let level = model
            .levels
            .iter()
            .copied()
            .min_by(|x, y| (x - v).abs().total_cmp(&(y - v).abs()))
            .expect("levels");
        level_fixity = level_fixity.max((model.f.eval1(lift.apply(u)?)? - level).abs());
    }
    if residual > GLOBAL_TOL {
        return Err(Error::Validation {
            what: "phi o f = f o h on the model grid".into(),
            residual,
            tolerance: GLOBAL_TOL,
        });
    }
    Ok((
        lift,
        GlobalLiftReport {
            residual,
            level_fixity,
            windows,
            points: n,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(t: &str) -> SmoothExpr {
        SmoothExpr::parse(t, 1).unwrap()
    }

    fn disk(per_axis: usize) -> LiftProblem {
        LiftProblem::new(
            SmoothExpr::parse("x^2 + y^2", 2).unwrap(),
            VectorFieldExpr::parse("x/2; y/2").unwrap(),
            e1("x"),
            vec![(-1.0, 1.0); 2],
        )
        .unwrap()
        .with_grid(per_axis)
    }

    #[test]
    fn semiconjugacy_examples() {
        let p = disk(11);
        assert!(semiconjugacy_residual(&p, 1.0).unwrap() <= 1e-8);
        assert_eq!(semiconjugacy_residual(&p, 0.0).unwrap(), 0.0);
        let mut wrong = p.clone();
        wrong.field = VectorFieldExpr::parse("x; y").unwrap();
        assert!(wrong.validate().is_err());
        assert!(semiconjugacy_residual(&wrong, 1.0).unwrap() >= 0.1);
    }

    #[test]
    fn scaling_lift() {
        let p = disk(21);
        let (lift, rep) = lift_diffeo(&p, &Diffeo1D::parse("2*x").unwrap()).unwrap();
        assert!(rep.residual <= 1e-8, "{rep:?}");
        assert!(rep.embedding_margin > 0.0);
        let h = lift.apply(&[0.3, -0.4]).unwrap();
        let r2 = 2f64.sqrt();
        assert!((h[0] - 0.3 * r2).abs() < 1e-8 && (h[1] + 0.4 * r2).abs() < 1e-8);
    }

    #[test]
    fn identity_lifts_to_identity() {
        let p = disk(9);
        let (lift, _) = lift_diffeo(&p, &Diffeo1D::identity()).unwrap();
        for x in p.points() {
            assert_eq!(lift.apply(&x).unwrap(), x);
        }
    }

    #[test]
    fn regular_germ_lift_is_phi() {
        let p = LiftProblem::new(e1("x"), VectorFieldExpr::parse("x").unwrap(), e1("x"), vec![(-1.0, 1.0)])
            .unwrap()
            .with_grid(41);
        let phi = Diffeo1D::parse("x + x^2/4").unwrap();
        let (lift, rep) = lift_diffeo(&p, &phi).unwrap();
        assert!(rep.residual <= 1e-7);
        for x in [-0.9, -0.2, 0.0, 0.5, 1.0] {
            assert!((lift.apply(&[x]).unwrap()[0] - phi.value(x).unwrap()).abs() <= 1e-7);
        }
    }

    #[test]
    fn homomorphism_examples() {
        let p = disk(11);
        let d = |t: &str| Diffeo1D::parse(t).unwrap();
        assert!(lift_homomorphism_residual(&p, &d("2*x"), &d("3*x")).unwrap() <= 1e-7);
        assert!(lift_homomorphism_residual(&p, &d("2*x"), &d("x")).unwrap() <= 1e-9);
        assert!(lift_homomorphism_residual(&p, &d("x/2"), &d("2*x")).unwrap() <= 1e-7);
    }

    #[test]
    fn shipped_model_shape() {
        let m = ModelFunction1D::one_minimum();
        assert_eq!(m.levels, vec![1.0, 2.0, 3.0]);
        assert_eq!(m.segments.len(), 3);
        assert!((m.f.eval1(m.domain.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_model_lift_is_phi() {
        let m = ModelFunction1D::new(e1("x"), (1.0, 2.0), vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let phi = Diffeo1D::parse("x + (x - 1)*(x - 2)/5").unwrap();
        let (lift, rep) = lift_global_1d(&m, &phi, 101).unwrap();
        assert!(rep.residual <= 1e-8);
        for u in [1.0, 1.1, 1.5, 1.9, 2.0] {
            assert!((lift.apply(u).unwrap() - phi.value(u).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn one_minimum_model_glues() {
        let m = ModelFunction1D::one_minimum();
        let phi = Diffeo1D::parse("x + (x - 1)*(x - 2)*(x - 3)/100").unwrap();
        let (_, rep) = lift_global_1d(&m, &phi, 201).unwrap();
        assert!(rep.residual <= 1e-6, "{rep:?}");
        assert!(rep.coherency() <= 1e-6, "{rep:?}");
        assert!(rep.level_fixity <= 1e-8, "{rep:?}");
        let (lift, rep) = lift_global_1d(&m, &Diffeo1D::identity(), 51).unwrap();
        assert!(rep.residual == 0.0 || rep.residual < 1e-12);
        assert!((lift.apply(0.3).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn moved_level_is_rejected() {
        let m = ModelFunction1D::one_minimum();
        let phi = Diffeo1D::parse("x + (x - 1)*(x - 3)/100").unwrap();
        assert!(matches!(
            lift_global_1d(&m, &phi, 11),
            Err(Error::ExceptionalValueMoved { level, .. }) if level == 2.0
        ));
    }
}
