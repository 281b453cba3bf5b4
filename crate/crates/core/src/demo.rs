//! A non-decreasing function with two flat critical points `a = 0 < b = 1`, and a family
//! `g = phi o f o h^{-1}` in its orbit whose critical value at `h(a)` is pushed next to
//! `f(b)` while `h(a)` slides toward `b`.
//!
//! The table reports, per member of the family, where the critical points of `g` sit,
//! their values, the distance of the value pair from `(f(a), f(b))`, and the sampled sup
//! distance `|g - f|` over `[-1, 2]`. The map sending a function to its ordered critical
//! values does not follow the family back to `f`.

use crate::diffeo::Diffeo1D;
use crate::error::Result;
use crate::expr::SmoothExpr;
use crate::numeric::{integrate_with, QuadOptions};
use crate::section::InterpolatingDiffeo;

/// `f' = flatexp(x) * flatexp(x - 1)`, `f(0) = 0`.
pub const DEMO_DERIVATIVE: &str = "flatexp(x)*flatexp(x - 1)";

#[derive(Debug, Clone)]
pub struct DemoRow {
    pub delta: f64,
    /// `h(a)`; `h(b) = b` throughout.
    pub moved_point: f64,
    /// `g(h(a)) = phi(f(a))`.
    pub value_a: f64,
    /// `g(b) = f(b)`.
    pub value_b: f64,
    /// Euclidean distance of `(g(h(a)), g(b))` from `(f(a), f(b))`.
    pub value_distance: f64,
    /// `max |g - f|` over the sample grid.
    pub sup_distance: f64,
}

struct Demo {
    derivative: SmoothExpr,
}

impl Demo {
    fn new() -> Demo {
        Demo {
            derivative: SmoothExpr::parse(DEMO_DERIVATIVE, 1).expect("valid"),
        }
    }

    fn value(&self, x: f64) -> Result<f64> {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_intervals: 2000,
        };
        Ok(integrate_with(|t| self.derivative.eval1(t), 0.0, x, opts)?.value)
    }
}

/// `f` itself, by quadrature of its derivative.
pub fn demo_function(x: f64) -> Result<f64> {
    Demo::new().value(x)
}

/// Rows for `delta = 2^{-1}, ..., 2^{-steps}` with `samples` grid points for the sup distance.
pub fn discontinuity_table(steps: usize, samples: usize) -> Result<Vec<DemoRow>> {
    let f = Demo::new();
    let (fa, fb) = (f.value(0.0)?, f.value(1.0)?);
    let gap = fb - fa;
    let samples = samples.max(2);
    let xs: Vec<f64> = (0..samples)
        .map(|j| -1.0 + 3.0 * j as f64 / (samples - 1) as f64)
        .collect();
    let fx: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(steps);
    for k in 1..=steps {
        let delta = 0.5f64.powi(k as i32);
        // Source: in the coordinate u = x + 1, fix 2 (= b) and send 1 (= a) to 2 - delta.
        let h = InterpolatingDiffeo::new(&[2.0 - delta, 2.0])?.into_diffeo();
        let shift = Diffeo1D::parse("x + 1")?;
        let unshift = Diffeo1D::parse("x - 1")?;
        let h = unshift.compose(&h).compose(&shift);
        let h_inv = h.inverse();
        // Target: in the coordinate v = 1 + (y - f(a)) / gap, fix 2 and send 1 to 2 - delta.
        let phi = InterpolatingDiffeo::new(&[2.0 - delta, 2.0])?;
        let to_v = |y: f64| 1.0 + (y - fa) / gap;
        let from_v = |v: f64| fa + (v - 1.0) * gap;
        let g = |x: f64| -> Result<f64> { Ok(from_v(phi.value(to_v(f.value(h_inv.value(x)?)?))?)) };
        let mut sup = 0.0f64;
        for (x, fxv) in xs.iter().zip(&fx) {
            sup = sup.max((g(*x)? - fxv).abs());
        }
        let value_a = from_v(phi.value(to_v(fa))?);
        rows.push(DemoRow {
            delta,
            moved_point: h.value(0.0)?,
            value_a,
            value_b: fb,
            value_distance: (value_a - fa).hypot(0.0),
            sup_distance: sup,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape() {
        let rows = discontinuity_table(3, 31).unwrap();
        assert_eq!(rows.len(), 3);
        let fb = demo_function(1.0).unwrap();
        for r in &rows {
            assert!((r.moved_point - (1.0 - r.delta)).abs() < 1e-6);
            assert!((r.value_b - fb).abs() < 1e-15);
            assert!(r.value_a < fb && r.value_a > 0.0, "{r:?} {fb}");
            assert!(r.value_distance > 0.4 * fb);
        }
    }
}
