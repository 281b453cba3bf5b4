//! Classical RK4 with global step doubling and a Richardson error estimate.

use crate::error::{DomainKind, Error, Result};

#[derive(Debug, Clone)]
pub struct OdeOptions {
    /// Target for the Richardson estimate `|y_{2n} - y_n| / 15`, relative to `max(1, |y|)`.
    pub tol: f64,
    pub initial_steps: usize,
    pub max_steps: usize,
    /// Optional box `[lo_i, hi_i]` the trajectory must stay inside.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            tol: 1e-10,
            initial_steps: 8,
            max_steps: 1 << 18,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub state: Vec<f64>,
    pub error: f64,
    pub steps: usize,
}

fn fixed_steps<F>(field: &mut F, x0: &[f64], t: f64, n: usize, bounds: Option<&[(f64, f64)]>) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    let m = x0.len();
    let h = t / n as f64;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let fail = || Error::Domain {
        expr: "vector field".into(),
        kind: DomainKind::NonFinite,
    };
    for step in 0..n {
        if !field(&y, &mut k1) {
            return Err(fail());
        }
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        if !field(&tmp, &mut k2) {
            return Err(fail());
        }
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        if !field(&tmp, &mut k3) {
            return Err(fail());
        }
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        if !field(&tmp, &mut k4) {
            return Err(fail());
        }
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrajectoryExit {
                t: h * (step + 1) as f64,
            });
        }
        if let Some(b) = bounds {
            if y.iter().zip(b).any(|(v, (lo, hi))| v < lo || v > hi) {
                return Err(Error::TrajectoryExit {
                    t: h * (step + 1) as f64,
                });
            }
        }
    }
    Ok(y)
}

/// Integrates `y' = field(y)` from `x0` for time `t` (either sign).
/// `field` writes the derivative and returns `false` when it cannot be evaluated.
pub fn integrate<F>(mut field: F, x0: &[f64], t: f64, opts: &OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
{
    if t == 0.0 {
        return Ok(OdeSolution {
            state: x0.to_vec(),
            error: 0.0,
            steps: 0,
        });
    }
    let bounds = opts.bounds.as_deref();
    if let Some(b) = bounds {
        if x0.iter().zip(b).any(|(v, (lo, hi))| v < lo || v > hi) {
            return Err(Error::TrajectoryExit { t: 0.0 });
        }
    }
    let mut n = opts.initial_steps.max(1);
    let mut coarse = fixed_steps(&mut field, x0, t, n, bounds)?;
    let mut estimate = f64::INFINITY;
    while 2 * n <= opts.max_steps {
        n *= 2;
        let fine = fixed_steps(&mut field, x0, t, n, bounds)?;
        let scale = fine.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        estimate = fine
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (a - b).abs() / 15.0)
            .fold(0.0, f64::max);
        if estimate <= opts.tol * scale {
            let state = fine
                .iter()
                .zip(&coarse)
                .map(|(f, c)| f + (f - c) / 15.0)
                .collect();
            return Ok(OdeSolution {
                state,
                error: estimate,
                steps: n,
            });
        }
        coarse = fine;
    }
    Err(Error::StepUnderflow {
        tolerance: opts.tol,
        estimate,
    })
}
