//! Polynomial (Richardson/Neville) extrapolation to a zero parameter.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Limit {
    pub value: f64,
    pub error: f64,
}

/// Extrapolates samples `(h_i, v_i)` to `h = 0` through Neville's tableau.
/// The error estimate is the gap between the two highest-order diagonal entries.
pub fn neville_at_zero(hs: &[f64], vs: &[f64]) -> Result<Limit> {
    if hs.len() != vs.len() || hs.len() < 2 {
        return Err(Error::Extrapolation("need at least two samples".into()));
    }
    let n = hs.len();
    let mut p = vs.to_vec();
    let mut prev_top = p[n - 1];
    let mut top = p[n - 1];
    for k in 1..n {
        for i in 0..n - k {
            let denom = hs[i] - hs[i + k];
            if denom == 0.0 {
                return Err(Error::Extrapolation("repeated sample abscissa".into()));
            }
            p[i] = (-hs[i + k] * p[i] + hs[i] * p[i + 1]) / denom;
        }
        prev_top = top;
        top = p[0];
    }
    if !top.is_finite() {
        return Err(Error::Extrapolation("non-finite extrapolant".into()));
    }
    Ok(Limit {
        value: top,
        error: (top - prev_top).abs(),
    })
}

/// Dyadic steps `2^{-first}, ..., 2^{-(first+count-1)}`.
pub fn dyadic(first: i32, count: usize) -> Vec<f64> {
    (0..count as i32).map(|j| 2f64.powi(-(first + j))).collect()
}

/// Two-sided limit of `g` at `x0` from six dyadic samples on each side.
/// Fails when either side does not settle or the sides disagree by more than `tol`.
pub fn two_sided_limit<F>(mut g: F, x0: f64, scale: f64, tol: f64) -> Result<Limit>
where
    F: FnMut(f64) -> Result<f64>,
{
    let hs = dyadic(3, 6);
    let mut side = |sign: f64| -> Result<Limit> {
        let vs = hs
            .iter()
            .map(|h| g(x0 + sign * scale * h))
            .collect::<Result<Vec<_>>>()?;
        let signed: Vec<f64> = hs.iter().map(|h| sign * h).collect();
        neville_at_zero(&signed, &vs)
    };
    let right = side(1.0)?;
    let left = side(-1.0)?;
    let gap = (right.value - left.value).abs();
    let error = right.error.max(left.error).max(gap);
    let level = tol * (1.0 + right.value.abs());
    if gap > level {
        return Err(Error::Extrapolation(format!(
            "one-sided limits disagree: {:e} vs {:e}",
            left.value, right.value
        )));
    }
    if right.error.max(left.error) > level {
        return Err(Error::Extrapolation(format!(
            "limit did not settle (estimate {:e})",
            right.error.max(left.error)
        )));
    }
    Ok(Limit {
        value: 0.5 * (right.value + left.value),
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_derivative_of_exp() {
        let hs = dyadic(2, 6);
        let vs: Vec<f64> = hs.iter().map(|h| (h.exp() - 1.0) / h).collect();
        let l = neville_at_zero(&hs, &vs).unwrap();
        assert!((l.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_sided_sinc() {
        let l = two_sided_limit(|x| Ok(x.sin() / x), 0.0, 1.0, 1e-6).unwrap();
        assert!((l.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jump_is_rejected() {
        let r = two_sided_limit(|x| Ok(if x > 0.0 { 1.0 } else { 0.0 }), 0.0, 1.0, 1e-6);
        assert!(matches!(r, Err(Error::Extrapolation(_))));
    }
}
