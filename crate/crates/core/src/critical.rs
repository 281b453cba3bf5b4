//! Zero isolation for derivatives of one-variable expressions.
//!
//! Zeros are located on the multiplicative factors of the expression tree
//! (`a*b`, `a^k`, `-a`, numerators, and the argument of `flatexp`) so that flat
//! zeros such as those of `flatexp(sin(1/x)^2)` show up as sign changes of
//! `sin(1/x)`. A second-derivative probe catches touching zeros of factors
//! that cannot be split further.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Func, Node, SmoothExpr};
use crate::numeric::bisect;

/// Sub-expressions whose zero set covers the zero set of `e` (arity 1).
pub fn zero_factors(e: &SmoothExpr) -> Vec<SmoothExpr> {
    fn walk(n: &Arc<Node>, out: &mut Vec<Arc<Node>>) {
        match &**n {
            Node::Num(..) => {}
            Node::Mul(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Node::Div(a, _) | Node::Neg(a) => walk(a, out),
            Node::Pow(a, k) => {
                if *k > 0 {
                    walk(a, out)
                }
            }
            Node::Call(Func::Exp, _) => {}
            Node::Call(Func::Flat { .. }, u) => walk(u, out),
            _ => {
                if !out.iter().any(|m| m == n) {
                    out.push(n.clone())
                }
            }
        }
    }
    let mut nodes = Vec::new();
    walk(e.node(), &mut nodes);
    nodes
        .into_iter()
        .map(|n| SmoothExpr::from_node(e.arity(), n))
        .collect()
}

fn value(e: &SmoothExpr, x: f64) -> Option<f64> {
    e.eval_fast(&[x])
}

/// Roots of `g` in `[lo, hi]` found as sign changes on `samples` equal cells, refined by bisection.
pub fn sign_change_roots(g: &SmoothExpr, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
    let mut roots = Vec::new();
    let xs: Vec<f64> = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| value(g, x)).collect();
    for k in 0..samples {
        let (Some(a), Some(b)) = (vals[k], vals[k + 1]) else {
            continue;
        };
        if a == 0.0 {
            roots.push(xs[k]);
            continue;
        }
        if a.signum() != b.signum() && b != 0.0 {
            let xtol = 1e-15 * xs[k].abs().max(xs[k + 1].abs()).max(1e-300);
            let r = bisect(
                |x| {
                    value(g, x).ok_or_else(|| {
                        Error::RootIsolation(format!("factor `{}` undefined at {}", g, x))
                    })
                },
                xs[k],
                xs[k + 1],
                xtol,
            )?;
            roots.push(r);
        }
    }
    if let Some(last) = vals[samples] {
        if last == 0.0 {
            roots.push(xs[samples]);
        }
    }
    Ok(roots)
}

/// Touching zeros of `g`: sign changes of `g'` where `|g|` is (numerically) zero.
fn touching_roots(g: &SmoothExpr, lo: f64, hi: f64, samples: usize, tol: f64) -> Result<Vec<f64>> {
    let dg = g.derive(0)?;
    let candidates = sign_change_roots(&dg, lo, hi, samples)?;
    let scale = (0..=8)
        .filter_map(|k| value(g, lo + (hi - lo) * k as f64 / 8.0))
        .fold(1.0f64, |a, v| a.max(v.abs()));
    Ok(candidates
        .into_iter()
        .filter(|&c| value(g, c).is_some_and(|v| v.abs() <= tol * scale))
        .collect())
}

/// Critical points of `f` (arity 1) in `[lo, hi]`, sorted and de-duplicated.
pub fn critical_points(f: &SmoothExpr, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
    let df = f.derive(0)?;
    if df.is_zero() {
        return Err(Error::RootIsolation(format!(
            "`{}` is constant; every point is critical",
            f
        )));
    }
    let mut roots = Vec::new();
    for factor in zero_factors(&df) {
        roots.extend(sign_change_roots(&factor, lo, hi, samples)?);
        roots.extend(touching_roots(&factor, lo, hi, samples, 1e-9)?);
    }
    roots.retain(|r| (lo..=hi).contains(r));
    roots.sort_by(f64::total_cmp);
    let width = (hi - lo).abs().max(1e-300);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * width);
    Ok(roots)
}
