//! Browser bindings: Jacobi membership, the line section table, and split/parity on the
//! circle configuration space. Each operation returns a JSON string; the plain `*_json`
//! functions carry the logic so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use jacobiflow::confspace::{
    canonical_rotation, component_check, parse_rational_coords, shift_parity, split, ConfigPoint,
};
use jacobiflow::jacobi::solve_membership;
use jacobiflow::section::{section_line, table};
use jacobiflow::series::{pretty, TruncSeries};
use jacobiflow::SmoothExpr;

/// Largest truncation degree offered in the page; keeps the exact solve interactive.
pub const MAX_DEGREE: u32 = 16;
pub const MAX_POINTS: usize = 2000;

#[derive(Serialize)]
struct Membership {
    status: &'static str,
    witness: Vec<String>,
    residual: String,
}

pub fn jacobi_check_json(expr: &str, vars: u32, degree: u32) -> Result<String, String> {
    if !(1..=9).contains(&vars) {
        return Err("vars must be between 1 and 9".into());
    }
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(format!("degree must be between 1 and {MAX_DEGREE}"));
    }
    let f = SmoothExpr::parse(expr, vars as usize).map_err(|e| e.to_string())?;
    let s = TruncSeries::from_expr(&f, degree).map_err(|e| e.to_string())?;
    let r = solve_membership(&s).map_err(|e| e.to_string())?;
    let out = Membership {
        status: r.status.as_str(),
        witness: r.witness.iter().flatten().map(pretty).collect(),
        residual: pretty(&r.residual),
    };
    Ok(serde_json::to_string(&out).expect("serialisable"))
}

#[derive(Serialize)]
struct SectionTable {
    nodes: Vec<f64>,
    t: Vec<f64>,
    phi: Vec<f64>,
    delta: Vec<f64>,
}

/// `inner` holds `x_2, ..., x_{n-1}` comma separated; the table spans `[0, n + 1]`.
pub fn section_line_json(n: usize, inner: &str, points: usize) -> Result<String, String> {
    if !(2..=12).contains(&n) {
        return Err("n must be between 2 and 12".into());
    }
    let inner: Vec<f64> = inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<_, _>>()?;
    let phi = section_line(n, &inner).map_err(|e| e.to_string())?;
    let rows = table(&phi, 0.0, (n + 1) as f64, points.clamp(1, MAX_POINTS)).map_err(|e| e.to_string())?;
    let mut nodes = vec![1.0];
    nodes.extend(&inner);
    nodes.push(n as f64);
    let out = SectionTable {
        nodes,
        t: rows.iter().map(|r| r[0]).collect(),
        phi: rows.iter().map(|r| r[1]).collect(),
        delta: rows.iter().map(|r| r[2]).collect(),
    };
    Ok(serde_json::to_string(&out).expect("serialisable"))
}

#[derive(Serialize)]
struct Configuration {
    point: String,
    component: bool,
    split: Option<String>,
    canonical_rotation: String,
    /// Orientation behaviour of the cyclic shift by `d`.
    parity: &'static str,
}

/// Exact rational coordinates on the circle of length `n = coords.len()`.
pub fn confspace_json(coords: &str, d: i64) -> Result<String, String> {
    let coords = parse_rational_coords(coords).map_err(|e| e.to_string())?;
    let n = coords.len();
    let p = ConfigPoint::new(coords).map_err(|e| e.to_string())?;
    let out = Configuration {
        point: p.to_string(),
        component: component_check(&p),
        split: split(&p).ok().map(|s| s.to_string()),
        canonical_rotation: canonical_rotation(&p).to_string(),
        parity: shift_parity(n, d).as_str(),
    };
    Ok(serde_json::to_string(&out).expect("serialisable"))
}

#[wasm_bindgen]
pub fn jacobi_check(expr: &str, vars: u32, degree: u32) -> Result<String, JsError> {
    jacobi_check_json(expr, vars, degree).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn section_line_table(n: usize, inner: &str, points: usize) -> Result<String, JsError> {
    section_line_json(n, inner, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn confspace(coords: &str, d: i64) -> Result<String, JsError> {
    confspace_json(coords, d).map_err(|e| JsError::new(&e))
}
