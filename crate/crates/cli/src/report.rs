//! Structured reports: ordered `key: value` lines and tables, or the same data as JSON.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub enum Val {
    Str(String),
    Num(f64),
    Int(i64),
    Bool(bool),
    List(Vec<Val>),
    Table { columns: Vec<&'static str>, rows: Vec<Vec<Val>> },
}

impl From<&str> for Val {
    fn from(s: &str) -> Val {
        Val::Str(s.to_string())
    }
}
impl From<String> for Val {
    fn from(s: String) -> Val {
        Val::Str(s)
    }
}
impl From<f64> for Val {
    fn from(x: f64) -> Val {
        Val::Num(x)
    }
}
impl From<usize> for Val {
    fn from(x: usize) -> Val {
        Val::Int(x as i64)
    }
}
impl From<i64> for Val {
    fn from(x: i64) -> Val {
        Val::Int(x)
    }
}
impl From<u32> for Val {
    fn from(x: u32) -> Val {
        Val::Int(x.into())
    }
}
impl From<bool> for Val {
    fn from(b: bool) -> Val {
        Val::Bool(b)
    }
}
impl From<Vec<f64>> for Val {
    fn from(v: Vec<f64>) -> Val {
        Val::List(v.into_iter().map(Val::Num).collect())
    }
}

impl From<Vec<Val>> for Val {
    fn from(v: Vec<Val>) -> Val {
        Val::List(v)
    }
}

/// C's `%.12e`: twelve mantissa digits and an exponent of at least two digits.
pub fn fmt_e(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

impl Val {
    fn text(&self) -> String {
        match self {
            Val::Str(s) => s.clone(),
            Val::Num(x) => fmt_e(*x),
            Val::Int(i) => i.to_string(),
            Val::Bool(b) => b.to_string(),
            Val::List(v) => v.iter().map(Val::text).collect::<Vec<_>>().join(", "),
            Val::Table { .. } => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Val::Str(s) => json!(s),
            Val::Num(x) if x.is_finite() => json!(x),
            Val::Num(_) => Value::Null,
            Val::Int(i) => json!(i),
            Val::Bool(b) => json!(b),
            Val::List(v) => Value::Array(v.iter().map(Val::json).collect()),
            Val::Table { columns, rows } => Value::Array(
                rows.iter()
                    .map(|r| {
                        let mut m = Map::new();
                        for (c, v) in columns.iter().zip(r) {
                            m.insert((*c).to_string(), v.json());
                        }
                        Value::Object(m)
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    entries: Vec<(String, Val)>,
}

impl Report {
    pub fn new(command: &str) -> Report {
        let mut r = Report::default();
        r.put("command", command);
        r
    }

    pub fn put(&mut self, key: impl Into<String>, v: impl Into<Val>) -> &mut Report {
        self.entries.push((key.into(), v.into()));
        self
    }

    pub fn table(&mut self, key: &str, columns: Vec<&'static str>, rows: Vec<Vec<Val>>) -> &mut Report {
        self.entries.push((key.into(), Val::Table { columns, rows }));
        self
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            match v {
                Val::Table { columns, rows } => {
                    out.push_str(&format!("{k}: {} rows\n", rows.len()));
                    out.push_str(&format!("  {}\n", columns.join(" ")));
                    for r in rows {
                        let cells: Vec<String> = r.iter().map(Val::text).collect();
                        out.push_str(&format!("  {}\n", cells.join(" ")));
                    }
                }
                _ => out.push_str(&format!("{k}: {}\n", v.text())),
            }
        }
        out
    }

    pub fn render_json(&self) -> String {
        let mut m = Map::new();
        for (k, v) in &self.entries {
            m.insert(k.clone(), v.json());
        }
        serde_json::to_string_pretty(&Value::Object(m)).expect("serialisable") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(fmt_e(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e(-0.00123), "-1.230000000000e-03");
        assert_eq!(fmt_e(6.02e123), "6.020000000000e+123");
        assert_eq!(fmt_e(0.0), "0.000000000000e+00");
    }

    #[test]
    fn table_text_and_json_agree() {
        let mut r = Report::new("t");
        r.put("x", 0.5).table("rows", vec!["a", "b"], vec![vec![1.0.into(), 2usize.into()]]);
        assert_eq!(
            r.render_text(),
            "command: t\nx: 5.000000000000e-01\nrows: 1 rows\n  a b\n  1.000000000000e+00 2\n"
        );
        let v: Value = serde_json::from_str(&r.render_json()).unwrap();
        assert_eq!(v["rows"][0]["b"], json!(2));
    }
}
