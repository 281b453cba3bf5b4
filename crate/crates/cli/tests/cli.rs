use std::io::Write;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jacobiflow"));
    cmd.args(args).env_remove("JACOBIFLOW_TOL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("{key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

#[test]
fn jacobi_check_member_with_witness() {
    let o = run(&["jacobi", "check", "--expr", "x^2+y^2", "--vars", "2", "--degree", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(field(&s, "status"), "member");
    assert_eq!(field(&s, "witness_1"), "1/2*x1");
    assert_eq!(field(&s, "witness_2"), "1/2*x2");
    assert_eq!(field(&s, "residual"), "0");
}

#[test]
fn jacobi_check_zero_vars_is_usage_error() {
    let o = run(&["jacobi", "check", "--expr", "x^2", "--vars", "0", "--degree", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn jacobi_check_power_and_non_member() {
    let o = run(&["jacobi", "check", "--expr", "x^2", "--vars", "1", "--degree", "8", "--power", "2"]);
    assert_eq!(field(&stdout(&o), "status"), "member");
    // x^5 + y^5 + x^2 y^2 is not quasi-homogeneous, so not in its own Jacobi ideal.
    let o = run(&["jacobi", "check", "--expr", "x^5 + y^5 + x^2*y^2", "--vars", "2", "--degree", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(field(&s, "status"), "non_member_up_to_N");
    assert_ne!(field(&s, "residual"), "0");
}

#[test]
fn nonzero_constant_is_rejected() {
    let o = run(&["jacobi", "check", "--expr", "1 + x", "--vars", "1", "--degree", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("constant"));
}

#[test]
fn confspace_examples() {
    let s = stdout(&run(&["confspace", "split", "--n", "3", "--coords", "1,2,0"]));
    assert_eq!(field(&s, "split"), "(1, 2; [0])");
    let s = stdout(&run(&["confspace", "split", "--n", "2", "--coords", "1/2,3/2"]));
    assert_eq!(field(&s, "split"), "(1; [3/2])");
    let o = run(&["confspace", "split", "--n", "3", "--coords", "2,1,1/2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(field(&stdout(&o), "component"), "false");
    for (n, d, want) in [("2", "1", "reverses"), ("3", "1", "preserves"), ("4", "2", "preserves")] {
        let s = stdout(&run(&["confspace", "parity", "--n", n, "--d", d]));
        assert_eq!(field(&s, "parity"), want);
        assert_eq!(field(&s, "agree"), "true");
    }
}

#[test]
fn exceptional_examples() {
    let vals = |e: &str, a: &str, b: &str| {
        field(&stdout(&run(&["exceptional", "--expr", e, "--interval", a, b])), "values").to_string()
    };
    assert_eq!(vals("x", "0", "1"), "0.000000000000e+00, 1.000000000000e+00");
    assert_eq!(vals("x^2", "-1", "1"), "0.000000000000e+00, 1.000000000000e+00");
    assert_eq!(vals("x^3-3*x", "-2", "2"), "-2.000000000000e+00, 2.000000000000e+00");
}

#[test]
fn section_tables() {
    let o = run(&["section", "line", "--n", "4", "--x", "2.5,3", "--points", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(field(&s, "phi"), "11 rows");
    assert!(s.contains("  t phi delta\n"));
    let o = run(&["section", "circle", "--n", "3", "--x", "0.8,2.1", "--shift", "1.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "split_base"), "1.250000000000e+00");
    let o = run(&["section", "line", "--n", "4", "--x", "3,2.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flow_commands() {
    let s = stdout(&run(&["flow", "shift", "--alpha", "x^2", "--phi", "x/(1 - x)", "--interval", "-0.5", "0.5"]));
    assert_eq!(field(&s, "sigma_at_zero"), "1.000000000000e+00");
    assert_eq!(field(&s, "verified"), "true");
    let s = stdout(&run(&["flow", "factor", "--alpha", "x^2", "--s", "0", "--t", "0.5"]));
    assert!(field(&s, "c").starts_with("1.00000000") || field(&s, "c").starts_with("9.99999999"));
    let o = run(&["flow", "shift", "--alpha", "x", "--phi", "x + 0.1", "--interval", "-1", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lift_local_and_tolerance_override() {
    let args = [
        "lift", "local", "--f", "x^2 + y^2", "--field", "x/2; y/2", "--alpha", "x", "--phi", "3*x", "--box", "-1,1",
        "--grid", "21",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "verified"), "true");
    let o = run_env(&args, &[("JACOBIFLOW_TOL", "1e-30")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(field(&stdout(&o), "tolerance"), "1.000000000000e-30");
    let o = run_env(&args, &[("JACOBIFLOW_TOL", "-1")]);
    assert_eq!(o.status.code(), Some(2));
    // The wrong field breaks the semi-conjugacy and is reported as a failed verification.
    let mut bad = args;
    bad[5] = "x; y";
    assert_eq!(run(&bad).status.code(), Some(1));
}

#[test]
fn lift_global_with_model_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "expr = \"x\"\ndomain = [1.0, 2.0]\nlevels = [1.0, 2.0]").unwrap();
    let path = file.path().to_str().unwrap();
    let o = run(&["lift", "global", "--model", path, "--phi", "x + (x - 1)*(x - 2)/5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "verified"), "true");
    // A diffeomorphism moving an exceptional level cannot be lifted.
    let o = run(&["lift", "global", "--model", path, "--phi", "x + 1/10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["lift", "global", "--model", "/nonexistent/model.toml", "--phi", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_mirrors_text() {
    let args = ["section", "circle", "--n", "3", "--x", "0.8,2.1", "--shift", "1.25", "--points", "6"];
    let text = stdout(&run(&args));
    let mut with_json = args.to_vec();
    with_json.push("--json");
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&with_json))).unwrap();
    assert_eq!(v["command"], "section circle");
    assert_eq!(v["phi"].as_array().unwrap().len(), 7);
    let base = v["split_base"].as_f64().unwrap();
    assert_eq!(field(&text, "split_base").parse::<f64>().unwrap(), (base * 1e12).round() / 1e12);
}

#[test]
fn reports_are_deterministic() {
    let args = ["demo", "discontinuity", "--steps", "3", "--samples", "41"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(field(&stdout(&a), "family"), "3 rows");
}

#[test]
fn verify_single_criteria() {
    for k in ["2", "9", "11"] {
        let o = run(&["verify", "all", "--only", k]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert_eq!(field(&stdout(&o), "failed"), "0");
    }
    assert_eq!(run(&["verify", "all", "--only", "12"]).status.code(), Some(2));
}

#[test]
fn lift_global_builtin_model() {
    let o = run(&["lift", "global", "--model", "builtin", "--phi", "x + (x - 1)*(x - 2)*(x - 3)/100", "--grid", "41"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "verified"), "true");
    let missing = run(&["lift", "global", "--model", "/nonexistent/model.toml", "--phi", "x"]);
    assert_eq!(missing.status.code(), Some(2));
}
