mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jacobiflow::confspace::{
    brute_force_parity, canonical_rotation, component_check, evaluation_map, exceptional_values,
    parse_rational_coords, shift_parity, split, ConfigPoint,
};
use jacobiflow::demo::discontinuity_table;
use jacobiflow::diffeo::{Diffeo1D, Domain1D};
use jacobiflow::flow::{flow_factor_c, shift_function, SHIFT_VERIFY_TOL};
use jacobiflow::jacobi::{
    accumulation_obstruction, solve_membership, solve_power_membership, ExprProfile,
    MembershipResult, ObstructionStatus,
};
use jacobiflow::lift::{lift_diffeo, lift_global_1d, LiftProblem, ModelFunction1D, GLOBAL_TOL, LIFT_TOL};
use jacobiflow::section::{section_circle, section_line, table};
use jacobiflow::series::{pretty, TruncSeries};
use jacobiflow::verify::{run_criterion, CRITERIA};
use jacobiflow::{Error, SmoothExpr, VectorFieldExpr};

use report::{Report, Val};

/// Jacobi-ideal membership, shift functions, lifts and interpolating diffeomorphisms.
#[derive(Parser)]
#[command(name = "jacobiflow", version)]
struct Cli {
    /// Emit the report as a JSON object.
    #[arg(long, global = true)]
    json: bool,
    /// Verification tolerance (overrides JACOBIFLOW_TOL and the per-command default).
    #[arg(long, global = true, value_parser = positive)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jacobi-ideal membership of a germ.
    #[command(subcommand)]
    Jacobi(JacobiCmd),
    /// Lifts of value-space diffeomorphisms along a flow.
    #[command(subcommand)]
    Lift(LiftCmd),
    /// Shift functions and flow factors in one variable.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Interpolating diffeomorphisms of the line and circle.
    #[command(subcommand)]
    Section(SectionCmd),
    /// The configuration space of n points on a circle of length n.
    #[command(subcommand)]
    Confspace(ConfCmd),
    /// Boundary and critical values of a function of one variable.
    Exceptional(ExceptionalArgs),
    /// Numerical illustrations without a pass/fail contract.
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Run the built-in acceptance checks.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Subcommand)]
enum JacobiCmd {
    /// Is f (or f^k) in the Jacobi ideal of f, up to degree N?
    Check {
        #[arg(long)]
        expr: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=9))]
        vars: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        degree: u32,
        /// Check f^k instead of f.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        power: Option<u32>,
    },
}

#[derive(Subcommand)]
enum LiftCmd {
    /// Lift phi through f along the field: phi(f(x)) = f(h(x)) on a grid.
    Local {
        #[arg(long)]
        f: String,
        /// Components separated by `;`.
        #[arg(long)]
        field: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        phi: String,
        /// `lo,hi`, once for every axis or once for all of them.
        #[arg(long = "box", required = true, allow_hyphen_values = true)]
        bounds: Vec<String>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Glue a lift for a one-variable model with exceptional levels.
    Global {
        /// TOML model file, or `builtin` for the shipped one-minimum model.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Shift function sigma of phi along alpha d/ds on an interval.
    Shift {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        phi: String,
        #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["A", "B"])]
        interval: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// c(s, t) = (Phi(s, t) - s) / (t alpha(s)), with limits where undefined.
    Factor {
        #[arg(long)]
        alpha: String,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
}

#[derive(Subcommand)]
enum SectionCmd {
    /// Diffeomorphism of the line fixing 1 and n and sending k to x_k.
    Line {
        #[arg(long)]
        n: usize,
        /// Inner values x_2, ..., x_{n-1}, comma separated (empty for n = 2).
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Circle diffeomorphism whose evaluation splits as (x; [shift]).
    Circle {
        #[arg(long)]
        n: usize,
        /// x_2, ..., x_n, comma separated.
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum ConfCmd {
    /// Split a point of the distinguished component into (deltas; [base]).
    Split {
        #[arg(long)]
        n: usize,
        /// Exact rationals, comma separated (e.g. `1,2,0` or `1/2,3/2`).
        #[arg(long, allow_hyphen_values = true)]
        coords: String,
    },
    /// Does the d-fold cyclic shift preserve or reverse orientation?
    Parity {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        d: i64,
    },
}

#[derive(Args)]
struct ExceptionalArgs {
    #[arg(long)]
    expr: String,
    #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["A", "B"], conflicts_with = "circle")]
    interval: Option<Vec<f64>>,
    /// Treat f as a function on the circle of this length.
    #[arg(long)]
    circle: Option<f64>,
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Orbit family along which the ordered critical values jump.
    Discontinuity {
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 301)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Run the acceptance suite.
    All {
        /// Run a single criterion.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=CRITERIA as u64))]
        only: Option<u64>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

/// A failed command: usage problems exit 2, failed verifications exit 1.
enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Validation { .. }
            | Error::EmbeddingViolated { .. }
            | Error::Coherency { .. }
            | Error::NotInComponent => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// The report plus whether everything it checked held.
type Outcome = Result<(Report, bool), Failure>;

struct Ctx {
    tol: Option<f64>,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn env_tol() -> Result<Option<f64>, Failure> {
    match std::env::var("JACOBIFLOW_TOL") {
        Ok(v) => positive(&v)
            .map(Some)
            .map_err(|e| Failure::Usage(format!("JACOBIFLOW_TOL: {e}"))),
        Err(_) => Ok(None),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Failure::Usage(format!("`{t}` is not a number"))))
        .collect()
}

fn jacobi_check(expr: &str, vars: u32, degree: u32, power: Option<u32>) -> Outcome {
    let m = vars as usize;
    let f = SmoothExpr::parse(expr, m)?;
    let mut r = Report::new("jacobi check");
    r.put("expr", expr).put("vars", vars).put("degree", degree);
    if let Some(k) = power {
        r.put("power", k);
    }
    // Flat germs have zero Taylor series; look for a non-formal obstruction first.
    let mut result: Option<MembershipResult> = None;
    if m == 1 && !f.is_polynomial() && power.is_none() {
        if let Ok(profile) = ExprProfile::new(f.clone()) {
            if let Ok(rep) = accumulation_obstruction(&profile, -1.0, 1.0, 1e-6) {
                if rep.status == ObstructionStatus::Obstructed {
                    result = Some(MembershipResult::obstructed(rep, degree));
                }
            }
        }
    }
    let result = match result {
        Some(r) => r,
        None => {
            let s = TruncSeries::from_expr(&f, degree)?;
            match power {
                Some(k) => solve_power_membership(&s, k)?,
                None => solve_membership(&s)?,
            }
        }
    };
    r.put("status", result.status.as_str());
    if let Some(w) = &result.witness {
        for (i, c) in w.iter().enumerate() {
            r.put(format!("witness_{}", i + 1), pretty(c));
        }
    }
    r.put("residual", pretty(&result.residual));
    if let Some(cert) = &result.certificate {
        r.put("shells_searched", cert.shells_searched);
        let rows = cert
            .points
            .iter()
            .map(|p| vec![p.point.into(), p.value.into(), p.derivative.into()])
            .collect();
        r.table("critical_points", vec!["p", "f(p)", "f'(p)"], rows);
    }
    Ok((r, true))
}

fn parse_box(bounds: &[String], m: usize) -> Result<Vec<(f64, f64)>, Failure> {
    let parsed: Vec<(f64, f64)> = bounds
        .iter()
        .map(|b| match parse_list(b)?.as_slice() {
            [lo, hi] if lo < hi => Ok((*lo, *hi)),
            _ => Err(Failure::Usage(format!("box `{b}` must be `lo,hi` with lo < hi"))),
        })
        .collect::<Result<_, _>>()?;
    match parsed.len() {
        1 => Ok(vec![parsed[0]; m]),
        k if k == m => Ok(parsed),
        k => Err(Failure::Usage(format!("{k} boxes for {m} variables"))),
    }
}

fn lift_local(ctx: &Ctx, f: &str, field: &str, alpha: &str, phi: &str, bounds: &[String], grid: usize) -> Outcome {
    let field = VectorFieldExpr::parse(field)?;
    let m = field.arity();
    let problem = LiftProblem::new(
        SmoothExpr::parse(f, m)?,
        field,
        SmoothExpr::parse(alpha, 1)?,
        parse_box(bounds, m)?,
    )?
    .with_grid(grid.max(2));
    let (_, rep) = lift_diffeo(&problem, &Diffeo1D::parse(phi)?)?;
    let tol = ctx.tol(LIFT_TOL);
    let ok = rep.residual <= tol;
    let mut r = Report::new("lift local");
    r.put("f", f)
        .put("phi", phi)
        .put("points", rep.points)
        .put("identity_residual", rep.identity_residual)
        .put("residual", rep.residual)
        .put("embedding_margin", rep.embedding_margin)
        .put("sigma_at_zero", rep.sigma_at_zero.unwrap_or(f64::NAN))
        .put("tolerance", tol)
        .put("verified", ok);
    Ok((r, ok))
}

fn lift_global(ctx: &Ctx, model: &PathBuf, phi: &str, grid: usize) -> Outcome {
    let model = if model.as_os_str() == "builtin" {
        ModelFunction1D::one_minimum()
    } else {
        let text = std::fs::read_to_string(model)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", model.display())))?;
        ModelFunction1D::from_toml(&text)?
    };
    let (_, rep) = lift_global_1d(&model, &Diffeo1D::parse(phi)?, grid.max(2))?;
    let tol = ctx.tol(GLOBAL_TOL);
    let ok = rep.residual <= tol && rep.coherency() <= tol;
    let mut r = Report::new("lift global");
    r.put("phi", phi)
        .put("levels", model.levels.clone())
        .put("points", rep.points)
        .put("residual", rep.residual)
        .put("level_fixity", rep.level_fixity)
        .put("coherency", rep.coherency());
    let rows = rep
        .windows
        .iter()
        .map(|w| vec![w.level.into(), w.side.into(), w.residual.into(), w.samples.into()])
        .collect();
    r.table("windows", vec!["level", "side", "residual", "samples"], rows);
    r.put("tolerance", tol).put("verified", ok);
    Ok((r, ok))
}

fn flow_shift(ctx: &Ctx, alpha: &str, phi: &str, interval: &[f64], points: usize) -> Outcome {
    let sf = shift_function(&Diffeo1D::parse(phi)?, &SmoothExpr::parse(alpha, 1)?, (interval[0], interval[1]))?;
    let residual = sf.max_residual(points.max(2))?;
    let tol = ctx.tol(SHIFT_VERIFY_TOL);
    let ok = residual <= tol;
    let mut r = Report::new("flow shift");
    r.put("alpha", alpha)
        .put("phi", phi)
        .put("interval", vec![interval[0], interval[1]])
        .put("sigma_at_zero", sf.sigma_at_zero);
    let rows = sf
        .table(points.max(1))?
        .into_iter()
        .map(|(s, v)| vec![s.into(), v.into()])
        .collect();
    r.table("sigma", vec!["s", "sigma"], rows);
    r.put("max_residual", residual).put("tolerance", tol).put("verified", ok);
    Ok((r, ok))
}

fn flow_factor(alpha: &str, s: f64, t: f64) -> Outcome {
    let c = flow_factor_c(&SmoothExpr::parse(alpha, 1)?, s, t)?;
    let mut r = Report::new("flow factor");
    r.put("alpha", alpha).put("s", s).put("t", t).put("c", c);
    Ok((r, true))
}

fn section_rows(phi: &Diffeo1D, lo: f64, hi: f64, points: usize) -> Result<Vec<Vec<Val>>, Failure> {
    Ok(table(phi, lo, hi, points)?
        .into_iter()
        .map(|[t, v, d]| vec![t.into(), v.into(), d.into()])
        .collect())
}

fn section_line_cmd(ctx: &Ctx, n: usize, x: &str, points: usize) -> Outcome {
    let inner = parse_list(x)?;
    let phi = section_line(n, &inner)?;
    let mut want = vec![1.0];
    want.extend(&inner);
    want.push(n as f64);
    let mut defect = 0.0f64;
    for (k, w) in want.iter().enumerate() {
        defect = defect.max((phi.value((k + 1) as f64)? - w).abs());
    }
    let tol = ctx.tol(1e-6);
    let ok = defect <= tol;
    let mut r = Report::new("section line");
    r.put("n", n).put("x", want);
    r.table("phi", vec!["t", "phi", "delta"], section_rows(&phi, 0.0, (n + 1) as f64, points)?);
    r.put("interpolation_defect", defect).put("tolerance", tol).put("verified", ok);
    Ok((r, ok))
}

fn section_circle_cmd(ctx: &Ctx, n: usize, x: &str, shift: f64, points: usize) -> Outcome {
    let xs = parse_list(x)?;
    let phi = section_circle(n, &xs, shift)?;
    let sp = split(&evaluation_map(&phi, n)?)?;
    let nf = n as f64;
    let mut defect = 0.0f64;
    for (d, w) in sp.deltas.iter().zip(&xs) {
        defect = defect.max((d - w).abs());
    }
    let db = (sp.base - shift).rem_euclid(nf);
    defect = defect.max(db.min(nf - db));
    let tol = ctx.tol(1e-6);
    let ok = defect <= tol;
    let mut r = Report::new("section circle");
    r.put("n", n).put("x", xs).put("shift", shift);
    r.table("phi", vec!["t", "phi", "delta"], section_rows(&phi, 0.0, nf, points)?);
    r.put("split_deltas", sp.deltas.clone())
        .put("split_base", sp.base)
        .put("split_defect", defect)
        .put("tolerance", tol)
        .put("verified", ok);
    Ok((r, ok))
}

fn confspace_split(n: usize, coords: &str) -> Outcome {
    let coords = parse_rational_coords(coords)?;
    if coords.len() != n {
        return Err(Failure::Usage(format!("{} coordinates for n = {n}", coords.len())));
    }
    let p = ConfigPoint::new(coords)?;
    let mut r = Report::new("confspace split");
    r.put("n", n).put("point", p.to_string());
    let inside = component_check(&p);
    r.put("component", inside)
        .put("canonical_rotation", canonical_rotation(&p).to_string());
    if !inside {
        return Ok((r, false));
    }
    let s = split(&p)?;
    r.put("deltas", s.deltas.iter().map(|d| Val::Str(d.to_string())).collect::<Vec<_>>())
        .put("base", s.base.to_string())
        .put("split", s.to_string());
    Ok((r, true))
}

fn confspace_parity(n: u64, d: i64) -> Outcome {
    let n = n as usize;
    let p = shift_parity(n, d);
    let brute = brute_force_parity(n, d);
    let mut r = Report::new("confspace parity");
    r.put("n", n)
        .put("d", d)
        .put("parity", p.as_str())
        .put("brute_force", brute.as_str())
        .put("agree", p == brute);
    Ok((r, p == brute))
}

fn exceptional(args: &ExceptionalArgs) -> Outcome {
    let f = SmoothExpr::parse(&args.expr, 1)?;
    let domain = match (&args.interval, args.circle) {
        (Some(iv), None) if iv[0] < iv[1] => Domain1D::Interval(iv[0], iv[1]),
        (Some(_), None) => return Err(Failure::Usage("interval needs a < b".into())),
        (None, Some(len)) if len > 0.0 => Domain1D::Circle(len),
        _ => return Err(Failure::Usage("give --interval A B or --circle LENGTH".into())),
    };
    let values = exceptional_values(&f, domain)?;
    let mut r = Report::new("exceptional");
    r.put("expr", args.expr.as_str()).put("count", values.len()).put("values", values);
    Ok((r, true))
}

fn demo_discontinuity(steps: usize, samples: usize) -> Outcome {
    let rows = discontinuity_table(steps, samples)?;
    let mut r = Report::new("demo discontinuity");
    r.put("f_prime", jacobiflow::demo::DEMO_DERIVATIVE);
    let rows = rows
        .iter()
        .map(|d| {
            vec![
                d.delta.into(),
                d.moved_point.into(),
                d.value_a.into(),
                d.value_b.into(),
                d.value_distance.into(),
                d.sup_distance.into(),
            ]
        })
        .collect();
    r.table(
        "family",
        vec!["delta", "h(a)", "g(h(a))", "g(b)", "value_distance", "sup_distance"],
        rows,
    );
    Ok((r, true))
}

fn verify_all(only: Option<u64>) -> Outcome {
    let ids: Vec<usize> = match only {
        Some(k) => vec![k as usize],
        None => (1..=CRITERIA).collect(),
    };
    let mut r = Report::new("verify all");
    let mut rows = Vec::new();
    let mut failed = 0;
    for id in ids {
        let o = run_criterion(id);
        failed += usize::from(!o.passed);
        rows.push(vec![
            Val::Int(id as i64),
            Val::Str(if o.passed { "PASS" } else { "FAIL" }.into()),
            Val::Str(o.name.into()),
            Val::Str(o.detail),
        ]);
    }
    let total = rows.len();
    r.table("criteria", vec!["id", "result", "name", "detail"], rows);
    r.put("passed", total - failed).put("failed", failed);
    Ok((r, failed == 0))
}

fn run(cli: &Cli) -> Outcome {
    let ctx = Ctx {
        tol: match cli.tol {
            Some(t) => Some(t),
            None => env_tol()?,
        },
    };
    match &cli.command {
        Command::Jacobi(JacobiCmd::Check { expr, vars, degree, power }) => jacobi_check(expr, *vars, *degree, *power),
        Command::Lift(LiftCmd::Local { f, field, alpha, phi, bounds, grid }) => {
            lift_local(&ctx, f, field, alpha, phi, bounds, *grid)
        }
        Command::Lift(LiftCmd::Global { model, phi, grid }) => lift_global(&ctx, model, phi, *grid),
        Command::Flow(FlowCmd::Shift { alpha, phi, interval, points }) => flow_shift(&ctx, alpha, phi, interval, *points),
        Command::Flow(FlowCmd::Factor { alpha, s, t }) => flow_factor(alpha, *s, *t),
        Command::Section(SectionCmd::Line { n, x, points }) => section_line_cmd(&ctx, *n, x, *points),
        Command::Section(SectionCmd::Circle { n, x, shift, points }) => section_circle_cmd(&ctx, *n, x, *shift, *points),
        Command::Confspace(ConfCmd::Split { n, coords }) => confspace_split(*n, coords),
        Command::Confspace(ConfCmd::Parity { n, d }) => confspace_parity(*n, *d),
        Command::Exceptional(args) => exceptional(args),
        Command::Demo(DemoCmd::Discontinuity { steps, samples }) => demo_discontinuity(*steps, *samples),
        Command::Verify(VerifyCmd::All { only }) => verify_all(*only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, ok)) => {
            if cli.json {
                print!("{}", report.render_json());
            } else {
                print!("{}", report.render_text());
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
