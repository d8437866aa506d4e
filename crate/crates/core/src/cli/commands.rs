//! The three experiment commands and their output files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::config::Experiment;
use crate::cli::{CliError, Result};
use crate::gamma::{certify_curvature, closed_form_gamma, gamma_n, random_jet_samples, GammaReport, MAX_GAMMA};
use crate::model::{SmoothFn, SpaceKind};
use crate::semigroup::checks::{central_points, evaluator_fingerprint};
use crate::transport::{hessian_log_pt_bound_check, transport_grid, HeatFlowProblem, TransportMapGrid};
use crate::verify::report::real;
use crate::verify::{
    compare_transport_to_monge, growth_check, herbst_moment_check, lambda_check, monge_on_grid,
    poincare_transfer_check, pushforward_ks, semigroup_inequality_suite, test_functions, transfer_constant,
    MeasureCdf, Status, VerificationReport,
};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Relative agreement required between the recursion and the closed forms.
pub const RECURSION_TOL: f64 = 1e-10;
/// Slack on the Lipschitz bound.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(io(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    pub n: usize,
    /// Largest `|recursive − closed| / (1 + |closed|)`.
    #[serde(with = "real")]
    pub max_error: f64,
    pub worst_x: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCheckReport {
    pub space: String,
    pub seed: u64,
    pub samples: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub recursion: Vec<RecursionCheck>,
    pub curvature: Vec<GammaReport>,
    pub status: Status,
}

/// Recursion against the closed forms for `n = 1..3`, then `Γ₂ ≥ ρ₁Γ₁` and
/// `Γ₃ ≥ ρ₂Γ₂` on the same seeded samples.
pub fn gamma_report(exp: &Experiment) -> Result<GammaCheckReport> {
    let gen = &exp.gen;
    let samples = random_jet_samples(gen, exp.config.gamma_samples, exp.config.seed);
    let mut recursion = Vec::new();
    for n in 1..=MAX_GAMMA {
        let errs: Vec<(f64, f64)> = samples
            .par_iter()
            .map(|j| -> crate::Result<(f64, f64)> {
                let r = gamma_n(gen, j, n)?;
                let c = closed_form_gamma(gen, j, n)?;
                let e = (r - c).abs() / (1.0 + c.abs());
                Ok((if e.is_nan() { f64::INFINITY } else { e }, j.x()))
            })
            .collect::<crate::Result<_>>()?;
        let (max_error, worst_x) = errs.iter().copied().fold((0.0, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
        recursion.push(RecursionCheck { n, max_error, worst_x, pass: max_error <= RECURSION_TOL });
    }
    let curvature =
        vec![certify_curvature(gen, 1, gen.rho1(), &samples)?, certify_curvature(gen, 2, gen.rho2(), &samples)?];
    let ok = recursion.iter().all(|r| r.pass) && curvature.iter().all(|c| c.pass);
    Ok(GammaCheckReport {
        space: gen.name(),
        seed: exp.config.seed,
        samples: samples.len(),
        rho1: gen.rho1(),
        rho2: gen.rho2(),
        recursion,
        curvature,
        status: if ok { Status::Pass } else { Status::Fail },
    })
}

pub fn gamma_check(exp: &Experiment) -> Result<bool> {
    let report = gamma_report(exp)?;
    write_json(&exp.output_dir.join("gamma_report.json"), &report)?;
    for r in &report.recursion {
        say!("recursion n={}: max error {:e} {}", r.n, r.max_error, if r.pass { "PASS" } else { "FAIL" });
    }
    for c in &report.curvature {
        say!("curvature n={} rho={}: margin {:e} {}", c.n, c.rho, c.margin, if c.pass { "PASS" } else { "FAIL" });
    }
    Ok(report.status == Status::Pass)
}

/// One named comparison `lhs ≤ rhs` in the run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub status: Status,
    #[serde(with = "real")]
    pub margin: f64,
    #[serde(with = "real")]
    pub lhs: f64,
    #[serde(with = "real")]
    pub rhs: f64,
}

impl CheckSummary {
    fn new(name: &str, lhs: f64, rhs: f64) -> CheckSummary {
        let margin = rhs - lhs;
        let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
        CheckSummary { name: name.into(), status, margin, lhs, rhs }
    }
}

/// Deterministic part of a transport run; timings are written separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub space: String,
    pub backend: String,
    pub seed: u64,
    pub grid_points: usize,
    pub k: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub t_max: f64,
    pub theorem_bound: f64,
    pub lipschitz: f64,
    #[serde(with = "real")]
    pub ks: f64,
    #[serde(with = "real")]
    pub monge_sup_discrepancy: f64,
    #[serde(with = "real")]
    pub monge_metric_discrepancy: f64,
    pub monge_points: usize,
    pub horizon_tail: f64,
    pub ode_error: f64,
    pub clamped: usize,
    pub checks: Vec<CheckSummary>,
    pub status: Status,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub setup_s: f64,
    pub transport_s: f64,
    pub oracle_s: f64,
    pub total_s: f64,
}

/// One line of `transport.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportRow {
    pub x: f64,
    pub t: f64,
    pub t_prime: f64,
    pub monge: f64,
    pub abs_diff: f64,
}

pub const CSV_HEADER: &str = "x,T,T_prime,monge,abs_diff";

/// 17 significant digits, LF line endings.
pub fn format_transport_csv(rows: &[TransportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.x, r.t, r.t_prime, r.monge, r.abs_diff);
    }
    out
}

pub fn read_transport_csv(text: &str) -> Result<Vec<TransportRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Io(format!("transport csv must start with {CSV_HEADER:?}")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| CliError::Io(format!("{l:?}: {e}"))))
                .collect::<Result<_>>()?;
            match v[..] {
                [x, t, t_prime, monge, abs_diff] => Ok(TransportRow { x, t, t_prime, monge, abs_diff }),
                _ => Err(CliError::Io(format!("expected five columns in {l:?}"))),
            }
        })
        .collect()
}

pub fn build_problem(exp: &Experiment) -> Result<HeatFlowProblem> {
    let tol = &exp.config.tolerances;
    Ok(HeatFlowProblem::new(exp.evaluator()?, &exp.potential, exp.grid.clone(), tol.ode_tol, tol.horizon_eps)?)
}

/// Everything `hft transport` computes, before it is written out.
pub struct TransportRun {
    pub map: TransportMapGrid,
    pub rows: Vec<TransportRow>,
    pub summary: RunSummary,
    pub timings: Timings,
}

pub fn run_transport(exp: &Experiment) -> Result<TransportRun> {
    let start = Instant::now();
    let problem = build_problem(exp)?;
    let gen = problem.generator();
    let setup = start.elapsed().as_secs_f64();
    let map = transport_grid(&problem)?;
    let transported = start.elapsed().as_secs_f64();
    let mu = MeasureCdf::invariant(gen)?;
    let nu = MeasureCdf::perturbed(gen, problem.potential())?;
    let monge = monge_on_grid(&map, &mu, &nu)?;
    let th = &exp.config.thresholds;
    let mut fp = evaluator_fingerprint(problem.evaluator());
    fp.seed = Some(exp.config.seed);
    let tol = &exp.config.tolerances;
    for (k, v) in [("ode_tol", tol.ode_tol), ("quadrature_tol", tol.quadrature_tol), ("horizon_eps", tol.horizon_eps)] {
        fp.tolerances.insert(k.into(), v);
    }
    let comparison = compare_transport_to_monge(&map, &mu, &nu, th.monge, fp)?;
    let ks = pushforward_ks(&map, &mu, &nu)?;
    let oracle = start.elapsed().as_secs_f64();

    let rows: Vec<TransportRow> = (0..map.points.len())
        .map(|i| TransportRow {
            x: map.points[i],
            t: map.values[i],
            t_prime: map.derivatives[i],
            monge: monge[i],
            abs_diff: (map.values[i] - monge[i]).abs(),
        })
        .collect();
    let min_gap = map.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let sup = comparison.metrics["sup_discrepancy"];
    let checks = vec![
        // strictly increasing values: the smallest gap must be positive
        CheckSummary::new("monotone", -min_gap, 0.0),
        CheckSummary::new("lipschitz <= theorem bound", map.lipschitz, map.theorem_bound + LIPSCHITZ_SLACK),
        CheckSummary::new("ks pushforward", ks, th.ks),
        CheckSummary::new("monge sup-discrepancy", sup, th.monge),
        CheckSummary::new("nu normalization", (nu.raw_mass() - 1.0).abs(), exp.config.tolerances.quadrature_tol),
    ];
    let status = if checks.iter().all(|c| c.status == Status::Pass) && min_gap > 0.0 {
        Status::Pass
    } else {
        Status::Fail
    };
    let summary = RunSummary {
        space: gen.name(),
        backend: problem.evaluator().backend().to_string(),
        seed: exp.config.seed,
        grid_points: map.points.len(),
        k: map.k,
        rho1: gen.rho1(),
        rho2: gen.rho2(),
        t_max: map.t_max,
        theorem_bound: map.theorem_bound,
        lipschitz: map.lipschitz,
        ks,
        monge_sup_discrepancy: sup,
        monge_metric_discrepancy: comparison.metrics["metric_discrepancy"],
        monge_points: comparison.metrics["points"] as usize,
        horizon_tail: map.horizon_tail,
        ode_error: map.ode_error,
        clamped: map.clamped,
        checks,
        status,
    };
    let timings =
        Timings { setup_s: setup, transport_s: transported - setup, oracle_s: oracle - transported, total_s: 0.0 };
    Ok(TransportRun { map, rows, summary, timings })
}

pub fn transport(exp: &Experiment) -> Result<bool> {
    let start = Instant::now();
    let mut run = run_transport(exp)?;
    let dir = &exp.output_dir;
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join("transport.csv");
    std::fs::write(&csv, format_transport_csv(&run.rows)).map_err(io(&csv))?;
    write_json(&dir.join("summary.json"), &run.summary)?;
    run.timings.total_s = start.elapsed().as_secs_f64();
    write_json(&dir.join("timings.json"), &run.timings)?;
    let s = &run.summary;
    say!("K = {}  t_max = {}  theorem bound = {}", s.k, s.t_max, s.theorem_bound);
    say!("lipschitz = {}  ks = {:e}  monge sup = {:e}", s.lipschitz, s.ks, s.monge_sup_discrepancy);
    for c in &s.checks {
        say!("{:<28} {:?} (margin {:e})", c.name, c.status, c.margin);
    }
    Ok(s.status == Status::Pass)
}

/// File stem for a report: lowercase alphanumerics joined by underscores.
fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Functions used for the `Λ_n` derivative identity.
fn lambda_functions(functions: &[SmoothFn]) -> Vec<&SmoothFn> {
    let wanted = ["x", "x^2", "exp(-x)"];
    functions.iter().filter(|f| wanted.contains(&f.name())).collect()
}

/// All verification reports for one experiment, in a fixed order.
pub fn verification_reports(exp: &Experiment) -> Result<Vec<VerificationReport>> {
    let ev = exp.evaluator()?;
    let gen = &exp.gen;
    let ts = &exp.config.t_schedule;
    let xs = central_points(gen, 9)?;
    let functions = test_functions(gen);
    let mut reports = vec![semigroup_inequality_suite(&ev, &functions, ts, &xs)?];
    for f in lambda_functions(&functions) {
        for n in 0..=2 {
            reports.push(lambda_check(&ev, f, n, 1.0, 3, &xs)?);
        }
    }
    let g = match gen.kind() {
        SpaceKind::Laguerre { .. } => SmoothFn::new("2sqrt(x)", |j: &crate::Jet| j.sqrt() * 2.0),
        _ => SmoothFn::polynomial("x", vec![0.0, 1.0]),
    };
    reports.push(herbst_moment_check(&ev, &g, 1.0, 2.0, 1.0, ts, &xs)?);
    let problem = build_problem(exp)?;
    let c = transfer_constant(gen.rho1(), gen.rho2(), problem.k())?;
    reports.push(poincare_transfer_check(gen, problem.potential(), c, &functions)?);
    match gen.kind() {
        SpaceKind::Laguerre { .. } => {
            let map = transport_grid(&problem)?;
            reports.push(growth_check(&map, gen)?);
        }
        _ => reports.push(VerificationReport::skipped(
            "growth",
            evaluator_fingerprint(&ev),
            "the growth estimate concerns the laguerre space",
        )),
    }
    reports.push(hessian_log_pt_bound_check(&problem, ts, &xs)?);
    for r in &mut reports {
        r.fingerprint.seed = Some(exp.config.seed);
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub name: String,
    pub file: String,
    pub status: Status,
    #[serde(with = "real")]
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub status: Status,
    pub reports: Vec<AggregateEntry>,
}

pub fn verify_all(exp: &Experiment) -> Result<bool> {
    let reports = verification_reports(exp)?;
    let dir = exp.output_dir.join("verify");
    let mut entries = Vec::new();
    let mut status = Status::Skipped;
    for (i, r) in reports.iter().enumerate() {
        let file = format!("{:02}_{}.json", i + 1, slug(&r.name));
        write_json(&dir.join(&file), r)?;
        status = status.combine(r.status);
        say!("{:<48} {:?}", r.name, r.status);
        entries.push(AggregateEntry { name: r.name.clone(), file, status: r.status, margin: r.margin });
    }
    write_json(&dir.join("aggregate.json"), &Aggregate { status, reports: entries })?;
    Ok(status != Status::Fail)
}
