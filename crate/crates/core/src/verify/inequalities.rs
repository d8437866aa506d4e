//! Pointwise semigroup inequalities under curvature bounds.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::gamma::{gamma_n, required_order};
use crate::semigroup::checks::evaluator_fingerprint;
use crate::semigroup::{SemigroupEvaluator, SmoothFn};
use crate::verify::report::VerificationReport;
use crate::verify::suite::is_positive;

/// Absolute tolerance for the pointwise inequalities.
pub const INEQUALITY_TOL: f64 = 1e-7;
/// Relative tolerance of the `Λ_n` derivative identity.
pub const LAMBDA_TOL: f64 = 1e-4;

/// `h log h` with `0 log 0 = 0`.
fn xlogx(h: f64) -> f64 {
    if h > 0.0 {
        h * h.ln()
    } else {
        0.0
    }
}

/// Tracks the smallest margin per inequality label.
struct Margins(BTreeMap<String, f64>);

impl Margins {
    fn record(&mut self, report: &mut VerificationReport, label: &str, t: f64, x: f64, lhs: f64, rhs: f64) {
        report.observe(label, Some(t), Some(x), lhs, rhs);
        let m = rhs - lhs;
        let e = self.0.entry(label.to_string()).or_insert(f64::INFINITY);
        if m < *e || m.is_nan() {
            *e = if m.is_nan() { f64::NEG_INFINITY } else { m };
        }
    }
}

/// For every function, time and point:
///
/// * `Γ_n(P_t f) ≤ e^{−2ρ_n t} P_t Γ_n(f)`,
/// * `Γ_n(P_t f) ≤ P_t Γ_{n−1}(f) / (2t)`,
/// * `Γ_n(P_t f) ≤ e^{−ρ_n t} P_t Γ_{n−1}(f) / t`,
///
/// for `n = 1, 2` (with `Γ_0(f) = f²`), plus the gradient bound
/// `√Γ(P_t f) ≤ e^{−ρ₁ t} P_t √Γ(f)`, the local Poincaré inequality and, for
/// positive `f`, the local log-Sobolev inequality. The `1/t` bounds skip `t = 0`.
pub fn semigroup_inequality_suite(
    ev: &SemigroupEvaluator,
    functions: &[SmoothFn],
    t_schedule: &[f64],
    xs: &[f64],
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("semigroup_inequalities", evaluator_fingerprint(ev));
    let gen = ev.generator();
    let (r1, r2) = (gen.rho1(), gen.rho2());
    let horizon = t_schedule.iter().copied().fold(0.0, f64::max);
    let mut margins = Margins(BTreeMap::new());
    let mut skipped = 0usize;
    for f in functions {
        let flow = ev.prepare(f, horizon)?;
        let g0 = |x: f64| f.value(x).powi(2);
        let g1 = |x: f64| gamma_n(gen, &f.jet(x, 1), 1).unwrap_or(f64::NAN);
        let g2 = |x: f64| gamma_n(gen, &f.jet(x, 2), 2).unwrap_or(f64::NAN);
        let root = |x: f64| g1(x).max(0.0).sqrt();
        let p0 = ev.apply_schedule(&g0, t_schedule, xs)?;
        let p1 = ev.apply_schedule(&g1, t_schedule, xs)?;
        let p2 = ev.apply_schedule(&g2, t_schedule, xs)?;
        let pr = ev.apply_schedule(&root, t_schedule, xs)?;
        let pe = if is_positive(gen, f) {
            let ent = |x: f64| xlogx(f.value(x).powi(2));
            Some(ev.apply_schedule(&ent, t_schedule, xs)?)
        } else {
            None
        };
        let name = f.name();
        for (it, &t) in t_schedule.iter().enumerate() {
            for (ix, &x) in xs.iter().enumerate() {
                let j = flow.jet(t, x, 2)?;
                let pf = j.value();
                let l1 = gamma_n(gen, &j, 1)?;
                let l2 = gamma_n(gen, &j, 2)?;
                let c = (1.0 - (-2.0 * r1 * t).exp()) / r1;
                let mut rec = |label: &str, lhs: f64, rhs: f64| {
                    margins.record(&mut report, &format!("{label} [{name}]"), t, x, lhs, rhs);
                };
                rec("G1(Ptf) <= e^-2r1t Pt G1f", l1, (-2.0 * r1 * t).exp() * p1[it][ix]);
                rec("G2(Ptf) <= e^-2r2t Pt G2f", l2, (-2.0 * r2 * t).exp() * p2[it][ix]);
                rec("sqrt G1(Ptf) <= e^-r1t Pt sqrt G1f", l1.max(0.0).sqrt(), (-r1 * t).exp() * pr[it][ix]);
                rec("local Poincare", p0[it][ix] - pf * pf, c * p1[it][ix]);
                if let Some(pe) = &pe {
                    let q = p0[it][ix];
                    rec("local log-Sobolev", pe[it][ix] - xlogx(q), 2.0 * c * p1[it][ix]);
                }
                if t > 0.0 {
                    rec("G1(Ptf) <= Pt f^2 / 2t", l1, p0[it][ix] / (2.0 * t));
                    rec("G2(Ptf) <= Pt G1f / 2t", l2, p1[it][ix] / (2.0 * t));
                    rec("G1(Ptf) <= e^-r1t Pt f^2 / t", l1, (-r1 * t).exp() * p0[it][ix] / t);
                    rec("G2(Ptf) <= e^-r2t Pt G1f / t", l2, (-r2 * t).exp() * p1[it][ix] / t);
                } else {
                    skipped += 4;
                }
            }
        }
    }
    for (label, m) in &margins.0 {
        report.metric(&format!("margin[{label}]"), *m);
    }
    report.metric("functions", functions.len() as f64);
    report.metric("skipped_comparisons", skipped as f64);
    if skipped > 0 {
        report.note("1/t bounds SKIPPED at t = 0 (they hold for t > 0 only)");
    }
    report.fingerprint.grid = format!("{} times x {} points", t_schedule.len(), xs.len());
    Ok(report.finish(INEQUALITY_TOL))
}

/// `Λ_n(s) = P_s(Γ_n(P_{t−s} f))` at the points `xs`.
fn lambda(ev: &SemigroupEvaluator, flow: &crate::semigroup::Flow, n: usize, t: f64, s: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let gen = ev.generator();
    let order = required_order(n);
    let inner = |y: f64| match flow.jet(t - s, y, order).and_then(|j| gamma_n(gen, &j, n)) {
        Ok(v) => v,
        Err(_) => f64::NAN,
    };
    ev.apply_values(&inner, s, xs)
}

/// Checks `dΛ_n/ds = 2Λ_{n+1}` by a five-point difference at interior `s`,
/// and that `Λ_n` is non-decreasing on `[0, t]`.
pub fn lambda_check(
    ev: &SemigroupEvaluator,
    f: &SmoothFn,
    n: usize,
    t: f64,
    s_count: usize,
    xs: &[f64],
) -> Result<VerificationReport> {
    let name = format!("lambda_derivative[{}, n={n}]", f.name());
    let fp = evaluator_fingerprint(ev);
    if required_order(n + 1) > ev.max_order() {
        return Ok(VerificationReport::skipped(
            name,
            fp,
            format!("backend delivers order {} jets, Γ_{} needs {}", ev.max_order(), n + 1, required_order(n + 1)),
        ));
    }
    if !(t > 0.0) || s_count < 1 {
        return Ok(VerificationReport::skipped(name, fp, "needs t > 0 and at least one interior s"));
    }
    let mut report = VerificationReport::new(name, fp);
    let flow = ev.prepare(f, t)?;
    let h = 0.1 * t / (s_count + 1) as f64;
    let mut worst_rel = 0.0f64;
    let mut profile = vec![lambda(ev, &flow, n, t, 0.0, xs)?];
    for k in 1..=s_count {
        let s = t * k as f64 / (s_count + 1) as f64;
        let at = |d: f64| lambda(ev, &flow, n, t, s + d, xs);
        let (m2, m1, p1, p2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
        let next = lambda(ev, &flow, n + 1, t, s, xs)?;
        for (i, &x) in xs.iter().enumerate() {
            let fd = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            let exact = 2.0 * next[i];
            let diff = (fd - exact).abs();
            report.observe("|dΛ/ds − 2Λ_{n+1}|", Some(s), Some(x), diff, LAMBDA_TOL * exact.abs() + 1e-12);
            if exact.abs() > 1e-12 {
                worst_rel = worst_rel.max(diff / exact.abs());
            }
        }
        profile.push(at(0.0)?);
    }
    profile.push(lambda(ev, &flow, n, t, t, xs)?);
    for w in profile.windows(2) {
        for (i, &x) in xs.iter().enumerate() {
            report.observe("Λ_n non-decreasing", None, Some(x), w[0][i] - w[1][i], 1e-10 * (1.0 + w[0][i].abs()));
        }
    }
    report.metric("worst_relative_error", worst_rel);
    report.metric("t", t);
    report.metric("h", h);
    Ok(report.finish(0.0))
}
