//! Semigroup-level identities: ergodic decay and symmetry.

use crate::error::Result;
use crate::model::Generator1D;
use crate::semigroup::{SemigroupEvaluator, SmoothFn};
use crate::verify::report::{Fingerprint, VerificationReport};

/// Times used by every lattice check.
pub const T_SCHEDULE: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0];

/// `n` points spread evenly over the central 99% of the invariant measure.
pub fn central_points(gen: &Generator1D, n: usize) -> Result<Vec<f64>> {
    let (lo, hi) = gen.central_interval(0.99)?;
    let n = n.max(2);
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

pub fn evaluator_fingerprint(ev: &SemigroupEvaluator) -> Fingerprint {
    let mut fp = Fingerprint {
        space: ev.generator().name(),
        backend: ev.backend().to_string(),
        ..Fingerprint::default()
    };
    let c = ev.config();
    fp.tolerances.insert("quadrature_order".into(), c.quadrature_order as f64);
    fp.tolerances.insert("truncation".into(), c.truncation as f64);
    fp.tolerances.insert("fd_points".into(), c.fd_points as f64);
    fp.tolerances.insert("fd_dt".into(), c.fd_dt);
    fp
}

/// `sup_x |P_t f(x) − ∫ f dμ|` along the schedule, with a fitted exponential rate.
/// Passes when the fitted rate on `t ∈ [0.5, 5]` is at least `ρ₁ − 0.05`, or
/// when the deviation is negligible throughout.
pub fn ergodic_limit_check(
    ev: &SemigroupEvaluator,
    f: &SmoothFn,
    t_schedule: &[f64],
    xs: &[f64],
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("ergodic_limit[{}]", f.name()), evaluator_fingerprint(ev));
    let mean = ev.mean(|x| f.value(x))?;
    let horizon = t_schedule.iter().copied().fold(0.0, f64::max);
    let flow = ev.prepare(f, horizon)?;
    let mut fit = Vec::new();
    let mut largest = 0.0f64;
    for &t in t_schedule {
        let mut dev = 0.0f64;
        for &x in xs {
            dev = dev.max((flow.value(t, x)? - mean).abs());
        }
        largest = largest.max(dev);
        report.metric(&format!("deviation_t{t}"), dev);
        if (0.5..=5.0).contains(&t) && dev > 1e-12 {
            fit.push((t, dev.ln()));
        }
    }
    let rho = ev.generator().rho1();
    if largest <= 1e-12 {
        report.observe("negligible deviation", None, None, largest, 1e-12);
        report.note("deviation below 1e-12 at every time");
        return Ok(report.finish(0.0));
    }
    if fit.len() < 2 {
        report.note("fewer than two usable times in [0.5, 5]");
        report.observe("rate", None, None, 0.0, 0.0);
        return Ok(report.finish(0.0));
    }
    let n = fit.len() as f64;
    let mt = fit.iter().map(|p| p.0).sum::<f64>() / n;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = fit.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let rate = -sxy / sxx;
    report.metric("fitted_rate", rate);
    report.metric("rho1", rho);
    report.observe("fitted rate vs rho1", None, None, rho - 0.05, rate);
    Ok(report.finish(0.0))
}

/// `|∫ f P_t h dμ − ∫ h P_t f dμ|`, passing at `1e-7`.
pub fn symmetry_check(ev: &SemigroupEvaluator, f: &SmoothFn, h: &SmoothFn, t: f64) -> Result<VerificationReport> {
    let name = format!("symmetry[{},{}]", f.name(), h.name());
    let mut report = VerificationReport::new(name, evaluator_fingerprint(ev));
    let rule = ev.generator().measure_rule(64, 16);
    let pf = ev.apply_values(&|x| f.value(x), t, &rule.nodes)?;
    let ph = ev.apply_values(&|x| h.value(x), t, &rule.nodes)?;
    let mut left = 0.0;
    let mut right = 0.0;
    for i in 0..rule.len() {
        let x = rule.nodes[i];
        left += rule.weights[i] * f.value(x) * ph[i];
        right += rule.weights[i] * h.value(x) * pf[i];
    }
    let diff = (left - right).abs();
    report.metric("f_Pt_h", left);
    report.metric("h_Pt_f", right);
    report.metric("difference", diff);
    report.observe("pairing difference", Some(t), None, diff, 1e-7);
    Ok(report.finish(0.0))
}
