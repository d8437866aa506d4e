//! Heat-flow transport map `T` pushing `μ` onto `ν = e^{-V} μ`.
//!
//! With `V_t = −log P_t e^{−V}`, the characteristic `y' = a ∂_x V_t(y)` run
//! backward from `y(t_max) = x` gives `y(0) ≈ T(x)`. The flow is integrated in
//! the metric coordinate, where the speed is `√a ∂_x V_t` and stays bounded by
//! `K e^{−ρ₁ t}`.
//!
//! With the spectral backend the truncated series is not resolved pointwise at
//! large `x` for small `t`. Where its resolution indicator exceeds
//! [`RESOLUTION_TOL`] relative to the value, the density is taken from a
//! finite-difference flow prepared up to [`FALLBACK_HORIZON`].

pub mod ode;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::jet::Jet;
use crate::model::{certify_lipschitz, normalize_potential, validation_grid, Generator1D, Potential};
use crate::semigroup::checks::evaluator_fingerprint;
use crate::semigroup::{Backend, Flow, SemigroupEvaluator, TailPolicy, POSITIVITY_FLOOR};
use crate::verify::report::VerificationReport;

/// Default ODE tolerance.
pub const DEFAULT_ODE_TOL: f64 = 1e-8;
/// Default residual displacement allowed past the horizon.
pub const DEFAULT_HORIZON_EPS: f64 = 1e-6;
/// Points used to certify the Lipschitz constant of `V`.
const LIPSCHITZ_GRID: usize = 4096;
/// Relative spectral resolution below which the series value is trusted.
pub const RESOLUTION_TOL: f64 = 1e-9;
/// Horizon of the finite-difference fallback flow.
pub const FALLBACK_HORIZON: f64 = 1.0;

/// `t_max = log(K / (ρ₁ ε)) / ρ₁`, so the tail displacement `(K/ρ₁) e^{−ρ₁ t_max}`
/// is at most `ε`. Zero when `K = 0` or when no flow time is needed.
pub fn choose_t_max(k: f64, rho1: f64, eps: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("Lipschitz constant {k} must be finite and non-negative")));
    }
    if !(rho1 > 0.0 && eps > 0.0) {
        return Err(Error::InvalidParameter("rho1 and eps must be positive".into()));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(((k / (rho1 * eps)).ln() / rho1).max(0.0))
}

/// `exp(√(2π/ρ₂) K e^{K²/(2ρ₁)})`.
pub fn theorem_bound(rho1: f64, rho2: f64, k: f64) -> Result<f64> {
    if !(rho1 > 0.0 && rho2 > 0.0) {
        return Err(Error::InvalidParameter("curvature constants must be positive".into()));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("K = {k} must be non-negative")));
    }
    Ok(((2.0 * std::f64::consts::PI / rho2).sqrt() * k * (k * k / (2.0 * rho1)).exp()).exp())
}

/// Transport problem: generator, normalized potential and a prepared heat flow.
#[derive(Clone, Debug)]
pub struct HeatFlowProblem {
    gen: Generator1D,
    pot: Potential,
    evaluator: SemigroupEvaluator,
    t_max: f64,
    ode_tol: f64,
    horizon_eps: f64,
    grid: Vec<f64>,
    k: f64,
    flow: Option<Flow>,
    fallback: Option<Flow>,
}

/// One evaluated point of the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportPoint {
    pub x: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub steps: usize,
    /// The characteristic touched the edge of the quadrature window.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportMapGrid {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Metric Lipschitz constant measured over adjacent pairs.
    pub lipschitz: f64,
    pub theorem_bound: f64,
    /// `(K/ρ₁) e^{−ρ₁ t_max}`.
    pub horizon_tail: f64,
    /// Largest accumulated ODE error estimate over the grid.
    pub ode_error: f64,
    pub clamped: usize,
    pub k: f64,
    pub t_max: f64,
}

impl HeatFlowProblem {
    /// Normalize `pot`, certify its Lipschitz constant (unless already set) and
    /// prepare `P_t e^{−V}` up to the horizon.
    pub fn new(
        evaluator: SemigroupEvaluator,
        pot: &Potential,
        grid: Vec<f64>,
        ode_tol: f64,
        horizon_eps: f64,
    ) -> Result<HeatFlowProblem> {
        if !(ode_tol > 0.0 && horizon_eps > 0.0) {
            return Err(Error::InvalidParameter("ode_tol and horizon_eps must be positive".into()));
        }
        let gen = evaluator.generator().clone();
        if grid.len() < 2 {
            return Err(Error::InvalidParameter("the transport grid needs at least two points".into()));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(format!("grid not strictly increasing at {} {}", w[0], w[1])));
            }
        }
        for &x in &grid {
            gen.check_point(x)?;
        }
        let k = match pot.lipschitz() {
            Some(k) => k,
            None => certify_lipschitz(&gen, pot, &validation_grid(&gen, LIPSCHITZ_GRID))?,
        };
        let pot = normalize_potential(&gen, pot, 1e-13)?.with_lipschitz(k);
        let t_max = choose_t_max(k, gen.rho1(), horizon_eps)?;
        let mut problem = HeatFlowProblem { gen, pot, evaluator, t_max, ode_tol, horizon_eps, grid, k, flow: None, fallback: None };
        problem.prepare()?;
        Ok(problem)
    }

    fn prepare(&mut self) -> Result<()> {
        self.flow = if self.k == 0.0 || self.t_max == 0.0 {
            None
        } else {
            Some(self.evaluator.prepare_with(&self.pot.density_fn(), self.t_max, TailPolicy::Lenient)?)
        };
        if self.flow.is_some() && self.fallback.is_none() && self.evaluator.backend() == Backend::Spectral {
            let fd = SemigroupEvaluator::new(Backend::FiniteDifference, self.gen.clone(), self.evaluator.config().clone())?;
            self.fallback = Some(fd.prepare(&self.pot.density_fn(), FALLBACK_HORIZON)?);
        }
        Ok(())
    }

    /// Same problem with a different horizon.
    pub fn with_t_max(&self, t_max: f64) -> Result<HeatFlowProblem> {
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid horizon {t_max}")));
        }
        let mut p = self.clone();
        p.t_max = t_max;
        p.prepare()?;
        Ok(p)
    }

    pub fn with_ode_tol(&self, ode_tol: f64) -> Result<HeatFlowProblem> {
        if !(ode_tol > 0.0) {
            return Err(Error::InvalidParameter("ode_tol must be positive".into()));
        }
        Ok(HeatFlowProblem { ode_tol, ..self.clone() })
    }

    pub fn with_grid(&self, grid: Vec<f64>) -> Result<HeatFlowProblem> {
        for &x in &grid {
            self.gen.check_point(x)?;
        }
        Ok(HeatFlowProblem { grid, ..self.clone() })
    }

    pub fn generator(&self) -> &Generator1D {
        &self.gen
    }

    /// The normalized potential, carrying its certified Lipschitz constant.
    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn evaluator(&self) -> &SemigroupEvaluator {
        &self.evaluator
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn ode_tol(&self) -> f64 {
        self.ode_tol
    }

    pub fn horizon_eps(&self) -> f64 {
        self.horizon_eps
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Certified Lipschitz constant of `V` in the generator metric.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Jet of `P_t e^{−V}` at `x`, or `None` for the identity problem.
    pub fn density_jet(&self, t: f64, x: f64, order: usize) -> Result<Option<Jet>> {
        let Some(flow) = &self.flow else {
            return Ok(None);
        };
        let (jet, residual) = flow.jet_with_residual(t, x, order)?;
        match &self.fallback {
            Some(fd) if t <= fd.horizon() && !(residual <= RESOLUTION_TOL * jet.value().abs()) => {
                fd.jet(t, x, order).map(Some)
            }
            _ => Ok(Some(jet)),
        }
    }

    /// `∂_x V_t(x) = −∂_x P_t f / P_t f`.
    pub fn velocity(&self, t: f64, x: f64) -> Result<f64> {
        let Some(j) = self.density_jet(t, x, 1)? else {
            self.gen.check_point(x)?;
            return Ok(0.0);
        };
        let p = j.value();
        if !(p > POSITIVITY_FLOOR) {
            return Err(Error::Underflow { t, x });
        }
        let v = -j.derivative(1) / p;
        if !v.is_finite() {
            return Err(Error::NonFinite { x, value: v });
        }
        Ok(v)
    }

    /// Speed in the metric coordinate, `√a(x) ∂_x V_t(x)`.
    pub fn metric_velocity(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.gen.a(x).sqrt() * self.velocity(t, x)?)
    }
}

/// `T(x)` by backward integration of the characteristic through `x` at `t_max`.
pub fn transport_eval(problem: &HeatFlowProblem, x: f64) -> Result<TransportPoint> {
    let gen = &problem.gen;
    gen.check_point(x)?;
    if problem.flow.is_none() {
        return Ok(TransportPoint { x, value: x, error_estimate: 0.0, steps: 0, clamped: false });
    }
    let (s_lo, s_hi) = gen.metric_window();
    let mut clamped = false;
    let out = ode::integrate(
        |t, s| {
            let sc = s.clamp(s_lo, s_hi);
            if sc != s {
                clamped = true;
            }
            problem.metric_velocity(t, gen.from_metric(sc))
        },
        problem.t_max,
        gen.to_metric(x),
        0.0,
        problem.ode_tol,
        |t| if t <= 1.0 { 0.05 } else { 0.5 },
    )?;
    let s = out.y.clamp(s_lo, s_hi);
    clamped |= s != out.y;
    let value = gen.from_metric(s).clamp(gen.window().0, gen.window().1);
    Ok(TransportPoint { x, value, error_estimate: out.error_estimate, steps: out.steps, clamped })
}

/// Evaluate `T` on the problem grid, estimate `T'` and check monotonicity.
pub fn transport_grid(problem: &HeatFlowProblem) -> Result<TransportMapGrid> {
    let pts: Vec<TransportPoint> =
        problem.grid.par_iter().map(|&x| transport_eval(problem, x)).collect::<Result<_>>()?;
    let points: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let values: Vec<f64> = pts.iter().map(|p| p.value).collect();
    for i in 1..values.len() {
        if !(values[i] > values[i - 1]) {
            return Err(Error::NotMonotone { x0: points[i - 1], x1: points[i], t0: values[i - 1], t1: values[i] });
        }
    }
    let derivatives = (0..points.len()).map(|i| grid_derivative(&points, &values, i)).collect();
    let mut map = TransportMapGrid {
        points,
        values,
        derivatives,
        lipschitz: 0.0,
        theorem_bound: theorem_bound(problem.gen.rho1(), problem.gen.rho2(), problem.k)?,
        horizon_tail: if problem.k == 0.0 {
            0.0
        } else {
            problem.k / problem.gen.rho1() * (-problem.gen.rho1() * problem.t_max).exp()
        },
        ode_error: pts.iter().map(|p| p.error_estimate).fold(0.0, f64::max),
        clamped: pts.iter().filter(|p| p.clamped).count(),
        k: problem.k,
        t_max: problem.t_max,
    };
    map.lipschitz = lipschitz_estimate(&map, &problem.gen)?;
    Ok(map)
}

/// Derivative at `xs[i]` of the Lagrange interpolant through (up to) five
/// neighbouring nodes; fourth order on smooth data.
pub fn grid_derivative(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let n = xs.len();
    let m = n.min(5);
    let start = i.saturating_sub(m / 2).min(n - m);
    let idx: Vec<usize> = (start..start + m).collect();
    let x0 = xs[i];
    let mut d = 0.0;
    for &j in &idx {
        // L_j'(x0) = sum_{k != j} 1/(x_j - x_k) prod_{l != j,k} (x0 - x_l)/(x_j - x_l)
        let mut lj = 0.0;
        for &k in &idx {
            if k == j {
                continue;
            }
            let mut term = 1.0 / (xs[j] - xs[k]);
            for &l in &idx {
                if l != j && l != k {
                    term *= (x0 - xs[l]) / (xs[j] - xs[l]);
                }
            }
            lj += term;
        }
        d += ys[j] * lj;
    }
    d
}

/// `sup_i d(T(x_i), T(x_{i+1})) / d(x_i, x_{i+1})` in the generator metric.
pub fn lipschitz_estimate(map: &TransportMapGrid, gen: &Generator1D) -> Result<f64> {
    let mut best = 0.0f64;
    for i in 1..map.points.len() {
        let dx = gen.metric_distance(map.points[i - 1], map.points[i])?;
        if !(dx > 0.0) {
            return Err(Error::CoincidentPoints { x: map.points[i] });
        }
        let dt = gen.metric_distance(map.values[i - 1], map.values[i])?;
        best = best.max(dt / dx);
    }
    Ok(best)
}

/// Bound on the Riemannian Hessian of `log P_t f`:
/// `K t^{−1/2} e^{−ρ₂ t/2} e^{K²/(2ρ₁)}`.
pub fn hessian_bound(gen: &Generator1D, k: f64, t: f64) -> f64 {
    k / t.sqrt() * (-0.5 * gen.rho2() * t).exp() * (k * k / (2.0 * gen.rho1())).exp()
}

/// Pointwise check of the Hessian bound on `log P_t f` over `t_schedule × grid`.
///
/// Three quantities are compared with the bound: the Riemannian Hessian
/// `a u'' + ½ a' u'` of `u = log P_t f`, the ratio `|a P'' + ½ a' P'| / P`, and
/// the coordinate `−u''`. `t = 0` is skipped.
pub fn hessian_log_pt_bound_check(
    problem: &HeatFlowProblem,
    t_schedule: &[f64],
    grid: &[f64],
) -> Result<VerificationReport> {
    const TOL: f64 = 1e-6;
    let mut report = VerificationReport::new("hessian_log_pt_bound", evaluator_fingerprint(&problem.evaluator));
    report.metric("K", problem.k);
    if problem.evaluator.max_order() < 2 {
        return Ok(VerificationReport::skipped(
            "hessian_log_pt_bound",
            evaluator_fingerprint(&problem.evaluator),
            "backend provides fewer than two derivatives",
        ));
    }
    let gen = &problem.gen;
    let times: Vec<f64> = t_schedule.iter().copied().filter(|&t| t > 0.0 && t <= problem.t_max).collect();
    if t_schedule.iter().any(|&t| t == 0.0) {
        report.note("t = 0 skipped: the bound holds for t > 0");
    }
    let mut worst = [0.0f64; 3];
    for &t in &times {
        let bound = hessian_bound(gen, problem.k, t);
        let rows: Vec<(f64, f64, f64, f64)> = grid
            .par_iter()
            .map(|&x| -> Result<(f64, f64, f64, f64)> {
                let Some(j) = problem.density_jet(t, x, 2)? else {
                    return Ok((x, 0.0, 0.0, 0.0));
                };
                let (p, p1, p2) = (j.value(), j.derivative(1), j.derivative(2));
                if !(p > POSITIVITY_FLOOR) {
                    return Err(Error::Underflow { t, x });
                }
                let (a, da) = (gen.a(x), gen.a_prime(x));
                let u1 = p1 / p;
                let u2 = p2 / p - u1 * u1;
                Ok((x, a * u2 + 0.5 * da * u1, (a * p2 + 0.5 * da * p1).abs() / p, -u2))
            })
            .collect::<Result<_>>()?;
        for (x, hess, hs, coord) in rows {
            report.observe("riemannian hessian of log P_t f", Some(t), Some(x), hess, bound + TOL);
            report.observe("hessian ratio |Hess P_t f| / P_t f", Some(t), Some(x), hs, bound + TOL);
            report.observe("coordinate -(log P_t f)''", Some(t), Some(x), coord, bound + TOL);
            if bound > 0.0 {
                for (w, v) in worst.iter_mut().zip([hess, hs, coord]) {
                    *w = w.max(v / bound);
                }
            }
        }
    }
    report.metric("worst_hessian_ratio", worst[0]);
    report.metric("worst_hs_ratio", worst[1]);
    report.metric("worst_coordinate_ratio", worst[2]);
    Ok(report.finish(0.0))
}
