//! Diffusion semigroups `P_t = e^{tL}` for the model generators.
//!
//! Three backends: Mehler quadrature (OU), orthonormal Laguerre expansion
//! (gamma) and a Crank–Nicolson finite-volume solver (either space).

pub mod checks;
pub mod fd;
mod mehler;
pub mod spectral;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::jet::{Jet, MAX_ORDER};
use crate::model::{Generator1D, SpaceKind};
use crate::quadrature::{gauss_hermite, GaussRule};

pub use crate::model::SmoothFn;
pub use fd::{FdSnapshots, FdSolver};
pub use spectral::LaguerreBasis;

/// Values of `P_t f` are floored here before taking logarithms.
pub const POSITIVITY_FLOOR: f64 = 1e-300;
/// Highest derivative order the finite-difference backend provides.
pub const FD_MAX_ORDER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    #[serde(rename = "mehler")]
    Mehler,
    #[serde(rename = "spectral")]
    Spectral,
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Mehler => "mehler",
            Backend::Spectral => "spectral",
            Backend::FiniteDifference => "fd",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Backend> {
        match s {
            "mehler" => Ok(Backend::Mehler),
            "spectral" => Ok(Backend::Spectral),
            "fd" | "finite_difference" => Ok(Backend::FiniteDifference),
            other => Err(Error::InvalidParameter(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupConfig {
    /// Gauss–Hermite nodes for the Mehler backend.
    pub quadrature_order: usize,
    /// Highest Laguerre degree for the spectral backend.
    pub truncation: usize,
    /// Coarse grid size for the finite-difference backend.
    pub fd_points: usize,
    /// Coarse time step for the finite-difference backend.
    pub fd_dt: f64,
}

impl Default for SemigroupConfig {
    fn default() -> Self {
        SemigroupConfig { quadrature_order: 128, truncation: 200, fd_points: 4096, fd_dt: 1e-3 }
    }
}

/// What to do when the spectral tail exceeds its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailPolicy {
    Strict,
    Lenient,
}

#[derive(Clone)]
enum Engine {
    Mehler(Arc<GaussRule>),
    Spectral(Arc<LaguerreBasis>),
    Fd(Arc<FdSolver>),
}

/// Evaluates `P_t f` and its derivatives with a fixed backend.
#[derive(Clone)]
pub struct SemigroupEvaluator {
    backend: Backend,
    gen: Generator1D,
    config: SemigroupConfig,
    engine: Engine,
}

impl fmt::Debug for SemigroupEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemigroupEvaluator")
            .field("backend", &self.backend)
            .field("gen", &self.gen)
            .field("config", &self.config)
            .finish()
    }
}

impl SemigroupEvaluator {
    pub fn new(backend: Backend, gen: Generator1D, config: SemigroupConfig) -> Result<SemigroupEvaluator> {
        let engine = match (backend, gen.kind()) {
            (Backend::Mehler, SpaceKind::Ou) => {
                if config.quadrature_order < 2 {
                    return Err(Error::InvalidParameter("Mehler quadrature order must be at least 2".into()));
                }
                Engine::Mehler(Arc::new(gauss_hermite(config.quadrature_order)?))
            }
            (Backend::Mehler, _) => {
                return Err(Error::Unsupported("the Mehler backend needs the OU generator".into()))
            }
            (Backend::Spectral, SpaceKind::Laguerre { p }) => {
                Engine::Spectral(Arc::new(LaguerreBasis::new(p, config.truncation, gen.window().1)?))
            }
            (Backend::Spectral, _) => {
                return Err(Error::Unsupported("the spectral backend needs a Laguerre generator".into()))
            }
            (Backend::FiniteDifference, _) => {
                Engine::Fd(Arc::new(FdSolver::new(&gen, config.fd_points, config.fd_dt)?))
            }
        };
        Ok(SemigroupEvaluator { backend, gen, config, engine })
    }

    /// Default backend for a space: Mehler for OU, spectral for Laguerre.
    pub fn default_for(gen: Generator1D) -> Result<SemigroupEvaluator> {
        let backend = match gen.kind() {
            SpaceKind::Ou => Backend::Mehler,
            SpaceKind::Laguerre { .. } => Backend::Spectral,
            SpaceKind::Custom => Backend::FiniteDifference,
        };
        SemigroupEvaluator::new(backend, gen, SemigroupConfig::default())
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn generator(&self) -> &Generator1D {
        &self.gen
    }

    pub fn config(&self) -> &SemigroupConfig {
        &self.config
    }

    /// Highest jet order this backend can deliver.
    pub fn max_order(&self) -> usize {
        match self.engine {
            Engine::Fd(_) => FD_MAX_ORDER,
            _ => MAX_ORDER,
        }
    }

    /// Spectral basis, when that backend is active.
    pub fn spectral_basis(&self) -> Option<&LaguerreBasis> {
        match &self.engine {
            Engine::Spectral(b) => Some(b),
            _ => None,
        }
    }

    /// Prepare `t ↦ P_t f` on `[0, horizon]`.
    pub fn prepare(&self, f: &SmoothFn, horizon: f64) -> Result<Flow> {
        self.prepare_with(f, horizon, TailPolicy::Strict)
    }

    pub fn prepare_with(&self, f: &SmoothFn, horizon: f64, policy: TailPolicy) -> Result<Flow> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid horizon {horizon}")));
        }
        let state = match &self.engine {
            Engine::Mehler(rule) => FlowState::Mehler(rule.clone()),
            Engine::Spectral(basis) => {
                let g = f.clone();
                let coeffs = basis.project(&|x| g.value(x))?;
                FlowState::Spectral { basis: basis.clone(), coeffs }
            }
            Engine::Fd(solver) => {
                let g = f.clone();
                let snaps = if horizon > 0.0 {
                    Some(Arc::new(solver.snapshots(&|x| g.value(x), horizon)?))
                } else {
                    None
                };
                FlowState::Fd(snaps)
            }
        };
        Ok(Flow { f: f.clone(), gen: self.gen.clone(), horizon, policy, state })
    }

    /// `(P_t f)(x)`.
    pub fn evaluate(&self, f: &SmoothFn, t: f64, x: f64) -> Result<f64> {
        Ok(self.jet(f, t, x, 0)?.value())
    }

    /// `∂_x (P_t f)(x)`.
    pub fn gradient(&self, f: &SmoothFn, t: f64, x: f64) -> Result<f64> {
        Ok(self.jet(f, t, x, 1)?.derivative(1))
    }

    /// Jet of `P_t f` at `x`.
    pub fn jet(&self, f: &SmoothFn, t: f64, x: f64, order: usize) -> Result<Jet> {
        check_time(t)?;
        self.prepare(f, t)?.jet(t, x, order)
    }

    /// `(P_t g)(x)` for each `x` in `xs`, for a function known only by values.
    pub fn apply_values<G>(&self, g: &G, t: f64, xs: &[f64]) -> Result<Vec<f64>>
    where
        G: Fn(f64) -> f64 + Sync + ?Sized,
    {
        check_time(t)?;
        for &x in xs {
            self.gen.check_point(x)?;
        }
        if t == 0.0 {
            return Ok(xs.iter().map(|&x| g(x)).collect());
        }
        match &self.engine {
            Engine::Mehler(rule) => xs.iter().map(|&x| mehler::mehler_value(rule, g, t, x)).collect(),
            Engine::Spectral(basis) => {
                let coeffs = basis.project(g)?;
                check_tail(basis, &coeffs, t)?;
                Ok(xs.iter().map(|&x| basis.eval(&coeffs, t, x)).collect())
            }
            Engine::Fd(solver) => {
                let u = solver.solve(g, t)?;
                xs.iter()
                    .map(|&x| Ok(solver.interp_metric(&u, self.gen.to_metric(x), 0)?[0]))
                    .collect()
            }
        }
    }

    /// `(P_t g)(x)` for every `t` in `ts` (outer index) and `x` in `xs`.
    /// The spectral backend projects once; the finite-difference backend runs
    /// a single pass up to the largest time.
    pub fn apply_schedule<G>(&self, g: &G, ts: &[f64], xs: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        G: Fn(f64) -> f64 + Sync + ?Sized,
    {
        for &t in ts {
            check_time(t)?;
        }
        for &x in xs {
            self.gen.check_point(x)?;
        }
        let at_zero = || xs.iter().map(|&x| g(x)).collect::<Vec<f64>>();
        match &self.engine {
            Engine::Mehler(_) => ts.iter().map(|&t| self.apply_values(g, t, xs)).collect(),
            Engine::Spectral(basis) => {
                let coeffs = basis.project(g)?;
                ts.iter()
                    .map(|&t| {
                        if t == 0.0 {
                            return Ok(at_zero());
                        }
                        check_tail(basis, &coeffs, t)?;
                        Ok(xs.iter().map(|&x| basis.eval(&coeffs, t, x)).collect())
                    })
                    .collect()
            }
            Engine::Fd(solver) => {
                let horizon = ts.iter().copied().fold(0.0, f64::max);
                if horizon == 0.0 {
                    return Ok(ts.iter().map(|_| at_zero()).collect());
                }
                let snaps = solver.snapshots(g, horizon)?;
                ts.iter()
                    .map(|&t| {
                        if t == 0.0 {
                            return Ok(at_zero());
                        }
                        xs.iter().map(|&x| Ok(snaps.metric_jet(t, self.gen.to_metric(x), 0)?[0])).collect()
                    })
                    .collect()
            }
        }
    }

    /// `∫ g dμ` over the invariant measure.
    pub fn mean<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        self.gen.integrate(g, 1e-12)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time {t} must be finite and non-negative")))
    }
}

fn check_tail(basis: &LaguerreBasis, coeffs: &[f64], t: f64) -> Result<()> {
    let tail = basis.tail(coeffs, t);
    if tail > spectral::TAIL_TOL {
        return Err(Error::Truncation { t, tail, required: basis.required_truncation(coeffs, t) });
    }
    Ok(())
}

#[derive(Clone)]
enum FlowState {
    Mehler(Arc<GaussRule>),
    Spectral { basis: Arc<LaguerreBasis>, coeffs: Vec<f64> },
    Fd(Option<Arc<FdSnapshots>>),
}

/// `t ↦ P_t f` for a fixed `f`, ready for repeated evaluation.
#[derive(Clone)]
pub struct Flow {
    f: SmoothFn,
    gen: Generator1D,
    horizon: f64,
    policy: TailPolicy,
    state: FlowState,
}

impl fmt::Debug for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Flow").field("f", &self.f).field("horizon", &self.horizon).finish()
    }
}

impl Flow {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn function(&self) -> &SmoothFn {
        &self.f
    }

    /// Largest spectral tail `|c_n| e^{-nt}` at time `t` (zero for other backends).
    pub fn spectral_tail(&self, t: f64) -> f64 {
        match &self.state {
            FlowState::Spectral { basis, coeffs } if t > 0.0 => basis.tail(coeffs, t),
            _ => 0.0,
        }
    }

    /// Jet of `P_t f` at `x`.
    pub fn jet(&self, t: f64, x: f64, order: usize) -> Result<Jet> {
        check_time(t)?;
        if t > self.horizon * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::InvalidParameter(format!(
                "time {t} beyond the prepared horizon {}",
                self.horizon
            )));
        }
        self.gen.check_point(x)?;
        if t == 0.0 {
            return Ok(self.f.jet(x, order));
        }
        match &self.state {
            FlowState::Mehler(rule) => mehler::mehler_jet(rule, &self.f, t, x, order),
            FlowState::Spectral { basis, coeffs } => {
                if self.policy == TailPolicy::Strict {
                    check_tail(basis, coeffs, t)?;
                }
                Ok(basis.eval_jet(coeffs, t, x, order))
            }
            FlowState::Fd(snaps) => {
                if order > FD_MAX_ORDER {
                    return Err(Error::Unsupported(format!(
                        "finite-difference derivatives beyond order {FD_MAX_ORDER}"
                    )));
                }
                let snaps = snaps.as_ref().expect("positive horizon");
                let c = snaps.metric_jet(t, self.gen.to_metric(x), order)?;
                Ok(fd::metric_to_x(&self.gen, &c, x, order))
            }
        }
    }

    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.jet(t, x, 0)?.value())
    }

    /// Jet of `P_t f` with the spectral resolution indicator of
    /// [`LaguerreBasis::eval_jet_with_residual`]; zero for the other backends.
    pub fn jet_with_residual(&self, t: f64, x: f64, order: usize) -> Result<(Jet, f64)> {
        match &self.state {
            FlowState::Spectral { basis, coeffs } if t > 0.0 => {
                check_time(t)?;
                if t > self.horizon * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::InvalidParameter(format!(
                        "time {t} beyond the prepared horizon {}",
                        self.horizon
                    )));
                }
                self.gen.check_point(x)?;
                if self.policy == TailPolicy::Strict {
                    check_tail(basis, coeffs, t)?;
                }
                Ok(basis.eval_jet_with_residual(coeffs, t, x, order))
            }
            _ => Ok((self.jet(t, x, order)?, 0.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_laguerre, make_ou};
    use approx::assert_relative_eq;

    fn poly(c: &[f64]) -> SmoothFn {
        SmoothFn::polynomial("p", c.to_vec())
    }

    #[test]
    fn mehler_examples() {
        let ev = SemigroupEvaluator::default_for(make_ou()).unwrap();
        let id = poly(&[0.0, 1.0]);
        let sq = poly(&[0.0, 0.0, 1.0]);
        assert_eq!(ev.evaluate(&sq, 0.0, 1.7).unwrap(), 1.7 * 1.7);
        assert_relative_eq!(ev.evaluate(&SmoothFn::constant(1.0), 0.7, 2.0).unwrap(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(ev.evaluate(&id, 1.0, 2.0).unwrap(), 2.0 * (-1.0f64).exp(), epsilon = 1e-13);
        for t in [0.1, 1.0, 3.0] {
            let x = 1.3;
            let e = (-2.0 * t as f64).exp();
            assert_relative_eq!(ev.evaluate(&sq, t, x).unwrap(), x * x * e + 1.0 - e, epsilon = 1e-12);
        }
        assert_relative_eq!(ev.gradient(&id, 0.4, -3.0).unwrap(), (-0.4f64).exp(), epsilon = 1e-13);
        assert_eq!(ev.gradient(&SmoothFn::constant(1.0), 0.4, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn backend_mismatch_is_rejected() {
        let lg = make_laguerre(1.5).unwrap();
        assert!(SemigroupEvaluator::new(Backend::Mehler, lg, SemigroupConfig::default()).is_err());
        assert!(SemigroupEvaluator::new(Backend::Spectral, make_ou(), SemigroupConfig::default()).is_err());
    }

    #[test]
    fn spectral_eigenfunction_decay() {
        let ev = SemigroupEvaluator::default_for(make_laguerre(1.5).unwrap()).unwrap();
        let basis = ev.spectral_basis().unwrap();
        // ℓ_1 is (x - p)/sqrt(p) up to sign
        let p = 1.5f64;
        let l1 = SmoothFn::polynomial("l1", vec![-p / p.sqrt(), 1.0 / p.sqrt()]);
        for x in [0.3, 1.0, 4.0] {
            assert_relative_eq!(basis.ell(1, x).abs(), ((x - p) / p.sqrt()).abs(), epsilon = 1e-14);
            let t = 0.8;
            assert_relative_eq!(
                ev.evaluate(&l1, t, x).unwrap(),
                (-t as f64).exp() * (x - p) / p.sqrt(),
                epsilon = 1e-12
            );
        }
        assert_relative_eq!(ev.evaluate(&SmoothFn::constant(1.0), 0.3, 2.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_basis_is_orthonormal() {
        let basis = LaguerreBasis::new(2.0, 12, 200.0).unwrap();
        for j in 0..=12 {
            let c = basis.project(&|x| basis.ell(j, x)).unwrap();
            for (k, v) in c.iter().enumerate() {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-11, "({j},{k}) -> {v}");
            }
        }
    }

    #[test]
    fn spectral_tail_is_reported() {
        let ev = SemigroupEvaluator::default_for(make_laguerre(1.5).unwrap()).unwrap();
        let f = SmoothFn::new("sqrt", |j: &Jet| j.sqrt());
        match ev.evaluate(&f, 0.01, 1.0) {
            Err(Error::Truncation { required, .. }) => assert!(required > 200),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn flow_rejects_times_past_horizon() {
        let ev = SemigroupEvaluator::default_for(make_ou()).unwrap();
        let flow = ev.prepare(&SmoothFn::constant(1.0), 1.0).unwrap();
        assert!(flow.jet(1.5, 0.0, 1).is_err());
        assert!(flow.jet(-0.1, 0.0, 1).is_err());
    }
}
