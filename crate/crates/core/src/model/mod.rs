//! One-dimensional weighted model spaces and log-Lipschitz potentials.

mod function;
mod potential;

use std::fmt;
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gamma::jet::Jet;
use crate::quadrature::{integrate_adaptive, GaussRule};

pub use function::SmoothFn;
pub use potential::{
    certify_lipschitz, normalize_potential, validation_grid, Potential, PotentialKind,
    TabulatedPotential,
};

/// Smallest Laguerre parameter accepted.
pub const MIN_LAGUERRE_P: f64 = 1.5;
/// Half-width of the Gaussian quadrature window.
pub const OU_WINDOW: f64 = 12.0;
/// Left end of the gamma quadrature window.
pub const LAGUERRE_EPS: f64 = 1e-10;

pub type JetMap = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceKind {
    Ou,
    Laguerre { p: f64 },
    Custom,
}

/// Coefficients of a user-supplied generator `L f = a f'' + b f'`.
#[derive(Clone)]
pub struct CustomCoefficients {
    /// Diffusion coefficient `a` acting on jets.
    pub diffusion: JetMap,
    /// Drift `b` acting on jets.
    pub drift: JetMap,
    /// Unnormalized log invariant density.
    pub log_density: ScalarMap,
    pub domain: (f64, f64),
    /// Finite interval carrying all but a negligible fraction of the mass.
    pub window: (f64, f64),
    pub rho1: f64,
    pub rho2: f64,
}

/// A diffusion generator `L f = a f'' + b f'` on an interval with its
/// invariant probability measure and intrinsic metric `1/a`.
#[derive(Clone)]
pub struct Generator1D {
    kind: SpaceKind,
    domain: (f64, f64),
    window: (f64, f64),
    rho1: f64,
    rho2: f64,
    log_norm: f64,
    custom: Option<Arc<CustomCoefficients>>,
}

impl fmt::Debug for Generator1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator1D")
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("rho1", &self.rho1)
            .field("rho2", &self.rho2)
            .finish()
    }
}

/// Ornstein–Uhlenbeck generator with standard Gaussian invariant measure.
pub fn make_ou() -> Generator1D {
    Generator1D {
        kind: SpaceKind::Ou,
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        window: (-OU_WINDOW, OU_WINDOW),
        rho1: 1.0,
        rho2: 1.0,
        log_norm: -0.5 * (2.0 * std::f64::consts::PI).ln(),
        custom: None,
    }
}

/// Laguerre generator `x f'' + (p - x) f'` with gamma invariant measure.
pub fn make_laguerre(p: f64) -> Result<Generator1D> {
    if !p.is_finite() || p < MIN_LAGUERRE_P {
        return Err(Error::InvalidParameter(format!(
            "Laguerre parameter p = {p} is below 3/2; only the essentially self-adjoint range p >= 3/2 is supported"
        )));
    }
    Ok(Generator1D {
        kind: SpaceKind::Laguerre { p },
        domain: (0.0, f64::INFINITY),
        window: (LAGUERRE_EPS, (20.0 * p).max(80.0)),
        rho1: 0.5,
        rho2: 0.5,
        log_norm: -ln_gamma(p),
        custom: None,
    })
}

impl Generator1D {
    /// Generator from user-supplied coefficients. The log density is
    /// normalized over the window by quadrature.
    pub fn custom(coeffs: CustomCoefficients) -> Result<Generator1D> {
        let (lo, hi) = coeffs.window;
        if !(lo < hi && lo >= coeffs.domain.0 && hi <= coeffs.domain.1) {
            return Err(Error::InvalidParameter("custom window must lie inside the domain".into()));
        }
        if !(coeffs.rho1 > 0.0 && coeffs.rho2 > 0.0) {
            return Err(Error::InvalidParameter("curvature constants must be positive".into()));
        }
        let ld = coeffs.log_density.clone();
        let z = integrate_adaptive(|x| ld(x).exp(), lo, hi, 1e-14, 1e-12)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidParameter("custom density is not integrable".into()));
        }
        Ok(Generator1D {
            kind: SpaceKind::Custom,
            domain: coeffs.domain,
            window: coeffs.window,
            rho1: coeffs.rho1,
            rho2: coeffs.rho2,
            log_norm: -z.ln(),
            custom: Some(Arc::new(coeffs)),
        })
    }

    /// Same generator with different curvature constants.
    pub fn with_curvature(mut self, rho1: f64, rho2: f64) -> Result<Generator1D> {
        if !(rho1 > 0.0 && rho2 > 0.0 && rho1.is_finite() && rho2.is_finite()) {
            return Err(Error::InvalidParameter("curvature constants must be positive".into()));
        }
        self.rho1 = rho1;
        self.rho2 = rho2;
        Ok(self)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn laguerre_p(&self) -> Option<f64> {
        match self.kind {
            SpaceKind::Laguerre { p } => Some(p),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            SpaceKind::Ou => "ou".into(),
            SpaceKind::Laguerre { p } => format!("laguerre(p={p})"),
            SpaceKind::Custom => "custom".into(),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.domain.0 && x < self.domain.1
    }

    pub fn check_point(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x, lo: self.domain.0, hi: self.domain.1 })
        }
    }

    /// Taylor expansions of `a` and `b` at `x` to the given order.
    pub fn coefficient_jets(&self, x: f64, order: usize) -> (Jet, Jet) {
        match self.kind {
            SpaceKind::Ou => (
                Jet::constant(x, 1.0).truncate(order),
                -Jet::variable_order(x, order),
            ),
            SpaceKind::Laguerre { p } => {
                let v = Jet::variable_order(x, order);
                (v, -v + p)
            }
            SpaceKind::Custom => {
                let c = self.custom.as_ref().expect("custom coefficients");
                let v = Jet::variable_order(x, order);
                ((c.diffusion)(&v), (c.drift)(&v))
            }
        }
    }

    pub fn a(&self, x: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => 1.0,
            SpaceKind::Laguerre { .. } => x,
            SpaceKind::Custom => self.coefficient_jets(x, 0).0.value(),
        }
    }

    pub fn a_prime(&self, x: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => 0.0,
            SpaceKind::Laguerre { .. } => 1.0,
            SpaceKind::Custom => self.coefficient_jets(x, 1).0.derivative(1),
        }
    }

    pub fn b(&self, x: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => -x,
            SpaceKind::Laguerre { p } => p - x,
            SpaceKind::Custom => self.coefficient_jets(x, 0).1.value(),
        }
    }

    /// Log of the invariant density with respect to Lebesgue measure.
    pub fn log_density(&self, x: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => self.log_norm - 0.5 * x * x,
            SpaceKind::Laguerre { p } => self.log_norm + (p - 1.0) * x.ln() - x,
            SpaceKind::Custom => {
                self.log_norm + (self.custom.as_ref().expect("custom").log_density)(x)
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        self.log_density(x).exp()
    }

    /// Intrinsic (metric) coordinate: OU `x`, Laguerre `2 sqrt(x)`.
    pub fn to_metric(&self, x: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => x,
            SpaceKind::Laguerre { .. } => 2.0 * x.max(0.0).sqrt(),
            SpaceKind::Custom => self.custom_metric(x),
        }
    }

    pub fn from_metric(&self, s: f64) -> f64 {
        match self.kind {
            SpaceKind::Ou => s,
            SpaceKind::Laguerre { .. } => 0.25 * s * s,
            SpaceKind::Custom => {
                let (mut lo, mut hi) = self.window;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.custom_metric(mid) < s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    fn custom_metric(&self, x: f64) -> f64 {
        let lo = self.window.0;
        integrate_adaptive(|y| 1.0 / self.a(y).sqrt(), lo, x, 1e-13, 1e-13).unwrap_or(f64::NAN)
    }

    /// Quadrature window in the metric coordinate.
    pub fn metric_window(&self) -> (f64, f64) {
        (self.to_metric(self.window.0), self.to_metric(self.window.1))
    }

    /// Invariant density with respect to `ds` in the metric coordinate.
    pub fn metric_density(&self, s: f64) -> f64 {
        let x = self.from_metric(s);
        if !self.contains(x) {
            return 0.0;
        }
        (self.log_density(x) + 0.5 * self.a(x).ln()).exp()
    }

    /// Riemannian distance `|∫_x^y a^{-1/2}|`.
    pub fn metric_distance(&self, x: f64, y: f64) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self.kind {
            SpaceKind::Custom => {
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                integrate_adaptive(|z| 1.0 / self.a(z).sqrt(), lo, hi, 1e-13, 1e-13)
            }
            _ => Ok((self.to_metric(y) - self.to_metric(x)).abs()),
        }
    }

    /// `Γ(f)(x) = a(x) f'(x)^2`.
    pub fn carre_du_champ(&self, df: f64, x: f64) -> f64 {
        self.a(x) * df * df
    }

    /// `∫ g dμ` over the quadrature window, integrated in the metric coordinate.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, abs_tol: f64) -> Result<f64> {
        let (s0, s1) = self.metric_window();
        let panels = 16;
        let h = (s1 - s0) / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let a = s0 + i as f64 * h;
            let b = if i + 1 == panels { s1 } else { a + h };
            total += integrate_adaptive(
                |s| {
                    let m = self.metric_density(s);
                    if m == 0.0 {
                        0.0
                    } else {
                        m * g(self.from_metric(s))
                    }
                },
                a,
                b,
                abs_tol / panels as f64,
                1e-13,
            )?;
        }
        Ok(total)
    }

    /// Fixed rule for `∫ g dμ`: composite Gauss–Legendre in the metric
    /// coordinate with the invariant density folded into the weights.
    pub fn measure_rule(&self, panels: usize, order: usize) -> GaussRule {
        let (s0, s1) = self.metric_window();
        let base = GaussRule::composite_legendre(s0, s1, panels, order);
        let mut nodes = Vec::with_capacity(base.len());
        let mut weights = Vec::with_capacity(base.len());
        for (&s, &w) in base.nodes.iter().zip(&base.weights) {
            let m = self.metric_density(s);
            if m > 0.0 {
                nodes.push(self.from_metric(s));
                weights.push(w * m);
            }
        }
        GaussRule { nodes, weights }
    }

    /// Deviation of the total invariant mass from one.
    pub fn normalization_error(&self) -> Result<f64> {
        Ok((self.integrate(|_| 1.0, 1e-13)? - 1.0).abs())
    }

    /// Interval carrying the central `mass` fraction of the invariant measure.
    pub fn central_interval(&self, mass: f64) -> Result<(f64, f64)> {
        let tail = 0.5 * (1.0 - mass);
        match self.kind {
            SpaceKind::Ou => {
                let n = Normal::new(0.0, 1.0).expect("standard normal");
                Ok((n.inverse_cdf(tail), n.inverse_cdf(1.0 - tail)))
            }
            SpaceKind::Laguerre { p } => {
                let g = GammaDist::new(p, 1.0)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok((g.inverse_cdf(tail), g.inverse_cdf(1.0 - tail)))
            }
            SpaceKind::Custom => Err(Error::Unsupported(
                "central interval of a custom generator (use MeasureCdf)".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ou_coefficients() {
        let g = make_ou();
        assert_eq!(g.a(2.0), 1.0);
        assert_eq!(g.b(2.0), -2.0);
        assert_relative_eq!(g.density(0.0), 0.398_942_280_401_432_7, max_relative = 1e-15);
        assert_eq!((g.rho1(), g.rho2()), (1.0, 1.0));
    }

    #[test]
    fn laguerre_coefficients() {
        let g = make_laguerre(1.5).unwrap();
        assert_eq!(g.a(4.0), 4.0);
        assert_eq!(g.b(1.0), 0.5);
        let g2 = make_laguerre(2.0).unwrap();
        assert_relative_eq!(g2.density(1.0), (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!((g.rho1(), g.rho2()), (0.5, 0.5));
    }

    #[test]
    fn laguerre_rejects_small_p() {
        let e = make_laguerre(1.0).unwrap_err();
        assert!(e.to_string().contains("self-adjoint"));
        assert!(make_laguerre(f64::NAN).is_err());
    }

    #[test]
    fn distances() {
        let ou = make_ou();
        assert_eq!(ou.metric_distance(0.0, 1.0).unwrap(), 1.0);
        let lg = make_laguerre(1.5).unwrap();
        assert_relative_eq!(lg.metric_distance(1.0, 4.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(lg.metric_distance(3.0, 3.0).unwrap(), 0.0);
        assert!(lg.metric_distance(-1.0, 1.0).is_err());
    }

    #[test]
    fn carre_du_champ_examples() {
        let lg = make_laguerre(1.5).unwrap();
        assert_eq!(lg.carre_du_champ(1.0, 3.0), 3.0);
        assert_eq!(lg.carre_du_champ(0.0, 3.0), 0.0);
        let x = 2.7f64;
        assert_relative_eq!(lg.carre_du_champ(1.0 / x.sqrt(), x), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn invariant_measures_are_normalized() {
        assert!(make_ou().normalization_error().unwrap() < 1e-8);
        for p in [1.5, 2.0, 3.0, 7.5] {
            assert!(make_laguerre(p).unwrap().normalization_error().unwrap() < 1e-8);
        }
    }

    #[test]
    fn laguerre_mean_is_p() {
        let lg = make_laguerre(3.0).unwrap();
        assert_relative_eq!(lg.integrate(|x| x, 1e-12).unwrap(), 3.0, max_relative = 1e-10);
    }

    #[test]
    fn custom_generator_reproduces_ou() {
        let c = CustomCoefficients {
            diffusion: Arc::new(|j: &Jet| Jet::constant(j.x(), 1.0).truncate(j.order())),
            drift: Arc::new(|j: &Jet| -*j),
            log_density: Arc::new(|x| -0.5 * x * x),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
            window: (-12.0, 12.0),
            rho1: 1.0,
            rho2: 1.0,
        };
        let g = Generator1D::custom(c).unwrap();
        assert_relative_eq!(g.density(0.0), make_ou().density(0.0), max_relative = 1e-12);
        assert_relative_eq!(g.metric_distance(-1.0, 2.0).unwrap(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.from_metric(g.to_metric(1.5)), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn central_interval_ou() {
        let (lo, hi) = make_ou().central_interval(0.99).unwrap();
        assert_relative_eq!(hi, 2.575_829_303_548_9, max_relative = 1e-9);
        assert_relative_eq!(lo, -hi, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn metric_is_symmetric_and_triangular(
            x in 1e-3f64..60.0, y in 1e-3f64..60.0, z in 1e-3f64..60.0, p in 1.5f64..5.0
        ) {
            let g = make_laguerre(p).unwrap();
            let dxy = g.metric_distance(x, y).unwrap();
            prop_assert!((dxy - g.metric_distance(y, x).unwrap()).abs() <= 1e-10);
            let via = g.metric_distance(x, z).unwrap() + g.metric_distance(z, y).unwrap();
            prop_assert!(dxy <= via + 1e-10);
        }

        #[test]
        fn metric_round_trip(x in 1e-6f64..100.0) {
            let g = make_laguerre(2.0).unwrap();
            prop_assert!((g.from_metric(g.to_metric(x)) - x).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
