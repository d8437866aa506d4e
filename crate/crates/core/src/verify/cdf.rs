//! Distribution functions of `μ` and `ν = e^{-V} μ` by panelled adaptive quadrature.

use crate::error::{Error, Result};
use crate::model::{Generator1D, Potential};
use crate::quadrature::integrate_adaptive;

/// Default number of panels across the quadrature window.
pub const DEFAULT_PANELS: usize = 1024;

/// Cumulative and survival functions of a measure on a model space.
///
/// Panel masses are integrated once in the metric coordinate; the left
/// (cumulative) and right (survival) partial sums are both kept so that
/// either tail is resolved without cancellation.
#[derive(Clone, Debug)]
pub struct MeasureCdf {
    gen: Generator1D,
    weight: Option<Potential>,
    edges: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    total: f64,
}

impl MeasureCdf {
    /// The invariant measure `μ`.
    pub fn invariant(gen: &Generator1D) -> Result<MeasureCdf> {
        MeasureCdf::build(gen, None, DEFAULT_PANELS)
    }

    /// `ν ∝ e^{-V} μ`.
    pub fn perturbed(gen: &Generator1D, pot: &Potential) -> Result<MeasureCdf> {
        MeasureCdf::build(gen, Some(pot.clone()), DEFAULT_PANELS)
    }

    pub fn build(gen: &Generator1D, weight: Option<Potential>, panels: usize) -> Result<MeasureCdf> {
        if panels == 0 {
            return Err(Error::InvalidParameter("at least one panel is needed".into()));
        }
        let (s0, s1) = gen.metric_window();
        let h = (s1 - s0) / panels as f64;
        let edges: Vec<f64> = (0..=panels).map(|i| if i == panels { s1 } else { s0 + h * i as f64 }).collect();
        let mut cdf = MeasureCdf { gen: gen.clone(), weight, edges, left: vec![], right: vec![], total: 1.0 };
        let masses: Vec<f64> =
            (0..panels).map(|i| cdf.raw_integral(cdf.edges[i], cdf.edges[i + 1])).collect::<Result<_>>()?;
        let mut left = vec![0.0; panels + 1];
        for i in 0..panels {
            left[i + 1] = left[i] + masses[i];
        }
        let mut right = vec![0.0; panels + 1];
        for i in (0..panels).rev() {
            right[i] = right[i + 1] + masses[i];
        }
        let total = left[panels];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Quadrature { lo: s0, hi: s1, estimate: total });
        }
        cdf.left = left.iter().map(|v| v / total).collect();
        cdf.right = right.iter().map(|v| v / total).collect();
        cdf.total = total;
        Ok(cdf)
    }

    pub fn generator(&self) -> &Generator1D {
        &self.gen
    }

    /// Mass of the unnormalized measure over the window.
    pub fn raw_mass(&self) -> f64 {
        self.total
    }

    /// Support window in `x`.
    pub fn support(&self) -> (f64, f64) {
        self.gen.window()
    }

    /// Density with respect to `ds` in the metric coordinate, unnormalized.
    fn raw_density(&self, s: f64) -> f64 {
        let m = self.gen.metric_density(s);
        if m == 0.0 {
            return 0.0;
        }
        match &self.weight {
            None => m,
            Some(p) => m * (-p.value(self.gen.from_metric(s))).exp(),
        }
    }

    fn raw_integral(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        integrate_adaptive(|s| self.raw_density(s), a, b, 1e-18, 1e-14)
    }

    /// Normalized density with respect to `ds`.
    pub fn metric_density(&self, s: f64) -> f64 {
        self.raw_density(s) / self.total
    }

    fn panel(&self, s: f64) -> usize {
        let n = self.edges.len() - 1;
        self.edges.partition_point(|&e| e <= s).clamp(1, n) - 1
    }

    fn clamp_metric(&self, x: f64) -> f64 {
        let (s0, s1) = self.gen.metric_window();
        self.gen.to_metric(x).clamp(s0, s1)
    }

    fn cdf_metric(&self, s: f64) -> Result<f64> {
        let i = self.panel(s);
        Ok(self.left[i] + self.raw_integral(self.edges[i], s)? / self.total)
    }

    fn survival_metric(&self, s: f64) -> Result<f64> {
        let i = self.panel(s);
        Ok(self.right[i + 1] + self.raw_integral(s, self.edges[i + 1])? / self.total)
    }

    /// `F(x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.cdf_metric(self.clamp_metric(x))
    }

    /// `1 − F(x)`, computed from the right.
    pub fn survival(&self, x: f64) -> Result<f64> {
        self.survival_metric(self.clamp_metric(x))
    }

    /// `F^{-1}(u)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!("probability {u} outside [0, 1]")));
        }
        if u > 0.5 {
            return self.quantile_upper(1.0 - u);
        }
        self.solve(u, false)
    }

    /// The point with survival `v`, i.e. `F^{-1}(1 − v)` without forming `1 − v`.
    pub fn quantile_upper(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("probability {v} outside [0, 1]")));
        }
        self.solve(v, true)
    }

    fn solve(&self, level: f64, upper: bool) -> Result<f64> {
        let n = self.edges.len() - 1;
        // Panel i holds the level when left[i] <= level <= left[i+1] (or the
        // mirrored condition on the survival sums).
        let i = if upper {
            self.right.partition_point(|&r| r > level).clamp(1, n) - 1
        } else {
            self.left.partition_point(|&l| l <= level).clamp(1, n) - 1
        };
        let residual = |s: f64| -> Result<f64> {
            if upper {
                Ok(level - self.right[i + 1] - self.raw_integral(s, self.edges[i + 1])? / self.total)
            } else {
                Ok(self.left[i] + self.raw_integral(self.edges[i], s)? / self.total - level)
            }
        };
        let (mut lo, mut hi) = (self.edges[i], self.edges[i + 1]);
        let (r_lo, r_hi) = (residual(lo)?, residual(hi)?);
        if r_lo > 1e-15 || r_hi < -1e-15 {
            return Err(Error::Bracketing { level });
        }
        let mut s = if r_hi == r_lo { lo } else { lo + (hi - lo) * (-r_lo / (r_hi - r_lo)).clamp(0.0, 1.0) };
        for _ in 0..200 {
            let r = residual(s)?;
            if r == 0.0 {
                break;
            }
            if r < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let m = self.metric_density(s);
            let mut next = if m > 0.0 { s - r / m } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0)
            {
                s = next;
                break;
            }
            s = next;
        }
        Ok(self.gen.from_metric(s))
    }
}

/// `F_ν^{-1}(F_μ(x))`, going through the survival functions in the upper half.
pub fn monge_quantile_map(mu: &MeasureCdf, nu: &MeasureCdf, x: f64) -> Result<f64> {
    let u = mu.cdf(x)?;
    if u <= 0.5 {
        nu.quantile(u)
    } else {
        nu.quantile_upper(mu.survival(x)?)
    }
}
