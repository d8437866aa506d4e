//! Orthonormal Laguerre expansion of the gamma semigroup.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gamma::jet::{Jet, CAPACITY};
use crate::quadrature::GaussRule;

/// Tail tolerance on `|c_n| e^{-nt}` for the last retained modes.
pub const TAIL_TOL: f64 = 1e-12;

const PANELS: usize = 128;
const PANEL_ORDER: usize = 16;

/// Orthonormal Laguerre polynomials of parameter `p - 1` with a projection
/// rule on the quadrature window.
#[derive(Debug)]
pub struct LaguerreBasis {
    p: f64,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `table[k * q + i] = ℓ_k(nodes[i])`.
    table: Vec<f64>,
}

impl LaguerreBasis {
    /// Basis up to degree `n`, with projection weights on `[0, x_max]`.
    ///
    /// The rule is composite Gauss–Legendre in `u = sqrt(x)`, where the gamma
    /// density becomes the smooth `2 u^{2p-1} e^{-u^2} / Γ(p)`.
    pub fn new(p: f64, n: usize, x_max: f64) -> Result<LaguerreBasis> {
        if n == 0 {
            return Err(Error::InvalidParameter("spectral truncation must be positive".into()));
        }
        let alpha = p - 1.0;
        let a: Vec<f64> = (0..=n + 1).map(|k| 2.0 * k as f64 + 1.0 + alpha).collect();
        let b: Vec<f64> = (0..=n + 1).map(|k| (k as f64 * (k as f64 + alpha)).sqrt()).collect();
        let rule = GaussRule::composite_legendre(0.0, x_max.sqrt(), PANELS, PANEL_ORDER);
        let lg = ln_gamma(p);
        let mut nodes = Vec::with_capacity(rule.len());
        let mut weights = Vec::with_capacity(rule.len());
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(u * u);
            weights.push(w * (2.0f64.ln() + (2.0 * p - 1.0) * u.ln() - u * u - lg).exp());
        }
        let q = nodes.len();
        let mut table = vec![0.0; (n + 1) * q];
        for (i, &x) in nodes.iter().enumerate() {
            let (mut prev, mut cur) = (0.0, 1.0);
            table[i] = 1.0;
            for k in 0..n {
                let next = ((x - a[k]) * cur - b[k] * prev) / b[k + 1];
                prev = cur;
                cur = next;
                table[(k + 1) * q + i] = cur;
            }
        }
        Ok(LaguerreBasis { p, n, a, b, nodes, weights, table })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    /// `ℓ_k(x)`.
    pub fn ell(&self, k: usize, x: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        for j in 0..k {
            let next = ((x - self.a[j]) * cur - self.b[j] * prev) / self.b[j + 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Coefficients `c_k = ∫ g ℓ_k dμ_p`, `k = 0..=n`.
    pub fn project<G: Fn(f64) -> f64 + ?Sized>(&self, g: &G) -> Result<Vec<f64>> {
        let q = self.nodes.len();
        let mut gw = Vec::with_capacity(q);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if w == 0.0 {
                gw.push(0.0);
                continue;
            }
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            gw.push(v * w);
        }
        Ok((0..=self.n)
            .map(|k| {
                self.table[k * q..(k + 1) * q]
                    .iter()
                    .zip(&gw)
                    .map(|(l, v)| l * v)
                    .sum()
            })
            .collect())
    }

    /// Largest damped coefficient among the last three modes.
    pub fn tail(&self, coeffs: &[f64], t: f64) -> f64 {
        let n = coeffs.len() - 1;
        (n.saturating_sub(2)..=n)
            .map(|k| coeffs[k].abs() * (-(k as f64) * t).exp())
            .fold(0.0, f64::max)
    }

    /// Truncation needed to bring the tail under [`TAIL_TOL`] at time `t`,
    /// assuming coefficients stop decaying past the current truncation.
    pub fn required_truncation(&self, coeffs: &[f64], t: f64) -> usize {
        let tail = self.tail(coeffs, t);
        if tail <= TAIL_TOL || t <= 0.0 {
            return self.n;
        }
        self.n + ((tail / TAIL_TOL).ln() / t).ceil() as usize
    }

    /// Jet of `Σ_k e^{-kt} c_k ℓ_k` at `x`.
    pub fn eval_jet(&self, coeffs: &[f64], t: f64, x: f64, order: usize) -> Jet {
        self.eval_jet_with_residual(coeffs, t, x, order).0
    }

    /// Jet of the series together with a pointwise resolution indicator: the
    /// largest (over jet components) sum of `|e^{-kt} c_k ℓ_k^{(j)}(x)|/j!` over
    /// the top quarter of retained modes. At large `x` and small `t` the
    /// polynomials amplify the high modes and this is where the series fails.
    pub fn eval_jet_with_residual(&self, coeffs: &[f64], t: f64, x: f64, order: usize) -> (Jet, f64) {
        let m = order + 1;
        let mut prev = [0.0; CAPACITY];
        let mut cur = [0.0; CAPACITY];
        cur[0] = 1.0;
        let mut acc = [0.0; CAPACITY];
        let mut high = [0.0; CAPACITY];
        let start = coeffs.len() - coeffs.len() / 4;
        let decay = (-t).exp();
        let mut damp = 1.0;
        for k in 0..coeffs.len() {
            let d = coeffs[k] * damp;
            for j in 0..m {
                acc[j] += d * cur[j];
                if k >= start {
                    high[j] += (d * cur[j]).abs();
                }
            }
            if k + 1 == coeffs.len() {
                break;
            }
            let mut next = [0.0; CAPACITY];
            let inv = 1.0 / self.b[k + 1];
            for j in 0..m {
                let lower = if j > 0 { cur[j - 1] } else { 0.0 };
                next[j] = ((x - self.a[k]) * cur[j] + lower - self.b[k] * prev[j]) * inv;
            }
            prev = cur;
            cur = next;
            damp *= decay;
        }
        (Jet::new(x, &acc[..m]), high[..m].iter().copied().fold(0.0, f64::max))
    }

    pub fn eval(&self, coeffs: &[f64], t: f64, x: f64) -> f64 {
        self.eval_jet(coeffs, t, x, 0).value()
    }
}
