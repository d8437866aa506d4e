//! Gaussian rules from three-term recurrences and adaptive Gauss–Kronrod.
//!
//! Nodes are the eigenvalues of the Jacobi matrix, polished by Newton steps on
//! the orthonormal recurrence. Weights use the Christoffel form
//! `1 / sum_k p_k(z)^2`, which keeps full relative accuracy for the tiny
//! weights at the extremes of the Hermite and Laguerre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Composite Gauss–Legendre rule on `[lo, hi]` (Lebesgue measure).
    pub fn composite_legendre(lo: f64, hi: f64, panels: usize, order: usize) -> GaussRule {
        let base = gauss_legendre(order);
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = lo + p as f64 * h;
            for (z, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(a + 0.5 * h * (z + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        GaussRule { nodes, weights }
    }
}

/// Recurrence `z p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}` for
/// polynomials orthonormal with respect to a probability measure.
struct Recurrence {
    a: Vec<f64>,
    b: Vec<f64>,
}

struct PolyEval {
    p: f64,
    dp: f64,
    log_sum_sq: f64,
}

impl Recurrence {
    /// Values of `p_n`, `p_n'` (up to a common positive scale) and
    /// `log sum_{k<n} p_k^2` at `z`.
    fn eval(&self, n: usize, z: f64) -> PolyEval {
        const BIG: f64 = 1e100;
        let mut log_scale = 0.0f64;
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut dp_prev, mut dp) = (0.0, 0.0);
        let mut sum = 0.0;
        for k in 0..n {
            sum += p * p;
            let next = ((z - self.a[k]) * p - self.b[k] * p_prev) / self.b[k + 1];
            let dnext = ((z - self.a[k]) * dp + p - self.b[k] * dp_prev) / self.b[k + 1];
            p_prev = p;
            p = next;
            dp_prev = dp;
            dp = dnext;
            if p.abs() > BIG || dp.abs() > BIG {
                p_prev /= BIG;
                p /= BIG;
                dp_prev /= BIG;
                dp /= BIG;
                sum /= BIG * BIG;
                log_scale += BIG.ln();
            }
        }
        PolyEval { p, dp, log_sum_sq: sum.ln() + 2.0 * log_scale }
    }

    fn rule(&self, n: usize) -> Result<GaussRule> {
        if n == 0 {
            return Err(Error::InvalidParameter("quadrature order must be positive".into()));
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.a[i]
            } else if i + 1 == j {
                self.b[j]
            } else if j + 1 == i {
                self.b[i]
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let mut weights = Vec::with_capacity(n);
        for z in nodes.iter_mut() {
            for _ in 0..3 {
                let e = self.eval(n, *z);
                if e.dp == 0.0 || !e.dp.is_finite() || !e.p.is_finite() {
                    break;
                }
                let step = e.p / e.dp;
                if !step.is_finite() {
                    break;
                }
                *z -= step;
                if step.abs() <= 1e-16 * z.abs().max(1.0) {
                    break;
                }
            }
            let e = self.eval(n, *z);
            weights.push((-e.log_sum_sq).exp());
        }
        Ok(GaussRule { nodes, weights })
    }
}

/// Gauss–Hermite rule for the standard Gaussian probability measure.
pub fn gauss_hermite(n: usize) -> Result<GaussRule> {
    let a = vec![0.0; n + 1];
    let b: Vec<f64> = (0..=n + 1).map(|k| (k as f64).sqrt()).collect();
    Recurrence { a, b }.rule(n)
}

/// Gauss–Laguerre rule for the probability measure `z^alpha e^{-z} / Γ(alpha + 1)`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<GaussRule> {
    if alpha <= -1.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("Laguerre parameter {alpha} must exceed -1")));
    }
    let a: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 + 1.0 + alpha).collect();
    let b: Vec<f64> = (0..=n + 1)
        .map(|k| (k as f64 * (k as f64 + alpha)).sqrt())
        .collect();
    Recurrence { a, b }.rule(n)
}

/// Gauss–Legendre rule on `[-1, 1]` (Lebesgue measure, weights sum to 2).
pub fn gauss_legendre(n: usize) -> GaussRule {
    let a = vec![0.0; n + 1];
    let b: Vec<f64> = (0..=n + 1)
        .map(|k| {
            let k = k as f64;
            if k == 0.0 {
                0.0
            } else {
                k / (4.0 * k * k - 1.0).sqrt()
            }
        })
        .collect();
    let mut rule = Recurrence { a, b }.rule(n).expect("positive order");
    for w in rule.weights.iter_mut() {
        *w *= 2.0;
    }
    rule
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let d = h * XGK[i];
        let s = f(c - d) + f(c + d);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration on a finite interval.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_SEGMENTS: usize = 4000;
    if lo == hi {
        return Ok(0.0);
    }
    let (value, err) = kronrod(&f, lo, hi);
    if !value.is_finite() {
        return Err(Error::NonFinite { x: 0.5 * (lo + hi), value });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { lo, hi, value, err });
    let (mut total, mut total_err) = (value, err);
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature { lo, hi, estimate: total_err });
        }
        let seg = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            return Err(Error::Quadrature { lo, hi, estimate: total_err });
        }
        let (v1, e1) = kronrod(&f, seg.lo, mid);
        let (v2, e2) = kronrod(&f, mid, seg.hi);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::NonFinite { x: mid, value: v1 + v2 });
        }
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { lo: seg.lo, hi: mid, value: v1, err: e1 });
        heap.push(Segment { lo: mid, hi: seg.hi, value: v2, err: e2 });
    }
    // re-sum for a result free of accumulated update rounding
    Ok(heap.iter().map(|s| s.value).sum())
}
