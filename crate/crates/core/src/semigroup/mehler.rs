use crate::error::{Error, Result};
use crate::gamma::jet::{Jet, CAPACITY};
use crate::model::SmoothFn;
use crate::quadrature::GaussRule;

fn kernel(t: f64) -> (f64, f64) {
    ((-t).exp(), (-(-2.0 * t).exp_m1()).sqrt())
}

/// Jet of `P_t f` at `x` from `∂^k P_t f = e^{-kt} P_t f^(k)`.
pub(crate) fn mehler_jet(rule: &GaussRule, f: &SmoothFn, t: f64, x: f64, order: usize) -> Result<Jet> {
    if t == 0.0 {
        return Ok(f.jet(x, order));
    }
    let (e, sigma) = kernel(t);
    let mut acc = [0.0; CAPACITY];
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        let y = x * e + sigma * z;
        let j = f.jet(y, order);
        for (k, c) in j.coeffs().iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite { x: y, value: *c });
            }
            acc[k] += w * c;
        }
    }
    let mut scale = 1.0;
    for a in acc.iter_mut().take(order + 1) {
        *a *= scale;
        scale *= e;
    }
    Ok(Jet::new(x, &acc[..=order]))
}

/// `P_t g (x)` for a plain function.
pub(crate) fn mehler_value<G: Fn(f64) -> f64 + ?Sized>(rule: &GaussRule, g: &G, t: f64, x: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(g(x));
    }
    let (e, sigma) = kernel(t);
    let mut acc = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        let y = x * e + sigma * z;
        let v = g(y);
        if !v.is_finite() {
            return Err(Error::NonFinite { x: y, value: v });
        }
        acc += w * v;
    }
    Ok(acc)
}
