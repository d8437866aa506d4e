//! Scalar Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOutcome {
    pub y: f64,
    /// Sum of accepted local error estimates.
    pub error_estimate: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// Integrate `y' = f(t, y)` from `(t0, y0)` to `t1` (either direction) with
/// mixed absolute/relative tolerance `tol`. `max_step(t)` bounds `|h|`.
pub fn integrate<F, M>(mut f: F, t0: f64, y0: f64, t1: f64, tol: f64, max_step: M) -> Result<OdeOutcome>
where
    F: FnMut(f64, f64) -> Result<f64>,
    M: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("ODE tolerance must be positive".into()));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut out = OdeOutcome { y, error_estimate: 0.0, steps: 0, rejected: 0 };
    if t0 == t1 {
        return Ok(out);
    }
    let mut h = dir * (0.01f64).min(max_step(t)).min((t1 - t0).abs());
    let mut k = [0.0; 7];
    k[0] = f(t, y)?;
    while dir * (t1 - t) > 0.0 {
        let cap = max_step(t);
        if h.abs() > cap {
            h = dir * cap;
        }
        if dir * (t + h - t1) > 0.0 {
            h = t1 - t;
        }
        if h.abs() < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        for i in 1..7 {
            let mut yi = y;
            for j in 0..i {
                yi += h * A[i][j] * k[j];
            }
            k[i] = f(t + C[i] * h, yi)?;
        }
        let mut y_new = y;
        for j in 0..6 {
            y_new += h * A[6][j] * k[j];
        }
        let err: f64 = (h * E.iter().zip(&k).map(|(e, ki)| e * ki).sum::<f64>()).abs();
        let scale = tol * (1.0 + y.abs().max(y_new.abs()));
        let ratio = err / scale;
        if ratio <= 1.0 || !ratio.is_finite() && err == 0.0 {
            t += h;
            y = y_new;
            k[0] = k[6];
            out.steps += 1;
            out.error_estimate += err;
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            out.rejected += 1;
            if !ratio.is_finite() {
                h *= 0.1;
            } else {
                h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
    }
    out.y = y;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let r = integrate(|_, y| Ok(y), 0.0, 1.0, 2.0, 1e-10, |_| 1.0).unwrap();
        assert_relative_eq!(r.y, 2f64.exp(), max_relative = 1e-8);
    }

    #[test]
    fn backward_integration() {
        // y' = e^{-t}, y(5) = 0 -> y(0) = e^{-5} - 1
        let r = integrate(|t, _| Ok((-t).exp()), 5.0, 0.0, 0.0, 1e-10, |_| 0.05).unwrap();
        assert_relative_eq!(r.y, (-5.0f64).exp() - 1.0, epsilon = 1e-9);
        assert!(r.steps >= 100);
    }

    #[test]
    fn zero_span() {
        let r = integrate(|_, _| Ok(1.0), 1.0, 3.0, 1.0, 1e-8, |_| 1.0).unwrap();
        assert_eq!(r.y, 3.0);
    }

    #[test]
    fn propagates_rhs_errors() {
        let r = integrate(|t, _| if t < 0.5 { Err(Error::StepUnderflow { t }) } else { Ok(0.0) }, 1.0, 0.0, 0.0, 1e-8, |_| 0.1);
        assert!(r.is_err());
    }
}
