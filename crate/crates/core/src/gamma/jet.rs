//! Truncated Taylor expansions at a point.
//!
//! A [`Jet`] of order `m` at `x` stores `c_k = f^(k)(x) / k!` for `k = 0..=m`.
//! Arithmetic is truncated-Taylor algebra: the result of a binary operation
//! has the smaller of the two orders.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest number of stored coefficients.
pub const CAPACITY: usize = 11;
/// Highest representable order.
pub const MAX_ORDER: usize = CAPACITY - 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    x: f64,
    order: usize,
    c: [f64; CAPACITY],
}

impl Jet {
    /// Jet from Taylor coefficients `c_0..c_m`.
    pub fn new(x: f64, coeffs: &[f64]) -> Jet {
        assert!(
            !coeffs.is_empty() && coeffs.len() <= CAPACITY,
            "jet needs between 1 and {CAPACITY} coefficients"
        );
        let mut c = [0.0; CAPACITY];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Jet { x, order: coeffs.len() - 1, c }
    }

    /// Jet from derivative values `f(x), f'(x), ..., f^(m)(x)`.
    pub fn from_derivatives(x: f64, derivs: &[f64]) -> Jet {
        let mut j = Jet::new(x, derivs);
        let mut fact = 1.0;
        for k in 1..=j.order {
            fact *= k as f64;
            j.c[k] /= fact;
        }
        j
    }

    /// Constant function, exact to the maximal order.
    pub fn constant(x: f64, value: f64) -> Jet {
        let mut c = [0.0; CAPACITY];
        c[0] = value;
        Jet { x, order: MAX_ORDER, c }
    }

    /// The identity function `y -> y` expanded at `x`, exact to the maximal order.
    pub fn variable(x: f64) -> Jet {
        Jet::variable_order(x, MAX_ORDER)
    }

    /// The identity function truncated at `order`.
    pub fn variable_order(x: f64, order: usize) -> Jet {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; CAPACITY];
        c[0] = x;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { x, order, c }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `f^(k)(x)`; zero beyond the stored order.
    pub fn derivative(&self, k: usize) -> f64 {
        if k > self.order {
            return 0.0;
        }
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * fact
    }

    /// Drop coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let mut c = [0.0; CAPACITY];
        c[..=order].copy_from_slice(&self.c[..=order]);
        Jet { x: self.x, order, c }
    }

    /// Treat the stored coefficients as an exact polynomial, zero-extended to
    /// the maximal order.
    pub fn exact(&self) -> Jet {
        Jet { order: MAX_ORDER, ..*self }
    }

    /// Jet of `f'`, one order lower.
    ///
    /// # Panics
    /// If the jet has order zero.
    pub fn differentiate(&self) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let mut c = [0.0; CAPACITY];
        for k in 0..self.order {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Jet { x: self.x, order: self.order - 1, c }
    }

    /// Replace the value coefficient while keeping the higher ones.
    fn with_first(self, v: f64) -> Jet {
        let mut out = self;
        out.c[0] = v;
        out
    }

    fn blank(&self) -> Jet {
        Jet { x: self.x, order: self.order, c: [0.0; CAPACITY] }
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        for v in out.c[..=out.order].iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let u = &self.c;
        let mut q = self.blank();
        q.c[0] = 1.0 / u[0];
        for k in 1..=self.order {
            let s: f64 = (1..=k).map(|j| u[j] * q.c[k - j]).sum();
            q.c[k] = -s / u[0];
        }
        q
    }

    pub fn exp(&self) -> Jet {
        let u = &self.c;
        let mut e = self.blank();
        e.c[0] = u[0].exp();
        for k in 1..=self.order {
            let s: f64 = (1..=k).map(|j| j as f64 * u[j] * e.c[k - j]).sum();
            e.c[k] = s / k as f64;
        }
        e
    }

    pub fn ln(&self) -> Jet {
        let u = &self.c;
        let mut l = self.blank();
        l.c[0] = u[0].ln();
        for k in 1..=self.order {
            let s: f64 = (1..k).map(|j| j as f64 * l.c[j] * u[k - j]).sum();
            l.c[k] = (u[k] - s / k as f64) / u[0];
        }
        l
    }

    pub fn sqrt(&self) -> Jet {
        let u = &self.c;
        let mut r = self.blank();
        r.c[0] = u[0].sqrt();
        for k in 1..=self.order {
            let s: f64 = (1..k).map(|j| r.c[j] * r.c[k - j]).sum();
            r.c[k] = (u[k] - s) / (2.0 * r.c[0]);
        }
        r
    }

    /// `u^alpha` for `u(x) > 0`.
    pub fn powf(&self, alpha: f64) -> Jet {
        let u = &self.c;
        let mut p = self.blank();
        p.c[0] = u[0].powf(alpha);
        for k in 1..=self.order {
            let s: f64 = (1..=k)
                .map(|j| ((alpha + 1.0) * j as f64 - k as f64) * u[j] * p.c[k - j])
                .sum();
            p.c[k] = s / (k as f64 * u[0]);
        }
        p
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(self.x, 1.0).truncate(self.order);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn sin_cos(&self) -> (Jet, Jet) {
        let u = &self.c;
        let mut s = self.blank();
        let mut c = self.blank();
        s.c[0] = u[0].sin();
        c.c[0] = u[0].cos();
        for k in 1..=self.order {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * u[j] * c.c[k - j];
                cc += j as f64 * u[j] * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = -cc / k as f64;
        }
        (s, c)
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos().1
    }

    pub fn tanh(&self) -> Jet {
        if self.c[0] < 0.0 {
            return -(-*self).tanh();
        }
        let e = (*self * -2.0).exp();
        let one = Jet::constant(self.x, 1.0);
        (one - e) / (one + e)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; CAPACITY];
        for k in 0..=order {
            c[k] = self.c[k] + rhs.c[k];
        }
        Jet { x: self.x, order, c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; CAPACITY];
        for k in 0..=order {
            c[k] = self.c[k] - rhs.c[k];
        }
        Jet { x: self.x, order, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut c = [0.0; CAPACITY];
        for k in 0..=order {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            c[k] = s;
        }
        Jet { x: self.x, order, c }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let v = self.c[0] + rhs;
        self.with_first(v)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        let v = self.c[0] - rhs;
        self.with_first(v)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn derivs(j: &Jet) -> Vec<f64> {
        (0..=j.order()).map(|k| j.derivative(k)).collect()
    }

    #[test]
    fn exp_of_variable_has_all_derivatives_equal() {
        let j = Jet::variable_order(0.7, 6).exp();
        for d in derivs(&j) {
            assert_relative_eq!(d, 0.7f64.exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn sin_derivatives_cycle() {
        let x = 1.3f64;
        let d = derivs(&Jet::variable_order(x, 4).sin());
        let expect = [x.sin(), x.cos(), -x.sin(), -x.cos(), x.sin()];
        for (a, b) in d.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn sqrt_matches_closed_form() {
        let x = 2.5f64;
        let d = derivs(&Jet::variable_order(x, 3).sqrt());
        assert_relative_eq!(d[0], x.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d[1], 0.5 / x.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d[2], -0.25 * x.powf(-1.5), max_relative = 1e-14);
        assert_relative_eq!(d[3], 0.375 * x.powf(-2.5), max_relative = 1e-14);
    }

    #[test]
    fn ln_and_powf() {
        let x = 3.0f64;
        let l = derivs(&Jet::variable_order(x, 3).ln());
        assert_relative_eq!(l[1], 1.0 / x, max_relative = 1e-14);
        assert_relative_eq!(l[3], 2.0 / x.powi(3), max_relative = 1e-14);
        let p = derivs(&Jet::variable_order(x, 3).powf(-0.5));
        assert_relative_eq!(p[2], 0.75 * x.powf(-2.5), max_relative = 1e-14);
    }

    #[test]
    fn tanh_derivative() {
        for x in [-2.0f64, 0.3, 4.0] {
            let d = derivs(&Jet::variable_order(x, 2).tanh());
            let t = x.tanh();
            assert_relative_eq!(d[0], t, max_relative = 1e-14);
            assert_relative_eq!(d[1], 1.0 - t * t, max_relative = 1e-13);
            assert_relative_eq!(d[2], -2.0 * t * (1.0 - t * t), epsilon = 1e-13);
        }
    }

    #[test]
    fn differentiate_lowers_order() {
        let j = Jet::from_derivatives(0.0, &[1.0, 2.0, 3.0, 4.0]);
        let d = j.differentiate();
        assert_eq!(d.order(), 2);
        assert_relative_eq!(d.derivative(0), 2.0);
        assert_relative_eq!(d.derivative(2), 4.0);
    }

    #[test]
    fn binary_ops_truncate_to_smaller_order() {
        let a = Jet::variable_order(1.0, 5);
        let b = Jet::variable_order(1.0, 2);
        assert_eq!((a * b).order(), 2);
        assert_eq!((a + b).order(), 2);
    }

    proptest! {
        #[test]
        fn product_rule_matches_composite(x in -2.0f64..2.0, s in 0.1f64..3.0) {
            // (e^{s y} sin y) computed as a product and as exp(s y + ln(sin y + 2)) - compared via derivatives
            let v = Jet::variable_order(x, 6);
            let prod = (v * s).exp() * (v.sin() + 2.0);
            let comp = ((v * s) + (v.sin() + 2.0).ln()).exp();
            for k in 0..=6 {
                let a = prod.coeff(k);
                let b = comp.coeff(k);
                prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn product_of_polynomials_is_exact(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
        ) {
            let ja = Jet::new(0.5, &a);
            let jb = Jet::new(0.5, &b);
            let p = ja * jb;
            for k in 0..5 {
                let mut s = 0.0;
                for j in 0..=k {
                    s += a[j] * b[k - j];
                }
                prop_assert!((p.coeff(k) - s).abs() <= 1e-12 * (1.0 + s.abs()));
            }
        }

        #[test]
        fn recip_inverts(x in 0.2f64..5.0) {
            let v = Jet::variable_order(x, 8) + 1.0;
            let one = v * v.recip();
            prop_assert!((one.coeff(0) - 1.0).abs() < 1e-14);
            for k in 1..=8 {
                prop_assert!(one.coeff(k).abs() < 1e-13);
            }
        }
    }
}
