use std::fmt;
use std::sync::Arc;

use crate::gamma::jet::Jet;

type JetFn = dyn Fn(&Jet) -> Jet + Send + Sync;

/// A smooth scalar function that can be evaluated on jets.
#[derive(Clone)]
pub struct SmoothFn {
    name: String,
    f: Arc<JetFn>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFn").field("name", &self.name).finish()
    }
}

impl SmoothFn {
    pub fn new<F>(name: impl Into<String>, f: F) -> SmoothFn
    where
        F: Fn(&Jet) -> Jet + Send + Sync + 'static,
    {
        SmoothFn { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Compose with an arbitrary jet.
    pub fn apply(&self, j: &Jet) -> Jet {
        (self.f)(j)
    }

    /// Jet of the function at `x` to the given order.
    pub fn jet(&self, x: f64, order: usize) -> Jet {
        (self.f)(&Jet::variable_order(x, order))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    pub fn constant(c: f64) -> SmoothFn {
        SmoothFn::new(format!("const({c})"), move |j: &Jet| {
            Jet::constant(j.x(), c).truncate(j.order())
        })
    }

    /// `sum_k coeffs[k] y^k`.
    pub fn polynomial(name: impl Into<String>, coeffs: Vec<f64>) -> SmoothFn {
        SmoothFn::new(name, move |j: &Jet| {
            let mut acc = Jet::constant(j.x(), 0.0).truncate(j.order());
            for &c in coeffs.iter().rev() {
                acc = acc * *j + c;
            }
            acc
        })
    }
}
