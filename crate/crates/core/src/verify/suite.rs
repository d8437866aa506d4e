//! Fixed test functions for the inequality checks.

use crate::gamma::jet::Jet;
use crate::model::{validation_grid, Generator1D, SmoothFn, SpaceKind};

/// Ten functions per space: polynomials up to degree four, `e^{-x}`, `tanh`,
/// a bump-modulated sinusoid and, on the Laguerre space, `2√x`.
pub fn test_functions(gen: &Generator1D) -> Vec<SmoothFn> {
    let mut out = vec![
        SmoothFn::polynomial("one", vec![1.0]),
        SmoothFn::polynomial("x", vec![0.0, 1.0]),
        SmoothFn::polynomial("x^2", vec![0.0, 0.0, 1.0]),
        SmoothFn::new("exp(-x)", |j: &Jet| (-*j).exp()),
    ];
    match gen.kind() {
        SpaceKind::Laguerre { p } => {
            out.push(SmoothFn::polynomial("x^3/10", vec![0.0, 0.0, 0.0, 0.1]));
            out.push(SmoothFn::polynomial("x^4/100", vec![0.0, 0.0, 0.0, 0.0, 0.01]));
            out.push(SmoothFn::polynomial("(x-p)^2-x/2", vec![p * p, -2.0 * p - 0.5, 1.0]));
            out.push(SmoothFn::new("2sqrt(x)", |j: &Jet| j.sqrt() * 2.0));
            out.push(SmoothFn::new("tanh(x-p)", move |j: &Jet| (*j - p).tanh()));
            out.push(SmoothFn::new("sin(x)exp(-(x-p)^2/8)", move |j: &Jet| {
                let d = *j - p;
                j.sin() * (d * d * (-0.125)).exp()
            }));
        }
        _ => {
            out.push(SmoothFn::polynomial("x^3-3x", vec![0.0, -3.0, 0.0, 1.0]));
            out.push(SmoothFn::polynomial("x^4-6x^2+3", vec![3.0, 0.0, -6.0, 0.0, 1.0]));
            out.push(SmoothFn::polynomial("x^3/6-x^2+2", vec![2.0, 0.0, -1.0, 1.0 / 6.0]));
            out.push(SmoothFn::new("tanh(x)", |j: &Jet| j.tanh()));
            out.push(SmoothFn::new("tanh(2x-1)", |j: &Jet| (*j * 2.0 - 1.0).tanh()));
            out.push(SmoothFn::new("sin(2x)exp(-x^2/8)", |j: &Jet| (*j * 2.0).sin() * (*j * *j * (-0.125)).exp()));
        }
    }
    out
}

/// Whether `f` is strictly positive across the quadrature window. The grid
/// has an odd number of nodes so that a symmetric window includes its centre.
pub fn is_positive(gen: &Generator1D, f: &SmoothFn) -> bool {
    validation_grid(gen, 4097).iter().all(|&x| f.value(x) > 0.0)
}
