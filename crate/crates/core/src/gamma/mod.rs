//! Iterated carré du champ operators on jets.
//!
//! `Γ_0(f, h) = f h` and
//! `Γ_{n+1}(f, h) = ½ (L Γ_n(f, h) − Γ_n(f, L h) − Γ_n(h, L f))`.
//! The recursion is run on the Taylor polynomial of `f`, treated as exact, so
//! `L` can act on every intermediate `Γ_n` as a function of `x`.

pub mod jet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Generator1D, SpaceKind};
use jet::{Jet, MAX_ORDER};

/// Highest supported iterate.
pub const MAX_GAMMA: usize = 3;

/// Minimal jet order needed for `Γ_n`.
pub fn required_order(n: usize) -> usize {
    [0, 1, 2, 4][n.min(MAX_GAMMA)]
}

fn check_request(f: &Jet, n: usize) -> Result<()> {
    if n > MAX_GAMMA {
        return Err(Error::Unsupported(format!("Γ_{n} (only n <= {MAX_GAMMA})")));
    }
    let need = required_order(n);
    if f.order() < need {
        return Err(Error::InsufficientJetOrder { n, have: f.order(), need });
    }
    Ok(())
}

/// `L g = a g'' + b g'` on jets; the result is two orders lower.
fn apply_with(a: &Jet, b: &Jet, g: &Jet) -> Jet {
    let d1 = g.differentiate();
    let d2 = d1.differentiate();
    *a * d2 + *b * d1
}

/// Jet of `L f`, two orders below the input.
pub fn apply_generator(gen: &Generator1D, f: &Jet) -> Result<Jet> {
    if f.order() < 2 {
        return Err(Error::InsufficientJetOrder { n: 1, have: f.order(), need: 2 });
    }
    let (a, b) = gen.coefficient_jets(f.x(), f.order());
    Ok(apply_with(&a, &b, f))
}

fn gamma_quadratic(a: &Jet, b: &Jet, f: &Jet, n: usize) -> Jet {
    if n == 0 {
        return *f * *f;
    }
    let lf = apply_with(a, b, f);
    apply_with(a, b, &gamma_quadratic(a, b, f, n - 1)) * 0.5 - gamma_bilinear(a, b, f, &lf, n - 1)
}

fn gamma_bilinear(a: &Jet, b: &Jet, f: &Jet, h: &Jet, n: usize) -> Jet {
    if n == 0 {
        return *f * *h;
    }
    let lf = apply_with(a, b, f);
    let lh = apply_with(a, b, h);
    (apply_with(a, b, &gamma_bilinear(a, b, f, h, n - 1))
        - gamma_bilinear(a, b, f, &lh, n - 1)
        - gamma_bilinear(a, b, h, &lf, n - 1))
        * 0.5
}

/// `Γ_n(f)` as a jet in `x`, computed from the exact polynomial extension of `f`.
pub fn gamma_jet(gen: &Generator1D, f: &Jet, n: usize) -> Result<Jet> {
    check_request(f, n)?;
    let (a, b) = gen.coefficient_jets(f.x(), MAX_ORDER);
    Ok(gamma_quadratic(&a, &b, &f.exact(), n))
}

/// `Γ_n(f)(x)` by the recursion; `Γ_0(f) = f(x)^2`.
pub fn gamma_n(gen: &Generator1D, f: &Jet, n: usize) -> Result<f64> {
    Ok(gamma_jet(gen, f, n)?.value())
}

/// Bilinear `Γ_n(f, h)(x)`.
pub fn gamma_n_bilinear(gen: &Generator1D, f: &Jet, h: &Jet, n: usize) -> Result<f64> {
    check_request(f, n)?;
    check_request(h, n)?;
    let (a, b) = gen.coefficient_jets(f.x(), MAX_ORDER);
    Ok(gamma_bilinear(&a, &b, &f.exact(), &h.exact(), n).value())
}

/// Closed-form 1D Laguerre iterates from `(f', f'', f''')`.
pub fn laguerre_gamma_explicit(p: f64, derivs: (f64, f64, f64), x: f64, n: usize) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::OutsideDomain { x, lo: 0.0, hi: f64::INFINITY });
    }
    let (f1, f2, f3) = derivs;
    match n {
        1 => Ok(x * f1 * f1),
        2 => Ok(x * x * f2 * f2 + x * f1 * f2 + 0.5 * (p + x) * f1 * f1),
        3 => Ok(x * x * x * f3 * f3
            + 3.0 * x * x * f2 * f3
            + 1.5 * (p + x) * x * f2 * f2
            + 1.5 * x * f2 * f2
            + 1.5 * x * f1 * f2
            + 0.25 * (3.0 * p + x) * f1 * f1),
        _ => Err(Error::Unsupported(format!("closed-form Γ_{n}"))),
    }
}

/// Closed-form Ornstein–Uhlenbeck iterates from `(f', f'', f''')`.
pub fn ou_gamma_explicit(derivs: (f64, f64, f64), n: usize) -> Result<f64> {
    let (f1, f2, f3) = derivs;
    match n {
        1 => Ok(f1 * f1),
        2 => Ok(f2 * f2 + f1 * f1),
        3 => Ok(f3 * f3 + 3.0 * f2 * f2 + f1 * f1),
        _ => Err(Error::Unsupported(format!("closed-form Γ_{n}"))),
    }
}

/// Closed form for whichever model space `gen` is.
pub fn closed_form_gamma(gen: &Generator1D, f: &Jet, n: usize) -> Result<f64> {
    let d = (f.derivative(1), f.derivative(2), f.derivative(3));
    match gen.kind() {
        SpaceKind::Ou => ou_gamma_explicit(d, n),
        SpaceKind::Laguerre { p } => laguerre_gamma_explicit(p, d, f.x(), n),
        SpaceKind::Custom => Err(Error::Unsupported("closed-form Γ for custom generators".into())),
    }
}

/// Seeded order-4 jets with coefficients in `[-10, 10]` at points spread
/// over the domain (`[-10, 10]` for OU, `(0, 40)` for Laguerre).
pub fn random_jet_samples(gen: &Generator1D, count: usize, seed: u64) -> Vec<Jet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let x = match gen.kind() {
                SpaceKind::Ou => 20.0 * u - 10.0,
                SpaceKind::Laguerre { .. } => (40.0 * u * u).max(1e-6),
                SpaceKind::Custom => {
                    let (lo, hi) = gen.window();
                    lo + (hi - lo) * u
                }
            };
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..=10.0)).collect();
            Jet::new(x, &c)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaWitness {
    pub x: f64,
    pub coeffs: Vec<f64>,
    pub margin: f64,
}

/// Outcome of a sampled `Γ_{n+1} ≥ ρ Γ_n` certification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub n: usize,
    pub rho: f64,
    /// `Γ_{n+1}` at the worst sample.
    pub value: f64,
    /// Minimum of `Γ_{n+1} − ρ Γ_n` over all samples.
    pub margin: f64,
    pub samples: usize,
    pub witnesses: Vec<GammaWitness>,
    pub pass: bool,
}

/// Tolerance on the curvature margin.
pub const CURVATURE_TOL: f64 = 1e-9;

/// Minimal margin of `Γ_{n+1} − ρ Γ_n` over `samples`.
pub fn certify_curvature(gen: &Generator1D, n: usize, rho: f64, samples: &[Jet]) -> Result<GammaReport> {
    if !(1..=2).contains(&n) {
        return Err(Error::Unsupported(format!("curvature certification for n = {n}")));
    }
    let rows: Vec<(usize, f64, f64)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, j)| -> Result<(usize, f64, f64)> {
            let upper = gamma_n(gen, j, n + 1)?;
            let lower = gamma_n(gen, j, n)?;
            Ok((i, upper - rho * lower, upper))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<&(usize, f64, f64)> = rows.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let witnesses = order
        .iter()
        .take(5)
        .map(|&&(i, m, _)| GammaWitness { x: samples[i].x(), coeffs: samples[i].coeffs().to_vec(), margin: m })
        .collect();
    let (margin, value) = order.first().map(|r| (r.1, r.2)).unwrap_or((f64::INFINITY, 0.0));
    Ok(GammaReport {
        n,
        rho,
        value,
        margin,
        samples: samples.len(),
        witnesses,
        pass: margin >= -CURVATURE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_laguerre, make_ou};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_zero_is_square() {
        let j = Jet::new(0.3, &[1.7]);
        assert_eq!(gamma_n(&make_ou(), &j, 0).unwrap(), 1.7 * 1.7);
    }

    #[test]
    fn short_jets_are_rejected() {
        let j = Jet::new(1.0, &[0.0, 1.0, 2.0]);
        let e = gamma_n(&make_ou(), &j, 3).unwrap_err();
        assert_eq!(e, Error::InsufficientJetOrder { n: 3, have: 2, need: 4 });
        assert!(gamma_n(&make_ou(), &j, 2).is_ok());
        assert!(gamma_n(&make_ou(), &j, 4).is_err());
    }

    #[test]
    fn generator_lowers_order() {
        let j = Jet::new(0.5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(apply_generator(&make_ou(), &j).unwrap().order(), 2);
    }

    #[test]
    fn laguerre_explicit_examples() {
        let d = (1.0, 0.0, 0.0);
        assert_relative_eq!(laguerre_gamma_explicit(1.5, d, 1.0, 2).unwrap(), 1.25);
        assert_relative_eq!(laguerre_gamma_explicit(1.5, d, 1.0, 1).unwrap(), 1.0);
        assert_relative_eq!(laguerre_gamma_explicit(1.5, d, 1.0, 3).unwrap(), 1.375);
        assert!(laguerre_gamma_explicit(1.5, d, 0.0, 1).is_err());
    }

    #[test]
    fn ou_gamma3_identity_example() {
        // f = sin at 0.4, recursion against f'''^2 + 3 f''^2 + f'^2
        let j = Jet::variable_order(0.4, 4).sin();
        let (s, c) = (0.4f64.sin(), 0.4f64.cos());
        let expect = c * c + 3.0 * s * s + c * c;
        assert_relative_eq!(gamma_n(&make_ou(), &j, 3).unwrap(), expect, max_relative = 1e-13);
    }

    #[test]
    fn curvature_examples() {
        let ou = make_ou();
        let samples = random_jet_samples(&ou, 2000, 7);
        let r = certify_curvature(&ou, 1, 1.0, &samples).unwrap();
        assert!(r.pass && r.margin >= -1e-9);
        let bad = certify_curvature(&ou, 1, 1.5, &samples).unwrap();
        assert!(!bad.pass);
        let lg = make_laguerre(1.5).unwrap();
        let samples = random_jet_samples(&lg, 2000, 11);
        for n in 1..=2 {
            let r = certify_curvature(&lg, n, 0.5, &samples).unwrap();
            assert!(r.pass, "n = {n}: margin {}", r.margin);
            assert_eq!(r.witnesses.len(), 5);
        }
    }

    #[test]
    fn samples_are_reproducible() {
        let lg = make_laguerre(2.0).unwrap();
        assert_eq!(random_jet_samples(&lg, 50, 3), random_jet_samples(&lg, 50, 3));
        assert_ne!(random_jet_samples(&lg, 50, 3), random_jet_samples(&lg, 50, 4));
    }

    fn jet_strategy() -> impl Strategy<Value = (f64, Vec<f64>)> {
        (1e-3f64..40.0, proptest::collection::vec(-10.0f64..10.0, 5))
    }

    proptest! {
        #[test]
        fn recursion_matches_laguerre_closed_form((x, c) in jet_strategy(), p in 1.5f64..4.0) {
            let lg = make_laguerre(p).unwrap();
            let j = Jet::new(x, &c);
            for n in 1..=3 {
                let r = gamma_n(&lg, &j, n).unwrap();
                let e = closed_form_gamma(&lg, &j, n).unwrap();
                prop_assert!((r - e).abs() <= 1e-10 * (1.0 + e.abs()), "n={} r={} e={}", n, r, e);
            }
        }

        #[test]
        fn fourth_coefficient_cancels((x, c) in jet_strategy(), p in 1.5f64..4.0, bump in prop::sample::select(vec![-1.0, 1.0])) {
            let lg = make_laguerre(p).unwrap();
            let base = gamma_n(&lg, &Jet::new(x, &c), 3).unwrap();
            let mut c2 = c.clone();
            c2[4] += bump;
            let moved = gamma_n(&lg, &Jet::new(x, &c2), 3).unwrap();
            prop_assert!((moved - base).abs() <= 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn bilinear_expansion(
            (x, c) in jet_strategy(),
            d in proptest::collection::vec(-10.0f64..10.0, 5),
            al in -3.0f64..3.0,
            be in -3.0f64..3.0,
            n in 1usize..=3,
        ) {
            let lg = make_laguerre(1.5).unwrap();
            let f = Jet::new(x, &c);
            let g = Jet::new(x, &d);
            let lhs = gamma_n(&lg, &(f.scale(al) + g.scale(be)), n).unwrap();
            let ff = gamma_n(&lg, &f, n).unwrap();
            let gg = gamma_n(&lg, &g, n).unwrap();
            let fg = gamma_n_bilinear(&lg, &f, &g, n).unwrap();
            let rhs = al * al * ff + 2.0 * al * be * fg + be * be * gg;
            let scale = 1.0 + (al * al * ff).abs() + (2.0 * al * be * fg).abs() + (be * be * gg).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn carre_du_champ_is_nonnegative((x, c) in jet_strategy()) {
            let lg = make_laguerre(2.0).unwrap();
            prop_assert!(gamma_n(&lg, &Jet::new(x, &c), 1).unwrap() >= 0.0);
        }

        #[test]
        fn completed_square_identity((x, c) in jet_strategy(), p in 1.5f64..4.0) {
            let lg = make_laguerre(p).unwrap();
            let j = Jet::new(x, &c);
            let (f1, f2) = (j.derivative(1), j.derivative(2));
            let margin = gamma_n(&lg, &j, 2).unwrap() - 0.5 * gamma_n(&lg, &j, 1).unwrap();
            let square = x * x * f2 * f2 + x * f1 * f2 + 0.5 * p * f1 * f1;
            prop_assert!((margin - square).abs() <= 1e-10 * (1.0 + square.abs()));
            prop_assert!(margin >= -1e-9 * (1.0 + square.abs()));
        }
    }
}
