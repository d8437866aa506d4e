use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gamma::jet::Jet;
use crate::model::{Generator1D, SmoothFn};

/// Tabulated potential: cubic Hermite interpolation of `(x, V, V')` triples,
/// extended linearly beyond the table.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedPotential {
    xs: Vec<f64>,
    vs: Vec<f64>,
    dvs: Vec<f64>,
}

impl TabulatedPotential {
    pub fn new(xs: Vec<f64>, vs: Vec<f64>, dvs: Vec<f64>) -> Result<TabulatedPotential> {
        if xs.len() < 2 || xs.len() != vs.len() || xs.len() != dvs.len() {
            return Err(Error::InvalidParameter(
                "tabulated potential needs at least two rows of equal length".into(),
            ));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "tabulated abscissae must increase strictly (at {})",
                    w[1]
                )));
            }
        }
        if let Some(bad) = xs.iter().chain(&vs).chain(&dvs).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite table entry {bad}")));
        }
        Ok(TabulatedPotential { xs, vs, dvs })
    }

    /// Parse `x,V,dV` rows; a non-numeric first line is treated as a header.
    pub fn from_csv(text: &str) -> Result<TabulatedPotential> {
        let (mut xs, mut vs, mut dvs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    xs.push(v[0]);
                    vs.push(v[1]);
                    dvs.push(v[2]);
                }
                Err(_) if i == 0 => continue,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "table line {}: expected three numbers x,V,dV",
                        i + 1
                    )))
                }
            }
        }
        TabulatedPotential::new(xs, vs, dvs)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("non-empty"))
    }

    fn eval_jet(&self, j: &Jet) -> Jet {
        let x = j.value();
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (*j - self.xs[0]) * self.dvs[0] + self.vs[0];
        }
        if x >= self.xs[n - 1] {
            return (*j - self.xs[n - 1]) * self.dvs[n - 1] + self.vs[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (*j - x0) * (1.0 / h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = t3 * 2.0 - t2 * 3.0 + 1.0;
        let h10 = t3 - t2 * 2.0 + t;
        let h01 = t3 * -2.0 + t2 * 3.0;
        let h11 = t3 - t2;
        h00 * self.vs[i]
            + h10 * (h * self.dvs[i])
            + h01 * self.vs[i + 1]
            + h11 * (h * self.dvs[i + 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `V(x) = slope * x`.
    Linear { slope: f64 },
    /// `V(x) = 2 c sqrt(x)`.
    Sqrt { c: f64 },
    Tabulated(Arc<TabulatedPotential>),
}

/// A potential `V`, with `f = e^{-V}` the density of the target measure
/// `ν = f μ` once normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    shift: f64,
    lipschitz: Option<f64>,
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Potential {
        Potential { kind, shift: 0.0, lipschitz: None }
    }

    pub fn zero() -> Potential {
        Potential::new(PotentialKind::Zero)
    }

    pub fn linear(slope: f64) -> Potential {
        Potential::new(PotentialKind::Linear { slope })
    }

    pub fn sqrt(c: f64) -> Potential {
        Potential::new(PotentialKind::Sqrt { c })
    }

    pub fn tabulated(table: TabulatedPotential) -> Potential {
        Potential::new(PotentialKind::Tabulated(Arc::new(table)))
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Additive constant making `∫ e^{-V} dμ = 1`.
    pub fn normalization_shift(&self) -> f64 {
        self.shift
    }

    /// Certified Lipschitz constant in the generator metric, if certified.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn with_lipschitz(mut self, k: f64) -> Potential {
        self.lipschitz = Some(k);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// The unshifted potential composed with a jet.
    pub fn raw_jet(&self, j: &Jet) -> Jet {
        match &self.kind {
            PotentialKind::Zero => Jet::constant(j.x(), 0.0).truncate(j.order()),
            PotentialKind::Linear { slope } => *j * *slope,
            PotentialKind::Sqrt { c } => j.sqrt() * (2.0 * c),
            PotentialKind::Tabulated(t) => t.eval_jet(j),
        }
    }

    /// The shifted potential composed with a jet.
    pub fn jet(&self, j: &Jet) -> Jet {
        self.raw_jet(j) + self.shift
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(&Jet::variable_order(x, 0)).value()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.raw_jet(&Jet::variable_order(x, 1)).derivative(1)
    }

    /// `f = e^{-V}` as a smooth function.
    pub fn density_fn(&self) -> SmoothFn {
        let pot = self.clone();
        SmoothFn::new("exp(-V)", move |j: &Jet| (-pot.jet(j)).exp())
    }
}

/// Points equally spaced in the metric coordinate across the quadrature window.
pub fn validation_grid(gen: &Generator1D, n: usize) -> Vec<f64> {
    let (s0, s1) = gen.metric_window();
    let n = n.max(2);
    (0..n)
        .map(|i| gen.from_metric(s0 + (s1 - s0) * i as f64 / (n - 1) as f64))
        .filter(|x| gen.contains(*x))
        .collect()
}

/// `sup_grid sqrt(a) |V'|`.
pub fn certify_lipschitz(gen: &Generator1D, pot: &Potential, grid: &[f64]) -> Result<f64> {
    let mut k = 0.0f64;
    for &x in grid {
        gen.check_point(x)?;
        let a = gen.a(x);
        if a <= 0.0 {
            return Err(Error::InvalidParameter(format!("diffusion coefficient not positive at {x}")));
        }
        let dv = pot.derivative(x);
        let g = a.sqrt() * dv.abs();
        if !g.is_finite() {
            return Err(Error::NonFinite { x, value: dv });
        }
        k = k.max(g);
    }
    Ok(k)
}

/// Shift `V` by `log ∫ e^{-V} dμ`.
pub fn normalize_potential(gen: &Generator1D, pot: &Potential, abs_tol: f64) -> Result<Potential> {
    let raw = Potential { shift: 0.0, ..pot.clone() };
    let z = gen.integrate(|x| (-raw.value(x)).exp(), abs_tol)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Quadrature { lo: gen.window().0, hi: gen.window().1, estimate: z });
    }
    let out = Potential { shift: z.ln(), ..pot.clone() };
    let mass = gen.integrate(|x| (-out.value(x)).exp(), abs_tol)?;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Quadrature { lo: gen.window().0, hi: gen.window().1, estimate: mass - 1.0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_laguerre, make_ou};
    use approx::assert_relative_eq;

    #[test]
    fn lipschitz_examples() {
        let ou = make_ou();
        let grid = validation_grid(&ou, 4096);
        assert_relative_eq!(certify_lipschitz(&ou, &Potential::linear(1.7), &grid).unwrap(), 1.7);
        assert_eq!(certify_lipschitz(&ou, &Potential::zero(), &grid).unwrap(), 0.0);
        let lg = make_laguerre(1.5).unwrap();
        let grid = validation_grid(&lg, 4096);
        assert_relative_eq!(
            certify_lipschitz(&lg, &Potential::sqrt(0.5), &grid).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lipschitz_is_monotone_under_refinement() {
        let lg = make_laguerre(2.0).unwrap();
        let table = TabulatedPotential::new(
            vec![0.0, 1.0, 3.0, 10.0],
            vec![0.0, 0.5, 0.9, 1.2],
            vec![0.8, 0.3, 0.1, 0.02],
        )
        .unwrap();
        let pot = Potential::tabulated(table);
        let coarse = validation_grid(&lg, 257);
        let mut fine = coarse.clone();
        fine.extend(validation_grid(&lg, 1024));
        let kc = certify_lipschitz(&lg, &pot, &coarse).unwrap();
        let kf = certify_lipschitz(&lg, &pot, &fine).unwrap();
        assert!(kf >= kc - 1e-12);
    }

    #[test]
    fn zero_potential_has_zero_shift() {
        let p = normalize_potential(&make_ou(), &Potential::zero(), 1e-12).unwrap();
        assert!(p.normalization_shift().abs() < 1e-10);
    }

    #[test]
    fn linear_shift_is_gaussian_mgf() {
        for k in [0.5, 1.0, 2.0] {
            let p = normalize_potential(&make_ou(), &Potential::linear(k), 1e-12).unwrap();
            assert_relative_eq!(p.normalization_shift(), 0.5 * k * k, epsilon = 1e-9);
        }
    }

    #[test]
    fn sqrt_shift_matches_gauss_laguerre() {
        // V = sqrt(x) is the c = 1/2 member of the 2c sqrt(x) family
        let lg = make_laguerre(1.5).unwrap();
        let p = normalize_potential(&lg, &Potential::sqrt(0.5), 1e-13).unwrap();
        // independent rule: composite Gauss–Legendre in u = sqrt(x), where the
        // integrand 2 u^2 e^{-u^2 - u} / Γ(3/2) is smooth
        let rule = crate::quadrature::GaussRule::composite_legendre(0.0, 12.0, 200, 20);
        let gamma_half = std::f64::consts::PI.sqrt() / 2.0;
        let z = rule.integrate(|u| 2.0 * u * u * (-u * u - u).exp() / gamma_half);
        assert_relative_eq!(p.normalization_shift(), z.ln(), epsilon = 1e-7);
    }

    #[test]
    fn tabulated_interpolates_values_and_slopes() {
        let t = TabulatedPotential::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let pot = Potential::tabulated(t);
        // Hermite interpolant of x^2 is exact
        assert_relative_eq!(pot.value(0.5), 0.25, epsilon = 1e-15);
        assert_relative_eq!(pot.derivative(0.5), 1.0, epsilon = 1e-15);
        assert_relative_eq!(pot.value(2.0), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tabulated_csv_parsing() {
        let t = TabulatedPotential::from_csv("x,V,dV\n0,0,1\n1,1,1\n").unwrap();
        assert_eq!(t.range(), (0.0, 1.0));
        assert!(TabulatedPotential::from_csv("0,0,1\n0,1,1\n").is_err());
        assert!(TabulatedPotential::from_csv("0,0\n").is_err());
    }
}
