//! Crank–Nicolson finite-volume solver for `∂_t u = L u` in the metric
//! coordinate, with zero-flux ends and Richardson extrapolation over a
//! coarse/fine pair of grids.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gamma::jet::{Jet, CAPACITY};
use crate::model::Generator1D;
use crate::quadrature::gauss_legendre;

/// Time after which the solver switches to the late step size.
const T_SWITCH: f64 = 1.0;
/// Late step size as a multiple of the base step.
const LATE_FACTOR: f64 = 10.0;
/// Allowed relative drift of `Σ w u`.
const MASS_TOL: f64 = 1e-6;
/// Nodes used for local polynomial interpolation.
const STENCIL: usize = 6;

/// One spatial discretization level.
#[derive(Debug)]
struct Level {
    s: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Precomputed Thomas elimination of `I − k L`.
#[derive(Debug)]
struct Factor {
    k: f64,
    denom: Vec<f64>,
    cprime: Vec<f64>,
}

impl Level {
    fn new(gen: &Generator1D, s0: f64, s1: f64, n: usize) -> Level {
        let h = (s1 - s0) / (n - 1) as f64;
        let s: Vec<f64> = (0..n).map(|i| s0 + h * i as f64).collect();
        let x: Vec<f64> = s.iter().map(|&v| gen.from_metric(v)).collect();
        let gl = gauss_legendre(8);
        let w: Vec<f64> = s
            .iter()
            .map(|&si| {
                let a = (si - 0.5 * h).max(s0);
                let b = (si + 0.5 * h).min(s1);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                gl.nodes
                    .iter()
                    .zip(&gl.weights)
                    .map(|(z, wt)| wt * half * gen.metric_density(mid + half * z))
                    .sum()
            })
            .collect();
        let faces: Vec<f64> = (0..n - 1).map(|i| gen.metric_density(s[i] + 0.5 * h)).collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let denom = h * w[i];
            if i > 0 {
                lower[i] = faces[i - 1] / denom;
            }
            if i + 1 < n {
                upper[i] = faces[i] / denom;
            }
            diag[i] = -(lower[i] + upper[i]);
        }
        Level { s, x, w, lower, diag, upper }
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
    }

    fn factor(&self, k: f64) -> Result<Factor> {
        let n = self.len();
        let mut denom = vec![0.0; n];
        let mut cprime = vec![0.0; n];
        for i in 0..n {
            let sub = if i > 0 { -k * self.lower[i] * cprime[i - 1] } else { 0.0 };
            let d = 1.0 - k * self.diag[i] - sub;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::LinearSolve { row: i });
            }
            denom[i] = d;
            cprime[i] = -k * self.upper[i] / d;
        }
        Ok(Factor { k, denom, cprime })
    }

    fn solve(&self, f: &Factor, rhs: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let prev = if i > 0 { -f.k * self.lower[i] * rhs[i - 1] } else { 0.0 };
            rhs[i] = (rhs[i] - prev) / f.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= f.cprime[i] * rhs[i + 1];
        }
    }

    fn mass(&self, u: &[f64]) -> f64 {
        self.w.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    fn abs_mass(&self, u: &[f64]) -> f64 {
        self.w.iter().zip(u).map(|(w, v)| w * v.abs()).sum()
    }
}

#[derive(Clone, Copy, Debug)]
struct Step {
    size: f64,
    implicit: bool,
    output: Option<usize>,
}

/// Step sequence landing exactly on `outputs` (sorted, positive).
fn schedule(dt: f64, outputs: &[f64]) -> Vec<Step> {
    let mut steps = Vec::new();
    let startup_end = 2.0 * dt;
    let mut t = 0.0f64;
    for (idx, &target) in outputs.iter().enumerate() {
        while target - t > 1e-12 * target.max(1.0) {
            let (base, implicit) = if t < startup_end - 1e-15 {
                (0.5 * dt, true)
            } else if t < T_SWITCH - 1e-12 {
                (dt, false)
            } else {
                (LATE_FACTOR * dt, false)
            };
            let mut size = base;
            let mut stop = target;
            if implicit {
                stop = stop.min(startup_end);
            } else if t < T_SWITCH - 1e-12 {
                stop = stop.min(T_SWITCH);
            }
            if t + size > stop - 1e-12 * stop.max(1.0) {
                size = stop - t;
            }
            t += size;
            if (t - stop).abs() <= 1e-12 * stop.max(1.0) {
                t = stop;
            }
            let lands = (t - target).abs() <= 1e-12 * target.max(1.0);
            steps.push(Step { size, implicit, output: if lands { Some(idx) } else { None } });
            if lands {
                t = target;
            }
        }
        if let Some(last) = steps.last_mut() {
            if last.output.is_none() && (t - target).abs() <= 1e-12 * target.max(1.0) {
                last.output = Some(idx);
            }
        }
    }
    steps
}

/// Finite-difference semigroup on a coarse grid and its refinement.
#[derive(Debug)]
pub struct FdSolver {
    coarse: Level,
    fine: Level,
    dt: f64,
    coarse_factors: HashMap<u64, Factor>,
    fine_factors: HashMap<u64, Factor>,
}

fn factor_key(k: f64) -> u64 {
    k.to_bits()
}

/// Values and time derivatives of the extrapolated solution at the coarse nodes.
#[derive(Debug)]
pub struct FdSnapshots {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
    s: Vec<f64>,
}

impl FdSolver {
    pub fn new(gen: &Generator1D, points: usize, dt: f64) -> Result<FdSolver> {
        if points < 16 {
            return Err(Error::InvalidParameter("finite-difference grid needs at least 16 points".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter("finite-difference time step must be positive".into()));
        }
        let (s0, s1) = gen.metric_window();
        let coarse = Level::new(gen, s0, s1, points);
        let fine = Level::new(gen, s0, s1, 2 * points - 1);
        let mut solver = FdSolver {
            coarse,
            fine,
            dt,
            coarse_factors: HashMap::new(),
            fine_factors: HashMap::new(),
        };
        for (fine, base) in [(false, dt), (true, 0.5 * dt)] {
            for k in [0.5 * base, 0.5 * LATE_FACTOR * base] {
                let (level, cache) = if fine {
                    (&solver.fine, &mut solver.fine_factors)
                } else {
                    (&solver.coarse, &mut solver.coarse_factors)
                };
                cache.insert(factor_key(k), level.factor(k)?);
            }
        }
        Ok(solver)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Coarse nodes in the original coordinate.
    pub fn nodes(&self) -> &[f64] {
        &self.coarse.x
    }

    /// Invariant-measure masses of the coarse cells.
    pub fn cell_masses(&self) -> &[f64] {
        &self.coarse.w
    }

    fn run(&self, fine: bool, u0: Vec<f64>, outputs: &[f64], sink: &mut dyn FnMut(usize, &[f64])) -> Result<()> {
        let (level, cache, dt) = if fine {
            (&self.fine, &self.fine_factors, 0.5 * self.dt)
        } else {
            (&self.coarse, &self.coarse_factors, self.dt)
        };
        let mass0 = level.mass(&u0);
        let scale = level.abs_mass(&u0).max(1e-300);
        let mut extra: HashMap<u64, Factor> = HashMap::new();
        let mut u = u0;
        let mut lu = vec![0.0; u.len()];
        let mut t = 0.0;
        for step in schedule(dt, outputs) {
            let k = if step.implicit { step.size } else { 0.5 * step.size };
            let key = factor_key(k);
            if !cache.contains_key(&key) && !extra.contains_key(&key) {
                extra.insert(key, level.factor(k)?);
            }
            let fac = cache.get(&key).or_else(|| extra.get(&key)).expect("factor present");
            if !step.implicit {
                level.apply(&u, &mut lu);
                for (v, l) in u.iter_mut().zip(&lu) {
                    *v += k * l;
                }
            }
            level.solve(fac, &mut u);
            t += step.size;
            if let Some(idx) = step.output {
                let drift = (level.mass(&u) - mass0).abs() / scale;
                if drift > MASS_TOL || !drift.is_finite() {
                    return Err(Error::MassDrift { t, drift });
                }
                sink(idx, &u);
            }
        }
        Ok(())
    }

    /// Extrapolated solutions at the coarse nodes for each output time.
    fn evolve<G: Fn(f64) -> f64 + ?Sized>(&self, g: &G, outputs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let sample = |level: &Level| -> Result<Vec<f64>> {
            level
                .x
                .iter()
                .map(|&x| {
                    let v = g(x);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite { x, value: v })
                    }
                })
                .collect()
        };
        let positive: Vec<f64> = outputs.iter().copied().filter(|&t| t > 0.0).collect();
        let c0 = sample(&self.coarse)?;
        let f0 = sample(&self.fine)?;
        let mut coarse_out = vec![Vec::new(); positive.len()];
        let mut fine_out = vec![Vec::new(); positive.len()];
        self.run(false, c0.clone(), &positive, &mut |i, u| coarse_out[i] = u.to_vec())?;
        self.run(true, f0, &positive, &mut |i, u| {
            fine_out[i] = u.iter().step_by(2).copied().collect()
        })?;
        let mut results = Vec::with_capacity(outputs.len());
        let mut j = 0;
        for &t in outputs {
            if t <= 0.0 {
                results.push(c0.clone());
            } else {
                let ext: Vec<f64> = coarse_out[j]
                    .iter()
                    .zip(&fine_out[j])
                    .map(|(c, f)| (4.0 * f - c) / 3.0)
                    .collect();
                results.push(ext);
                j += 1;
            }
        }
        Ok(results)
    }

    /// `P_t g` on the coarse nodes (`fd_pt`).
    pub fn solve<G: Fn(f64) -> f64 + ?Sized>(&self, g: &G, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("negative time {t}")));
        }
        Ok(self.evolve(g, &[t])?.pop().expect("one output"))
    }

    /// Interpolated jet (in the metric coordinate `s`) of grid values.
    pub(crate) fn interp_metric(&self, u: &[f64], s: f64, order: usize) -> Result<[f64; CAPACITY]> {
        interp(&self.coarse.s, u, s, order)
    }

    /// Dense-in-time record of the solution for `t ∈ [0, horizon]`.
    pub fn snapshots<G: Fn(f64) -> f64 + ?Sized>(&self, g: &G, horizon: f64) -> Result<FdSnapshots> {
        let times = snapshot_times(self.dt, horizon);
        let values = self.evolve(g, &times)?;
        let mut rates = Vec::with_capacity(values.len());
        for v in &values {
            let mut r = vec![0.0; v.len()];
            self.coarse.apply(v, &mut r);
            rates.push(r);
        }
        Ok(FdSnapshots { times, values, rates, s: self.coarse.s.clone() })
    }
}

fn snapshot_times(dt: f64, horizon: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    loop {
        let t = times[times.len() - 1];
        if t >= horizon {
            break;
        }
        let stride = if t < 0.1 - 1e-12 {
            1.0
        } else if t < T_SWITCH - 1e-12 {
            5.0
        } else if t < 2.0 - 1e-12 {
            20.0
        } else {
            100.0
        };
        times.push(((t + stride * dt) / dt).round() * dt);
    }
    times
}

/// Lagrange interpolation jet of `u` (given on uniform nodes `s`) at `x`.
fn interp(s: &[f64], u: &[f64], x: f64, order: usize) -> Result<[f64; CAPACITY]> {
    let n = s.len();
    let (s0, s1) = (s[0], s[n - 1]);
    if !(x >= s0 - 1e-12 && x <= s1 + 1e-12) {
        return Err(Error::OutsideDomain { x, lo: s0, hi: s1 });
    }
    let h = (s1 - s0) / (n - 1) as f64;
    let centre = ((x - s0) / h).floor() as isize - (STENCIL as isize / 2 - 1);
    let start = centre.clamp(0, (n - STENCIL) as isize) as usize;
    let nodes: Vec<f64> = (0..STENCIL).map(|i| (s[start + i] - x) / h).collect();
    // basis polynomials in the local variable z = (y - x) / h
    let mut out = [0.0; CAPACITY];
    for i in 0..STENCIL {
        let mut poly = [0.0; STENCIL];
        poly[0] = 1.0;
        let mut deg = 0;
        let mut denom = 1.0;
        for j in 0..STENCIL {
            if j == i {
                continue;
            }
            // multiply by (z - z_j)
            for d in (0..=deg + 1).rev() {
                let prev = if d > 0 { poly[d - 1] } else { 0.0 };
                poly[d] = prev - nodes[j] * poly[d];
            }
            deg += 1;
            denom *= nodes[i] - nodes[j];
        }
        let ui = u[start + i];
        let mut hp = 1.0;
        for d in 0..=order.min(STENCIL - 1) {
            out[d] += ui * poly[d] / denom / hp;
            hp *= h;
        }
    }
    Ok(out)
}

impl FdSnapshots {
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Taylor coefficients in `s` of the solution at time `t`.
    pub(crate) fn metric_jet(&self, t: f64, s: f64, order: usize) -> Result<[f64; CAPACITY]> {
        if t < 0.0 || t > self.horizon() + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "time {t} outside the prepared range [0, {}]",
                self.horizon()
            )));
        }
        let k = self.times.partition_point(|&v| v <= t).clamp(1, self.times.len() - 1) - 1;
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let dtk = tb - ta;
        let tau = ((t - ta) / dtk).clamp(0.0, 1.0);
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + tau;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let n = self.s.len();
        let h = (self.s[n - 1] - self.s[0]) / (n - 1) as f64;
        let centre = ((s - self.s[0]) / h).floor() as isize - (STENCIL as isize / 2 - 1);
        let start = centre.clamp(0, (n - STENCIL) as isize) as usize;
        let mut local = vec![0.0; n];
        for i in start..start + STENCIL {
            local[i] = h00 * self.values[k][i]
                + h10 * dtk * self.rates[k][i]
                + h01 * self.values[k + 1][i]
                + h11 * dtk * self.rates[k + 1][i];
        }
        interp(&self.s, &local, s, order)
    }
}

/// Compose Taylor coefficients in `s` with the jet of `s(x)` at `x`.
pub(crate) fn metric_to_x(gen: &Generator1D, coeffs: &[f64; CAPACITY], x: f64, order: usize) -> Jet {
    let s_jet = match gen.kind() {
        crate::model::SpaceKind::Ou => Jet::variable_order(x, order),
        crate::model::SpaceKind::Laguerre { .. } => Jet::variable_order(x, order).sqrt() * 2.0,
        crate::model::SpaceKind::Custom => {
            // ds/dx = a^{-1/2}
            let (a, _) = gen.coefficient_jets(x, order.saturating_sub(1));
            let ds = a.powf(-0.5);
            let mut c = vec![gen.to_metric(x)];
            for k in 0..order {
                c.push(ds.coeff(k) / (k + 1) as f64);
            }
            Jet::new(x, &c)
        }
    };
    let delta = s_jet - s_jet.value();
    let mut acc = Jet::constant(x, 0.0).truncate(order);
    let mut power = Jet::constant(x, 1.0).truncate(order);
    for c in coeffs.iter().take(order + 1) {
        acc = acc + power * *c;
        power = power * delta;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_lands_on_outputs() {
        let outs = [0.0005, 0.1, 1.0, 2.5];
        let steps = schedule(1e-3, &outs);
        let mut t = 0.0;
        let mut hit = Vec::new();
        for s in &steps {
            t += s.size;
            if let Some(i) = s.output {
                hit.push(i);
                assert_relative_eq!(t, outs[i], epsilon = 1e-10);
            }
        }
        assert_eq!(hit, vec![0, 1, 2, 3]);
        assert!(steps.iter().take(2).all(|s| s.implicit));
    }

    #[test]
    fn interpolation_is_exact_for_quintics() {
        let s: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = s.iter().map(|v| v.powi(5) - 2.0 * v * v).collect();
        let c = interp(&s, &u, 0.73, 2).unwrap();
        let x = 0.73f64;
        assert_relative_eq!(c[0], x.powi(5) - 2.0 * x * x, epsilon = 1e-12);
        assert_relative_eq!(c[1], 5.0 * x.powi(4) - 4.0 * x, epsilon = 1e-10);
        assert_relative_eq!(c[2], (20.0 * x.powi(3) - 4.0) / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn snapshot_times_are_increasing() {
        let t = snapshot_times(1e-3, 5.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(*t.last().unwrap() >= 5.0);
    }
}
