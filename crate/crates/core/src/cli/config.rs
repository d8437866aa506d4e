//! Experiment configuration: JSON, unknown keys rejected, validated before use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::CliError;
use crate::model::{make_laguerre, make_ou, Generator1D, Potential, TabulatedPotential, MIN_LAGUERRE_P};
use crate::semigroup::{Backend, SemigroupConfig, SemigroupEvaluator};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "HFT_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceName {
    Ou,
    Laguerre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialName {
    Linear,
    Sqrt,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialName,
    #[serde(rename = "K_or_c", default)]
    pub k_or_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Uniform,
    /// Uniform in the metric coordinate.
    Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub quadrature_tol: f64,
    pub horizon_eps: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSettings {
    pub quadrature_order: Option<usize>,
    pub truncation: Option<usize>,
    pub fd_points: Option<usize>,
    pub fd_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_ks")]
    pub ks: f64,
    #[serde(default = "default_monge")]
    pub monge: f64,
}

fn default_ks() -> f64 {
    crate::verify::monge::KS_TOL
}

fn default_monge() -> f64 {
    crate::verify::monge::MONGE_TOL
}

fn default_gamma_samples() -> usize {
    10_000
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { ks: default_ks(), monge: default_monge() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub potential: PotentialConfig,
    pub backend: Backend,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub t_schedule: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Curvature overrides; the certified values are used otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
    #[serde(default = "default_gamma_samples")]
    pub gamma_samples: usize,
    #[serde(default)]
    pub semigroup: SemigroupSettings,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// A validated configuration together with the objects it describes.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub gen: Generator1D,
    pub potential: Potential,
    pub grid: Vec<f64>,
    pub output_dir: PathBuf,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite (got {v})")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn semigroup_config(&self) -> SemigroupConfig {
        let d = SemigroupConfig::default();
        let s = &self.semigroup;
        SemigroupConfig {
            quadrature_order: s.quadrature_order.unwrap_or(d.quadrature_order),
            truncation: s.truncation.unwrap_or(d.truncation),
            fd_points: s.fd_points.unwrap_or(d.fd_points),
            fd_dt: s.fd_dt.unwrap_or(d.fd_dt),
        }
    }

    /// Check every field and build the generator, potential and grid.
    /// `base_dir` resolves a relative `table_path`.
    pub fn validate(self, base_dir: &Path) -> Result<Experiment, CliError> {
        let tol = &self.tolerances;
        positive("tolerances.ode_tol", tol.ode_tol)?;
        positive("tolerances.quadrature_tol", tol.quadrature_tol)?;
        positive("tolerances.horizon_eps", tol.horizon_eps)?;
        for &t in &self.t_schedule {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("t_schedule entry {t} must be finite and non-negative")));
            }
        }
        if self.t_schedule.is_empty() {
            return Err(CliError::Config("t_schedule must not be empty".into()));
        }
        let mut gen = match self.space {
            SpaceName::Ou => {
                if self.p.is_some() {
                    return Err(CliError::Config("p applies to the laguerre space only".into()));
                }
                make_ou()
            }
            SpaceName::Laguerre => {
                let p = self.p.ok_or_else(|| CliError::Config("laguerre space needs p".into()))?;
                if !(p >= MIN_LAGUERRE_P && p.is_finite()) {
                    return Err(CliError::Config(format!("p = {p} must be at least {MIN_LAGUERRE_P}")));
                }
                make_laguerre(p).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        if self.rho1.is_some() || self.rho2.is_some() {
            let r1 = self.rho1.unwrap_or(gen.rho1());
            let r2 = self.rho2.unwrap_or(gen.rho2());
            positive("rho1", r1)?;
            positive("rho2", r2)?;
            gen = gen.with_curvature(r1, r2).map_err(|e| CliError::Config(e.to_string()))?;
        }
        match (self.backend, self.space) {
            (Backend::Mehler, SpaceName::Laguerre) => {
                return Err(CliError::Config("the mehler backend needs the ou space".into()))
            }
            (Backend::Spectral, SpaceName::Ou) => {
                return Err(CliError::Config("the spectral backend needs the laguerre space".into()))
            }
            _ => {}
        }
        let sg = self.semigroup_config();
        if sg.quadrature_order < 2 || sg.truncation < 2 || sg.fd_points < 8 {
            return Err(CliError::Config("semigroup settings too small".into()));
        }
        positive("semigroup.fd_dt", sg.fd_dt)?;
        positive("thresholds.ks", self.thresholds.ks)?;
        positive("thresholds.monge", self.thresholds.monge)?;
        if self.gamma_samples == 0 {
            return Err(CliError::Config("gamma_samples must be positive".into()));
        }

        let pc = &self.potential;
        if !(pc.k_or_c >= 0.0 && pc.k_or_c.is_finite()) {
            return Err(CliError::Config(format!("potential.K_or_c = {} must be non-negative", pc.k_or_c)));
        }
        let potential = match (pc.kind, self.space) {
            (PotentialName::Linear, SpaceName::Ou) => Potential::linear(pc.k_or_c),
            (PotentialName::Linear, SpaceName::Laguerre) => {
                return Err(CliError::Config("linear potentials are not Lipschitz on the laguerre space".into()))
            }
            (PotentialName::Sqrt, SpaceName::Laguerre) => Potential::sqrt(pc.k_or_c),
            (PotentialName::Sqrt, SpaceName::Ou) => {
                return Err(CliError::Config("sqrt potentials need the laguerre space".into()))
            }
            (PotentialName::Tabulated, _) => {
                let path = pc
                    .table_path
                    .as_ref()
                    .ok_or_else(|| CliError::Config("tabulated potential needs table_path".into()))?;
                let path = if path.is_relative() { base_dir.join(path) } else { path.clone() };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Potential::tabulated(TabulatedPotential::from_csv(&text).map_err(|e| CliError::Config(e.to_string()))?)
            }
        };

        let g = &self.grid;
        if g.n < 5 {
            return Err(CliError::Config("grid.n must be at least 5".into()));
        }
        if !(g.lo < g.hi && g.lo.is_finite() && g.hi.is_finite()) {
            return Err(CliError::Config(format!("grid [{}, {}] is empty", g.lo, g.hi)));
        }
        let (wlo, whi) = gen.window();
        if !(g.lo >= wlo && g.hi <= whi && gen.contains(g.lo) && gen.contains(g.hi)) {
            return Err(CliError::Config(format!(
                "grid [{}, {}] must lie inside the computational window [{wlo}, {whi}] of the {} space",
                g.lo,
                g.hi,
                gen.name()
            )));
        }
        let grid: Vec<f64> = match g.spacing {
            Spacing::Uniform => (0..g.n).map(|i| g.lo + (g.hi - g.lo) * i as f64 / (g.n - 1) as f64).collect(),
            Spacing::Metric => {
                let (s0, s1) = (gen.to_metric(g.lo), gen.to_metric(g.hi));
                let mut xs: Vec<f64> =
                    (0..g.n).map(|i| gen.from_metric(s0 + (s1 - s0) * i as f64 / (g.n - 1) as f64)).collect();
                xs[0] = g.lo;
                xs[g.n - 1] = g.hi;
                xs
            }
        };
        let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        };
        Ok(Experiment { config: self, gen, potential, grid, output_dir })
    }
}

impl Experiment {
    pub fn evaluator(&self) -> Result<SemigroupEvaluator, CliError> {
        SemigroupEvaluator::new(self.config.backend, self.gen.clone(), self.config.semigroup_config())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}
