//! Experiment configuration: a TOML file with `[model]`, `[cocycle]` and
//! `[experiment]` sections. Unknown keys are rejected everywhere.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::base::{RoofFunction, SuspensionModel, TorusAutomorphism};
use crate::cocycle::{CocycleField, FieldPoly, Generator};
use crate::error::{Error, Result};
use crate::symplectic::diagonal_block;
use crate::trig::TrigPoly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub cocycle: CocycleConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "cat_matrix")]
    pub matrix: [[i64; 2]; 2],
    #[serde(default = "constant_roof")]
    pub roof: RoofFunction,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn cat_matrix() -> [[i64; 2]; 2] {
    [[2, 1], [1, 1]]
}

fn constant_roof() -> RoofFunction {
    RoofFunction::Constant
}

fn default_seed() -> u64 {
    7
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            matrix: cat_matrix(),
            roof: constant_roof(),
            seed: default_seed(),
        }
    }
}

/// `C·R(θ(x))·C⁻¹` with `C = diag(e^c, e^{−c})` and
/// `θ = θ₀ + a·(sin 2πx₁ + sin 2πx₂)`: conjugate to a rotation cocycle, so
/// every exponent vanishes while the one-step ratio can exceed 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceCocycle {
    #[serde(default = "default_conj")]
    pub conj: f64,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_conj() -> f64 {
    0.3
}

fn default_theta0() -> f64 {
    FRAC_PI_2
}

fn default_amplitude() -> f64 {
    0.3
}

impl Default for ReferenceCocycle {
    fn default() -> Self {
        Self {
            conj: default_conj(),
            theta0: default_theta0(),
            amplitude: default_amplitude(),
        }
    }
}

impl ReferenceCocycle {
    pub fn generators(&self, d: usize) -> Vec<Generator> {
        let c = diagonal_block(self.conj, d);
        let angle = TrigPoly::constant(self.theta0)
            .with_term([1, 0], 0.0, self.amplitude)
            .with_term([0, 1], 0.0, self.amplitude);
        vec![
            Generator::Constant { matrix: c.clone() },
            Generator::Rotation {
                angle: FieldPoly::from_base(angle),
            },
            Generator::Constant { matrix: c.inverse() },
        ]
    }
}

/// Either an explicit generator list or the reference cocycle; an empty
/// block is the identity cocycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCocycle>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<Generator>,
}

fn default_d() -> usize {
    1
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for CocycleConfig {
    fn default() -> Self {
        Self {
            d: default_d(),
            alpha: default_alpha(),
            reference: Some(ReferenceCocycle::default()),
            generators: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Run parameters. Every field has a default; each experiment reads the
/// ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Must match the experiment being run when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_iter: usize,
    pub n_samples: usize,
    /// Accuracy of a spectrum against `expected`, and the zero-exponent gate.
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: OutputFormat,

    // spectrum
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<f64>>,
    pub pairing_tol: f64,
    pub sum_tol: f64,
    pub oracle_tol: f64,
    pub oracle_points: usize,

    // bunching
    pub s_min: f64,
    pub s_max: f64,
    pub s_step: f64,
    pub certificate_samples: usize,
    pub certificate_n_max: usize,

    // holonomy
    pub n_pairs: usize,
    pub holonomy_tol: f64,
    pub holder_points: usize,
    pub holder_slack: f64,
    pub bridge_tol: f64,
    pub ratio_slack: f64,

    // theta scan
    pub leaf_period: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_spacing: Option<f64>,
    pub theta_max: f64,
    pub leaf_grid: usize,
    pub leaf_n_iter: usize,
    pub expect_symmetric: bool,

    // su-breaking
    pub defect_pairs: usize,
    pub max_offset: f64,
    pub n_transient: usize,
    pub n_atoms: usize,
    pub loop_grid: usize,
    pub loop_t: f64,
    pub split_n: usize,
    pub bump_radius: f64,
    pub bump_angle: f64,
    pub window: i64,
    pub growth_factor: f64,

    // openness
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub delta_multipliers: Vec<f64>,
    pub sweep_draws: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: None,
            n_iter: 10_000,
            n_samples: 64,
            tol: 1e-3,
            out: None,
            format: OutputFormat::Csv,
            expected: None,
            pairing_tol: 1e-3,
            sum_tol: 1e-6,
            oracle_tol: 1e-6,
            oracle_points: 4,
            s_min: 0.0,
            s_max: 1.0,
            s_step: 0.02,
            certificate_samples: 8,
            certificate_n_max: 20,
            n_pairs: 100,
            holonomy_tol: 1e-6,
            holder_points: 1000,
            holder_slack: 0.1,
            bridge_tol: 1e-7,
            ratio_slack: 0.05,
            leaf_period: 6,
            theta_spacing: None,
            theta_max: FRAC_PI_2,
            leaf_grid: 32,
            leaf_n_iter: 2000,
            expect_symmetric: false,
            defect_pairs: 200,
            max_offset: 0.2,
            n_transient: 400,
            n_atoms: 500,
            loop_grid: 24,
            loop_t: 1.3,
            split_n: 600,
            bump_radius: 0.02,
            bump_angle: 0.3,
            window: 20,
            growth_factor: 5.0,
            draws: 20,
            delta: None,
            delta_multipliers: vec![1.0, 4.0, 16.0, 64.0],
            sweep_draws: 8,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_iter: Option<usize>,
    pub n_samples: Option<usize>,
    pub tol: Option<f64>,
    pub format: Option<OutputFormat>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.model.seed = s;
        }
        if let Some(p) = &o.out {
            self.experiment.out = Some(p.clone());
        }
        if let Some(n) = o.n_iter {
            self.experiment.n_iter = n;
        }
        if let Some(n) = o.n_samples {
            self.experiment.n_samples = n;
        }
        if let Some(t) = o.tol {
            self.experiment.tol = t;
        }
        if let Some(f) = o.format {
            self.experiment.format = f;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        for (name, v) in [
            ("tol", e.tol),
            ("pairing_tol", e.pairing_tol),
            ("sum_tol", e.sum_tol),
            ("oracle_tol", e.oracle_tol),
            ("holonomy_tol", e.holonomy_tol),
            ("holder_slack", e.holder_slack),
            ("bridge_tol", e.bridge_tol),
            ("ratio_slack", e.ratio_slack),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("tolerance `{name}` must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("s_step", e.s_step),
            ("theta_max", e.theta_max),
            ("max_offset", e.max_offset),
            ("bump_radius", e.bump_radius),
            ("growth_factor", e.growth_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("`{name}` must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("n_iter", e.n_iter),
            ("n_samples", e.n_samples),
            ("n_pairs", e.n_pairs),
            ("holder_points", e.holder_points),
            ("leaf_grid", e.leaf_grid),
            ("leaf_n_iter", e.leaf_n_iter),
            ("defect_pairs", e.defect_pairs),
            ("n_atoms", e.n_atoms),
            ("loop_grid", e.loop_grid),
            ("split_n", e.split_n),
            ("draws", e.draws),
        ] {
            if v == 0 {
                return Err(config_err(format!("`{name}` must be at least 1")));
            }
        }
        if e.s_max <= e.s_min {
            return Err(config_err("`s_max` must exceed `s_min`"));
        }
        if e.leaf_period == 0 {
            return Err(config_err("`leaf_period` must be at least 1"));
        }
        if let Some(s) = e.theta_spacing {
            if !(s > 0.0) {
                return Err(config_err("`theta_spacing` must be positive"));
            }
        }
        if let Some(d) = e.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(config_err("`delta` must be non-negative"));
            }
        }
        if e.delta_multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(config_err("`delta_multipliers` must be positive"));
        }
        if !(self.cocycle.alpha > 0.0 && self.cocycle.alpha <= 1.0) {
            return Err(config_err(format!("`alpha` must be in (0, 1], got {}", self.cocycle.alpha)));
        }
        if self.cocycle.d == 0 {
            return Err(config_err("`d` must be at least 1"));
        }
        if self.cocycle.reference.is_some() && !self.cocycle.generators.is_empty() {
            return Err(config_err("give either `reference` or `generators`, not both"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SuspensionModel> {
        SuspensionModel::new(TorusAutomorphism::new(self.model.matrix)?, self.model.roof.clone())
    }

    pub fn build_cocycle(&self) -> Result<CocycleField> {
        let model = self.build_model()?;
        let c = &self.cocycle;
        let generators = match &c.reference {
            Some(r) => r.generators(c.d),
            None => c.generators.clone(),
        };
        CocycleField::new(model, c.d, c.alpha, generators)
    }

    pub fn seed(&self) -> u64 {
        self.model.seed
    }
}
