//! Experiment configuration file.
//!
//! A single JSON object. `schema_version` is required; every other section
//! is optional and falls back to the defaults below. Unknown keys are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sdemap::model::{ModelName, ModelParams};
use sdemap::optimizer::{InitStrategy, OptimizerOptions};
use sdemap::functionals::MeritKind;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub out: Option<String>,
    pub model_params: ModelParamsConfig,
    pub optimizer: OptimizerConfig,
    pub benes_convergence: BenesConfig,
    pub vdp_robust: VdpConfig,
    pub simulate: SimulateConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            out: None,
            model_params: ModelParamsConfig::default(),
            optimizer: OptimizerConfig::default(),
            benes_convergence: BenesConfig::default(),
            vdp_robust: VdpConfig::default(),
            simulate: SimulateConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParamsConfig {
    pub benes_initial_variance: f64,
    pub vdp_initial_variance: f64,
    pub vdp_diffusion: f64,
    pub ou_rate: f64,
    pub ou_initial_variance: f64,
}

impl Default for ModelParamsConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        ModelParamsConfig {
            benes_initial_variance: p.benes_initial_variance,
            vdp_initial_variance: p.vdp_initial_variance,
            vdp_diffusion: p.vdp_diffusion,
            ou_rate: p.ou_rate,
            ou_initial_variance: p.ou_initial_variance,
        }
    }
}

impl ModelParamsConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            benes_initial_variance: self.benes_initial_variance,
            vdp_initial_variance: self.vdp_initial_variance,
            vdp_diffusion: self.vdp_diffusion,
            ou_rate: self.ou_rate,
            ou_initial_variance: self.ou_initial_variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = OptimizerOptions::default();
        OptimizerConfig { grad_tol: o.grad_tol, max_iter: 2000, memory: o.memory }
    }
}

impl OptimizerConfig {
    pub fn options(&self) -> OptimizerOptions {
        OptimizerOptions { grad_tol: self.grad_tol, max_iter: self.max_iter, memory: self.memory, ..Default::default() }
    }
}

/// Single measurement with a scalar Gaussian likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMeasurement {
    pub time: f64,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenesConfig {
    pub horizon: f64,
    /// Uniform segment counts, increasing, each dividing the next.
    pub levels: Vec<usize>,
    pub kinds: Vec<String>,
    pub measurements: Vec<PointMeasurement>,
    pub init: String,
}

impl Default for BenesConfig {
    fn default() -> Self {
        BenesConfig {
            horizon: 5.0,
            levels: vec![16, 32, 64, 128, 256, 512, 1024],
            kinds: vec!["euler".into(), "trapezoidal".into(), "exact".into()],
            measurements: vec![PointMeasurement { time: 5.0, value: 1.5, variance: 0.16 }],
            init: "prior_mean".into(),
        }
    }
}

/// Mixture measurement protocol: regular noise `sigma_y`, outliers with
/// deviation `sigma_o` and probability `p_o`, every `step` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementProtocol {
    pub step: f64,
    pub sigma_y: f64,
    pub sigma_o: f64,
    pub p_o: f64,
    pub component: usize,
}

impl Default for MeasurementProtocol {
    fn default() -> Self {
        MeasurementProtocol { step: 0.1, sigma_y: 0.5, sigma_o: 3.0, p_o: 0.25, component: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VdpConfig {
    pub replicates: usize,
    pub horizon: f64,
    pub sim_step: f64,
    pub estimation_step: f64,
    pub measurement: MeasurementProtocol,
    /// Scale of the Student-t likelihood used for estimation.
    pub likelihood_sigma: f64,
    pub kinds: Vec<String>,
    pub init: String,
}

impl Default for VdpConfig {
    fn default() -> Self {
        VdpConfig {
            replicates: 50,
            horizon: 16.0,
            sim_step: 5e-4,
            estimation_step: 1e-2,
            measurement: MeasurementProtocol::default(),
            likelihood_sigma: 0.5,
            kinds: vec!["euler".into(), "trapezoidal".into()],
            init: "meas_interp".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: String,
    pub horizon: f64,
    pub step: f64,
    /// `order15` or `euler`.
    pub scheme: String,
    pub measurement: MeasurementProtocol,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            model: "vdp".into(),
            horizon: 16.0,
            step: 5e-4,
            scheme: "order15".into(),
            measurement: MeasurementProtocol::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub cases: usize,
    pub max_segments: usize,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { cases: 100, max_segments: 50, tolerance: 1e-6 }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn parse_kinds(kinds: &[String]) -> Result<Vec<MeritKind>, CliError> {
    if kinds.is_empty() {
        return Err(invalid("at least one merit kind is required"));
    }
    let mut out = Vec::with_capacity(kinds.len());
    for k in kinds {
        let kind: MeritKind = k.parse().map_err(invalid)?;
        if out.contains(&kind) {
            return Err(invalid(format!("merit kind '{k}' listed twice")));
        }
        out.push(kind);
    }
    Ok(out)
}

pub fn parse_init(s: &str) -> Result<InitStrategy, CliError> {
    s.parse().map_err(invalid)
}

impl MeasurementProtocol {
    fn validate(&self, dim: usize) -> Result<(), CliError> {
        positive("measurement.step", self.step)?;
        positive("measurement.sigma_y", self.sigma_y)?;
        positive("measurement.sigma_o", self.sigma_o)?;
        if !(0.0..=1.0).contains(&self.p_o) {
            return Err(invalid(format!("measurement.p_o must lie in [0, 1], got {}", self.p_o)));
        }
        if self.component >= dim {
            return Err(invalid(format!("measurement.component {} out of range for dimension {dim}", self.component)));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if value.get("schema_version").is_none() {
            return Err(invalid("missing schema_version"));
        }
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let p = &self.model_params;
        positive("model_params.benes_initial_variance", p.benes_initial_variance)?;
        positive("model_params.vdp_initial_variance", p.vdp_initial_variance)?;
        positive("model_params.vdp_diffusion", p.vdp_diffusion)?;
        positive("model_params.ou_rate", p.ou_rate)?;
        positive("model_params.ou_initial_variance", p.ou_initial_variance)?;
        self.optimizer.options().validate().map_err(|e| invalid(e.to_string()))?;

        let b = &self.benes_convergence;
        positive("benes_convergence.horizon", b.horizon)?;
        if b.levels.is_empty() || b.levels[0] == 0 {
            return Err(invalid("benes_convergence.levels must be non-empty and positive"));
        }
        if b.levels.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
            return Err(invalid("benes_convergence.levels must be nested: increasing, each dividing the next"));
        }
        parse_kinds(&b.kinds)?;
        parse_init(&b.init)?;
        for m in &b.measurements {
            positive("benes_convergence.measurements.variance", m.variance)?;
            if !(m.time >= 0.0 && m.time <= b.horizon) {
                return Err(invalid(format!("measurement time {} outside [0, {}]", m.time, b.horizon)));
            }
        }

        let v = &self.vdp_robust;
        if v.replicates == 0 {
            return Err(invalid("vdp_robust.replicates must be at least 1"));
        }
        positive("vdp_robust.horizon", v.horizon)?;
        positive("vdp_robust.sim_step", v.sim_step)?;
        positive("vdp_robust.estimation_step", v.estimation_step)?;
        positive("vdp_robust.likelihood_sigma", v.likelihood_sigma)?;
        v.measurement.validate(2)?;
        parse_kinds(&v.kinds)?;
        parse_init(&v.init)?;

        let s = &self.simulate;
        let name: ModelName = s.model.parse().map_err(|e: sdemap::model::ModelError| invalid(e.to_string()))?;
        let dim = if name == ModelName::VanDerPol { 2 } else { 1 };
        positive("simulate.horizon", s.horizon)?;
        positive("simulate.step", s.step)?;
        if s.scheme != "order15" && s.scheme != "euler" {
            return Err(invalid(format!("simulate.scheme must be 'order15' or 'euler', got '{}'", s.scheme)));
        }
        s.measurement.validate(dim)?;

        let g = &self.gradcheck;
        if g.cases == 0 || g.max_segments < 2 {
            return Err(invalid("gradcheck needs cases >= 1 and max_segments >= 2"));
        }
        positive("gradcheck.tolerance", g.tolerance)?;
        Ok(())
    }
}
