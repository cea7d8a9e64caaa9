//! Run configuration read from a TOML file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::{SQRT_2, TAU};
use std::path::PathBuf;

use clap::ValueEnum;
use phasered::diagnostics::LockCriterion;
use phasered::limit_cycle::CycleOptions;
use phasered::network::{stuart_landau_pair, Coupling, EdgeWeight, NetworkSpec};
use phasered::phase::Method;
use phasered::{make_model, OscillatorModel, Tolerance};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub cycle: CycleOptions,
    pub isochrons: Option<IsochronConfig>,
    pub prc: Option<PrcConfig>,
    pub reduce: Option<ReduceConfig>,
    pub simulate: Option<SimulateConfig>,
    pub sweep: Option<SweepConfig>,
    pub fit_scaling: Option<FitConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<OscillatorModel, CliError> {
        make_model(&self.name, &self.params).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn default_method() -> Method {
    Method::Adjoint
}

fn default_isochron_count() -> usize {
    8
}

fn default_isochron_points() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsochronConfig {
    /// Explicit phases; otherwise `count` equally spaced ones.
    pub thetas: Option<Vec<f64>>,
    #[serde(default = "default_isochron_count")]
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Subintervals of the radial range per isochron.
    #[serde(default = "default_isochron_points")]
    pub points: usize,
    #[serde(default = "default_method")]
    pub method: Method,
}

impl IsochronConfig {
    pub fn phases(&self) -> Vec<f64> {
        match &self.thetas {
            Some(t) => t.clone(),
            None => (0..self.count).map(|k| TAU * k as f64 / self.count as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrcConfig {
    #[serde(default = "default_method")]
    pub method: Method,
}

impl Default for PrcConfig {
    fn default() -> Self {
        Self {
            method: Method::Adjoint,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub direction: Vec<f64>,
    pub omega: f64,
    pub amplitude: f64,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedCompareConfig {
    /// Defaults to `1 / amplitude`.
    pub horizon: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub theta0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceConfig {
    pub forcing: ForcingConfig,
    /// Rotating-frame frequency; defaults to the forcing frequency.
    pub frame_frequency: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    pub compare: Option<ForcedCompareConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightConfig {
    Constant(f64),
    QuasiPeriodic(EdgeWeight),
}

impl WeightConfig {
    fn weight(self) -> EdgeWeight {
        match self {
            WeightConfig::Constant(a) => EdgeWeight::constant(a),
            WeightConfig::QuasiPeriodic(w) => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Direct,
    Diffusive,
}

fn default_nu() -> (f64, f64) {
    (1.0, SQRT_2)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    /// The detuned Stuart–Landau pair with prescribed sensitivities.
    StuartLandauPair { delta_omega: f64, epsilon: f64 },
    Custom {
        nodes: Vec<ModelConfig>,
        epsilon: f64,
        adjacency: Vec<Vec<WeightConfig>>,
        coupling: CouplingKind,
        #[serde(default = "default_nu")]
        nu: (f64, f64),
    },
}

impl NetworkConfig {
    pub fn build(&self) -> Result<NetworkSpec, CliError> {
        match self {
            NetworkConfig::StuartLandauPair { delta_omega, epsilon } => {
                stuart_landau_pair(*delta_omega, *epsilon).map_err(|e| CliError::Config(e.to_string()))
            }
            NetworkConfig::Custom {
                nodes,
                epsilon,
                adjacency,
                coupling,
                nu,
            } => {
                let models = nodes.iter().map(ModelConfig::build).collect::<Result<Vec<_>, _>>()?;
                let coupling = match coupling {
                    CouplingKind::Direct => Coupling::Direct,
                    CouplingKind::Diffusive => Coupling::Diffusive,
                };
                let n = models.len();
                let mut spec = NetworkSpec::new(models, *epsilon, vec![vec![0.0; n]; n], coupling)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                spec.adjacency = adjacency
                    .iter()
                    .map(|row| row.iter().map(|w| w.weight()).collect())
                    .collect();
                spec.nu = *nu;
                spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
                Ok(spec)
            }
        }
    }
}

fn default_horizon_mult() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub network: NetworkConfig,
    /// Initial on-cycle phases; defaults to multiples of π/2.
    pub initial_phases: Option<Vec<f64>>,
    /// Draw initial phases uniformly from the seeded generator.
    #[serde(default)]
    pub random_initial: bool,
    /// Horizon in units of `1/ε` (periods when `ε = 0`).
    #[serde(default = "default_horizon_mult")]
    pub horizon_mult: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tol: Tolerance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Values(Vec<f64>),
    Geometric { start: f64, ratio: f64, count: usize },
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridConfig::Values(v) => v.clone(),
            GridConfig::Geometric { start, ratio, count } => {
                (0..*count).map(|k| start * ratio.powi(k as i32)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub delta_omega: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub criterion: LockCriterion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub detunings: Vec<f64>,
    pub grid: GridConfig,
    #[serde(default)]
    pub criterion: LockCriterion,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn model(&self) -> Result<OscillatorModel, CliError> {
        self.model.as_ref().ok_or_else(|| missing("model"))?.build()
    }
}

pub fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing field `{field}`"))
}
